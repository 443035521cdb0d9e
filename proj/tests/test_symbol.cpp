#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include <Eigen/Eigenvalues>

#include "cwkb/model_io.hpp"
#include "cwkb/modes.hpp"

using namespace cwkb;
using Catch::Matchers::WithinAbs;

namespace {

Model zoo(const std::string& name) { return load_model(std::string(CWKB_MODEL_DIR) + "/" + name + ".json"); }

std::string num(double v) { return std::to_string(v); }

// Constant-coefficient d = 2, m = 2 model with random entries; N_2 kept well conditioned.
json random_model(std::mt19937& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto mat = [&](double diag) {
        json m = json::array();
        for (int i = 0; i < 2; ++i) {
            json row = json::array();
            for (int j = 0; j < 2; ++j) row.push_back(num(u(rng) + (i == j ? diag : 0.0)));
            m.push_back(row);
        }
        return m;
    };
    json j;
    j["name"] = "random";
    j["d"] = 2;
    j["m"] = 2;
    j["r"] = 1;
    j["A"] = {{"0,0", mat(0.0)}, {"0,1", mat(2.0)}, {"1,0", mat(0.0)}, {"2,0", mat(3.0)}};
    json lim;
    for (auto& [k, v] : j["A"].items()) {
        lim[k + ",-"] = v;
        lim[k + ",+"] = v;
    }
    j["A_limits"] = lim;
    j["energy_window"] = {0.0, 1.0};
    j["strip_half_width"] = 1.0;
    j["decay_exponent"] = 1.0;
    j["truncation"] = 10.0;
    return j;
}

// Roots of det R(k) via the coefficients of the scalar polynomial, fitted
// from samples on a circle.
std::vector<cplx> determinant_roots(const Model& m, double E) {
    const int deg = m.md();
    const int n = deg + 1;
    Eigen::MatrixXcd V(n, n);
    Eigen::VectorXcd y(n);
    for (int i = 0; i < n; ++i) {
        const cplx k = 2.0 * std::exp(cplx(0, 2 * std::numbers::pi * i / n));
        for (int p = 0; p < n; ++p) V(i, p) = std::pow(k, p);
        y(i) = m.symbol(0.3, E, k).determinant();
    }
    Eigen::VectorXcd c = V.fullPivLu().solve(y);
    Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(deg, deg);
    for (int i = 1; i < deg; ++i) C(i, i - 1) = 1.0;
    for (int i = 0; i < deg; ++i) C(i, deg - 1) = -c(i) / c(deg);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(C);
    std::vector<cplx> r(es.eigenvalues().data(), es.eigenvalues().data() + deg);
    return r;
}

}  // namespace

TEST_CASE("reduced matrices of the zoo") {
    Model s = zoo("scalar_tanh");
    for (double x : {-1.0, 0.2, 3.0})
        for (double E : {0.5, 2.0}) {
            CHECK_THAT(std::abs(s.reduced(x, E, 0)(0, 0) - E * std::tanh(x)), WithinAbs(0.0, 1e-14));
            CHECK_THAT(std::abs(s.reduced(x, E, 1)(0, 0) + 1.0), WithinAbs(0.0, 1e-15));
        }

    Model b = zoo("bo2");
    CHECK((b.reduced(0.7, 2.0, 2) + 0.5 * CMatrix::Identity(2, 2)).norm() < 1e-15);

    for (const char* name : {"scalar_tanh", "adiabatic2", "bo2"}) {
        Model m = zoo(name);
        for (int l = 0; l <= m.m(); ++l) {
            CMatrix ref = CMatrix::Zero(m.d(), m.d());
            if (m.spec().A.count({l, 0})) ref = m.coefficient(0.4, l, 0);
            CHECK((m.reduced(0.4, 0.0, l) - ref).norm() < 1e-14);
        }
    }
}

TEST_CASE("symbol matrix") {
    Model s = zoo("scalar_tanh");
    const cplx k(0.3, -0.2);
    CHECK_THAT(std::abs(s.symbol(0.8, 1.7, k)(0, 0) - (1.7 * std::tanh(0.8) - k)), WithinAbs(0.0, 1e-14));
    Model b = zoo("bo2");
    CHECK((b.symbol(0.8, 2.1, 0.0) - b.reduced(0.8, 2.1, 0)).norm() < 1e-15);

    for (const char* name : {"adiabatic2", "bo2"}) {
        Model m = zoo(name);
        const double E = 0.5 * (m.spec().energy_window[0] + m.spec().energy_window[1]);
        Spectral sp = real_spectrum(m, 0.35, E);
        for (int j = 0; j < m.md(); ++j) {
            const CMatrix R = m.symbol(0.35, E, sp.k(j));
            CHECK(std::abs(R.determinant()) <= 1e-9 * std::max(1.0, R.norm() * R.norm()));
        }
    }
}

TEST_CASE("companion matrix") {
    Model s = zoo("scalar_tanh");
    CHECK_THAT(std::abs(s.companion(0.5, 2.0)(0, 0) - 2.0 * std::tanh(0.5)), WithinAbs(0.0, 1e-14));

    // bo2: k = +-sqrt(2 (E - e_pm)), e_pm the eigenvalues of V = [[-t, -d], [-d, t]]
    Model b = zoo("bo2");
    for (double x : {-2.0, 0.0, 0.6}) {
        const double E = 2.4, d = b.delta(), t = std::tanh(x), e = std::sqrt(t * t + d * d);
        std::vector<double> ref{std::sqrt(2 * (E - e)), -std::sqrt(2 * (E - e)), std::sqrt(2 * (E + e)), -std::sqrt(2 * (E + e))};
        std::sort(ref.begin(), ref.end());
        Spectral sp = real_spectrum(b, x, E);
        for (int j = 0; j < 4; ++j) CHECK_THAT(sp.k(j).real() - ref[std::size_t(j)], WithinAbs(0.0, 1e-9));
    }

    std::mt19937 rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        Model m = load_model_json(random_model(rng));
        const double E = 0.4;
        CVector ev = eigenvalues(m.companion(0.3, E));
        auto roots = determinant_roots(m, E);
        for (int j = 0; j < ev.size(); ++j) {
            double best = 1e300;
            for (auto r : roots) best = std::min(best, std::abs(r - ev(j)));
            CHECK(best < 1e-7);
        }
    }
}

TEST_CASE("companion derivative matches finite differences") {
    Model b = zoo("bo2");
    const double h = 1e-5;
    const CMatrix fd = (b.companion(0.3 + h, 2.0) - b.companion(0.3 - h, 2.0)) / (2 * h);
    CHECK((b.companion_dx(0.3, 2.0) - fd).norm() < 1e-8);
}

TEST_CASE("with_delta changes the coupling and the limits") {
    Model a = zoo("adiabatic2");
    Model b = a.with_delta(0.1);
    CHECK_THAT(b.reduced(0.0, 0.0, 0)(0, 1).real(), WithinAbs(0.1, 1e-15));
    CHECK_THAT(b.reduced_limit(1, 0.0, 0)(0, 1).real(), WithinAbs(0.1, 1e-15));
    CHECK_THAT(a.delta(), WithinAbs(0.25, 1e-15));
}

TEST_CASE("singular leading matrix is an error") {
    std::mt19937 rng(1);
    json j = random_model(rng);
    const json lim = json::array({json::array({"0", "0"}), json::array({"0", "1"})});
    j["A"]["2,0"] = json::array({json::array({"0", "0"}), json::array({"0", "x"})});
    j["A_limits"]["2,0,-"] = lim;
    j["A_limits"]["2,0,+"] = lim;
    Model m = load_model_json(j, false);
    CHECK_THROWS_AS(m.companion(0.0, 0.5), Error);
}
