#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "cwkb/model_io.hpp"
#include "cwkb/packet.hpp"

using namespace cwkb;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Model zoo(const std::string& name) { return load_model(std::string(CWKB_MODEL_DIR) + "/" + name + ".json"); }

// Closed form for scalar_tanh with Q = exp(-(E-1)^2/2), eps = 1:
// sqrt(2 pi) e^{-i s} e^{-s^2/2}.
cplx scalar_closed(double s) { return std::sqrt(2 * std::numbers::pi) * std::exp(-I1 * s) * std::exp(-0.5 * s * s); }

double max_abs_diff(const WaveField& w, const std::vector<cplx>& ref) {
    double e = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) e = std::max(e, std::abs(w.values(Eigen::Index(i), 0) - ref[i]));
    return e;
}

SynthesisOptions coarse() {
    SynthesisOptions o;
    o.frame.h_max = 0.05;
    return o;
}

}  // namespace

TEST_CASE("zoo densities satisfy the conditions") {
    for (const char* name : {"scalar_tanh", "adiabatic2", "bo2"}) {
        DensityCheck c = check_density(EnergyDensity::of(zoo(name)));
        CHECK(c.ok());
        CHECK_THAT(c.second_derivative, WithinAbs(c.g, 1e-12));
    }
    DensitySpec s;
    s.E0 = 1.0;
    s.g = 1.0;
    s.G = "(E-1)^4";
    CHECK_FALSE(check_density(EnergyDensity(s, {0.0, 2.0})).c1);
    s.G = "(E-1)^2/2";
    s.E0 = 0.0;
    CHECK_FALSE(check_density(EnergyDensity(s, {0.0, 2.0})).c1);
}

TEST_CASE("exact synthesis of scalar_tanh matches the closed form") {
    Model m = zoo("scalar_tanh");
    EnergyDensity Q = EnergyDensity::of(m);
    const auto x = linspace(-8.0, 8.0, 81);
    for (double t : {0.0, 5.0}) {
        WaveField w = synthesize_exact(m, Q, 1.0, t, x, coarse());
        std::vector<cplx> ref;
        for (double xi : x) ref.push_back(scalar_closed(t + std::log(std::cosh(xi))));
        CHECK(max_abs_diff(w, ref) < 1e-6);
        CHECK(w.kind == FieldKind::Exact);
    }

    // linear in Q
    const auto xs = linspace(-3.0, 3.0, 11);
    WaveField one = synthesize_exact(m, Q, 1.0, 1.0, xs, coarse());
    WaveField two = synthesize_exact(m, Q.scaled(2.0), 1.0, 1.0, xs, coarse());
    CHECK((two.values - 2.0 * one.values).norm() < 1e-12 * one.values.norm());
}

TEST_CASE("doubling the E nodes does not change the exact field") {
    Model m = zoo("adiabatic2");
    EnergyDensity Q = EnergyDensity::of(m);
    const std::vector<double> x{-2.0, 0.0, 1.5};
    SynthesisOptions o = coarse();
    WaveField w = synthesize_exact(m, Q, 0.1, 0.0, x, o);
    o.node_factor = 2.0;
    WaveField w2 = synthesize_exact(m, Q, 0.1, 0.0, x, o);
    CHECK((w.values - w2.values).norm() < 1e-9 * w2.values.norm());
}

TEST_CASE("free waves of scalar_tanh") {
    Model m = zoo("scalar_tanh");
    EnergyDensity Q = EnergyDensity::of(m);
    const double l2 = std::log(2.0);
    const auto x = linspace(-10.0, 10.0, 201);
    for (double t : {0.0, 5.0}) {
        WaveField plus = asymptotic_wave(m, Q, 1.0, t, 1, 0, x, coarse());
        WaveField minus = asymptotic_wave(m, Q, 1.0, t, -1, 0, x, coarse());
        std::vector<cplx> rp, rm;
        for (double xi : x) {
            rp.push_back(scalar_closed(t + xi - l2));
            rm.push_back(scalar_closed(t - xi - l2));
        }
        CHECK(max_abs_diff(plus, rp) < 1e-7);
        CHECK(max_abs_diff(minus, rm) < 1e-7);
        CHECK(plus.kind == FieldKind::AsymptoticPlus);
    }

    // norm does not depend on t
    const auto wide = linspace(-70.0, 70.0, 1401);
    const double n0 = asymptotic_wave(m, Q, 1.0, 0.0, 1, 0, wide, coarse()).norm();
    for (double t : {5.0, 50.0}) CHECK_THAT(asymptotic_wave(m, Q, 1.0, t, 1, 0, wide, coarse()).norm(), WithinRel(n0, 1e-8));
    CHECK_THAT(n0, WithinRel(std::sqrt(2 * std::numbers::pi) * std::pow(std::numbers::pi, 0.25), 1e-8));
}

TEST_CASE("a mode without incoming amplitude has no free wave at -inf") {
    Model m = zoo("adiabatic2");
    EnergyDensity Q = EnergyDensity::of(m);
    WaveField w = asymptotic_wave(m, Q, 0.1, 0.0, -1, 1, linspace(-5.0, 5.0, 41), coarse());
    CHECK(w.values.norm() == 0.0);
}

TEST_CASE("glued field takes each side outside [0, 1]") {
    const auto x = linspace(-2.0, 3.0, 51);
    WaveField a, b;
    a.x = b.x = x;
    a.values = CMatrix::Constant(51, 1, cplx(1.0, 2.0));
    b.values = CMatrix::Constant(51, 1, cplx(-3.0, 0.5));
    WaveField g = glue_asymptotic(a, b);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] <= 0.0) CHECK(g.values(Eigen::Index(i), 0) == a.values(Eigen::Index(i), 0));
        if (x[i] >= 1.0) CHECK(g.values(Eigen::Index(i), 0) == b.values(Eigen::Index(i), 0));
    }
    CHECK(g.kind == FieldKind::Glued);
    b.x = linspace(-2.0, 3.0, 52);
    b.values = CMatrix::Zero(52, 1);
    CHECK_THROWS_AS(glue_asymptotic(a, b), Error);
}

TEST_CASE("inverse dispersion") {
    InverseDispersion s(zoo("scalar_tanh"), 0, 1);
    for (double k : {-2.0, 0.5, 4.0}) {
        CHECK_THAT(s.E_of(k), WithinAbs(k, 1e-12));
        CHECK_THAT(s.dE_dk(k), WithinAbs(1.0, 1e-9));
        CHECK_THAT(s.d2E_dk2(k), WithinAbs(0.0, 1e-6));
    }

    // bo2 mode 2 at +inf: k = -sqrt(2 (E - e)), e = sqrt(1 + delta^2)
    Model b = zoo("bo2");
    const double e = std::sqrt(1.0 + b.delta() * b.delta());
    InverseDispersion d(b, 1, 1);
    for (double E : {1.6, 2.25, 2.9}) {
        const double k = d.k_of(E);
        CHECK_THAT(k, WithinAbs(-std::sqrt(2 * (E - e)), 1e-10));
        CHECK_THAT(d.E_of(k), WithinAbs(0.5 * k * k + e, 1e-10));
        CHECK_THAT(d.E_of(k), WithinAbs(E, 1e-10));
        CHECK_THAT(d.dE_dk(k), WithinAbs(k, 1e-8));
        CHECK_THAT(d.d2E_dk2(k), WithinAbs(1.0, 1e-5));
    }
}

TEST_CASE("transition profile of adiabatic2") {
    Model m = zoo("adiabatic2");
    EnergyDensity Q = EnergyDensity::of(m);
    TransitionProfile p = transition_profile(m, Q, 0);
    CHECK(p.n == 1);
    CHECK_THAT(p.E_star, WithinAbs(Q.E0(), 1e-6));
    CHECK_THAT(p.lambda1.real(), WithinAbs(p.dE_dk * p.d_kappa, 1e-8));
    CHECK(p.d2_alpha > 0);
    CHECK(p.lambda2.real() > 0);
    CHECK_THAT(p.lambda2.real(), WithinRel(p.dE_dk * p.dE_dk * p.d2_alpha, 1e-10));
    CHECK_THROWS_AS(gaussian_closed_form(p, Q, 0.05, 0.0, {0.0}), Error);
}

TEST_CASE("perturbative shift of the minimizer scales like delta^2") {
    Model b = zoo("bo2");
    EnergyDensity Q = EnergyDensity::of(b);
    const double s1 = transition_profile(b.with_delta(0.1), Q, 0).E_star - Q.E0();
    const double s2 = transition_profile(b.with_delta(0.2), Q, 0).E_star - Q.E0();
    CHECK(std::abs(s2 / s1 / 4.0 - 1.0) < 0.2);
}

TEST_CASE("leading term of bo2") {
    Model b = zoo("bo2");
    EnergyDensity Q = EnergyDensity::of(b);
    TransitionProfile p = transition_profile(b, Q, 0);
    REQUIRE(p.quadratic);
    CHECK(p.d2_alpha > 0);
    CHECK(p.lambda2.real() > 0);

    const double eps = 0.02;
    for (double t : {0.0, 50.0}) {
        const auto x = packet_grid(p, eps, t);
        WaveField L = leading_term(p, Q, eps, t, x), G = gaussian_closed_form(p, Q, eps, t, x);
        CHECK(relative_distance(L, G) < 1e-8);
    }

    // Fourier factor norm is the Plancherel value at every t
    for (double t : {0.0, 100.0}) {
        const auto x = packet_grid(p, eps, t);
        auto F = fourier_factor(p, eps, t, x);
        CMatrix v(Eigen::Index(x.size()), 1);
        for (std::size_t i = 0; i < x.size(); ++i) v(Eigen::Index(i), 0) = F[i];
        CHECK_THAT(l2_norm(x, v), WithinRel(plancherel_fourier_norm(p, eps), 1e-8));
    }

    // |leading| ~ eps^{3/4} e^{-alpha/eps}
    auto scaled = [&](double e) {
        const auto x = packet_grid(p, e, 0.0);
        return leading_term(p, Q, e, 0.0, x).norm() / (std::pow(e, 0.75) * std::exp(-p.alpha_star / e));
    };
    CHECK_THAT(scaled(0.02), WithinRel(scaled(0.04), 0.1));
}

TEST_CASE("Gaussian packet kinematics") {
    Model b = zoo("bo2");
    EnergyDensity Q = EnergyDensity::of(b);
    TransitionProfile p = transition_profile(b, Q, 0);
    const double eps = 0.02;
    REQUIRE(std::abs(p.lambda1.imag()) < 1e-12);

    auto center = [&](const WaveField& w) {
        double m0 = 0.0, m1 = 0.0;
        for (std::size_t i = 0; i + 1 < w.x.size(); ++i) {
            const double h = w.x[i + 1] - w.x[i];
            const double a = w.values.row(Eigen::Index(i)).squaredNorm(), c = w.values.row(Eigen::Index(i + 1)).squaredNorm();
            m0 += 0.5 * h * (a + c);
            m1 += 0.5 * h * (a * w.x[i] + c * w.x[i + 1]);
        }
        return m1 / m0;
    };
    WaveField g0 = gaussian_closed_form(p, Q, eps, 0.0, packet_grid(p, eps, 0.0));
    CHECK_THAT(center(g0), WithinAbs(-p.lambda1.real(), 1e-8));

    const double n0 = g0.norm();
    double prev_peak = 0.0;
    for (double t : {100.0, 400.0}) {
        WaveField g = gaussian_closed_form(p, Q, eps, t, packet_grid(p, eps, t));
        CHECK_THAT(g.norm(), WithinRel(n0, 1e-9));
        double peak = 0.0;
        for (Eigen::Index i = 0; i < g.values.rows(); ++i) peak = std::max(peak, g.values.row(i).norm());
        if (prev_peak > 0) CHECK_THAT(prev_peak / peak, WithinRel(2.0, 0.05));  // t^{-1/2}
        prev_peak = peak;
    }
}

TEST_CASE("localization of the leading term") {
    Model b = zoo("bo2");
    EnergyDensity Q = EnergyDensity::of(b);
    TransitionProfile p = transition_profile(b, Q, 0);
    const double eps = 0.02;
    DiagnosticsConfig cfg;
    WaveField L = leading_term(p, Q, eps, 200.0, packet_grid(p, eps, 200.0));
    LocalizationReport r = localization_report(L, p, cfg, eps);
    CHECK(r.passes(0.99));

    // the grid must cover C_t
    WaveField narrow = leading_term(p, Q, eps, 200.0, linspace(r.predicted_center - 1.0, r.predicted_center + 1.0, 201));
    CHECK_THROWS_AS(localization_report(narrow, p, cfg, eps), Error);
}

TEST_CASE("decay outside the cone") {
    Model m = zoo("scalar_tanh");
    EnergyDensity Q = EnergyDensity::of(m);
    const std::vector<double> x{-80.0, -40.0, 40.0, 80.0};
    WaveField w = synthesize_exact(m, Q, 1.0, 0.0, x, coarse());
    std::vector<ConeSample> s;
    for (std::size_t i = 0; i < x.size(); ++i) s.push_back({x[i], 0.0, w.values.row(Eigen::Index(i)).norm()});
    DiagnosticsConfig cfg;
    std::tie(cfg.K_minus, cfg.K_plus) = velocity_bounds(m, 0);
    CHECK_THAT(cfg.K_minus, WithinAbs(1.0, 1e-6));
    CHECK_THAT(cfg.K_plus, WithinAbs(1.0, 1e-6));
    ConeReport rep = cone_decay_check(s, cfg, 1.0, 1e-8);
    CHECK(rep.bounded);
    CHECK(rep.products.size() == 2);

    // a growing product is reported
    std::vector<ConeSample> bad{{10.0, 0.0, 1.0}, {20.0, 0.0, 1.0}};
    CHECK_FALSE(cone_decay_check(bad, cfg).bounded);
    // samples inside the cone are skipped
    std::vector<ConeSample> inside{{10.0, 10.0, 1.0}, {20.0, 20.0, 5.0}};
    CHECK(cone_decay_check(inside, cfg).products.empty());
}

TEST_CASE("decay away from the packet gains in |t|") {
    // adiabatic2: both free waves move to -x as t grows, so for t < 0 the
    // left half line is away from the packet.
    Model m = zoo("adiabatic2");
    EnergyDensity Q = EnergyDensity::of(m);
    DiagnosticsConfig cfg;
    std::tie(cfg.K_minus, cfg.K_plus) = velocity_bounds(m, 0);
    const std::vector<double> x{-16.0, -8.0};
    std::vector<double> level;
    for (double t : {-20.0, -40.0}) {
        WaveField w = synthesize_exact(m, Q, 0.1, t, x, coarse());
        double v = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            v = std::max(v, std::pow(std::abs(t), cfg.beta) * std::pow(std::abs(x[i]), 1 - cfg.beta) * w.values.row(Eigen::Index(i)).norm());
        level.push_back(v);
    }
    CHECK(level[1] <= std::max(level[0], 1e-8));
}

TEST_CASE("channel classification") {
    CHECK(classify_channel(1.0, -1.0, 10.0) == Channel::Both);
    CHECK(classify_channel(1.0, -1.0, -10.0) == Channel::None);
    CHECK(classify_channel(1.0, 1.0, -10.0) == Channel::PlusOnly);
    CHECK(classify_channel(1.0, 1.0, 10.0) == Channel::MinusOnly);
    CHECK(std::string(to_string(Channel::Both)) == "both");
}
