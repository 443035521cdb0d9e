#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "cwkb/frame.hpp"
#include "cwkb/model_io.hpp"
#include "cwkb/scatter.hpp"

using namespace cwkb;
using Catch::Matchers::WithinAbs;

namespace {

Model zoo(const std::string& name) { return load_model(std::string(CWKB_MODEL_DIR) + "/" + name + ".json"); }

// Riesz projector (2 pi i)^{-1} oint (z - H)^{-1} dz on a small circle around k_j.
CMatrix resolvent_projector(const CMatrix& H, cplx kj, double r) {
    const int n = 256;
    const CMatrix Id = CMatrix::Identity(H.rows(), H.cols());
    CMatrix P = CMatrix::Zero(H.rows(), H.cols());
    for (int q = 0; q < n; ++q) {
        const cplx w = std::exp(cplx(0, 2 * std::numbers::pi * q / n));
        const cplx z = kj + r * w, dz = r * w * cplx(0, 2 * std::numbers::pi / n);
        P += (z * Id - H).inverse() * dz;
    }
    return P / cplx(0, 2 * std::numbers::pi);
}

}  // namespace

TEST_CASE("projectors of a diagonal matrix are the unit matrices") {
    CMatrix H = CMatrix::Zero(3, 3);
    H.diagonal() << 1.0, 2.0, 3.0;
    CVector k(3);
    k << 1.0, 2.0, 3.0;
    auto P = spectral_projectors(H, k);
    for (int j = 0; j < 3; ++j) {
        CMatrix U = CMatrix::Zero(3, 3);
        U(j, j) = 1.0;
        CHECK((P[std::size_t(j)] - U).norm() < 1e-15);
    }
}

TEST_CASE("projectors match the resolvent integral") {
    std::mt19937 rng(3);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 3; ++trial) {
        CMatrix H(4, 4);
        for (int i = 0; i < 16; ++i) H.data()[i] = cplx(nd(rng), nd(rng));
        Spectral s = decompose(H);
        auto P = spectral_projectors(H, s.k);
        const double r = 0.3 * min_gap(s.k);
        for (int j = 0; j < 4; ++j) CHECK((P[std::size_t(j)] - resolvent_projector(H, s.k(j), r)).norm() < 1e-9);
    }
}

TEST_CASE("projector identities on model samples") {
    for (const char* name : {"adiabatic2", "bo2"}) {
        Model m = zoo(name);
        const double E = 0.5 * (m.spec().energy_window[0] + m.spec().energy_window[1]);
        for (double x : {-4.0, -0.3, 0.0, 0.7, 6.0}) {
            const CMatrix H = m.companion(x, E);
            Spectral s = real_spectrum(m, x, E);
            auto P = spectral_projectors(H, s.k);
            CMatrix sum = CMatrix::Zero(H.rows(), H.cols());
            for (std::size_t j = 0; j < P.size(); ++j) {
                CHECK((P[j] * P[j] - P[j]).norm() <= 1e-10);
                CHECK((H * P[j] - P[j] * H).norm() <= 1e-10 * H.norm());
                for (std::size_t l = 0; l < P.size(); ++l)
                    if (l != j) CHECK((P[j] * P[l]).norm() <= 1e-10);
                sum += P[j];
            }
            CHECK((sum - CMatrix::Identity(H.rows(), H.cols())).norm() <= 1e-10);
        }
    }
}

TEST_CASE("Kato frame of an x-independent model is constant") {
    Model m = zoo("constant");
    EigenFrame f = kato_transport(m, 1.0);
    for (int i = 0; i < f.n; ++i) CHECK((f.Phi[std::size_t(i)] - f.Phi[std::size_t(f.zero_index)]).norm() < 1e-12);
    CouplingMatrix c = coupling_matrix(f, m, 1.0);
    for (auto& a : c.a_primary) CHECK(a.norm() < 1e-12);
}

TEST_CASE("Kato frame residuals on adiabatic2") {
    Model m = zoo("adiabatic2");
    EigenFrame f = kato_transport(m, 1.0);
    CHECK(f.kato_residual < 1e-7);
    CHECK(f.projector_residual < 1e-10);
    CHECK(f.diagonal_coupling < 1e-9);
    CHECK(f.grid[std::size_t(f.zero_index)] == 0.0);
    CHECK_THAT(f.x0, WithinAbs(-m.truncation(), 1e-12));

    // two routes to the canonical vectors
    auto direct = canonical_direct(m, 1.0, f);
    double worst = 0.0;
    for (int i = 0; i < f.n; i += 8) worst = std::max(worst, (direct[std::size_t(i)] - f.phi(i)).norm() / f.phi(i).norm());
    CHECK(worst < 1e-7);
}

TEST_CASE("two-level mixing angle coupling") {
    Model m = zoo("adiabatic2");
    EigenFrame f = kato_transport(m, 1.0);
    CouplingMatrix c = coupling_matrix(f, m, 1.0);
    const auto i0 = std::size_t(f.zero_index);
    CHECK_THAT(std::abs(c.a_primary[i0](0, 1)), WithinAbs(2.0, 1e-6));
    CHECK_THAT(std::abs(c.a_secondary[i0](0, 1)), WithinAbs(2.0, 1e-6));
    CHECK(c.max_discrepancy < 1e-5);
    CHECK(std::abs(f.coupling_at(15.0)(0, 1)) < 1e-8);
    CHECK(std::abs(f.coupling_at(-15.0)(0, 1)) < 1e-8);
    for (auto& a : c.a_primary) CHECK(a.diagonal().norm() < 1e-10);

    // bo2: the route check also holds for m = 2
    Model b = zoo("bo2");
    EigenFrame g = kato_transport(b, 2.25);
    CHECK(coupling_matrix(g, b, 2.25).max_discrepancy < 1e-5);
}

TEST_CASE("phase functions of scalar_tanh") {
    Model m = zoo("scalar_tanh");
    const double E = 1.7;
    EigenFrame f = kato_transport(m, E);
    for (double x : {-3.0, -0.4, 0.0, 1.1, 5.0}) CHECK_THAT(std::abs(f.phase_at(x)(0) - E * std::log(std::cosh(x))), WithinAbs(0.0, 1e-10));
    CHECK_THAT(std::abs(f.omega_plus(0) + E * std::log(2.0)), WithinAbs(0.0, 1e-10));
    CHECK_THAT(std::abs(f.omega_minus(0) + E * std::log(2.0)), WithinAbs(0.0, 1e-10));

    // remainder decays faster than |x|^{-(1+nu)}
    const double nu = m.spec().decay_exponent;
    double prev = 1e300;
    for (double x : {4.0, 8.0, 16.0}) {
        const double w = std::abs(f.remainder(x, 1)(0)) * std::pow(x, 1 + nu);
        CHECK(w <= prev);
        prev = w;
    }
}

TEST_CASE("phase differences are antisymmetric") {
    Model m = zoo("bo2");
    EigenFrame f = kato_transport(m, 2.25);
    CouplingMatrix c = coupling_matrix(f, m, 2.25);
    for (int i = 0; i < f.n; i += 97) {
        const CMatrix& D = c.Delta[std::size_t(i)];
        CHECK(D.diagonal().norm() == 0.0);
        CHECK((D + D.transpose()).norm() < 1e-12);
    }
}

TEST_CASE("loop prefactors") {
    Model m = zoo("adiabatic2");
    const cplx z0(0, std::atan(0.25));

    LoopPrefactor none = loop_prefactor_at(m, 1.0, cplx(0.6, 0.1), 0.05);
    CHECK(none.pi0 == std::vector<int>{0, 1});
    for (auto th : none.theta) CHECK(std::abs(th) < 1e-8);

    BranchPoint bp = locate_branch_point(m, 1.0, {0, 1}, cplx(0.01, 0.2));
    LoopPrefactor once = loop_prefactor(m, 1.0, bp);
    LoopPrefactor twice = loop_prefactor(m, 1.0, bp, 0.0, 2);
    CHECK(once.pi0 == std::vector<int>{1, 0});
    CHECK(twice.pi0 == std::vector<int>{0, 1});
    for (int j = 0; j < 2; ++j) {
        const cplx expect = once.factor[std::size_t(j)] * once.factor[std::size_t(once.pi0[std::size_t(j)])];
        CHECK(std::abs(twice.factor[std::size_t(j)] - expect) < 1e-7);
    }
    // finite, radius independent
    const cplx prod = once.factor[0] * once.factor[1];
    CHECK(std::isfinite(std::abs(prod)));
    CHECK(once.radius_discrepancy < 1e-7);
    LoopPrefactor wide = loop_prefactor_at(m, 1.0, z0, 0.15);
    LoopPrefactor narrow = loop_prefactor_at(m, 1.0, z0, 0.05);
    CHECK(std::abs(wide.factor[0] * wide.factor[1] - narrow.factor[0] * narrow.factor[1]) < 1e-7);
}
