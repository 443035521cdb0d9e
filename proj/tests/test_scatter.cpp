#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "cwkb/model_io.hpp"
#include "cwkb/scatter.hpp"

using namespace cwkb;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Model zoo(const std::string& name) { return load_model(std::string(CWKB_MODEL_DIR) + "/" + name + ".json"); }

Model linear_crossing(double delta) {
    json j = json::parse(R"({
      "name": "linear", "d": 2, "m": 1, "r": 1, "delta": 0.2,
      "A": { "0,0": [["x", "delta"], ["delta", "-x"]], "0,1": [["1", "0"], ["0", "1"]], "1,0": [["-1", "0"], ["0", "-1"]] },
      "A_limits": {
        "0,0,-": [["-3", "delta"], ["delta", "3"]], "0,0,+": [["3", "delta"], ["delta", "-3"]],
        "0,1,-": [["1", "0"], ["0", "1"]], "0,1,+": [["1", "0"], ["0", "1"]],
        "1,0,-": [["-1", "0"], ["0", "-1"]], "1,0,+": [["-1", "0"], ["0", "-1"]] },
      "energy_window": [0.0, 2.0], "strip_half_width": 1.0, "decay_exponent": 1.0, "truncation": 3.0 })");
    return load_model_json(j).with_delta(delta);
}

}  // namespace

TEST_CASE("coefficients of an x-independent model do not move") {
    Model m = zoo("constant");
    EigenFrame f = kato_transport(m, 1.0);
    CVector c0(2);
    c0 << cplx(0.6, 0.1), cplx(-0.2, 0.7);
    CoefficientTrajectory tr = integrate_coefficients(f, 0.05, c0);
    for (auto& c : tr.c) CHECK((c - c0).norm() == 0.0);
    CHECK((s_matrix(f, 0.05).S - CMatrix::Identity(2, 2)).norm() < 1e-8);
}

TEST_CASE("adiabatic2 coefficients conserve the norm") {
    Model m = zoo("adiabatic2");
    EigenFrame f = kato_transport(m, 1.0);
    CVector c0 = CVector::Zero(2);
    c0(0) = 1.0;
    CoefficientTrajectory tr = integrate_coefficients(f, 0.05, c0);
    double worst = 0.0;
    for (auto& c : tr.c) worst = std::max(worst, std::abs(c.squaredNorm() - 1.0));
    CHECK(worst < 1e-9);

    CoefficientOptions tight;
    tight.rtol *= 0.5;
    tight.atol *= 0.5;
    tight.output_grid = {f.x0, f.x_max()};
    CoefficientTrajectory half = integrate_coefficients(f, 0.05, c0, tight);
    CHECK((half.c_plus - tr.c_plus).norm() < 1e-8);
}

TEST_CASE("S-matrix of adiabatic2") {
    Model m = zoo("adiabatic2");
    EigenFrame f = kato_transport(m, 1.0);
    ScatteringRecord r = s_matrix(f, 0.02);
    const double lz = std::exp(-std::numbers::pi * 0.25 * 0.25 / (2 * 0.02));
    CHECK(std::abs(r.S(1, 0)) >= 0.5 * lz);
    CHECK(std::abs(r.S(1, 0)) <= 2.0 * lz);
    CHECK(r.unitarity_defect() < 1e-7);
}

TEST_CASE("loop actions") {
    SECTION("sum of the exchanged pair is analytic") {
        Model m = zoo("adiabatic2");
        BranchPoint bp = branch_point_for_pair(m, 1.0, 0, 1);
        ActionResult a = action_integral(m, 1.0, bp, 0);
        CHECK(std::abs(a.sum) < 1e-9 * std::abs(a.gap));
        CHECK(a.pi0 == std::vector<int>{1, 0});
    }
    SECTION("linear crossing") {
        for (double d : {0.1, 0.2}) {
            Model m = linear_crossing(d);
            BranchPoint bp = locate_branch_point(m, 1.0, {0, 1}, cplx(0.01, 0.8 * d));
            ActionResult a = action_integral(m, 1.0, bp, 0);
            CHECK_THAT(a.single.imag(), WithinRel(std::numbers::pi * d * d / 2, 1e-8));
        }
    }
    SECTION("adiabatic2 action does not depend on E") {
        Model m = zoo("adiabatic2");
        double ref = 0.0;
        for (double E : {0.5, 1.0, 1.5}) {
            BranchPoint bp = branch_point_for_pair(m, E, 0, 1);
            const double v = action_integral(m, E, bp, 0).single.imag();
            if (E == 0.5) ref = v;
            CHECK_THAT(v, WithinAbs(ref, 1e-10));
        }
    }
}

TEST_CASE("WKB prediction for adiabatic2") {
    Model m = zoo("adiabatic2");
    WkbPrediction p = wkb_element(m, 1.0, 0, 1);
    CHECK(p.factors.size() == 1);

    EigenFrame f = kato_transport(m, 1.0);
    std::vector<double> eps{0.1, 0.05, 0.0333, 0.025, 0.02}, mags;
    for (double e : eps) {
        ScatteringRecord r = s_matrix(f, e);
        mags.push_back(std::abs(r.S(1, 0)));
        CHECK(std::abs(r.S(1, 0) / p.value(e) - 1.0) < 1e-6);
    }
    DecayRateFit fit = decay_rate_fit(eps, mags);
    CHECK_THAT(fit.rate, WithinRel(p.total_action.imag(), 0.03));

    // downward element uses the lower half plane and has the same rate
    WkbPrediction q = wkb_element(m, 1.0, 1, 0);
    CHECK(q.factors.front().bp.z0.imag() < 0);
    CHECK_THAT(q.total_action.imag(), WithinRel(p.total_action.imag(), 1e-8));
}

TEST_CASE("avoided crossing fit") {
    Model m = zoo("adiabatic2");
    CrossingReport rep = detect_real_crossings(m, 1.0);
    REQUIRE(rep.entries.size() == 1);
    AvoidedCrossingFit fit = avoided_crossing_fit(m, 1.0, {0, 1}, rep.entries[0].x, rep.entries[0].slope);
    CHECK_THAT(fit.a, WithinAbs(2.0, 1e-6));
    CHECK_THAT(fit.b, WithinAbs(2.0, 1e-6));
    CHECK_THAT(fit.c, WithinAbs(0.0, 1e-6));
    CHECK_THAT(fit.D, WithinAbs(std::numbers::pi / 2, 1e-6));
    CHECK(fit.positive());

    // delta^2 law
    std::vector<double> r;
    for (double d : {0.05, 0.1, 0.2}) {
        Model md = m.with_delta(d);
        BranchPoint bp = branch_point_for_pair(md, 1.0, 0, 1);
        r.push_back(action_integral(md, 1.0, bp, 0).gap.imag() / (d * d));
    }
    const auto [lo, hi] = std::minmax_element(r.begin(), r.end());
    CHECK(*hi / *lo - 1.0 < 0.05);
}

TEST_CASE("decay fit recovers a known rate") {
    std::vector<double> eps{0.1, 0.05, 0.02}, mags;
    for (double e : eps) mags.push_back(0.7 * std::exp(-0.3 / e));
    DecayRateFit fit = decay_rate_fit(eps, mags);
    CHECK_THAT(fit.rate, WithinAbs(0.3, 1e-12));
    CHECK_THAT(fit.eps_slope, WithinAbs(-std::log(0.7), 1e-12));
    CHECK_THROWS_AS(decay_rate_fit({0.1}, {0.5}), Error);
}
