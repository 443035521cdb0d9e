#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "cwkb/model_io.hpp"
#include "cwkb/modes.hpp"

using namespace cwkb;
using Catch::Matchers::WithinAbs;

namespace {

Model zoo(const std::string& name) { return load_model(std::string(CWKB_MODEL_DIR) + "/" + name + ".json"); }

// Two levels with gap 2 sqrt(x^2 + delta^2) near x = 0; the coupling is cut off
// far out only through the truncation.
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

Model flat() { return zoo("constant"); }

std::vector<cplx> circle(cplx c, double r, int n, int orientation) {
    std::vector<cplx> p;
    for (int q = 0; q <= n; ++q) p.push_back(c + r * std::exp(cplx(0, orientation * 2 * std::numbers::pi * q / n)));
    p.back() = p.front();
    return p;
}

}  // namespace

TEST_CASE("scalar_tanh has the single branch E tanh x") {
    Model m = zoo("scalar_tanh");
    ModeField f = track_modes(m, 1.3, default_grid(m, 200));
    REQUIRE(f.values.cols() == 1);
    for (std::size_t i = 0; i < f.grid.size(); ++i) CHECK_THAT(f.values(Eigen::Index(i), 0) - 1.3 * std::tanh(f.grid[i]), WithinAbs(0.0, 1e-12));

    AsymptoticModes a = asymptotic_modes(m, 1.3);
    CHECK_THAT(a.left(0), WithinAbs(-1.3, 1e-12));
    CHECK_THAT(a.right(0), WithinAbs(1.3, 1e-12));
    CHECK(detect_real_crossings(m, 1.3).entries.empty());
}

TEST_CASE("adiabatic2 gap is minimal at the origin") {
    Model m = zoo("adiabatic2");
    std::vector<double> grid = linspace(-3.0, 3.0, 601);
    ModeField f = track_modes(m, 1.0, grid);
    double best = 1e300, where = 0;
    for (int i = 0; i < f.values.rows(); ++i) {
        const double g = std::abs(f.values(i, 1) - f.values(i, 0));
        if (g < best) {
            best = g;
            where = f.grid[std::size_t(i)];
        }
    }
    CHECK_THAT(best, WithinAbs(0.5, 1e-9));
    CHECK_THAT(where, WithinAbs(0.0, 1e-12));

    const double s = std::sqrt(1 + 0.25 * 0.25);
    AsymptoticModes a = asymptotic_modes(m, 1.0);
    CHECK_THAT(a.left(0), WithinAbs(1.0 - s, 1e-10));
    CHECK_THAT(a.left(1), WithinAbs(1.0 + s, 1e-10));
    CHECK_THAT(a.right(0), WithinAbs(1.0 - s, 1e-10));
    CHECK(a.pi == std::vector<int>{0, 1});
}

TEST_CASE("x-independent model has constant branches") {
    Model m = flat();
    ModeField f = track_modes(m, 1.0, default_grid(m, 100));
    for (int j = 0; j < f.values.cols(); ++j) CHECK(f.values.col(j).maxCoeff() - f.values.col(j).minCoeff() < 1e-12);
}

TEST_CASE("pi agrees with the rank comparison of the limits") {
    // bo2 at delta = 0.25: the ascending order at +inf equals the tracked labels
    Model m = zoo("bo2");
    ModeField f = track_modes(m, 2.25, default_grid(m, 400));
    AsymptoticModes a = asymptotic_modes(m, 2.25);
    CHECK(f.permutation_pi == a.pi);
    for (int j = 0; j < 4; ++j) CHECK(a.pi[std::size_t(j)] == j);

    // at delta = 0 the crossing modes swap ranks
    Model m0 = m.with_delta(0.0);
    CrossingReport rep = detect_real_crossings(m0, 2.25);
    CHECK(rep.permutation_pi == std::vector<int>{1, 0, 3, 2});
}

TEST_CASE("real crossings at delta = 0") {
    CrossingReport a = detect_real_crossings(zoo("adiabatic2"), 1.0);
    REQUIRE(a.entries.size() == 1);
    CHECK(a.entries[0].i == 0);
    CHECK(a.entries[0].j == 1);
    CHECK_THAT(a.entries[0].x, WithinAbs(0.0, 1e-8));
    CHECK_THAT(a.entries[0].slope, WithinAbs(2.0, 1e-6));
    CHECK(a.ac_pattern());

    CrossingReport b = detect_real_crossings(zoo("bo2"), 2.25);
    REQUIRE(b.entries.size() == 2);
    CHECK(b.entries[0].i == 0);
    CHECK(b.entries[0].j == 1);
    CHECK(b.entries[1].i == 2);
    CHECK(b.entries[1].j == 3);
    for (auto& c : b.entries) CHECK_THAT(c.x, WithinAbs(0.0, 1e-8));
}

TEST_CASE("branch points") {
    Model lin = linear_crossing(0.2);
    BranchPoint p = locate_branch_point(lin, 1.0, {0, 1}, cplx(0.05, 0.15));
    CHECK_THAT(std::abs(p.z0 - cplx(0, 0.2)), WithinAbs(0.0, 1e-10));

    Model m = zoo("adiabatic2");
    const cplx z = cplx(0, std::atan(0.25));
    BranchPoint up = locate_branch_point(m, 1.0, {0, 1}, cplx(0.02, 0.2));
    CHECK_THAT(std::abs(up.z0 - z), WithinAbs(0.0, 1e-10));
    BranchPoint down = locate_branch_point(m, 1.0, {0, 1}, cplx(0.02, -0.2));
    CHECK_THAT(std::abs(down.z0 - std::conj(up.z0)), WithinAbs(0.0, 1e-10));

    CHECK_THROWS_AS(locate_branch_point(m, 1.0, {0, 1}, cplx(0, 5.0)), Error);
}

TEST_CASE("continuation and monodromy") {
    Model m = zoo("adiabatic2");
    const cplx z0(0, std::atan(0.25));
    const double r = 0.3 * std::abs(z0);
    Spectral s = real_spectrum(m, 0.0, 1.0);

    // a loop away from the branch point
    std::vector<cplx> away{0.0, cplx(0.5, 0.0)};
    for (auto p : circle(cplx(0.5, 0.1), 0.05, 40, 1)) away.push_back(p);
    away.push_back(cplx(0.5, 0.0));
    away.push_back(0.0);
    ContinuationResult a = continue_along_path(m, 1.0, away, s.k);
    CHECK(a.permutation == std::vector<int>{0, 1});
    CHECK((a.end_values - s.k).norm() < 1e-10);

    // down to the foot of the circle, around once (negative orientation), back
    const cplx foot = z0 - cplx(0, r);
    std::vector<cplx> once{0.0, foot};
    for (int q = 1; q <= 64; ++q) once.push_back(z0 + r * std::exp(cplx(0, -0.5 * std::numbers::pi - 2 * std::numbers::pi * q / 64)));
    once.back() = foot;
    once.push_back(0.0);
    ContinuationResult one = continue_along_path(m, 1.0, once, s.k);
    CHECK(one.permutation == std::vector<int>{1, 0});

    std::vector<cplx> twice{0.0, foot};
    for (int q = 1; q <= 128; ++q) twice.push_back(z0 + r * std::exp(cplx(0, -0.5 * std::numbers::pi - 2 * std::numbers::pi * q / 64)));
    twice.back() = foot;
    twice.push_back(0.0);
    ContinuationResult two = continue_along_path(m, 1.0, twice, s.k);
    CHECK(two.permutation == std::vector<int>{0, 1});
}
