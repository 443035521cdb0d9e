#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "cwkb/cwkb.hpp"

using namespace cwkb;
using Catch::Matchers::WithinAbs;

namespace {

std::string zoo_path(const std::string& name) { return std::string(CWKB_MODEL_DIR) + "/" + name + ".json"; }
Model zoo(const std::string& name) { return load_model(zoo_path(name)); }
json zoo_json(const std::string& name) { return json::parse(read_text(zoo_path(name))); }

}  // namespace

TEST_CASE("zoo models load") {
    Model s = zoo("scalar_tanh");
    CHECK(s.d() == 1);
    CHECK(s.m() == 1);
    CHECK(s.spec().r == 1);

    Model b = zoo("bo2");
    CHECK(b.d() == 2);
    CHECK(b.m() == 2);
    CHECK(b.spec().quadratic_dispersion.size() == 8);
    CHECK(b.spec().has_quadratic_flag(2, 1));
    CHECK(b.spec().claims_ac);
}

TEST_CASE("schema errors") {
    json j = zoo_json("scalar_tanh");
    j.erase("A_limits");
    try {
        load_model_json(j);
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Schema);
        CHECK(e.is_validation());
    }

    json k = zoo_json("scalar_tanh");
    k["A"]["0,1"] = json::array({json::array({"tanh(x"})});
    CHECK_THROWS_AS(load_model_json(k), ParseError);
    CHECK_THROWS_AS(load_model("/nonexistent/model.json"), Error);
}

TEST_CASE("validation of the zoo") {
    ValidationReport s = validate_model(zoo("scalar_tanh"));
    CHECK(s.ok());
    CHECK(s.passed("H3"));
    CHECK(s.passed("GV"));
    REQUIRE(s.find("AC"));
    CHECK(s.find("AC")->detail.find("vacuous") != std::string::npos);

    ValidationReport a = validate_model(zoo("adiabatic2"));
    CHECK(a.ok());
    CrossingReport rep = detect_real_crossings(zoo("adiabatic2"), 1.0);
    REQUIRE(rep.entries.size() == 1);
    CHECK(rep.entries[0].slope > 0);

    json out = a.to_json();
    CHECK(out["ok"] == true);
    CHECK(out["checks"].size() == a.checks.size());
}

TEST_CASE("wrong limits fail the tail bound") {
    json j = zoo_json("adiabatic2");
    j["A_limits"]["0,0,+"] = json::array({json::array({"1.1", "delta"}), json::array({"delta", "-1"})});
    ValidationReport r = validate_model(load_model_json(j));
    CHECK_FALSE(r.passed("H2"));
    CHECK_FALSE(r.ok());
    CHECK(r.passed("H3"));
}

TEST_CASE("tolerance profiles") {
    CHECK(tolerance_profile("fast").frame.h_max > tolerance_profile("default").frame.h_max);
    CHECK(tolerance_profile("strict").coeff.rtol < tolerance_profile("default").coeff.rtol);
    CHECK_THROWS_AS(tolerance_profile("sloppy"), Error);
}

TEST_CASE("empty sweep") {
    Model m = zoo("adiabatic2");
    SweepResult r = run_sweep(m, SweepKind::SMatrix, sweep_grid({}, {0.25}, {1.0}), 0, 1, tolerance_profile("default"));
    CHECK(r.rows.empty());
    CHECK(r.fits.empty());

    const auto dir = std::filesystem::temp_directory_path() / "cwkb_empty_sweep";
    std::filesystem::create_directories(dir);
    r.write_csv((dir / "sweep.csv").string());
    RunManifest man;
    man.subcommand = "sweep";
    man.columns = sweep_columns(r.kind);
    man.files = {"sweep.csv"};
    man.write((dir / "manifest.json").string());
    std::ifstream in(dir / "sweep.csv");
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 1);  // header only
    json back = json::parse(read_text((dir / "manifest.json").string()));
    CHECK(back["tool_version"] == kToolVersion);
    for (auto& h : r.header) CHECK(back["columns"].contains(h));
}

TEST_CASE("epsilon sweep on adiabatic2") {
    Model m = zoo("adiabatic2");
    const auto cells = sweep_grid({0.1, 0.05, 0.0333, 0.025, 0.02}, {0.25}, {1.0});
    SweepResult a = run_sweep(m, SweepKind::SMatrix, cells, 0, 1, tolerance_profile("default"), 2);
    REQUIRE(a.rows.size() == 5);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        CHECK(a.rows[i].cell.eps == cells[i].eps);
        CHECK(a.rows[i].error.empty());
    }
    REQUIRE(a.fits.size() == 1);
    CHECK(a.fits[0].relative() < 0.03);

    // same result on one worker
    SweepResult b = run_sweep(m, SweepKind::SMatrix, cells, 0, 1, tolerance_profile("default"), 1);
    CHECK(max_abs_delta(a, b) < 1e-12);
}

TEST_CASE("failed cells are recorded and the sweep continues") {
    Model m = zoo("adiabatic2");
    SweepResult r = run_sweep(m, SweepKind::SMatrix, sweep_grid({-0.1, 0.05}, {0.25}, {1.0}), 0, 1, tolerance_profile("fast"));
    REQUIRE(r.rows.size() == 2);
    CHECK_FALSE(r.rows[0].error.empty());
    CHECK(r.rows[1].error.empty());
}

TEST_CASE("action sweep") {
    Model m = zoo("adiabatic2");
    SweepResult r = run_sweep(m, SweepKind::Action, sweep_grid({0.1}, {0.1, 0.2}, {1.0}), 0, 1, tolerance_profile("default"));
    REQUIRE(r.rows.size() == 2);
    for (auto& row : r.rows) {
        REQUIRE(row.error.empty());
        CHECK(row.values[2] < 1e-9 * std::abs(row.values[1]));
    }
    CHECK(r.rows[1].values[0] > r.rows[0].values[0]);
}
