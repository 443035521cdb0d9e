// Command line front end: one subcommand per computation, CSV data plus a
// JSON manifest per run.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "cwkb/cwkb.hpp"

using namespace cwkb;
namespace fs = std::filesystem;

namespace {

constexpr int kValidationFailure = 2;
constexpr int kNumericFailure = 3;

struct Args {
    std::string model, out = ".", grid, tol = "default", kind = "smatrix";
    std::vector<double> eps, delta, energy, time;
    int jobs = 1, from = 1, to = 0, incoming = 1;
    bool skip_validation = false;
};

struct Grid {
    double x0 = 0, x1 = 0;
    int n = 0;
};

Grid parse_grid(const std::string& s) {
    Grid g;
    char tail = 0;
    if (std::sscanf(s.c_str(), "%lf:%lf:%d%c", &g.x0, &g.x1, &g.n, &tail) != 3 || g.n < 2 || !(g.x1 > g.x0))
        throw Error(ErrorCode::Validation, "grid must be x0:x1:n with x1 > x0 and n >= 2, got '" + s + "'");
    return g;
}

double first(const std::vector<double>& v, const char* flag) {
    if (v.empty()) throw Error(ErrorCode::Validation, std::string(flag) + " is required");
    return v.front();
}

class Run {
public:
    Run(const Args& a, std::string sub) : args_(a), start_(std::chrono::steady_clock::now()) {
        man_.subcommand = std::move(sub);
        const std::string text = read_text(a.model);
        man_.model_hash = hex64(fnv1a(text));
        model_ = load_model(a.model);
        man_.model_name = model_.spec().name;
        if (!a.delta.empty()) model_ = model_.with_delta(a.delta.front());
        tol_ = tolerance_profile(a.tol);
        man_.parameters = {{"eps", a.eps}, {"delta", a.delta.empty() ? std::vector<double>{model_.delta()} : a.delta},
                           {"energy", a.energy}, {"time", a.time}, {"grid", a.grid}, {"jobs", a.jobs}, {"tolerances", to_json(tol_)}};
        fs::create_directories(a.out);
    }

    const Model& model() const { return model_; }
    const Tolerances& tol() const { return tol_; }
    RunManifest& manifest() { return man_; }

    /// Runs the hypothesis checks; false (and a FAIL summary) if any fails.
    bool prerequisites() {
        if (args_.skip_validation) return true;
        ValidationReport rep = validate_model(model_);
        for (auto& c : rep.checks) man_.checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
        if (!rep.ok()) {
            for (auto& c : rep.checks)
                if (!c.pass) std::cerr << "prerequisite " << c.name << " FAIL: " << c.detail << "\n";
        }
        return rep.ok();
    }

    std::string path(const std::string& file) {
        man_.files.push_back(file);
        return (fs::path(args_.out) / file).string();
    }

    void finish() {
        man_.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        man_.write((fs::path(args_.out) / (man_.subcommand + ".manifest.json")).string());
    }

private:
    Args args_;
    std::chrono::steady_clock::time_point start_;
    RunManifest man_;
    Model model_;
    Tolerances tol_;
};

std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Validation, "cannot write " + path);
    out.precision(17);
    return out;
}

void write_field(std::ostream& out, const WaveField& w, const char* label, bool header) {
    if (header) {
        out << "kind,t,x";
        for (Eigen::Index c = 0; c < w.values.cols(); ++c) out << ",re" << c + 1 << ",im" << c + 1;
        out << "\n";
    }
    for (std::size_t i = 0; i < w.x.size(); ++i) {
        out << label << "," << w.t << "," << w.x[i];
        for (Eigen::Index c = 0; c < w.values.cols(); ++c) out << "," << w.values(Eigen::Index(i), c).real() << "," << w.values(Eigen::Index(i), c).imag();
        out << "\n";
    }
}

int cmd_validate(const Args& a) {
    Run run(a, "validate");
    ValidationReport rep = validate_model(run.model());
    for (auto& c : rep.checks) {
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << "  " << c.detail << "\n";
        run.manifest().checks.push_back({{"name", c.name}, {"pass", c.pass}, {"margin", c.margin}, {"detail", c.detail}});
    }
    std::ofstream(run.path("validate.json")) << rep.to_json().dump(2) << "\n";
    run.finish();
    return rep.ok() ? 0 : kValidationFailure;
}

int cmd_modes(const Args& a) {
    Run run(a, "modes");
    if (!run.prerequisites()) return kValidationFailure;
    const Model& m = run.model();
    const double E = first(a.energy, "--energy");
    std::vector<double> grid = default_grid(m, 400);
    if (!a.grid.empty()) {
        Grid g = parse_grid(a.grid);
        grid = linspace(g.x0, g.x1, g.n);
    }
    ModeField f = track_modes(m, E, grid);
    auto out = open_csv(run.path("modes.csv"));
    out << "x";
    for (int j = 0; j < m.md(); ++j) out << ",k" << j + 1;
    out << "\n";
    for (std::size_t i = 0; i < f.grid.size(); ++i) {
        out << f.grid[i];
        for (int j = 0; j < m.md(); ++j) out << "," << f.values(Eigen::Index(i), j);
        out << "\n";
    }
    CrossingReport rep = detect_real_crossings(m, E);
    json cj = json::array();
    for (auto& c : rep.entries) cj.push_back({{"i", c.i + 1}, {"j", c.j + 1}, {"x", c.x}, {"slope", c.slope}});
    run.manifest().columns = {{"x", "position"}, {"k<j>", "real mode j in the tracked labeling"}};
    run.manifest().parameters["crossings_at_delta_0"] = cj;
    run.manifest().parameters["pi"] = f.permutation_pi;
    run.finish();
    std::cout << "modes: " << f.grid.size() << " points, " << rep.entries.size() << " crossing(s) at delta = 0\n";
    return 0;
}

int cmd_smatrix(const Args& a) {
    Run run(a, "smatrix");
    if (!run.prerequisites()) return kValidationFailure;
    const Model& m = run.model();
    const double E = first(a.energy, "--energy");
    EigenFrame f = kato_transport(m, E, run.tol().frame);
    auto out = open_csv(run.path("smatrix.csv"));
    out << "eps,to,from,re,im,abs\n";
    for (double eps : a.eps) {
        ScatteringRecord r = s_matrix(f, eps, run.tol().coeff);
        for (Eigen::Index i = 0; i < r.S.rows(); ++i)
            for (Eigen::Index j = 0; j < r.S.cols(); ++j)
                out << eps << "," << i + 1 << "," << j + 1 << "," << r.S(i, j).real() << "," << r.S(i, j).imag() << "," << std::abs(r.S(i, j)) << "\n";
        std::cout << "eps " << eps << "  unitarity defect " << r.unitarity_defect() << "\n";
    }
    run.manifest().columns = {{"eps", "semiclassical parameter"}, {"to", "outgoing mode (1-based)"}, {"from", "incoming mode (1-based)"},
                              {"re", "Re S"}, {"im", "Im S"}, {"abs", "|S|"}};
    run.finish();
    return 0;
}

int cmd_action(const Args& a) {
    Run run(a, "action");
    if (!run.prerequisites()) return kValidationFailure;
    const Model& m = run.model();
    const double E = first(a.energy, "--energy");
    CrossingReport rep = detect_real_crossings(m, E);
    auto out = open_csv(run.path("action.csv"));
    out << "i,j,re_z0,im_z0,re_action,im_action,im_gap,abs_sum\n";
    for (auto& c : rep.entries) {
        BranchPoint bp = branch_point_for_pair(m, E, c.i, c.j, true, &rep);
        ActionResult r = action_integral(m, E, bp, c.i);
        out << c.i + 1 << "," << c.j + 1 << "," << bp.z0.real() << "," << bp.z0.imag() << "," << r.single.real() << "," << r.single.imag()
            << "," << r.gap.imag() << "," << std::abs(r.sum) << "\n";
        std::cout << "pair (" << c.i + 1 << "," << c.j + 1 << ")  z0 = " << bp.z0 << "  Im action " << r.single.imag() << "\n";
    }
    run.manifest().columns = {{"i", "lower mode"}, {"j", "upper mode"}, {"re_z0", "branch point"}, {"im_z0", "branch point"},
                              {"re_action", "Re loop integral of k_i"}, {"im_action", "Im loop integral of k_i"},
                              {"im_gap", "Im loop integral of k_i - k_j"}, {"abs_sum", "|loop integral of k_i + k_j|"}};
    run.finish();
    return 0;
}

int cmd_packet(const Args& a) {
    Run run(a, "packet");
    if (!run.prerequisites()) return kValidationFailure;
    const Model& m = run.model();
    const double eps = first(a.eps, "--eps");
    if (a.grid.empty()) throw Error(ErrorCode::Validation, "--grid is required");
    Grid g = parse_grid(a.grid);
    std::vector<double> times = a.time.empty() ? std::vector<double>{0.0} : a.time;
    SynthesisOptions opt;
    opt.incoming = a.incoming - 1;
    if (run.tol().profile == "fast") opt.frame.h_max = 0.05;
    if (run.tol().profile == "strict") opt.frame.h_max = 0.0125;
    Synthesis s = synthesize(m, EnergyDensity::of(m), eps, times, linspace(g.x0, g.x1, g.n), opt);
    opt.exact = false;
    Synthesis asym = synthesize(m, EnergyDensity::of(m), eps, times, s.x, opt);
    auto out = open_csv(run.path("packet.csv"));
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        write_field(out, s.exact[ti], "exact", ti == 0);
        write_field(out, asym.glued(ti), "glued", false);
        std::cout << "t " << times[ti] << "  |exact| " << s.exact[ti].norm() << "  |exact - glued| " << l2_distance(s.exact[ti], asym.glued(ti)) << "\n";
    }
    run.manifest().columns = {{"kind", "exact or glued"}, {"t", "time"}, {"x", "position"}, {"re<c>", "Re of component c"}, {"im<c>", "Im of component c"}};
    run.manifest().parameters["energy_nodes"] = s.quadrature.rule.size();
    run.finish();
    return 0;
}

int cmd_transition(const Args& a) {
    Run run(a, "transition");
    if (!run.prerequisites()) return kValidationFailure;
    const Model& m = run.model();
    const double eps = first(a.eps, "--eps");
    EnergyDensity Q = EnergyDensity::of(m);
    TransitionProfile p = transition_profile(m, Q, a.incoming - 1);
    json prof = {{"j", p.j + 1}, {"n", p.n + 1}, {"E_star", p.E_star}, {"k_star", p.k_star}, {"alpha_star", p.alpha_star},
                 {"kappa_star", p.kappa_star}, {"d2_alpha", p.d2_alpha}, {"dE_dk", p.dE_dk}, {"d2E_dk2", p.d2E_dk2},
                 {"lambda1", {p.lambda1.real(), p.lambda1.imag()}}, {"lambda2", {p.lambda2.real(), p.lambda2.imag()}},
                 {"theta", {p.theta.real(), p.theta.imag()}}, {"quadratic", p.quadratic}};
    run.manifest().parameters["profile"] = prof;
    auto out = open_csv(run.path("transition.csv"));
    std::vector<double> times = a.time.empty() ? std::vector<double>{0.0} : a.time;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        std::vector<double> x = packet_grid(p, eps, times[ti]);
        if (!a.grid.empty()) {
            Grid g = parse_grid(a.grid);
            x = linspace(g.x0, g.x1, g.n);
        }
        WaveField L = leading_term(p, Q, eps, times[ti], x);
        write_field(out, L, "leading", ti == 0);
        std::cout << "t " << times[ti] << "  |leading| " << L.norm() << "\n";
    }
    std::cout << prof.dump(2) << "\n";
    run.manifest().columns = {{"kind", "leading"}, {"t", "time"}, {"x", "position"}, {"re<c>", "Re of component c"}, {"im<c>", "Im of component c"}};
    run.finish();
    return 0;
}

int cmd_sweep(const Args& a) {
    Run run(a, "sweep");
    if (!run.prerequisites()) return kValidationFailure;
    const SweepKind kind = sweep_kind(a.kind);
    std::vector<double> delta = a.delta.empty() ? std::vector<double>{run.model().delta()} : a.delta;
    std::vector<double> eps = a.eps;
    if (kind == SweepKind::Action && eps.empty()) eps = {0.0};
    SweepResult r = run_sweep(run.model(), kind, sweep_grid(eps, delta, a.energy), a.from - 1, a.to - 1, run.tol(), a.jobs);
    r.write_csv(run.path("sweep.csv"));
    json fits = json::array();
    for (auto& f : r.fits) {
        fits.push_back(to_json(f));
        std::cout << "delta " << f.delta << "  E " << f.E << "  fitted rate " << f.fit.rate << "  Im action " << f.predicted << "\n";
    }
    std::size_t failed = 0;
    for (auto& row : r.rows) failed += !row.error.empty();
    run.manifest().columns = sweep_columns(kind);
    run.manifest().parameters["kind"] = a.kind;
    run.manifest().parameters["from"] = a.from;
    run.manifest().parameters["to"] = a.to;
    run.manifest().parameters["decay_fits"] = fits;
    run.manifest().parameters["failed_cells"] = failed;
    run.finish();
    std::cout << r.rows.size() << " cell(s), " << failed << " failed\n";
    return !r.rows.empty() && failed == r.rows.size() ? kNumericFailure : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Complex WKB scattering and wave packet tool"};
    app.require_subcommand(1);
    Args a;

    auto common = [&](CLI::App* s) {
        s->add_option("--model", a.model, "model JSON file")->required()->check(CLI::ExistingFile);
        s->add_option("--delta", a.delta, "coupling parameter(s)")->delimiter(',');
        s->add_option("--out", a.out, "output directory");
        s->add_option("--tol-profile", a.tol, "fast, default or strict")->check(CLI::IsMember({"fast", "default", "strict"}));
        s->add_flag("--skip-validation", a.skip_validation, "do not run the hypothesis checks first");
    };
    auto physics = [&](CLI::App* s) {
        s->add_option("--eps", a.eps, "semiclassical parameter(s)")->delimiter(',');
        s->add_option("--energy", a.energy, "energy value(s)")->delimiter(',');
        s->add_option("--grid", a.grid, "x grid x0:x1:n");
        s->add_option("--time", a.time, "time value(s)")->delimiter(',');
        s->add_option("--incoming", a.incoming, "incoming mode (1-based)");
    };

    auto* v = app.add_subcommand("validate", "check the model hypotheses");
    common(v);
    auto* mo = app.add_subcommand("modes", "track the real modes along x");
    common(mo);
    physics(mo);
    auto* sm = app.add_subcommand("smatrix", "scattering matrix at one energy");
    common(sm);
    physics(sm);
    auto* ac = app.add_subcommand("action", "branch points and loop actions of the crossing pairs");
    common(ac);
    physics(ac);
    auto* pk = app.add_subcommand("packet", "exact and glued wave packet");
    common(pk);
    physics(pk);
    auto* tr = app.add_subcommand("transition", "transition profile and leading term");
    common(tr);
    physics(tr);
    auto* sw = app.add_subcommand("sweep", "grid over (eps, delta, E)");
    common(sw);
    physics(sw);
    sw->add_option("--kind", a.kind, "smatrix or action")->check(CLI::IsMember({"smatrix", "action"}));
    sw->add_option("--from", a.from, "incoming mode (1-based)");
    sw->add_option("--to", a.to, "outgoing mode (1-based); default from + 1");
    sw->add_option("--jobs", a.jobs, "worker threads")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kValidationFailure;
    }
    if (a.to == 0) a.to = a.from + 1;

    try {
        if (*v) return cmd_validate(a);
        if (*mo) return cmd_modes(a);
        if (*sm) return cmd_smatrix(a);
        if (*ac) return cmd_action(a);
        if (*pk) return cmd_packet(a);
        if (*tr) return cmd_transition(a);
        if (*sw) return cmd_sweep(a);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.is_validation() ? kValidationFailure : kNumericFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumericFailure;
    }
    return 0;
}
