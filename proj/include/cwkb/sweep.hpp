#pragma once

// Parameter sweeps over (eps, delta, E) cells and the run manifest that
// accompanies every data file.

#include <atomic>
#include <chrono>
#include <fstream>
#include <thread>

#include "cwkb/model_io.hpp"
#include "cwkb/scatter.hpp"

namespace cwkb {

inline constexpr const char* kToolVersion = "0.1.0";

struct Tolerances {
    std::string profile = "default";
    FrameOptions frame;
    CoefficientOptions coeff;
};

/// fast: 4x the frame step, 100x looser tolerances.  strict: half the step, 10x tighter.
inline Tolerances tolerance_profile(const std::string& name) {
    Tolerances t;
    t.profile = name;
    if (name == "fast") {
        t.frame.h_max *= 4;
        t.frame.rtol *= 100;
        t.frame.atol *= 100;
        t.coeff.rtol *= 100;
        t.coeff.atol *= 100;
    } else if (name == "strict") {
        t.frame.h_max *= 0.5;
        t.frame.rtol *= 0.1;
        t.frame.atol *= 0.1;
        t.coeff.rtol *= 0.1;
        t.coeff.atol *= 0.1;
    } else if (name != "default") {
        throw Error(ErrorCode::Validation, "unknown tolerance profile '" + name + "'");
    }
    t.frame.diagnostics = false;
    return t;
}

inline json to_json(const Tolerances& t) {
    return {{"profile", t.profile},
            {"frame", {{"h_max", t.frame.h_max}, {"h_min", t.frame.h_min}, {"resolution", t.frame.resolution}, {"rtol", t.frame.rtol}, {"atol", t.frame.atol}}},
            {"coefficients", {{"rtol", t.coeff.rtol}, {"atol", t.coeff.atol}, {"nodes_per_period", t.coeff.nodes_per_period}}}};
}

struct RunManifest {
    std::string model_name, model_hash, subcommand;
    json parameters = json::object();
    json columns = json::object();  // CSV column -> meaning
    std::vector<std::string> files;
    json checks = json::array();    // {name, pass}
    double wall_time = 0.0;

    json to_json() const {
        return {{"model", {{"name", model_name}, {"hash", model_hash}}},
                {"subcommand", subcommand},
                {"tool_version", kToolVersion},
                {"parameters", parameters},
                {"columns", columns},
                {"files", files},
                {"checks", checks},
                {"wall_time_s", wall_time}};
    }
    void write(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw Error(ErrorCode::Validation, "cannot write " + path);
        out << to_json().dump(2) << "\n";
    }
};

// ---------------------------------------------------------------- sweep

enum class SweepKind { SMatrix, Action };

inline SweepKind sweep_kind(const std::string& s) {
    if (s == "smatrix") return SweepKind::SMatrix;
    if (s == "action") return SweepKind::Action;
    throw Error(ErrorCode::Validation, "unknown sweep kind '" + s + "'");
}

struct SweepCell {
    double eps = 0.0, delta = 0.0, E = 0.0;
};

struct SweepRow {
    SweepCell cell;
    std::vector<double> values;
    std::string error;  // empty on success
};

struct SweepFit {
    double delta = 0.0, E = 0.0;
    DecayRateFit fit;
    double predicted = 0.0;  // Im of the loop action
    double relative() const { return std::abs(fit.rate / predicted - 1.0); }
};

struct SweepResult {
    SweepKind kind = SweepKind::SMatrix;
    int from = 0, to = 1;
    std::vector<std::string> header;
    std::vector<SweepRow> rows;
    std::vector<SweepFit> fits;

    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw Error(ErrorCode::Validation, "cannot write " + path);
        out.precision(17);
        for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
        out << "\n";
        for (auto& r : rows) {
            out << r.cell.eps << "," << r.cell.delta << "," << r.cell.E;
            for (std::size_t i = 0; i < header.size() - 4; ++i) out << "," << (i < r.values.size() ? r.values[i] : std::nan(""));
            out << "," << (r.error.empty() ? "ok" : "\"" + r.error + "\"") << "\n";
        }
    }
};

inline json sweep_columns(SweepKind k) {
    json c = {{"eps", "semiclassical parameter"}, {"delta", "coupling parameter"}, {"E", "energy"}};
    if (k == SweepKind::SMatrix) {
        c["abs_S"] = "|S_{to,from}| from the coefficient ODE";
        c["abs_wkb"] = "|S_{to,from}| predicted by the loop action and prefactor";
        c["unitarity_defect"] = "||S^* S - I||_F";
    } else {
        c["im_action"] = "Im of the loop integral of k_from (sign-corrected)";
        c["im_gap"] = "Im of the loop integral of k_from - k_to";
        c["abs_sum"] = "|loop integral of k_from + k_to|";
    }
    c["status"] = "ok, or the error of a failed cell";
    return c;
}

/// Lexicographic (eps, delta, E) product of the three axes.
inline std::vector<SweepCell> sweep_grid(const std::vector<double>& eps, const std::vector<double>& delta, const std::vector<double>& E) {
    std::vector<SweepCell> cells;
    for (double e : eps)
        for (double d : delta)
            for (double en : E) cells.push_back({e, d, en});
    return cells;
}

namespace detail {

inline std::vector<double> sweep_cell(const Model& base, SweepKind kind, int from, int to, const SweepCell& c, const Tolerances& tol) {
    const Model m = base.with_delta(c.delta);
    if (kind == SweepKind::SMatrix) {
        if (!(c.eps > 0)) throw Error(ErrorCode::Validation, "eps must be positive");
        EigenFrame f = kato_transport(m, c.E, tol.frame);
        ScatteringRecord r = s_matrix(f, c.eps, tol.coeff);
        double wkb = std::nan("");
        try {
            wkb = wkb_element(m, c.E, from, to).magnitude(c.eps);
        } catch (const Error&) {
        }
        return {std::abs(r.S(to, from)), wkb, r.unitarity_defect()};
    }
    BranchPoint bp = branch_point_for_pair(m, c.E, from, to, to > from);
    ActionResult a = action_integral(m, c.E, bp, from);
    return {a.single.imag(), a.gap.imag(), std::abs(a.sum)};
}

}  // namespace detail

/// Runs every cell on `jobs` workers.  Each worker writes only its own slot,
/// so the output order and values do not depend on scheduling.
inline SweepResult run_sweep(const Model& model, SweepKind kind, const std::vector<SweepCell>& cells, int from, int to,
                             const Tolerances& tol, int jobs = 1) {
    if (from < 0 || to < 0 || from >= model.md() || to >= model.md() || from == to)
        throw Error(ErrorCode::Validation, "bad mode pair for the sweep");
    SweepResult res;
    res.kind = kind;
    res.from = from;
    res.to = to;
    res.header = kind == SweepKind::SMatrix ? std::vector<std::string>{"eps", "delta", "E", "abs_S", "abs_wkb", "unitarity_defect", "status"}
                                            : std::vector<std::string>{"eps", "delta", "E", "im_action", "im_gap", "abs_sum", "status"};
    res.rows.resize(cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            SweepRow& r = res.rows[i];
            r.cell = cells[i];
            try {
                r.values = detail::sweep_cell(model, kind, from, to, cells[i], tol);
            } catch (const std::exception& e) {
                r.error = e.what();
            }
        }
    };
    const int n = std::max(1, std::min<int>(jobs, int(cells.size())));
    std::vector<std::thread> pool;
    for (int w = 1; w < n; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    // Decay-rate fit per (delta, E) over the eps axis.
    if (kind == SweepKind::SMatrix) {
        std::map<std::pair<double, double>, std::pair<std::vector<double>, std::vector<double>>> groups;
        for (auto& r : res.rows)
            if (r.error.empty() && r.values[0] > 0) {
                auto& g = groups[{r.cell.delta, r.cell.E}];
                g.first.push_back(r.cell.eps);
                g.second.push_back(r.values[0]);
            }
        for (auto& [key, g] : groups) {
            if (g.first.size() < 2) continue;
            SweepFit sf;
            sf.delta = key.first;
            sf.E = key.second;
            sf.fit = decay_rate_fit(g.first, g.second);
            try {
                sf.predicted = wkb_element(model.with_delta(key.first), key.second, from, to).total_action.imag();
            } catch (const Error&) {
                sf.predicted = std::nan("");
            }
            res.fits.push_back(sf);
        }
    }
    return res;
}

inline json to_json(const SweepFit& f) {
    return {{"delta", f.delta}, {"E", f.E}, {"rate", f.fit.rate}, {"eps_slope", f.fit.eps_slope}, {"residual", f.fit.residual},
            {"im_action", f.predicted}, {"relative_difference", f.relative()}};
}

/// Largest absolute difference between two sweeps over the same cells.
inline double max_abs_delta(const SweepResult& a, const SweepResult& b) {
    if (a.rows.size() != b.rows.size()) return std::numeric_limits<double>::infinity();
    double d = 0.0;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        const auto &x = a.rows[i].values, &y = b.rows[i].values;
        if (x.size() != y.size()) return std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < x.size(); ++k)
            if (!(std::isnan(x[k]) && std::isnan(y[k]))) d = std::max(d, std::abs(x[k] - y[k]));
    }
    return d;
}

}  // namespace cwkb
