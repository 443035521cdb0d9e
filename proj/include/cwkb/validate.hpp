#pragma once

// Numeric checks of the model hypotheses; report only, never throws for a
// failed check.

#include "cwkb/model_io.hpp"
#include "cwkb/packet.hpp"

namespace cwkb {

struct CheckResult {
    std::string name;
    bool pass = false;
    double margin = 0.0;
    std::string detail;
};

struct ValidationReport {
    std::string model;
    std::vector<CheckResult> checks;

    bool ok() const {
        return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
    }
    const CheckResult* find(const std::string& name) const {
        for (auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
    bool passed(const std::string& name) const {
        auto c = find(name);
        return c && c->pass;
    }
    json to_json() const {
        json j;
        j["model"] = model;
        j["ok"] = ok();
        for (auto& c : checks) j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"margin", c.margin}, {"detail", c.detail}});
        return j;
    }
};

namespace detail {

template <class F>
CheckResult run_check(const std::string& name, F&& body) {
    CheckResult r;
    r.name = name;
    try {
        body(r);
    } catch (const Error& e) {
        r.pass = false;
        r.detail = e.what();
    }
    return r;
}

}  // namespace detail

/// H2: the deviation from the declared limit must shrink at least like
/// |x|^{-(2+nu)} between X/2 and X (or already be at rounding level).
inline CheckResult check_tail_bound(const Model& model) {
    return detail::run_check("H2", [&](CheckResult& r) {
        const double X = model.truncation(), nu = model.spec().decay_exponent, p = 2.0 + nu;
        double worst = 0.0, c_fit = 0.0;
        std::string where;
        for (auto& [key, M] : model.spec().A)
            for (int side : {-1, 1}) {
                const CMatrix lim = model.coefficient_limit(key.first, key.second, side);
                const double far = (model.coefficient(side * X, key.first, key.second) - lim).norm();
                const double half = (model.coefficient(side * X / 2, key.first, key.second) - lim).norm();
                c_fit = std::max(c_fit, half * std::pow(X / 2, p));
                const double allowed = std::max(1e-10, 2.0 * half * std::pow(0.5, p));
                const double ratio = far / allowed;
                if (where.empty() || ratio > worst) {
                    worst = ratio;
                    where = "A_" + std::to_string(key.first) + std::to_string(key.second) + (side > 0 ? " at +X" : " at -X");
                }
            }
        r.pass = worst <= 1.0;
        r.margin = worst;
        r.detail = "fitted c = " + std::to_string(c_fit) + "; worst deviation ratio " + std::to_string(worst) + " (" + where + ")";
    });
}

/// H3: real, distinct modes on a 61 x 11 grid of (x, E).
inline CheckResult check_real_modes(const Model& model) {
    return detail::run_check("H3", [&](CheckResult& r) {
        const double X = model.truncation();
        const auto [lo, hi] = model.spec().energy_window;
        double gap = std::numeric_limits<double>::infinity();
        for (double E : linspace(lo, hi, 11))
            for (double x : linspace(-X, X, 61)) {
                Spectral s = real_spectrum(model, x, E);
                if (s.k.size() > 1) gap = std::min(gap, min_gap(s.k) / spectral_scale(s.k));
            }
        r.pass = !(gap < 1e-8);
        r.margin = std::isfinite(gap) ? gap : 1.0;
        r.detail = model.md() == 1 ? "one mode" : "min relative gap " + std::to_string(gap);
    });
}

/// AC at delta = 0 on five energies across the window.
inline CheckResult check_crossing_pattern(const Model& model) {
    return detail::run_check("AC", [&](CheckResult& r) {
        if (model.md() == 1) {
            r.pass = true;
            r.detail = "vacuous (one mode)";
            return;
        }
        const auto [lo, hi] = model.spec().energy_window;
        std::size_t count = 0;
        double min_slope = std::numeric_limits<double>::infinity();
        bool ok = true;
        for (double E : linspace(lo, hi, 5)) {
            CrossingReport rep = detect_real_crossings(model, E);
            ok = ok && rep.ac_pattern();
            count = std::max(count, rep.count());
            for (auto& c : rep.entries) min_slope = std::min(min_slope, c.slope);
        }
        r.pass = ok;
        r.margin = std::isfinite(min_slope) ? min_slope : 0.0;
        r.detail = std::to_string(count) + " crossing(s)" + (count ? ", min slope " + std::to_string(min_slope) : std::string());
        if (model.spec().claims_ac && count == 0) r.detail += "; flag set but no crossing found";
    });
}

/// GV: dk/dE of every asymptotic mode nonzero with one sign on the window.
inline CheckResult check_group_velocity(const Model& model) {
    return detail::run_check("GV", [&](CheckResult& r) {
        double worst = std::numeric_limits<double>::infinity();
        for (int j = 0; j < model.md(); ++j)
            for (int side : {-1, 1}) {
                InverseDispersion inv(model, j, side);
                const auto [lo, hi] = model.spec().energy_window;
                for (double E : linspace(lo + 1e-3, hi - 1e-3, 21)) worst = std::min(worst, std::abs(inv.dk_dE(E)));
            }
        r.pass = worst > 1e-6;
        r.margin = worst;
        r.detail = "min |dk/dE| " + std::to_string(worst);
    });
}

/// H4: local quadratic form of the squared gap at every crossing, mid-window.
inline CheckResult check_local_form(const Model& model) {
    return detail::run_check("H4", [&](CheckResult& r) {
        const auto [lo, hi] = model.spec().energy_window;
        const double E = 0.5 * (lo + hi);
        if (model.md() == 1) {
            r.pass = true;
            r.detail = "vacuous (one mode)";
            return;
        }
        CrossingReport rep = detect_real_crossings(model, E);
        if (rep.entries.empty()) {
            r.pass = true;
            r.detail = "vacuous (no crossing)";
            return;
        }
        double worst = 0.0;
        bool positive = true;
        for (auto& c : rep.entries) {
            AvoidedCrossingFit fit = avoided_crossing_fit(model, E, {c.i, c.j}, c.x, c.slope);
            worst = std::max(worst, fit.residual);
            positive = positive && fit.positive();
        }
        r.pass = positive && worst <= 1e-4;
        r.margin = worst;
        r.detail = "max fit residual " + std::to_string(worst) + (positive ? "" : "; a^2 b^2 - c^2 <= 0");
    });
}

inline ValidationReport validate_model(const Model& model) {
    ValidationReport rep;
    rep.model = model.spec().name;
    rep.checks.push_back(detail::run_check("H1", [&](CheckResult& r) {
        pole_screen(model);
        r.pass = true;
        r.detail = "no pole on the 41 x 21 strip grid";
    }));
    rep.checks.push_back(check_tail_bound(model));
    rep.checks.push_back(check_real_modes(model));
    rep.checks.push_back(check_crossing_pattern(model));
    rep.checks.push_back(check_group_velocity(model));
    rep.checks.push_back(check_local_form(model));
    if (model.spec().density) {
        DensityCheck dc;
        CheckResult c1{"C1", false, 0.0, ""}, c2{"C2", false, 0.0, ""}, c3{"C3", false, 0.0, ""};
        try {
            dc = check_density(EnergyDensity::of(model));
            c1.pass = dc.c1;
            c1.margin = std::abs(dc.second_derivative - dc.g);
            c1.detail = "G''(E0) = " + std::to_string(dc.second_derivative) + (dc.note.empty() ? "" : "; " + dc.note);
            c2.pass = dc.c2;
            c3.pass = dc.c3;
            c3.margin = std::max(dc.P_sup, dc.dP_sup);
            c3.detail = "sup |P| " + std::to_string(dc.P_sup) + ", sup |dP/dE| " + std::to_string(dc.dP_sup);
        } catch (const Error& e) {
            c1.detail = c2.detail = c3.detail = e.what();
        }
        rep.checks.push_back(c1);
        rep.checks.push_back(c2);
        rep.checks.push_back(c3);
    }
    return rep;
}

}  // namespace cwkb
