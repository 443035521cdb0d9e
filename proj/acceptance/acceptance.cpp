// Acceptance runner.  `acceptance [N ...]` runs the listed criteria (all when
// none given) and prints one PASS/FAIL line per criterion.  Exit status is the
// number of failed criteria.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "cwkb/cwkb.hpp"

using namespace cwkb;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

Model zoo(const std::string& name) { return load_model(std::string(CWKB_MODEL_DIR) + "/" + name + ".json"); }

std::string fmt(const char* f, auto... v) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, v...);
    return buf;
}

const char* tag(bool ok) { return ok ? "ok" : "FAIL"; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

cplx scalar_closed(double s) { return std::sqrt(2 * std::numbers::pi) * std::exp(-I1 * s) * std::exp(-0.5 * s * s); }

// 1: scalar_tanh against f(t + ln cosh x).
Outcome exact_solution() {
    const auto t0 = std::chrono::steady_clock::now();
    Model m = zoo("scalar_tanh");
    EnergyDensity Q = EnergyDensity::of(m);
    const auto x = linspace(-30.0, 30.0, 1201);
    SynthesisOptions opt;
    opt.exact = true;
    opt.asymptotic = false;
    opt.frame.h_max = 0.05;
    Synthesis s = synthesize(m, Q, 1.0, {-20.0, 0.0, 20.0}, x, opt);
    double err = 0.0;
    for (std::size_t ti = 0; ti < s.times.size(); ++ti)
        for (std::size_t i = 0; i < x.size(); ++i)
            err = std::max(err, std::abs(s.exact[ti].values(Eigen::Index(i), 0) - scalar_closed(s.times[ti] + std::log(std::cosh(x[i])))));
    const double secs = seconds_since(t0);
    return {err < 1e-6 && secs < 10.0, fmt("max abs error %.2e (< 1e-6), %zu E nodes, %.1f s (< 10 s)", err, s.quadrature.rule.size(), secs)};
}

// 2: x-independent coefficients scatter trivially.
Outcome trivial_smatrix() {
    Model c = zoo("constant");
    const auto [lo, hi] = c.spec().energy_window;
    double worst = 0.0;
    for (double eps : {0.05, 0.02}) {
        ScatteringRecord r = s_matrix(c, 0.5 * (lo + hi), eps);
        worst = std::max(worst, (r.S - CMatrix::Identity(r.S.rows(), r.S.cols())).norm());
    }
    return {worst < 1e-8, fmt("max ||S - I|| %.2e (< 1e-8)", worst)};
}

// 3: decay rate and WKB amplitude on adiabatic2.
Outcome landau_zener() {
    const auto t0 = std::chrono::steady_clock::now();
    Model a = zoo("adiabatic2").with_delta(0.25);
    const double E = 1.0;
    EigenFrame f = kato_transport(a, E);
    WkbPrediction p = wkb_element(a, E, 0, 1);
    const std::vector<double> eps{0.1, 0.05, 0.0333, 0.025, 0.02};
    std::vector<double> mags;
    std::map<double, double> ratio;
    for (double e : eps) {
        ScatteringRecord r = s_matrix(f, e);
        mags.push_back(std::abs(r.S(1, 0)));
        ratio[e] = std::abs(r.S(1, 0) / p.value(e) - 1.0);
    }
    DecayRateFit fit = decay_rate_fit(eps, mags);
    const double im = p.total_action.imag(), rel = std::abs(fit.rate / im - 1.0);
    const bool a_ok = rel < 0.03, b_ok = ratio[0.02] < ratio[0.05];
    const double secs = seconds_since(t0);
    return {a_ok && b_ok && secs < 180,
            fmt("3a %s: fitted rate %.6f vs Im action %.6f (rel %.1e, < 3%%); 3b %s: |ratio-1| %.2e at eps=0.02 vs %.2e at eps=0.05; %.1f s",
                tag(a_ok), fit.rate, im, rel, tag(b_ok), ratio[0.02], ratio[0.05], secs)};
}

// 4: Im of the gap action over delta^2.
Outcome delta_squared() {
    Model a = zoo("adiabatic2");
    const double E = 1.0;
    CrossingReport rep = detect_real_crossings(a, E);
    AvoidedCrossingFit fit = avoided_crossing_fit(a, E, {0, 1}, rep.entries.at(0).x, rep.entries.at(0).slope);
    std::vector<double> r;
    std::string vals;
    for (double d : {0.05, 0.1, 0.2}) {
        Model md = a.with_delta(d);
        BranchPoint bp = branch_point_for_pair(md, E, 0, 1);
        const double g = action_integral(md, E, bp, 0).gap.imag();
        r.push_back(g / (d * d));
        vals += fmt("%s%.5f", vals.empty() ? "" : ", ", r.back());
    }
    const auto [lo, hi] = std::minmax_element(r.begin(), r.end());
    const double spread = *hi / *lo - 1.0;
    return {spread < 0.05, fmt("Im gap/delta^2 = %s (spread %.2e, < 5%%); ratio to D(E) delta^2 = %.5f (D = %.5f, reported)", vals.c_str(), spread,
                               r.back() / fit.D, fit.D)};
}

// 5: the sum over an exchanged pair is analytic inside the loop.
Outcome analyticity() {
    double worst = 0.0;
    int loops = 0;
    auto loop = [&](const Model& m, double E, int i, int j, bool upper) {
        BranchPoint bp = branch_point_for_pair(m, E, i, j, upper);
        ActionResult r = action_integral(m, E, bp, i);
        worst = std::max(worst, std::abs(r.sum) / std::abs(r.gap));
        ++loops;
    };
    Model a = zoo("adiabatic2");
    for (double d : {0.05, 0.1, 0.2, 0.25})
        for (double E : {0.5, 1.0, 1.5}) {
            loop(a.with_delta(d), E, 0, 1, true);
            loop(a.with_delta(d), E, 1, 0, false);
        }
    Model b = zoo("bo2");
    for (double E : {1.8, 2.25, 2.7}) {
        loop(b, E, 0, 1, true);
        loop(b, E, 2, 3, true);
    }
    return {worst < 1e-9, fmt("max |sum|/|gap| %.2e over %d loops (< 1e-9)", worst, loops)};
}

// 6: leading term against the Gaussian and against the free wave with numeric c_n(+inf).
Outcome transmitted_wave() {
    const auto t0 = std::chrono::steady_clock::now();
    Model b = zoo("bo2");
    EnergyDensity Q = EnergyDensity::of(b);
    TransitionProfile p = transition_profile(b, Q, 0);
    double ga = 0.0;
    for (double t : {0.0, 100.0}) {
        const auto x = packet_grid(p, 0.02, t);
        ga = std::max(ga, relative_distance(leading_term(p, Q, 0.02, t, x), gaussian_closed_form(p, Q, 0.02, t, x)));
    }
    const bool a_ok = ga < 1e-6;
    std::vector<double> rel;
    for (double eps : {0.04, 0.02, 0.01}) {
        const auto x = packet_grid(p, eps, 0.0);
        SynthesisOptions opt;
        opt.incoming = p.j;
        WaveField A = asymptotic_wave(b, Q, eps, 0.0, 1, p.n, x, opt);
        rel.push_back(relative_distance(leading_term(p, Q, eps, 0.0, x), A));
    }
    const bool b_ok = rel[1] < rel[0] && rel[2] < rel[1] && rel[2] < 0.25;
    const double secs = seconds_since(t0);
    return {a_ok && b_ok && secs < 300, fmt("6a %s: max rel L2 %.2e (< 1e-6); 6b %s: rel L2 %.4f, %.4f, %.4f at eps 0.04, 0.02, 0.01 (decreasing, < 0.25); %.1f s",
                                            tag(a_ok), ga, tag(b_ok), rel[0], rel[1], rel[2], secs)};
}

// 7: Fourier factor norm and time invariance of the leading-term norm.
Outcome norm_law() {
    Model b = zoo("bo2");
    EnergyDensity Q = EnergyDensity::of(b);
    TransitionProfile p = transition_profile(b, Q, 0);
    const double eps = 0.02;
    const auto x0 = packet_grid(p, eps, 0.0);
    const auto F = fourier_factor(p, eps, 0.0, x0);
    CMatrix v(Eigen::Index(x0.size()), 1);
    for (std::size_t i = 0; i < F.size(); ++i) v(Eigen::Index(i), 0) = F[i];
    const double measured = l2_norm(x0, v), stated = stated_fourier_norm(p, eps), planch = plancherel_fourier_norm(p, eps);
    const bool a_ok = std::abs(measured / stated - 1.0) < 0.01;
    double n0 = 0.0, drift = 0.0;
    for (double t : {0.0, 50.0, 200.0}) {
        const double n = leading_term(p, Q, eps, t, packet_grid(p, eps, t)).norm();
        if (t == 0.0) n0 = n;
        drift = std::max(drift, std::abs(n / n0 - 1.0));
    }
    const bool b_ok = drift < 1e-8;
    return {a_ok && b_ok, fmt("7a %s: Fourier norm %.10f vs stated %.10f (ratio %.4f, within 1%%; Plancherel value %.10f); 7b %s: relative norm drift %.1e over t in {0, 50, 200} (< 1e-8)",
                              tag(a_ok), measured, stated, measured / stated, planch, tag(b_ok), drift)};
}

// 8: localization of the leading term at t = 200.
Outcome localization() {
    Model b = zoo("bo2");
    EnergyDensity Q = EnergyDensity::of(b);
    TransitionProfile p = transition_profile(b, Q, 0);
    const double eps = 0.02, t = 200.0;
    DiagnosticsConfig cfg;
    cfg.alpha_loc = 0.7;
    cfg.tau = 0.4;
    LocalizationReport r = localization_report(leading_term(p, Q, eps, t, packet_grid(p, eps, t)), p, cfg, eps);
    return {r.passes(0.99), fmt("mass fraction in C_t %.6f (>= 0.99); center %.3f vs %.3f (tolerance %.2f)", r.fraction, r.center, r.predicted_center, r.tolerance)};
}

// 9: |t| times the distance between the exact and the glued field.
Outcome scattering_convergence() {
    const auto t0 = std::chrono::steady_clock::now();
    auto products = [](const Model& m, double eps, const std::vector<double>& times, const std::vector<double>& x) {
        Synthesis s = synthesize(m, EnergyDensity::of(m), eps, times, x);
        std::vector<double> P;
        for (std::size_t ti = 0; ti < times.size(); ++ti) P.push_back(l2_distance(s.exact[ti], s.glued(ti)) * std::abs(times[ti]));
        return P;
    };
    auto bounded = [](const std::vector<double>& P) {
        for (double v : P)
            if (v > 2.0 * P.front()) return false;
        return true;
    };
    const auto ps = products(zoo("scalar_tanh"), 1.0, {-10.0, -20.0, -40.0, 10.0, 20.0, 40.0}, linspace(-60.0, 60.0, 2401));
    const std::vector<double> scalar_gated(ps.begin(), ps.begin() + 3);
    const auto pa = products(zoo("adiabatic2"), 0.1, {10.0, 20.0, 40.0}, linspace(-60.0, 20.0, 4001));
    const bool s_ok = bounded(scalar_gated), a_ok = bounded(pa);
    return {s_ok && a_ok, fmt("scalar_tanh %s: P = %.2e, %.2e, %.2e at t = -10, -20, -40 (t = 10, 20, 40 reported: %.2e, %.2e, %.2e); "
                              "adiabatic2 %s: P = %.2e, %.2e, %.2e at t = 10, 20, 40; bound P(t) <= 2 P(t_1); %.1f s",
                              tag(s_ok), ps[0], ps[1], ps[2], ps[3], ps[4], ps[5], tag(a_ok), pa[0], pa[1], pa[2], seconds_since(t0))};
}

// 10: structural invariants.
Outcome structural() {
    std::vector<std::string> failed;
    auto expect = [&](bool ok, const std::string& what) {
        if (!ok) failed.push_back(what);
    };

    // projector identities
    for (const char* name : {"adiabatic2", "bo2"}) {
        Model m = zoo(name);
        const double E = 0.5 * (m.spec().energy_window[0] + m.spec().energy_window[1]);
        for (double x : {-4.0, 0.0, 0.7}) {
            const CMatrix H = m.companion(x, E);
            Spectral s = real_spectrum(m, x, E);
            auto P = spectral_projectors(H, s.k);
            CMatrix sum = CMatrix::Zero(H.rows(), H.cols());
            for (std::size_t j = 0; j < P.size(); ++j) {
                expect((P[j] * P[j] - P[j]).norm() < 1e-10, "P^2 = P");
                expect((H * P[j] - P[j] * H).norm() < 1e-10 * H.norm(), "[H, P] = 0");
                sum += P[j];
            }
            expect((sum - CMatrix::Identity(H.rows(), H.cols())).norm() < 1e-10, "sum P = I");
        }
    }

    // Kato residuals, two-route coupling, a_jj = 0
    Model a = zoo("adiabatic2");
    EigenFrame fa = kato_transport(a, 1.0);
    expect(fa.kato_residual < 1e-7 && fa.projector_residual < 1e-10 && fa.diagonal_coupling < 1e-9, "Kato residuals");
    CouplingMatrix ca = coupling_matrix(fa, a, 1.0);
    expect(ca.max_discrepancy < 1e-5, "coupling routes (adiabatic2)");
    for (auto& m : ca.a_primary) expect(m.diagonal().norm() < 1e-10, "a_jj = 0");
    Model b = zoo("bo2");
    EigenFrame fb = kato_transport(b, 2.25);
    CouplingMatrix cb = coupling_matrix(fb, b, 2.25);
    expect(cb.max_discrepancy < 1e-5, "coupling routes (bo2)");
    expect(fb.diagonal_coupling < 1e-9, "a_jj = 0 (bo2)");

    // Parseval for the eps-Fourier transform
    {
        const double eps = 0.05;
        QuadratureRule rule = composite_gauss(-2.0, 2.0, 16, 20);
        std::vector<cplx> g;
        double gn = 0.0;
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const double k = rule.nodes[q];
            g.push_back(std::exp(-k * k / (2 * 0.02) + I1 * k));
            gn += rule.weights[q] * std::norm(g.back());
        }
        const auto x = linspace(-4.0, 4.0, 2001);
        const auto F = fourier_eps(rule, g, x, eps);
        CMatrix v(Eigen::Index(x.size()), 1);
        for (std::size_t i = 0; i < x.size(); ++i) v(Eigen::Index(i), 0) = F[i];
        expect(std::abs(l2_norm(x, v) / std::sqrt(gn) - 1.0) < 1e-9, "Parseval");
    }

    // Schwarz symmetry of the spectrum and of the branch points
    {
        const cplx z(0.3, 0.1);
        const CVector up = spectrum_from_axis(a, 1.0, z), down = spectrum_from_axis(a, 1.0, std::conj(z));
        expect((up.conjugate() - down).norm() < 1e-10, "k(conj z) = conj k(z)");
        WkbPrediction u = wkb_element(a, 1.0, 0, 1), d = wkb_element(a, 1.0, 1, 0);
        expect(std::abs(u.factors.front().bp.z0 - std::conj(d.factors.front().bp.z0)) < 1e-10, "branch points conjugate");
    }

    // monodromy: two turns give the identity
    {
        BranchPoint bp = branch_point_for_pair(a, 1.0, 0, 1);
        LoopPrefactor once = loop_prefactor(a, 1.0, bp), twice = loop_prefactor(a, 1.0, bp, 0.0, 2);
        std::vector<int> sq(once.pi0.size());
        for (std::size_t j = 0; j < sq.size(); ++j) sq[j] = once.pi0[std::size_t(once.pi0[j])];
        std::vector<int> id(sq.size());
        std::iota(id.begin(), id.end(), 0);
        expect(sq == id && twice.pi0 == id && once.pi0 != id, "pi0^2 = id");
    }

    std::string list;
    for (auto& f : failed) list += (list.empty() ? "" : ", ") + f;
    return {failed.empty(), failed.empty() ? "projectors, Kato residuals, coupling routes, a_jj = 0, Parseval, Schwarz, pi0^2 = id" : "failed: " + list};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"exact-solution oracle", exact_solution},
        {"trivial S-matrix", trivial_smatrix},
        {"Landau-Zener decay rate", landau_zener},
        {"delta^2 law", delta_squared},
        {"analyticity null test", analyticity},
        {"transmitted wave consistency", transmitted_wave},
        {"norm law", norm_law},
        {"localization", localization},
        {"scattering convergence", scattering_convergence},
        {"structural invariants", structural},
    };
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
    if (which.empty())
        for (int i = 1; i <= int(criteria.size()); ++i) which.push_back(i);

    int failures = 0;
    for (int c : which) {
        if (c < 1 || c > int(criteria.size())) {
            std::cout << "FAIL " << c << " unknown criterion\n";
            ++failures;
            continue;
        }
        Outcome o;
        try {
            o = criteria[std::size_t(c - 1)].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        std::cout << (o.pass ? "PASS " : "FAIL ") << c << " " << criteria[std::size_t(c - 1)].first << ": " << o.detail << std::endl;
        failures += !o.pass;
    }
    return failures;
}
