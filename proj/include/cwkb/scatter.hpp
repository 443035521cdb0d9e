#pragma once

// Coefficient ODE on the real axis, S-matrix, contour actions around branch
// points and the WKB prediction for exponentially small transitions.

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/QR>

#include "cwkb/frame.hpp"

namespace cwkb {

// ---------------------------------------------------------------- coefficients

struct CoefficientOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    int nodes_per_period = 12;
    std::vector<double> output_grid;  // empty: the frame grid
};

struct CoefficientTrajectory {
    double E = 0.0, eps = 0.0;
    std::vector<double> grid;
    std::vector<CVector> c;
    CVector c_init, c_minus, c_plus;
    double tail_certificate = 0.0;
    std::size_t steps = 0;
};

/// Oscillation period 2 pi eps / max |k_i - k_j| over the frame.
inline double oscillation_period(const EigenFrame& f, double eps) {
    double spread = 0.0;
    for (int i = 0; i < f.n; ++i)
        for (int a = 0; a < f.md; ++a)
            for (int b = a + 1; b < f.md; ++b) spread = std::max(spread, std::abs(f.k[i](a) - f.k[i](b)));
    return spread > 0 ? 2.0 * std::numbers::pi * eps / spread : std::numeric_limits<double>::infinity();
}

/// dc/dx = M c with M_jl = a_jl exp(i Delta_jl / eps), from -X to +X.
inline CoefficientTrajectory integrate_coefficients(const EigenFrame& f, double eps, const CVector& c_init,
                                                    const CoefficientOptions& opt = {}) {
    if (!(eps > 0)) throw Error(ErrorCode::Validation, "eps must be positive");
    const int md = f.md;
    CoefficientTrajectory tr;
    tr.E = f.E;
    tr.eps = eps;
    tr.c_init = c_init;
    tr.grid = opt.output_grid.empty() ? f.grid : opt.output_grid;
    tr.c.reserve(tr.grid.size());

    if (md == 1) {
        // a_11 = 0: nothing moves.
        for (std::size_t i = 0; i < tr.grid.size(); ++i) tr.c.push_back(c_init);
        tr.c_minus = tr.c_plus = c_init;
        return tr;
    }

    CMatrix a(md, md);
    CVector L(md), ex(md);
    ode::System sys = [&](const ode::State& y, ode::State& dy, double x) {
        f.coupling_at(x, a);
        f.phase_at(x, L);
        for (int j = 0; j < md; ++j) ex(j) = std::exp(I1 * L(j) / eps);
        dy.assign(md, cplx(0.0));
        for (int l = 0; l < md; ++l) {
            const cplx yl = y[l] / ex(l);
            for (int j = 0; j < md; ++j)
                if (l != j) dy[j] += a(j, l) * yl;
        }
        for (int j = 0; j < md; ++j) dy[j] *= ex(j);
    };
    ode::State y(c_init.data(), c_init.data() + md);
    ode::Observer obs = [&](const ode::State& yy, double) { tr.c.push_back(Eigen::Map<const CVector>(yy.data(), md)); };
    const double max_dt = std::min(oscillation_period(f, eps) / opt.nodes_per_period, 4.0 * f.h);
    tr.steps = ode::integrate_rkf78(sys, y, tr.grid, opt.atol, opt.rtol, obs, 0.1 * max_dt, max_dt);
    tr.c_minus = tr.c.front();
    tr.c_plus = tr.c.back();

    // Tail certificate from |a(+-X)| X^{2+nu}.
    const double X = f.x_max(), nu = 1.0;
    double sup = 0.0;
    for (auto& v : tr.c) sup = std::max(sup, v.norm());
    double C = std::max(f.a.front().norm(), f.a.back().norm()) * std::pow(X, 2.0 + nu);
    tr.tail_certificate = C / ((1.0 + nu) * std::pow(X, 1.0 + nu)) * sup;
    return tr;
}

struct ScatteringRecord {
    double E = 0.0, eps = 0.0, delta = 0.0;
    CMatrix S;
    std::vector<CoefficientTrajectory> columns;
    double unitarity_defect() const { return (S.adjoint() * S - CMatrix::Identity(S.rows(), S.cols())).norm(); }
};

inline ScatteringRecord s_matrix(const EigenFrame& f, double eps, const CoefficientOptions& opt = {}, bool keep_columns = false) {
    ScatteringRecord rec;
    rec.E = f.E;
    rec.eps = eps;
    rec.delta = f.delta;
    rec.S.resize(f.md, f.md);
    for (int j = 0; j < f.md; ++j) {
        CVector e = CVector::Zero(f.md);
        e(j) = 1.0;
        CoefficientOptions o = opt;
        if (!keep_columns) o.output_grid = {f.x0, f.x_max()};
        CoefficientTrajectory tr = integrate_coefficients(f, eps, e, o);
        rec.S.col(j) = tr.c_plus;
        if (keep_columns) rec.columns.push_back(std::move(tr));
    }
    return rec;
}

inline ScatteringRecord s_matrix(const Model& model, double E, double eps, const CoefficientOptions& opt = {}) {
    return s_matrix(kato_transport(model, E), eps, opt);
}

// ---------------------------------------------------------------- actions

struct ActionResult {
    int mode = 0, partner = 1;
    cplx single;  // loop integral of k_mode
    cplx gap;     // of k_mode - k_partner
    cplx sum;     // of k_mode + k_partner
    bool orientation_flipped = false;
    int panels = 0;
    std::vector<int> pi0;
};

/// Loop integrals of the continued modes around bp along its canonical loop,
/// composite Gauss-Legendre per piece, panels doubled until converged.  The
/// sign is chosen so that Im of the single-mode integral is positive.
inline ActionResult action_integral(const Model& model, double E, const BranchPoint& bp, int mode, double basepoint = 0.0,
                                    double tol = 1e-10) {
    if (mode != bp.i && mode != bp.j) throw Error(ErrorCode::Validation, "mode is not part of the branch-point pair");
    const int partner = mode == bp.i ? bp.j : bp.i;
    CanonicalLoop loop = canonical_loop(bp, basepoint);
    const auto pieces = loop.pieces();
    Spectral s0 = real_spectrum(model, basepoint, E);

    auto run = [&](int panels, std::vector<int>* pi0) {
        PathTracker t(model, E, cplx(basepoint), s0.k);
        cplx I_mode = 0.0, I_partner = 0.0;
        for (const auto& pc : pieces) {
            const int np = pc.arc ? 4 * panels : panels;
            QuadratureRule q = composite_gauss(0.0, 1.0, np);
            for (std::size_t k = 0; k < q.size(); ++k) {
                t.advance_to(loop.point(pc, q.nodes[k]));
                const cplx w = q.weights[k] * loop.tangent(pc, q.nodes[k]);
                I_mode += w * t.values()(mode);
                I_partner += w * t.values()(partner);
            }
            t.advance_to(loop.point(pc, 1.0));
        }
        if (pi0) *pi0 = optimal_assignment(t.values(), s0.k).perm;
        return std::pair<cplx, cplx>(I_mode, I_partner);
    };

    ActionResult r;
    r.mode = mode;
    r.partner = partner;
    int panels = 1;
    auto prev = run(panels, nullptr);
    for (;;) {
        panels *= 2;
        auto cur = run(panels, nullptr);
        const double change = std::abs(cur.first - prev.first) + std::abs(cur.second - prev.second);
        prev = cur;
        if (change < tol) break;
        if (panels >= 256) throw Error(ErrorCode::QuadratureNonConvergence, "loop action did not converge");
    }
    run(1, &r.pi0);
    r.panels = panels;
    double sign = 1.0;
    if (prev.first.imag() < 0) {
        sign = -1.0;
        r.orientation_flipped = true;
    }
    r.single = sign * prev.first;
    r.gap = sign * (prev.first - prev.second);
    r.sum = sign * (prev.first + prev.second);
    return r;
}

// ---------------------------------------------------------------- branch points from crossings

/// Branch point of the pair (i, j) near its delta = 0 crossing; upper or lower half plane.
inline BranchPoint branch_point_for_pair(const Model& model, double E, int i, int j, bool upper = true,
                                         const CrossingReport* report = nullptr) {
    CrossingReport local;
    if (!report) {
        local = detect_real_crossings(model, E);
        report = &local;
    }
    const int a = std::min(i, j), b = std::max(i, j);
    for (const auto& c : report->entries)
        if (c.i == a && c.j == b) {
            cplx seed = branch_seed(model, E, c.x, a, b, c.slope);
            if (!upper) seed = std::conj(seed);
            return locate_branch_point(model, E, {a, b}, seed);
        }
    throw Error(ErrorCode::MissingBranchPoint, "no real crossing for pair (" + std::to_string(a + 1) + "," + std::to_string(b + 1) + ")");
}

// ---------------------------------------------------------------- WKB prediction

struct WkbFactor {
    int mode = 0;
    BranchPoint bp;
    ActionResult action;
    cplx theta;
};

struct WkbPrediction {
    int from = 0, to = 0;
    std::vector<WkbFactor> factors;
    cplx total_action;  // sum of the sign-corrected single-mode actions
    cplx total_theta;

    /// prod e^{-i theta_l} e^{i A_l / eps}.
    cplx value(double eps) const { return std::exp(-I1 * total_theta + I1 * total_action / eps); }
    double magnitude(double eps) const { return std::abs(value(eps)); }
};

/// Prediction for S_{to,from}: one factor per consecutive pair between the two
/// labels, upper-half-plane branch points when to > from, lower otherwise.
inline WkbPrediction wkb_element(const Model& model, double E, int from, int to, double basepoint = 0.0) {
    WkbPrediction p;
    p.from = from;
    p.to = to;
    if (from == to) return p;
    CrossingReport rep = detect_real_crossings(model, E);
    const int step = to > from ? 1 : -1;
    for (int l = from; l != to; l += step) {
        WkbFactor fct;
        fct.mode = l;
        fct.bp = branch_point_for_pair(model, E, l, l + step, step > 0, &rep);
        fct.action = action_integral(model, E, fct.bp, l, basepoint);
        LoopPrefactor lp = loop_prefactor(model, E, fct.bp, basepoint);
        if (lp.pi0[l] != l + step)
            throw Error(ErrorCode::MissingBranchPoint, "loop does not exchange modes " + std::to_string(l + 1) + " and " + std::to_string(l + step + 1));
        fct.theta = lp.theta[l];
        p.total_action += fct.action.single;
        p.total_theta += fct.theta;
        p.factors.push_back(fct);
    }
    return p;
}

// ---------------------------------------------------------------- fits

struct AvoidedCrossingFit {
    double a = 0.0, b = 0.0, c = 0.0;
    double D = 0.0;
    double x0 = 0.0;
    double residual = 0.0;       // relative least-squares residual
    double slope_at_x0 = 0.0;    // |d/dz (k_i - k_j)| at delta = 0
    double h = 0.0, delta_step = 0.0;
    bool positive() const { return a * a * b * b - c * c > 0; }
};

/// Least-squares fit of (k_j - k_i)^2 over (x - x0, delta) with all monomials of
/// degree 2 to 6; the quadratic part gives a, b, c.
inline AvoidedCrossingFit avoided_crossing_fit(const Model& model, double E0, std::pair<int, int> pair, double x0,
                                               double slope_at_x0, double h = 0.02, double delta_step = 0.02) {
    const auto [pi, pj] = pair;
    for (int attempt = 0; attempt < 6; ++attempt, h *= 0.5, delta_step *= 0.5) {
        std::vector<std::array<double, 3>> samples;  // u, delta, s
        for (int q = 0; q <= 4; ++q) {
            Model mq = model.with_delta(q * delta_step);
            for (int p = -4; p <= 4; ++p) {
                const double u = p * h;
                Spectral s = real_spectrum(mq, x0 + u, E0);
                const double g = s.k(pj).real() - s.k(pi).real();
                samples.push_back({u, q * delta_step, g * g});
            }
        }
        // Columns: u^2, u d, d^2, then monomials up to degree 6.
        std::vector<std::pair<int, int>> mono;
        for (int deg = 2; deg <= 6; ++deg)
            for (int e = deg; e >= 0; --e) mono.push_back({e, deg - e});
        Eigen::MatrixXd A(samples.size(), mono.size());
        Eigen::VectorXd y(samples.size());
        // Scale columns to unit size to keep the system well conditioned.
        for (std::size_t r = 0; r < samples.size(); ++r) {
            const double u = samples[r][0] / h, d = samples[r][1] / delta_step;
            for (std::size_t c = 0; c < mono.size(); ++c) A(r, c) = std::pow(u, mono[c].first) * std::pow(d, mono[c].second);
            y(r) = samples[r][2];
        }
        Eigen::VectorXd coef = A.colPivHouseholderQr().solve(y);
        const double res = (A * coef - y).norm() / std::max(y.norm(), 1e-300);
        auto unscale = [&](int c) { return coef(c) / (std::pow(h, mono[c].first) * std::pow(delta_step, mono[c].second)); };
        AvoidedCrossingFit fit;
        fit.x0 = x0;
        fit.h = h;
        fit.delta_step = delta_step;
        fit.residual = res;
        fit.a = std::sqrt(std::max(unscale(0), 0.0));
        fit.c = 0.5 * unscale(1);
        fit.b = std::sqrt(std::max(unscale(2), 0.0));
        fit.D = std::numbers::pi / 4.0 * (fit.a * fit.a * fit.b * fit.b - fit.c * fit.c) / std::pow(fit.a, 3);
        fit.slope_at_x0 = std::abs(slope_at_x0);
        if (res <= 1e-4) return fit;
    }
    throw Error(ErrorCode::FitResidual, "quadratic form does not fit the squared gap");
}

struct DecayRateFit {
    double rate = 0.0;       // intercept of -eps ln|S| against eps
    double eps_slope = 0.0;  // -ln|prefactor|
    double residual = 0.0;
};

/// Least squares of y = -eps ln|S| on (1, eps).
inline DecayRateFit decay_rate_fit(const std::vector<double>& eps, const std::vector<double>& magnitudes) {
    const int n = int(eps.size());
    if (n < 2 || int(magnitudes.size()) != n) throw Error(ErrorCode::Validation, "decay fit needs at least two points");
    Eigen::MatrixXd A(n, 2);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        A(i, 0) = 1.0;
        A(i, 1) = eps[i];
        y(i) = -eps[i] * std::log(magnitudes[i]);
    }
    Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
    return {c(0), c(1), (A * c - y).norm()};
}

}  // namespace cwkb
