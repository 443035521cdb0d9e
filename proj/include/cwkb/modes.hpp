#pragma once

// Dispersion branches k_j(x,E): real-axis tracking, asymptotic values, real
// crossings at delta = 0, and complex branch points.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "cwkb/numerics.hpp"
#include "cwkb/symbol.hpp"

namespace cwkb {

/// Eigen-decomposition H = V diag(k) W with W = V^{-1}.
struct Spectral {
    CVector k;
    CMatrix V, W;
};

inline CVector eigenvalues(const CMatrix& H) {
    if (H.rows() == 1) return H.col(0);
    Eigen::ComplexEigenSolver<CMatrix> es(H, false);
    return es.eigenvalues();
}

inline Spectral decompose(const CMatrix& H) {
    Spectral s;
    if (H.rows() == 1) {
        s.k = H.col(0);
        s.V = CMatrix::Identity(1, 1);
        s.W = s.V;
        return s;
    }
    Eigen::ComplexEigenSolver<CMatrix> es(H, true);
    s.k = es.eigenvalues();
    s.V = es.eigenvectors();
    s.W = s.V.partialPivLu().inverse();
    return s;
}

/// Reorder a decomposition so that entry j corresponds to perm[j].
inline Spectral permute(const Spectral& s, const std::vector<int>& perm) {
    Spectral o;
    const int n = int(perm.size());
    o.k.resize(n);
    o.V.resize(s.V.rows(), n);
    o.W.resize(n, s.W.cols());
    for (int j = 0; j < n; ++j) {
        o.k(j) = s.k(perm[j]);
        o.V.col(j) = s.V.col(perm[j]);
        o.W.row(j) = s.W.row(perm[j]);
    }
    return o;
}

/// Hellmann-Feynman derivatives dk_j = (W dH V)_jj.
inline CVector eigenvalue_derivatives(const Spectral& s, const CMatrix& dH) {
    CVector out(s.k.size());
    for (int j = 0; j < s.k.size(); ++j) out(j) = s.W.row(j) * dH * s.V.col(j);
    return out;
}

inline double spectral_scale(const CVector& k) {
    double s = 1.0;
    for (int i = 0; i < k.size(); ++i) s = std::max(s, std::abs(k(i)));
    return s;
}

inline std::vector<int> ascending_order(const CVector& k) {
    std::vector<int> p(k.size());
    std::iota(p.begin(), p.end(), 0);
    std::sort(p.begin(), p.end(), [&](int a, int b) { return k(a).real() < k(b).real(); });
    return p;
}

/// Real-axis spectrum in ascending order; raises NonRealMode when an eigenvalue
/// has a visible imaginary part.
inline Spectral real_spectrum(const Model& model, double x, double E) {
    Spectral s = decompose(model.companion(x, E));
    const double scale = spectral_scale(s.k);
    for (int j = 0; j < s.k.size(); ++j)
        if (std::abs(s.k(j).imag()) > 1e-8 * scale)
            throw Error(ErrorCode::NonRealMode, "complex mode k=" + std::to_string(s.k(j).real()) + "+" +
                                                    std::to_string(s.k(j).imag()) + "i at x=" + std::to_string(x) +
                                                    ", E=" + std::to_string(E));
    return permute(s, ascending_order(s.k));
}

// ---------------------------------------------------------------- ModeField

struct ModeField {
    double E = 0.0, delta = 0.0;
    std::vector<double> grid;
    Eigen::MatrixXd values;  // rows: nodes, columns: labels
    Eigen::MatrixXd slopes;  // d k_j / dx
    RVector k_left, k_right;
    std::vector<int> permutation_pi;  // label j -> ascending rank at +infinity

    int modes() const { return int(values.cols()); }
    double min_gap() const {
        double g = std::numeric_limits<double>::infinity();
        for (Eigen::Index r = 0; r < values.rows(); ++r)
            for (int i = 0; i < modes(); ++i)
                for (int j = i + 1; j < modes(); ++j) g = std::min(g, std::abs(values(r, i) - values(r, j)));
        return g;
    }
};

struct TrackOptions {
    double move_fraction = 0.2;
    double min_interval = 1e-7;
    double tie = 1e-10;
};

inline RVector sorted_real(const CVector& k) {
    RVector r(k.size());
    for (int i = 0; i < k.size(); ++i) r(i) = k(i).real();
    std::sort(r.data(), r.data() + r.size());
    return r;
}

/// Ascending spectra of the declared limit companions.
inline std::pair<RVector, RVector> limit_spectra(const Model& model, double E) {
    std::pair<RVector, RVector> out;
    for (int side : {-1, 1}) {
        CVector k = eigenvalues(model.companion_limit(side, E));
        const double scale = spectral_scale(k);
        for (int j = 0; j < k.size(); ++j)
            if (std::abs(k(j).imag()) > 1e-8 * scale)
                throw Error(ErrorCode::NonRealMode, "complex asymptotic mode at side " + std::to_string(side));
        RVector r = sorted_real(k);
        for (int j = 0; j + 1 < r.size(); ++j)
            if (r(j + 1) - r(j) < 1e-10 * scale)
                throw Error(ErrorCode::DegenerateAsymptotic, "asymptotic spectrum is degenerate at side " + std::to_string(side));
        (side < 0 ? out.first : out.second) = r;
    }
    return out;
}

/// Default tracking grid: an even node count so that x = 0 is never a node.
inline std::vector<double> default_grid(const Model& model, int n = 800) {
    const double X = model.truncation();
    return linspace(-X, X, n);
}

/// Label the real-axis branches on `grid` (refined adaptively).  Labels ascend
/// at the first node and are propagated by optimal assignment against a
/// first-order prediction, which follows analytic branches through transversal
/// crossings when delta = 0.
inline ModeField track_modes(const Model& model, double E, const std::vector<double>& grid, const TrackOptions& opt = {}) {
    if (grid.size() < 2) throw Error(ErrorCode::Validation, "grid needs two nodes");
    const int md = model.md();
    ModeField f;
    f.E = E;
    f.delta = model.delta();

    std::vector<double> xs;
    std::vector<RVector> ks, ss;
    auto node = [&](double x) {
        Spectral s = real_spectrum(model, x, E);
        CVector dk = eigenvalue_derivatives(s, model.companion_dx(x, E));
        return std::pair<RVector, RVector>(s.k.real(), dk.real());
    };

    auto [k0, s0] = node(grid.front());
    xs.push_back(grid.front());
    ks.push_back(k0);
    ss.push_back(s0);
    const double span = grid.back() - grid.front();

    for (std::size_t g = 1; g < grid.size(); ++g) {
        std::vector<double> pending{grid[g]};
        while (!pending.empty()) {
            const double xb = pending.back();
            const double xa = xs.back();
            const RVector& ka = ks.back();
            const RVector& sa = ss.back();
            Spectral s = real_spectrum(model, xb, E);
            CVector dk = eigenvalue_derivatives(s, model.companion_dx(xb, E));
            CVector pred(md), cand(md);
            const double L = xb - xa;
            // Values and slopes are compared together; slopes disambiguate crossings.
            for (int j = 0; j < md; ++j) {
                pred(j) = cplx(ka(j) + L * sa(j), L * sa(j));
                cand(j) = cplx(s.k(j).real(), L * dk(j).real());
            }
            Assignment a = optimal_assignment(pred, cand);
            double moved = 0.0;
            for (int j = 0; j < md; ++j) moved = std::max(moved, std::abs(s.k(a.perm[j]).real() - ka(j)));
            double gap = std::numeric_limits<double>::infinity();
            for (int i = 0; i < md; ++i)
                for (int j = i + 1; j < md; ++j) gap = std::min(gap, std::abs(ka(i) - ka(j)));
            const bool ambiguous = md > 1 && a.runner_up - a.cost < opt.tie;
            const bool too_far = md > 1 && moved > opt.move_fraction * gap;
            if ((ambiguous || too_far) && L > opt.min_interval * (1.0 + span)) {
                pending.push_back(0.5 * (xa + xb));
                continue;
            }
            if (ambiguous) throw Error(ErrorCode::AmbiguousLabeling, "labels ambiguous near x=" + std::to_string(xb));
            RVector kb(md), sb(md);
            for (int j = 0; j < md; ++j) {
                kb(j) = s.k(a.perm[j]).real();
                sb(j) = dk(a.perm[j]).real();
            }
            xs.push_back(xb);
            ks.push_back(kb);
            ss.push_back(sb);
            pending.pop_back();
        }
    }

    f.grid = xs;
    f.values.resize(Eigen::Index(xs.size()), md);
    f.slopes.resize(Eigen::Index(xs.size()), md);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        f.values.row(Eigen::Index(i)) = ks[i].transpose();
        f.slopes.row(Eigen::Index(i)) = ss[i].transpose();
    }
    auto lim = limit_spectra(model, E);
    f.k_left = lim.first;
    f.k_right = lim.second;
    // pi: match the right-edge labels to the ascending +infinity values.
    CVector edge(md), right(md);
    for (int j = 0; j < md; ++j) {
        edge(j) = ks.back()(j);
        right(j) = f.k_right(j);
    }
    f.permutation_pi = optimal_assignment(edge, right).perm;
    return f;
}

struct AsymptoticModes {
    RVector left, right;
    std::vector<int> pi;
};

inline AsymptoticModes asymptotic_modes(const Model& model, double E) {
    ModeField f = track_modes(model, E, default_grid(model, 400));
    return {f.k_left, f.k_right, f.permutation_pi};
}

// ---------------------------------------------------------------- crossings

struct Crossing {
    double x = 0.0;
    int i = 0, j = 0;  // labels, i < j
    double slope = 0.0;  // d/dx (k_i - k_j)
};

struct CrossingReport {
    double E = 0.0;
    std::vector<Crossing> entries;
    std::vector<int> permutation_pi;
    bool one_per_pair = true;
    bool positive_slopes = true;
    bool monotone_index = true;
    bool ordered_at_left = true;

    std::size_t count() const { return entries.size(); }
    bool ac_pattern() const { return one_per_pair && positive_slopes && monotone_index && ordered_at_left; }
};

namespace detail {

/// Spectrum at x labeled against (values, slopes) known at x_ref.
inline std::pair<RVector, RVector> branch_values(const Model& model, double E, double x, double x_ref, const RVector& k_ref,
                                                 const RVector& s_ref) {
    const int md = model.md();
    Spectral s = real_spectrum(model, x, E);
    CVector dk = eigenvalue_derivatives(s, model.companion_dx(x, E));
    const double L = std::max(std::abs(x - x_ref), 1e-3);
    CVector pred(md), cand(md);
    for (int j = 0; j < md; ++j) {
        pred(j) = cplx(k_ref(j) + (x - x_ref) * s_ref(j), L * s_ref(j));
        cand(j) = cplx(s.k(j).real(), L * dk(j).real());
    }
    Assignment a = optimal_assignment(pred, cand);
    RVector k(md), sl(md);
    for (int j = 0; j < md; ++j) {
        k(j) = s.k(a.perm[j]).real();
        sl(j) = dk(a.perm[j]).real();
    }
    return {k, sl};
}

}  // namespace detail

/// Real crossings of the analytic branches at delta = 0.
inline CrossingReport detect_real_crossings(const Model& model_in, double E) {
    Model model = model_in.with_delta(0.0);
    const int md = model.md();
    ModeField f = track_modes(model, E, default_grid(model));
    CrossingReport rep;
    rep.E = E;
    rep.permutation_pi = f.permutation_pi;
    std::vector<std::vector<int>> partners(md);
    for (int i = 0; i < md; ++i)
        for (int j = i + 1; j < md; ++j) {
            int count = 0;
            for (std::size_t n = 0; n + 1 < f.grid.size(); ++n) {
                double ga = f.values(Eigen::Index(n), i) - f.values(Eigen::Index(n), j);
                double gb = f.values(Eigen::Index(n + 1), i) - f.values(Eigen::Index(n + 1), j);
                if ((ga < 0) == (gb < 0)) continue;
                double a = f.grid[n], b = f.grid[n + 1];
                RVector ka = f.values.row(Eigen::Index(n)).transpose(), sa = f.slopes.row(Eigen::Index(n)).transpose();
                double xm = 0.5 * (a + b);
                for (int it = 0; it < 200; ++it) {
                    xm = 0.5 * (a + b);
                    auto [km, sm] = detail::branch_values(model, E, xm, a, ka, sa);
                    double gm = km(i) - km(j);
                    if (std::abs(gm) < 1e-10 || (b - a) < 1e-15 * (1.0 + std::abs(xm))) break;
                    if ((gm < 0) == (ga < 0)) {
                        a = xm;
                        ka = km;
                        sa = sm;
                        ga = gm;
                    } else {
                        b = xm;
                    }
                }
                const double h = 1e-5;
                auto [kp, sp] = detail::branch_values(model, E, xm + h, a, ka, sa);
                auto [kq, sq] = detail::branch_values(model, E, xm - h, a, ka, sa);
                double slope = ((kp(i) - kp(j)) - (kq(i) - kq(j))) / (2 * h);
                if (std::abs(slope) < 1e-8)
                    throw Error(ErrorCode::TangentialCrossing, "tangential crossing of modes " + std::to_string(i + 1) + "," +
                                                                   std::to_string(j + 1) + " at x=" + std::to_string(xm));
                rep.entries.push_back({xm, i, j, slope});
                if (slope <= 0) rep.positive_slopes = false;
                partners[i].push_back(j);
                partners[j].push_back(i);
                ++count;
            }
            if (count > 1) rep.one_per_pair = false;
        }
    for (int j = 0; j < md; ++j) {
        bool above = false, below = false;
        for (int p : partners[j]) (p > j ? above : below) = true;
        if (above && below) rep.monotone_index = false;
    }
    for (int j = 0; j + 1 < md; ++j)
        if (!(f.values(0, j) < f.values(0, j + 1))) rep.ordered_at_left = false;
    std::sort(rep.entries.begin(), rep.entries.end(), [](const Crossing& a, const Crossing& b) { return a.x < b.x; });
    return rep;
}

// ---------------------------------------------------------------- complex continuation

/// Continuity tracker for the labeled spectrum along straight segments in the
/// complex plane.  Step length is halved until every eigenvalue moves less
/// than `move_fraction` times the current minimum gap.
class PathTracker {
public:
    PathTracker(const Model& model, double E, cplx z, CVector labeled, double move_fraction = 0.3)
        : model_(model), E_(E), z_(z), k_(std::move(labeled)), frac_(move_fraction) {}

    cplx position() const { return z_; }
    const CVector& values() const { return k_; }

    /// Spectrum at z labeled against the current values (no state change).
    CVector labeled_at(cplx z, bool strict = false) const {
        CVector cand = eigenvalues(model_.companion(z, E_));
        Assignment a = optimal_assignment(k_, cand);
        if (strict && k_.size() > 1 && a.runner_up - a.cost < 1e-10)
            throw Error(ErrorCode::MatchingAmbiguity, "labels ambiguous at z=" + fmt(z));
        CVector out(k_.size());
        for (int j = 0; j < k_.size(); ++j) out(j) = cand(a.perm[j]);
        return out;
    }

    void advance_to(cplx target) {
        double step = std::abs(target - z_);
        while (std::abs(target - z_) > 0.0) {
            const double remaining = std::abs(target - z_);
            const double h = std::min(step, remaining);
            const cplx zt = h >= remaining ? target : z_ + (target - z_) * (h / remaining);
            CVector cand = eigenvalues(model_.companion(zt, E_));
            Assignment a = optimal_assignment(k_, cand);
            double moved = 0.0;
            for (int j = 0; j < k_.size(); ++j) moved = std::max(moved, std::abs(cand(a.perm[j]) - k_(j)));
            const double gap = min_gap(k_);
            const bool ok = k_.size() == 1 || (moved < frac_ * gap && a.runner_up - a.cost >= 1e-10);
            if (!ok) {
                step = 0.5 * h;
                if (step < 1e-13 * (1.0 + std::abs(z_)))
                    throw Error(ErrorCode::MatchingAmbiguity, "continuation stalled at z=" + fmt(z_));
                continue;
            }
            for (int j = 0; j < k_.size(); ++j) k_(j) = cand(a.perm[j]);
            z_ = zt;
            ++steps_;
            step = 1.5 * h;
        }
    }

    int steps() const { return steps_; }

private:
    Model model_;
    double E_;
    cplx z_;
    CVector k_;
    double frac_;
    int steps_ = 0;

    static std::string fmt(cplx z) { return "(" + std::to_string(z.real()) + "," + std::to_string(z.imag()) + ")"; }
};

struct ContinuationResult {
    CVector end_values;
    std::vector<int> permutation;  // for closed paths: k~_j = k_{perm[j]}
};

/// Continue labeled values along a polyline.  For closed paths the returned
/// permutation is pi_0.
inline ContinuationResult continue_along_path(const Model& model, double E, const std::vector<cplx>& path, const CVector& start) {
    PathTracker t(model, E, path.front(), start);
    for (std::size_t i = 1; i < path.size(); ++i) t.advance_to(path[i]);
    ContinuationResult r;
    r.end_values = t.values();
    r.permutation = optimal_assignment(r.end_values, start).perm;
    return r;
}

// ---------------------------------------------------------------- branch points

struct BranchPoint {
    int i = 0, j = 1;  // labels (ascending on the real axis)
    cplx z0;
    double loop_radius = 0.0;
    double s_residual = 0.0;
    cplx s_prime;
};

struct BranchOptions {
    int max_iterations = 60;
    double radius_fraction = 0.3;
};

/// Labeled spectrum at a complex point reached vertically from the real axis.
inline CVector spectrum_from_axis(const Model& model, double E, cplx z) {
    Spectral s = real_spectrum(model, z.real(), E);
    PathTracker t(model, E, cplx(z.real()), s.k);
    t.advance_to(z);
    return t.values();
}

/// Newton iteration on the squared gap s(z) = (k_i - k_j)^2.
inline BranchPoint locate_branch_point(const Model& model, double E, std::pair<int, int> pair, cplx seed,
                                       const BranchOptions& opt = {}) {
    const double Y = model.spec().strip_half_width;
    if (!(std::abs(seed.imag()) < Y)) throw Error(ErrorCode::LeftStrip, "seed outside the strip");
    const auto [pi, pj] = pair;
    CVector ref = spectrum_from_axis(model, E, seed);
    auto labeled = [&](cplx z, const CVector& r) {
        CVector cand = eigenvalues(model.companion(z, E));
        Assignment a = optimal_assignment(r, cand);
        CVector out(r.size());
        for (int j = 0; j < r.size(); ++j) out(j) = cand(a.perm[j]);
        return out;
    };
    auto sq = [&](const CVector& k) { return (k(pi) - k(pj)) * (k(pi) - k(pj)); };

    cplx z = seed;
    double scale = 1.0 + std::pow(spectral_scale(ref), 2);
    double last_step = std::numeric_limits<double>::infinity();
    cplx s = sq(ref), ds;
    for (int it = 0; it < opt.max_iterations; ++it) {
        const double h = 1e-5 * (1.0 + std::abs(z));
        CVector kp = labeled(z + h, ref), km = labeled(z - h, ref);
        ds = (sq(kp) - sq(km)) / (2.0 * h);
        if (std::abs(s) < 1e-12 * scale && last_step < 1e-12 * (1.0 + std::abs(z))) break;
        cplx dz = -s / ds;
        // Damp steps that would jump far relative to the distance from the axis.
        const double cap = 0.5 * std::max(std::abs(z.imag()), 1e-3);
        if (std::abs(dz) > cap) dz *= cap / std::abs(dz);
        cplx zn = z + dz;
        if (!(std::abs(zn.imag()) < Y)) throw Error(ErrorCode::LeftStrip, "Newton iterate left the strip");
        // Walk the labels to the new iterate; only the pair may become ambiguous.
        const int sub = std::abs(dz) > 1e-3 ? 8 : 1;
        for (int q = 1; q <= sub; ++q) ref = labeled(z + dz * (double(q) / sub), ref);
        z = zn;
        s = sq(ref);
        last_step = std::abs(dz);
        if (it == opt.max_iterations - 1) throw Error(ErrorCode::NoConvergence, "branch point Newton did not converge");
    }
    if (std::abs(z.imag()) <= 1e-10) throw Error(ErrorCode::CollapsedToRealAxis, "branch point collapsed to the real axis");
    BranchPoint bp;
    bp.i = std::min(pi, pj);
    bp.j = std::max(pi, pj);
    bp.z0 = z;
    bp.loop_radius = opt.radius_fraction * std::abs(z.imag());
    bp.s_residual = std::abs(s);
    bp.s_prime = ds;
    return bp;
}

/// Linear-model seed for the avoided crossing near x_star.
inline cplx branch_seed(const Model& model, double E, double x_star, int i, int j, double slope) {
    Spectral s = real_spectrum(model, x_star, E);
    double gap = std::abs(s.k(j).real() - s.k(i).real());
    double sl = std::max(std::abs(slope), 1e-6);
    return cplx(x_star, std::max(gap / (2.0 * sl), 1e-3));
}

}  // namespace cwkb
