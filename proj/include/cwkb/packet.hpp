#pragma once

// Wave packets: energy densities, E-superpositions of stationary solutions,
// free asymptotic waves, the transmitted-wave profile and its leading term.

#include <boost/math/tools/roots.hpp>

#include "cwkb/frame.hpp"
#include "cwkb/scatter.hpp"

namespace cwkb {

// ---------------------------------------------------------------- density

/// Q(E, eps) = exp(-G(E)/eps) exp(-i J(E)/eps) P(E, eps) over the window.
class EnergyDensity {
public:
    EnergyDensity() = default;
    EnergyDensity(const DensitySpec& s, std::array<double, 2> window)
        : spec_(s), window_(window) {
        G_expr_ = expr::parse(s.G, {"E"});
        J_expr_ = expr::parse(s.J, {"E"});
        P_expr_ = expr::parse(s.P, {"E", "eps"});
        G_ = expr::Program(G_expr_, {"E"});
        J_ = expr::Program(J_expr_, {"E"});
        P_ = expr::Program(P_expr_, {"E", "eps"});
    }

    static EnergyDensity of(const Model& model) {
        if (!model.spec().density) throw Error(ErrorCode::Schema, "model carries no density");
        return EnergyDensity(*model.spec().density, model.spec().energy_window);
    }

    double E0() const { return spec_.E0; }
    double g() const { return spec_.g; }
    std::array<double, 2> window() const { return window_; }
    const DensitySpec& spec() const { return spec_; }

    double G(double E) const {
        const cplx v[1] = {E};
        return G_(v).real();
    }
    double J(double E) const {
        const cplx v[1] = {E};
        return J_(v).real();
    }
    cplx P(double E, double eps) const {
        const cplx v[2] = {E, eps};
        return scale_ * P_(v);
    }
    cplx operator()(double E, double eps) const { return std::exp(-(G(E) + I1 * J(E)) / eps) * P(E, eps); }

    /// Same density times a constant (linearity checks).
    EnergyDensity scaled(cplx s) const {
        EnergyDensity out = *this;
        out.scale_ *= s;
        return out;
    }

    const expr::Expression& G_expression() const { return G_expr_; }
    const expr::Expression& P_expression() const { return P_expr_; }

private:
    DensitySpec spec_;
    std::array<double, 2> window_{0.0, 1.0};
    expr::Expression G_expr_, J_expr_, P_expr_;
    expr::Program G_, J_, P_;
    cplx scale_ = 1.0;
};

struct DensityCheck {
    bool c1 = false, c2 = false, c3 = false;
    double G_min = 0.0, G_at_E0 = 0.0, second_derivative = 0.0, g = 0.0;
    double P_sup = 0.0, dP_sup = 0.0;
    std::string note;
    bool ok() const { return c1 && c2 && c3; }
};

/// C1: G >= 0, G(E0) = 0, G''(E0) = g, E0 interior.  C2: J finite and real.
/// C3: P and dP/dE bounded on the window for eps in (0, eps_max].
inline DensityCheck check_density(const EnergyDensity& Q, double eps_max = 0.1) {
    DensityCheck r;
    const auto [lo, hi] = Q.window();
    const auto Es = linspace(lo, hi, 401);
    r.G_min = std::numeric_limits<double>::infinity();
    bool j_ok = true;
    for (double E : Es) {
        r.G_min = std::min(r.G_min, Q.G(E));
        j_ok = j_ok && std::isfinite(Q.J(E));
    }
    r.G_at_E0 = Q.G(Q.E0());
    r.g = Q.g();
    const expr::Expression d2 = expr::derivative(expr::derivative(Q.G_expression(), "E"), "E");
    r.second_derivative = d2.evaluate({{"E", Q.E0()}}).real();
    const bool interior = Q.E0() > lo && Q.E0() < hi;
    r.c1 = interior && r.G_min >= -1e-14 && std::abs(r.G_at_E0) < 1e-12 && std::abs(r.second_derivative - Q.g()) < 1e-6 && Q.g() > 0;
    if (!interior) r.note = "E0 outside the open window";
    // The minimum must be unique: G > 0 away from E0.
    for (double E : Es)
        if (std::abs(E - Q.E0()) > 0.05 * (hi - lo) && Q.G(E) <= 0.0) {
            r.c1 = false;
            r.note = "G vanishes away from E0";
        }
    r.c2 = j_ok;
    const expr::Expression dP = expr::derivative(Q.P_expression(), "E");
    bool p_ok = true;
    for (double eps : {eps_max, 0.5 * eps_max, 0.1 * eps_max, 0.01 * eps_max})
        for (double E : linspace(lo, hi, 101)) {
            const double p = std::abs(Q.P(E, eps)), dp = std::abs(dP.evaluate({{"E", E}, {"eps", eps}}));
            p_ok = p_ok && std::isfinite(p) && std::isfinite(dp);
            r.P_sup = std::max(r.P_sup, p);
            r.dP_sup = std::max(r.dP_sup, dp);
        }
    r.c3 = p_ok && r.P_sup < 1e6 && r.dP_sup < 1e6;
    return r;
}

// ---------------------------------------------------------------- fields

enum class FieldKind { Exact, AsymptoticMinus, AsymptoticPlus, Glued, Leading, Gaussian };

inline const char* to_string(FieldKind k) {
    switch (k) {
    case FieldKind::Exact: return "exact";
    case FieldKind::AsymptoticMinus: return "asymptotic-";
    case FieldKind::AsymptoticPlus: return "asymptotic+";
    case FieldKind::Glued: return "glued";
    case FieldKind::Leading: return "leading";
    case FieldKind::Gaussian: return "gaussian";
    }
    return "?";
}

/// Samples of a field at time t; values has one row per x and one column per component.
struct WaveField {
    double t = 0.0;
    std::vector<double> x;
    CMatrix values;
    FieldKind kind = FieldKind::Exact;

    double norm() const { return l2_norm(x, values); }
};

inline void require_same_grid(const WaveField& a, const WaveField& b) {
    if (a.x.size() != b.x.size() || a.t != b.t || a.values.cols() != b.values.cols())
        throw Error(ErrorCode::GridMismatch, "fields live on different grids");
    for (std::size_t i = 0; i < a.x.size(); ++i)
        if (a.x[i] != b.x[i]) throw Error(ErrorCode::GridMismatch, "fields live on different grids");
}

inline double l2_distance(const WaveField& a, const WaveField& b) {
    require_same_grid(a, b);
    return l2_norm(a.x, a.values - b.values);
}

inline double relative_distance(const WaveField& a, const WaveField& ref) { return l2_distance(a, ref) / ref.norm(); }

inline WaveField operator+(WaveField a, const WaveField& b) {
    require_same_grid(a, b);
    a.values += b.values;
    return a;
}

/// 3u^2 - 2u^3 on [0, 1].
inline double smoothstep(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return x * x * (3.0 - 2.0 * x);
}

/// omega(x) right + (1 - omega(x)) left.
inline WaveField glue_asymptotic(const WaveField& left, const WaveField& right) {
    require_same_grid(left, right);
    WaveField out = left;
    out.kind = FieldKind::Glued;
    for (std::size_t i = 0; i < out.x.size(); ++i) {
        const double w = smoothstep(out.x[i]);
        out.values.row(Eigen::Index(i)) = w * right.values.row(Eigen::Index(i)) + (1.0 - w) * left.values.row(Eigen::Index(i));
    }
    return out;
}

inline bool is_uniform(const std::vector<double>& x) {
    if (x.size() < 3) return true;
    const double h = (x.back() - x.front()) / double(x.size() - 1);
    for (std::size_t i = 0; i < x.size(); ++i)
        if (std::abs(x[i] - (x.front() + double(i) * h)) > 1e-9 * std::max(1.0, std::abs(h))) return false;
    return true;
}

// ---------------------------------------------------------------- inverse dispersion

/// E -> k_j(side inf, E) on the window and its inverse k -> E.
class InverseDispersion {
public:
    InverseDispersion() = default;
    InverseDispersion(const Model& model, int mode, int side) : model_(model), mode_(mode), side_(side) {
        const auto w = model.spec().energy_window;
        lo_ = w[0];
        hi_ = w[1];
        const double h = 1e-4 * (hi_ - lo_);
        double sign = 0.0;
        for (double E : linspace(lo_ + h, hi_ - h, 101)) {
            const double s = dk_dE(E);
            if (!(std::abs(s) > 1e-6)) throw Error(ErrorCode::GroupVelocity, "dk/dE vanishes near E = " + std::to_string(E));
            if (sign != 0.0 && s * sign < 0) throw Error(ErrorCode::GroupVelocity, "dk/dE changes sign on the window");
            sign = s;
        }
        k_lo_ = k_of(lo_);
        k_hi_ = k_of(hi_);
    }

    int mode() const { return mode_; }
    int side() const { return side_; }
    std::array<double, 2> k_range() const { return {std::min(k_lo_, k_hi_), std::max(k_lo_, k_hi_)}; }

    double k_of(double E) const {
        auto lim = limit_spectra(model_, E);
        return (side_ < 0 ? lim.first : lim.second)(mode_);
    }
    // Five-point central differences on the asymptotic mode.
    double dk_dE(double E) const {
        const double h = 1e-3;
        return (k_of(E - 2 * h) - 8 * k_of(E - h) + 8 * k_of(E + h) - k_of(E + 2 * h)) / (12 * h);
    }
    double d2k_dE2(double E) const {
        const double h = 1e-2;
        return (-k_of(E - 2 * h) + 16 * k_of(E - h) - 30 * k_of(E) + 16 * k_of(E + h) - k_of(E + 2 * h)) / (12 * h * h);
    }

    /// Root of k_of(E) = k; the bracket is the window widened by 10 percent.
    double E_of(double k) const {
        const double pad = 0.1 * (hi_ - lo_);
        auto f = [&](double E) { return k_of(E) - k; };
        double a = lo_ - pad, b = hi_ + pad;
        double fa = f(a), fb = f(b);
        if (fa * fb > 0) throw Error(ErrorCode::Validation, "k = " + std::to_string(k) + " outside the dispersion range");
        boost::uintmax_t it = 200;
        auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(52), it);
        return 0.5 * (r.first + r.second);
    }
    double dE_dk(double k) const { return 1.0 / dk_dE(E_of(k)); }
    double d2E_dk2(double k) const {
        const double E = E_of(k), s = dk_dE(E);
        return -d2k_dE2(E) / (s * s * s);
    }

private:
    Model model_;
    int mode_ = 0, side_ = 1;
    double lo_ = 0.0, hi_ = 1.0, k_lo_ = 0.0, k_hi_ = 0.0;
};

// ---------------------------------------------------------------- E quadrature

struct EnergyQuadrature {
    QuadratureRule rule;
    double lo = 0.0, hi = 0.0;
    int panels = 0;
    double phase_rate = 0.0;
};

/// Window trimmed to where e^{-G/eps} exceeds 1e-17, split into 20-point
/// Gauss-Legendre panels each spanning at most `panel_phase` radians.
inline EnergyQuadrature energy_quadrature(const EnergyDensity& Q, double eps, double phase_rate, double panel_phase = 18.0,
                                          int min_panels = 4, double factor = 1.0) {
    const auto [lo, hi] = Q.window();
    const int ns = 4001;
    const double cut = 17.0 * std::log(10.0);
    int first = -1, last = -1;
    for (int i = 0; i < ns; ++i) {
        const double E = lo + (hi - lo) * i / (ns - 1);
        if (Q.G(E) / eps <= cut) {
            if (first < 0) first = i;
            last = i;
        }
    }
    EnergyQuadrature q;
    if (first < 0) return q;
    const double step = (hi - lo) / (ns - 1);
    q.lo = std::max(lo, lo + (first - 1) * step);
    q.hi = std::min(hi, lo + (last + 1) * step);
    q.phase_rate = phase_rate;
    const int want = int(std::ceil(factor * phase_rate * (q.hi - q.lo) / panel_phase));
    q.panels = std::max(int(std::ceil(factor * min_panels)), want);
    q.rule = composite_gauss(q.lo, q.hi, q.panels, 20);
    return q;
}

/// max |dk_j/dE| over the window, at the two ends and on a coarse interior grid.
inline double max_energy_slope(const Model& model) {
    const auto [lo, hi] = model.spec().energy_window;
    const double X = model.truncation(), h = 1e-4 * std::max(1.0, hi - lo);
    double K = 0.0;
    for (double E : linspace(lo + h, hi - h, 11)) {
        auto a = limit_spectra(model, E - h), b = limit_spectra(model, E + h);
        K = std::max({K, ((b.first - a.first) / (2 * h)).cwiseAbs().maxCoeff(), ((b.second - a.second) / (2 * h)).cwiseAbs().maxCoeff()});
        for (double x : linspace(-X, X, 21)) {
            try {
                RVector ka = sorted_real(real_spectrum(model, x, E - h).k), kb = sorted_real(real_spectrum(model, x, E + h).k);
                K = std::max(K, ((kb - ka) / (2 * h)).cwiseAbs().maxCoeff());
            } catch (const Error&) {
            }
        }
    }
    return K;
}

/// For free waves only: max |dk_j(+-inf)/dE| over the requested modes, plus
/// |d omega_j / dE| / (|x| + 4) folded in through the x-independent term.
inline double asymptotic_energy_slope(const Model& model, const std::vector<int>& modes, const FrameOptions& fo) {
    const auto [lo, hi] = model.spec().energy_window;
    double K = 0.0;
    for (int j : modes) {
        for (int side : {-1, 1}) {
            InverseDispersion inv(model, j, side);
            for (double E : linspace(lo + 1e-3, hi - 1e-3, 11)) K = std::max(K, std::abs(inv.dk_dE(E)));
        }
    }
    // omega' from frames at three energies; divided by 4 because the caller
    // multiplies by (|x| + 4).
    const double h = 1e-3 * (hi - lo);
    for (double E : {lo + 2 * h, 0.5 * (lo + hi), hi - 2 * h}) {
        EigenFrame a = kato_transport(model, E - h, fo), b = kato_transport(model, E + h, fo);
        for (int j : modes) {
            K = std::max(K, std::abs((b.omega_plus(j) - a.omega_plus(j)) / (2 * h)) / 4.0);
            K = std::max(K, std::abs((b.omega_minus(j) - a.omega_minus(j)) / (2 * h)) / 4.0);
        }
    }
    return K;
}

// ---------------------------------------------------------------- synthesis

struct SynthesisOptions {
    int incoming = 0;   // c(-inf) = e_incoming
    int block = 0;      // derivative stack level l: rows l*d .. l*d+d-1 of the companion frame
    bool exact = true;
    bool asymptotic = true;
    std::vector<int> asymptotic_modes;  // empty: all
    double panel_phase = 18.0;
    double node_factor = 1.0;           // 2 for the doubling check
    int min_panels = 4;
    double phase_margin = 1.25;
    FrameOptions frame{0.025, 1e-3, 0.1, 1e-11, 1e-13, false};
    CoefficientOptions coeff;
    // Free waves only: sample the slowly varying amplitude c_j e^{-i omega_j/eps} phi_j
    // on nested Chebyshev points and interpolate onto the E-rule.
    bool interpolate_amplitude = true;
    double amplitude_tol = 1e-9;
    int max_amplitude_nodes = 1024;
};

struct Synthesis {
    double eps = 0.0;
    std::vector<double> times, x;
    std::vector<WaveField> exact;                       // per time
    std::vector<std::vector<WaveField>> minus, plus;    // per time, per mode
    EnergyQuadrature quadrature;

    WaveField glued(std::size_t ti) const {
        WaveField out = glue_asymptotic(minus[ti][0], plus[ti][0]);
        for (std::size_t j = 1; j < minus[ti].size(); ++j) out = out + glue_asymptotic(minus[ti][j], plus[ti][j]);
        return out;
    }
};

namespace detail {

// Barycentric interpolation on the Chebyshev points cos(pi i / N), mapped to [lo, hi].
inline CMatrix chebyshev_interpolate(const CMatrix& samples, double lo, double hi, const std::vector<double>& at) {
    const int N = int(samples.rows()) - 1;
    std::vector<double> node(N + 1), w(N + 1);
    for (int i = 0; i <= N; ++i) {
        node[i] = 0.5 * (lo + hi) + 0.5 * (hi - lo) * std::cos(std::numbers::pi * i / N);
        w[i] = (i % 2 ? -1.0 : 1.0) * (i == 0 || i == N ? 0.5 : 1.0);
    }
    CMatrix out(Eigen::Index(at.size()), samples.cols());
    for (std::size_t a = 0; a < at.size(); ++a) {
        int hit = -1;
        double den = 0.0;
        Eigen::RowVectorXcd num = Eigen::RowVectorXcd::Zero(samples.cols());
        for (int i = 0; i <= N && hit < 0; ++i) {
            const double dx = at[a] - node[i];
            if (dx == 0.0) {
                hit = i;
                break;
            }
            num += (w[i] / dx) * samples.row(i);
            den += w[i] / dx;
        }
        out.row(Eigen::Index(a)) = hit >= 0 ? Eigen::RowVectorXcd(samples.row(hit)) : Eigen::RowVectorXcd(num / den);
    }
    return out;
}

void asymptotic_by_interpolation(const Model& model, const EnergyDensity& Q, double eps, const std::vector<double>& x,
                                 const std::vector<int>& modes, const struct SynthesisOptions& opt, struct Synthesis& out);

}  // namespace detail

/// E-superposition of stationary solutions psi = sum_j c_j e^{-i Lambda_j/eps} phi_j,
/// and of their free asymptotic waves at -inf and +inf, for several times at once.
inline Synthesis synthesize(const Model& model, const EnergyDensity& Q, double eps, const std::vector<double>& times,
                            const std::vector<double>& x, const SynthesisOptions& opt = {}) {
    if (!(eps > 0)) throw Error(ErrorCode::Validation, "eps must be positive");
    if (x.empty() || !std::is_sorted(x.begin(), x.end())) throw Error(ErrorCode::Validation, "x grid must be ascending");
    const int d = model.d(), md = model.md();
    if (opt.incoming < 0 || opt.incoming >= md) throw Error(ErrorCode::Validation, "incoming mode out of range");
    if (opt.block < 0 || opt.block >= model.m()) throw Error(ErrorCode::Validation, "derivative level out of range");
    const std::size_t nx = x.size(), nt = times.size();

    double tmax = 0.0;
    for (double t : times) tmax = std::max(tmax, std::abs(t));
    const double xmax = std::max(std::abs(x.front()), std::abs(x.back()));
    std::vector<int> modes = opt.asymptotic_modes;
    if (modes.empty())
        for (int j = 0; j < md; ++j) modes.push_back(j);
    const double K = opt.exact ? max_energy_slope(model) : asymptotic_energy_slope(model, modes, opt.frame);
    double Jrate = 0.0;
    {
        const auto [lo, hi] = Q.window();
        const double h = 1e-5 * (hi - lo);
        for (double E : linspace(lo + h, hi - h, 201)) Jrate = std::max(Jrate, std::abs(Q.J(E + h) - Q.J(E - h)) / (2 * h));
    }
    const double rate = opt.phase_margin * (tmax + (xmax + 4.0) * K + Jrate) / eps;

    Synthesis out;
    out.eps = eps;
    out.times = times;
    out.x = x;
    out.quadrature = energy_quadrature(Q, eps, rate, opt.panel_phase, opt.min_panels, opt.node_factor);

    auto blank = [&](double t, FieldKind kind) {
        WaveField w;
        w.t = t;
        w.x = x;
        w.kind = kind;
        w.values = CMatrix::Zero(Eigen::Index(nx), d);
        return w;
    };
    for (double t : times) {
        if (opt.exact) out.exact.push_back(blank(t, FieldKind::Exact));
        if (opt.asymptotic) {
            out.minus.emplace_back();
            out.plus.emplace_back();
            for (std::size_t q = 0; q < std::size_t(md); ++q) {
                out.minus.back().push_back(blank(t, FieldKind::AsymptoticMinus));
                out.plus.back().push_back(blank(t, FieldKind::AsymptoticPlus));
            }
        }
    }

    const auto& rule = out.quadrature.rule;
    if (!opt.exact && opt.asymptotic && opt.interpolate_amplitude) {
        detail::asymptotic_by_interpolation(model, Q, eps, x, modes, opt, out);
        return out;
    }
    CMatrix psi(Eigen::Index(nx), d);
    CVector L(md);
    for (std::size_t e = 0; e < rule.size(); ++e) {
        const double E = rule.nodes[e];
        const cplx wq = rule.weights[e] * Q(E, eps);
        if (wq == cplx(0.0)) continue;
        EigenFrame f = kato_transport(model, E, opt.frame);
        const double X0 = f.x0, X1 = f.x_max();

        CoefficientOptions co = opt.coeff;
        co.output_grid = {X0};
        std::vector<std::size_t> inside;  // indices of x strictly inside the table
        if (opt.exact)
            for (std::size_t i = 0; i < nx; ++i)
                if (x[i] > X0 && x[i] < X1) {
                    co.output_grid.push_back(x[i]);
                    inside.push_back(i);
                }
        co.output_grid.push_back(X1);
        CVector cin = CVector::Zero(md);
        cin(opt.incoming) = 1.0;
        CoefficientTrajectory tr = integrate_coefficients(f, eps, cin, co);

        std::vector<cplx> tphase(nt);
        for (std::size_t ti = 0; ti < nt; ++ti) tphase[ti] = wq * std::exp(-I1 * times[ti] * E / eps);

        if (opt.exact) {
            std::size_t next = 0;
            for (std::size_t i = 0; i < nx; ++i) {
                const CVector* c;
                if (x[i] <= X0)
                    c = &tr.c_minus;
                else if (x[i] >= X1)
                    c = &tr.c_plus;
                else
                    c = &tr.c[1 + next++];
                f.phase_at(x[i], L);
                CMatrix Phi;
                if (x[i] <= X0)
                    Phi = f.Phi.front().middleRows(opt.block * d, d);
                else if (x[i] >= X1)
                    Phi = f.Phi.back().middleRows(opt.block * d, d);
                else {
                    UniformStencil s = uniform_stencil(f.x0, f.h, f.n, x[i], 8);
                    Phi = CMatrix::Zero(d, md);
                    for (int q = 0; q < s.count; ++q) Phi += s.w[q] * f.Phi[s.first + q].middleRows(opt.block * d, d);
                }
                CVector v = CVector::Zero(d);
                for (int j = 0; j < md; ++j)
                    if ((*c)(j) != cplx(0.0)) v += (*c)(j) * std::exp(-I1 * L(j) / eps) * Phi.col(j);
                psi.row(Eigen::Index(i)) = v.transpose();
            }
            for (std::size_t ti = 0; ti < nt; ++ti) out.exact[ti].values += tphase[ti] * psi;
        }

        if (opt.asymptotic) {
            for (int side : {-1, 1}) {
                const CVector& c = side < 0 ? tr.c_minus : tr.c_plus;
                const CVector& k = side < 0 ? f.k_minus : f.k_plus;
                const CVector& om = side < 0 ? f.omega_minus : f.omega_plus;
                const CMatrix Phi = (side < 0 ? f.Phi.front() : f.Phi.back()).middleRows(opt.block * d, d);
                for (int j : modes) {
                    if (c(j) == cplx(0.0)) continue;
                    for (std::size_t i = 0; i < nx; ++i) {
                        const cplx s = c(j) * std::exp(-I1 * (k(j) * x[i] + om(j)) / eps);
                        for (std::size_t ti = 0; ti < nt; ++ti) {
                            auto& field = side < 0 ? out.minus[ti][std::size_t(j)] : out.plus[ti][std::size_t(j)];
                            field.values.row(Eigen::Index(i)) += (tphase[ti] * s) * Phi.col(j).transpose();
                        }
                    }
                }
            }
        }
    }
    return out;
}

namespace detail {

inline void asymptotic_by_interpolation(const Model& model, const EnergyDensity& Q, double eps, const std::vector<double>& x,
                                        const std::vector<int>& modes, const SynthesisOptions& opt, Synthesis& out) {
    const int d = model.d(), md = model.md();
    const auto& rule = out.quadrature.rule;
    if (rule.size() == 0) return;
    const double lo = out.quadrature.lo, hi = out.quadrature.hi;
    const int nm = int(modes.size()), width = 2 * nm * d;

    // columns: (side, mode, component)
    auto sample = [&](double E) {
        Eigen::RowVectorXcd row(width);
        EigenFrame f = kato_transport(model, E, opt.frame);
        CoefficientOptions co = opt.coeff;
        co.output_grid = {f.x0, f.x_max()};
        CVector cin = CVector::Zero(md);
        cin(opt.incoming) = 1.0;
        CoefficientTrajectory tr = integrate_coefficients(f, eps, cin, co);
        for (int s = 0; s < 2; ++s) {
            const CVector& c = s == 0 ? tr.c_minus : tr.c_plus;
            const CVector& om = s == 0 ? f.omega_minus : f.omega_plus;
            const CMatrix Phi = (s == 0 ? f.Phi.front() : f.Phi.back()).middleRows(opt.block * d, d);
            for (int q = 0; q < nm; ++q) {
                const int j = modes[std::size_t(q)];
                row.segment((s * nm + q) * d, d) = (c(j) * std::exp(-I1 * om(j) / eps)) * Phi.col(j).transpose();
            }
        }
        return row;
    };

    std::vector<double> w(rule.size());
    for (std::size_t e = 0; e < rule.size(); ++e) w[e] = std::abs(rule.weights[e] * Q(rule.nodes[e], eps));

    const double wmax = *std::max_element(w.begin(), w.end());
    int N = 32;
    CMatrix S(N + 1, width);
    for (int i = 0; i <= N; ++i) S.row(i) = sample(0.5 * (lo + hi) + 0.5 * (hi - lo) * std::cos(std::numbers::pi * i / N));
    CMatrix U = chebyshev_interpolate(S, lo, hi, rule.nodes);
    for (;;) {
        if (2 * N > opt.max_amplitude_nodes)
            throw Error(ErrorCode::QuadratureNonConvergence, "amplitude interpolation did not converge with " + std::to_string(N + 1) + " nodes");
        CMatrix S2(2 * N + 1, width);
        for (int i = 0; i <= 2 * N; ++i)
            S2.row(i) = i % 2 == 0 ? Eigen::RowVectorXcd(S.row(i / 2)) : sample(0.5 * (lo + hi) + 0.5 * (hi - lo) * std::cos(std::numbers::pi * i / (2 * N)));
        CMatrix U2 = chebyshev_interpolate(S2, lo, hi, rule.nodes);
        double diff = 0.0, size = 0.0;
        for (std::size_t e = 0; e < rule.size(); ++e) {
            diff = std::max(diff, w[e] * (U2.row(Eigen::Index(e)) - U.row(Eigen::Index(e))).cwiseAbs().maxCoeff());
            size = std::max(size, w[e] * U2.row(Eigen::Index(e)).cwiseAbs().maxCoeff());
        }
        S = std::move(S2);
        U = std::move(U2);
        N *= 2;
        // c carries absolute noise of about the integration rtol
        if (diff <= opt.amplitude_tol * size + 10.0 * opt.frame.rtol * wmax) break;
    }

    const std::size_t nx = x.size(), nt = out.times.size();
    for (std::size_t e = 0; e < rule.size(); ++e) {
        const double E = rule.nodes[e];
        const cplx wq = rule.weights[e] * Q(E, eps);
        if (wq == cplx(0.0)) continue;
        const auto lim = limit_spectra(model, E);
        for (int s = 0; s < 2; ++s) {
            const RVector& k = s == 0 ? lim.first : lim.second;
            for (int q = 0; q < nm; ++q) {
                const int j = modes[std::size_t(q)];
                const Eigen::RowVectorXcd u = U.row(Eigen::Index(e)).segment((s * nm + q) * d, d);
                for (std::size_t ti = 0; ti < nt; ++ti) {
                    auto& field = s == 0 ? out.minus[ti][std::size_t(j)] : out.plus[ti][std::size_t(j)];
                    const cplx tp = wq * std::exp(-I1 * out.times[ti] * E / eps);
                    for (std::size_t i = 0; i < nx; ++i) field.values.row(Eigen::Index(i)) += (tp * std::exp(-I1 * k(j) * x[i] / eps)) * u;
                }
            }
        }
    }
}

}  // namespace detail

inline WaveField synthesize_exact(const Model& model, const EnergyDensity& Q, double eps, double t, const std::vector<double>& x,
                                  SynthesisOptions opt = {}) {
    opt.exact = true;
    opt.asymptotic = false;
    return synthesize(model, Q, eps, {t}, x, opt).exact.front();
}

inline WaveField asymptotic_wave(const Model& model, const EnergyDensity& Q, double eps, double t, int side, int mode,
                                 const std::vector<double>& x, SynthesisOptions opt = {}) {
    opt.exact = false;
    opt.asymptotic = true;
    opt.asymptotic_modes = {mode};
    Synthesis s = synthesize(model, Q, eps, {t}, x, opt);
    return side < 0 ? s.minus[0][std::size_t(mode)] : s.plus[0][std::size_t(mode)];
}

// ---------------------------------------------------------------- transition profile

struct TransitionProfile {
    int j = 0, n = 1;
    std::vector<double> E_nodes, alpha_nodes, kappa_nodes;
    CubicSpline alpha_spline, kappa_spline;
    double E_star = 0.0, k_star = 0.0;
    double alpha_star = 0.0, kappa_star = 0.0;
    double d_alpha = 0.0, d2_alpha = 0.0, d_kappa = 0.0, d2_kappa = 0.0;
    double dE_dk = 0.0, d2E_dk2 = 0.0;
    cplx lambda1, lambda2;
    cplx theta;
    cplx action_star;
    CVector phi_n;  // phi_n(+inf, E*)
    BranchPoint bp;
    InverseDispersion dispersion;
    std::array<double, 2> k_window{0.0, 0.0};
    bool quadratic = false;

    /// Lambda(k) = lambda2 (k - k*)^2 / 2 + i lambda1 (k - k*).
    cplx Lambda(double k) const {
        const double u = k - k_star;
        return 0.5 * lambda2 * u * u + I1 * lambda1 * u;
    }
};

struct ProfileOptions {
    int nodes = 25;
    double fd_step = 0.01;
    int newton_steps = 2;
    FrameOptions frame{0.025, 1e-3, 0.1, 1e-11, 1e-13, false};
};

namespace detail {

struct ProfileSample {
    double alpha = 0.0, kappa = 0.0;
    cplx action;
    BranchPoint bp;
};

inline ProfileSample profile_sample(const Model& model, const EnergyDensity& Q, double E, int j, int n, const BranchPoint* warm,
                                    const FrameOptions& fo) {
    const int step = n > j ? 1 : -1;
    cplx A = 0.0;
    ProfileSample s;
    CrossingReport rep;
    bool have_rep = false;
    for (int l = j; l != n; l += step) {
        BranchPoint bp;
        if (warm && l == j)
            // Seed below the previous point: the vertical path from the axis must not reach it.
            bp = locate_branch_point(model, E, {std::min(l, l + step), std::max(l, l + step)},
                                     warm->z0 - cplx(0.0, 0.5 * warm->loop_radius));
        else {
            if (!have_rep) {
                rep = detect_real_crossings(model, E);
                have_rep = true;
            }
            bp = branch_point_for_pair(model, E, l, l + step, step > 0, &rep);
        }
        if (l == j) s.bp = bp;
        A += action_integral(model, E, bp, l).single;
    }
    EigenFrame f = kato_transport(model, E, fo);
    s.action = A;
    s.alpha = Q.G(E) + A.imag();
    s.kappa = Q.J(E) - A.real() + f.omega_plus(n).real();
    return s;
}

}  // namespace detail

/// alpha, kappa on an E grid, their minimizer E*, and the quantities
/// k*, lambda1, lambda2, theta of the transmitted wave n = pi(j).
inline TransitionProfile transition_profile(const Model& model, const EnergyDensity& Q, int j, const ProfileOptions& opt = {}) {
    const int md = model.md();
    const std::vector<int> pi = track_modes(model.with_delta(0.0), Q.E0(), default_grid(model, 400)).permutation_pi;
    TransitionProfile p;
    p.j = j;
    p.n = pi[std::size_t(j)];
    if (p.n == j) throw Error(ErrorCode::MissingBranchPoint, "mode " + std::to_string(j + 1) + " is not transmitted to another mode");
    if (p.n < 0 || p.n >= md) throw Error(ErrorCode::Validation, "bad transition target");

    const auto [lo, hi] = model.spec().energy_window;
    p.E_nodes = linspace(lo, hi, std::max(opt.nodes, 21));
    const BranchPoint* warm = nullptr;
    BranchPoint last;
    for (double E : p.E_nodes) {
        detail::ProfileSample s = detail::profile_sample(model, Q, E, j, p.n, warm, opt.frame);
        p.alpha_nodes.push_back(s.alpha);
        p.kappa_nodes.push_back(s.kappa);
        last = s.bp;
        warm = &last;
    }
    p.alpha_spline = CubicSpline(p.E_nodes, p.alpha_nodes);
    p.kappa_spline = CubicSpline(p.E_nodes, p.kappa_nodes);

    const std::size_t imin = std::size_t(std::min_element(p.alpha_nodes.begin(), p.alpha_nodes.end()) - p.alpha_nodes.begin());
    if (imin == 0 || imin + 1 == p.E_nodes.size())
        throw Error(ErrorCode::MinimizerAtBoundary, "alpha is minimal at the window edge E = " + std::to_string(p.E_nodes[imin]));
    double E = golden_section([&](double e) { return p.alpha_spline(e); }, p.E_nodes[imin - 1], p.E_nodes[imin + 1], 1e-10);
    for (int it = 0; it < 50; ++it) {
        const double dE = p.alpha_spline.derivative(E, 1) / p.alpha_spline.derivative(E, 2);
        E -= dE;
        if (std::abs(dE) < 1e-10) break;
    }

    // Direct differences of alpha and kappa around E*, with Newton refinement.
    const double h = opt.fd_step;
    auto differences = [&](double Ec) {
        std::array<detail::ProfileSample, 5> s;
        for (int q = -2; q <= 2; ++q) s[std::size_t(q + 2)] = detail::profile_sample(model, Q, Ec + q * h, j, p.n, &last, opt.frame);
        auto d1 = [&](auto get) { return (get(s[0]) - 8 * get(s[1]) + 8 * get(s[3]) - get(s[4])) / (12 * h); };
        auto d2 = [&](auto get) { return (-get(s[0]) + 16 * get(s[1]) - 30 * get(s[2]) + 16 * get(s[3]) - get(s[4])) / (12 * h * h); };
        auto ga = [](const detail::ProfileSample& x) { return x.alpha; };
        auto gk = [](const detail::ProfileSample& x) { return x.kappa; };
        p.alpha_star = s[2].alpha;
        p.kappa_star = s[2].kappa;
        p.action_star = s[2].action;
        p.bp = s[2].bp;
        p.d_alpha = d1(ga);
        p.d2_alpha = d2(ga);
        p.d_kappa = d1(gk);
        p.d2_kappa = d2(gk);
    };
    differences(E);
    for (int it = 0; it < opt.newton_steps && p.d2_alpha > 0; ++it) {
        const double dE = p.d_alpha / p.d2_alpha;
        if (std::abs(dE) < 1e-12) break;
        E -= dE;
        differences(E);
    }
    p.E_star = E;
    const double margin = 2.0 * h;
    if (E - lo < margin || hi - E < margin)
        throw Error(ErrorCode::MinimizerAtBoundary, "E* = " + std::to_string(E) + " is at the window edge");
    if (!(p.d2_alpha > 0)) throw Error(ErrorCode::NonPositiveLambda2, "alpha''(E*) = " + std::to_string(p.d2_alpha));

    p.dispersion = InverseDispersion(model, p.n, 1);
    p.k_star = p.dispersion.k_of(E);
    const double kE = p.dispersion.dk_dE(E), kEE = p.dispersion.d2k_dE2(E);
    p.dE_dk = 1.0 / kE;
    p.d2E_dk2 = -kEE / (kE * kE * kE);
    p.lambda1 = p.dE_dk * p.d_kappa;
    p.lambda2 = p.dE_dk * p.dE_dk * p.d2_alpha + I1 * (p.d2_kappa * p.dE_dk * p.dE_dk + p.d_kappa * p.d2E_dk2);
    if (!(p.lambda2.real() > 0)) throw Error(ErrorCode::NonPositiveLambda2, "Re lambda2 <= 0");
    p.k_window = p.dispersion.k_range();

    LoopPrefactor lp = loop_prefactor(model, E, p.bp);
    p.theta = lp.theta[std::size_t(j)];
    EigenFrame f = kato_transport(model, E, opt.frame);
    p.phi_n = f.phi_plus.col(p.n);
    for (auto& q : model.spec().quadratic_dispersion)
        if (q.first == p.n + 1 && q.second == 1) p.quadratic = true;
    return p;
}

// ---------------------------------------------------------------- leading term

/// sqrt(2 pi eps) P(E*) e^{-alpha/eps} e^{-i kappa/eps} e^{-i theta} |dE/dk| phi_n(+inf, E*).
inline CVector leading_prefactor(const TransitionProfile& p, const EnergyDensity& Q, double eps) {
    const cplx s = std::sqrt(2.0 * std::numbers::pi * eps) * Q.P(p.E_star, eps) * std::exp(-p.alpha_star / eps) *
                   std::exp(-I1 * p.kappa_star / eps) * std::exp(-I1 * p.theta) * std::abs(p.dE_dk);
    return s * p.phi_n;
}

struct KQuadrature {
    QuadratureRule rule;
    double lo = 0.0, hi = 0.0;
    int panels = 0;
};

/// k nodes over k_n(+inf, window), trimmed where e^{-Re Lambda/eps} < 1e-17.
inline KQuadrature k_quadrature(const TransitionProfile& p, double eps, double t, const std::vector<double>& x, double panel_phase = 18.0,
                                double factor = 1.0) {
    const double cut = 17.0 * std::log(10.0);
    const auto [a, b] = p.k_window;
    const int ns = 4001;
    int first = -1, last = -1;
    for (int i = 0; i < ns; ++i) {
        const double k = a + (b - a) * i / (ns - 1);
        if (p.Lambda(k).real() / eps <= cut) {
            if (first < 0) first = i;
            last = i;
        }
    }
    KQuadrature q;
    if (first < 0) return q;
    const double step = (b - a) / (ns - 1);
    q.lo = std::max(a, a + (first - 1) * step);
    q.hi = std::min(b, a + (last + 1) * step);
    // Phase rate |x + t E'(k) + d Im Lambda/dk| / eps over the grid and window.
    double rate = 0.0;
    for (double k : linspace(q.lo, q.hi, 41)) {
        const double v = t * p.dispersion.dE_dk(k);
        const double dIm = (p.lambda2.imag() * (k - p.k_star) + p.lambda1.real());
        rate = std::max({rate, std::abs(x.front() + v + dIm), std::abs(x.back() + v + dIm)});
    }
    rate /= eps;
    q.panels = std::max(int(std::ceil(4 * factor)), int(std::ceil(factor * 1.25 * rate * (q.hi - q.lo) / panel_phase)));
    q.rule = composite_gauss(q.lo, q.hi, q.panels, 20);
    return q;
}

/// F_eps g (x) = (2 pi eps)^{-1/2} sum_k w g(k) e^{-i k x / eps}; uses a
/// phase recurrence on uniform grids, reseeded every 64 points.
inline std::vector<cplx> fourier_eps(const QuadratureRule& rule, const std::vector<cplx>& g, const std::vector<double>& x, double eps) {
    const std::size_t nx = x.size();
    std::vector<cplx> out(nx, cplx(0.0));
    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * eps);
    const bool uniform = is_uniform(x) && nx > 2;
    const double h = uniform ? (x.back() - x.front()) / double(nx - 1) : 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const double k = rule.nodes[q];
        const cplx wg = rule.weights[q] * g[q] * norm;
        if (wg == cplx(0.0)) continue;
        if (!uniform) {
            for (std::size_t i = 0; i < nx; ++i) out[i] += wg * std::exp(-I1 * k * x[i] / eps);
            continue;
        }
        const cplx stepf = std::exp(-I1 * k * h / eps);
        cplx ph;
        for (std::size_t i = 0; i < nx; ++i) {
            if (i % 64 == 0)
                ph = std::exp(-I1 * k * (x.front() + double(i) * h) / eps);
            else
                ph *= stepf;
            out[i] += wg * ph;
        }
    }
    return out;
}

/// The scalar Fourier factor F_eps(e^{-itE(.)/eps} e^{-Lambda/eps} chi)(x).
inline std::vector<cplx> fourier_factor(const TransitionProfile& p, double eps, double t, const std::vector<double>& x, double factor = 1.0) {
    KQuadrature kq = k_quadrature(p, eps, t, x, 18.0, factor);
    std::vector<cplx> g(kq.rule.size());
    for (std::size_t q = 0; q < kq.rule.size(); ++q) {
        const double k = kq.rule.nodes[q];
        const double E = p.dispersion.E_of(k);
        // The constant e^{-itE*/eps} is pulled out to keep the phases small.
        g[q] = std::exp(-I1 * t * (E - p.E_star) / eps - p.Lambda(k) / eps);
    }
    std::vector<cplx> F = fourier_eps(kq.rule, g, x, eps);
    const cplx c = std::exp(-I1 * t * p.E_star / eps);
    for (auto& v : F) v *= c;
    return F;
}

inline WaveField leading_term(const TransitionProfile& p, const EnergyDensity& Q, double eps, double t, const std::vector<double>& x,
                              double factor = 1.0) {
    const CVector pre = leading_prefactor(p, Q, eps);
    const std::vector<cplx> F = fourier_factor(p, eps, t, x, factor);
    WaveField w;
    w.t = t;
    w.x = x;
    w.kind = FieldKind::Leading;
    w.values.resize(Eigen::Index(x.size()), pre.size());
    for (std::size_t i = 0; i < x.size(); ++i) w.values.row(Eigen::Index(i)) = F[i] * pre.transpose();
    return w;
}

/// e^{-i(k* x + t E*)/eps} M^{-1/2} e^{-N^2/(2 eps M)}, M = lambda2 + i E'' t, N = x + E' t + lambda1.
inline cplx gaussian_factor(const TransitionProfile& p, double eps, double t, double x) {
    const cplx M = p.lambda2 + I1 * p.d2E_dk2 * t;
    const cplx N = x + p.dE_dk * t + p.lambda1;
    return std::exp(-I1 * (p.k_star * x + t * p.E_star) / eps) / std::sqrt(M) * std::exp(-N * N / (2.0 * eps * M));
}

inline WaveField gaussian_closed_form(const TransitionProfile& p, const EnergyDensity& Q, double eps, double t, const std::vector<double>& x) {
    if (!p.quadratic) throw Error(ErrorCode::FlagAbsent, "mode " + std::to_string(p.n + 1) + " has no quadratic dispersion flag at +inf");
    const CVector pre = leading_prefactor(p, Q, eps);
    WaveField w;
    w.t = t;
    w.x = x;
    w.kind = FieldKind::Gaussian;
    w.values.resize(Eigen::Index(x.size()), pre.size());
    for (std::size_t i = 0; i < x.size(); ++i) w.values.row(Eigen::Index(i)) = gaussian_factor(p, eps, t, x[i]) * pre.transpose();
    return w;
}

/// Envelope width of the Gaussian at time t: sqrt(eps / Re(1/M)).
inline double gaussian_width(const TransitionProfile& p, double eps, double t) {
    const cplx M = p.lambda2 + I1 * p.d2E_dk2 * t;
    return std::sqrt(eps / (1.0 / M).real());
}

/// Uniform grid around the packet center -E' t - lambda1: `half_widths`
/// envelope widths on each side, spacing resolving both the envelope and
/// the carrier wavelength.
inline std::vector<double> packet_grid(const TransitionProfile& p, double eps, double t, double half_widths = 12.0) {
    const double s = gaussian_width(p, eps, t);
    const double c = -p.dE_dk * t - p.lambda1.real();
    const double wavelength = 2.0 * std::numbers::pi * eps / std::max(std::abs(p.k_star), 1e-3);
    const double dx = std::min(s / 8.0, wavelength / 8.0);
    const int n = int(std::ceil(2 * half_widths * s / dx)) + 1;
    return linspace(c - half_widths * s, c + half_widths * s, n);
}

/// L2 norm of the Fourier factor as stated by the norm law, (2 pi eps / ([E']^2 alpha''))^{1/4}.
inline double stated_fourier_norm(const TransitionProfile& p, double eps) {
    return std::pow(2.0 * std::numbers::pi * eps / (p.dE_dk * p.dE_dk * p.d2_alpha), 0.25);
}

/// The same norm from Plancherel: (int e^{-Re lambda2 u^2/eps} du)^{1/2} = (pi eps / Re lambda2)^{1/4}.
inline double plancherel_fourier_norm(const TransitionProfile& p, double eps) {
    return std::pow(std::numbers::pi * eps / p.lambda2.real(), 0.25);
}

// ---------------------------------------------------------------- diagnostics

struct DiagnosticsConfig {
    double beta = 0.25;
    double alpha_loc = 0.7;
    double tau = 0.4;
    double K_minus = 0.0, K_plus = 0.0;
    double mass_threshold = 0.99;
};

struct LocalizationReport {
    double lo = 0.0, hi = 0.0;  // C_t
    double fraction = 0.0;
    double center = 0.0, predicted_center = 0.0, tolerance = 0.0;
    bool covered = true;
    bool passes(double threshold) const { return fraction >= threshold && std::abs(center - predicted_center) <= tolerance; }
};

/// Mass of |field|^2 inside C_t = union over |k - k*| <= eps^tau of |x + E'(k) t| <= |t|^alpha.
inline LocalizationReport localization_report(const WaveField& field, const TransitionProfile& p, const DiagnosticsConfig& cfg, double eps) {
    const double t = field.t;
    if (std::abs(t) < 1.0) throw Error(ErrorCode::Validation, "localization needs |t| >= 1");
    LocalizationReport r;
    const double dk = std::pow(eps, cfg.tau), reach = std::pow(std::abs(t), cfg.alpha_loc);
    r.lo = std::numeric_limits<double>::infinity();
    r.hi = -r.lo;
    const auto [ka, kb] = p.k_window;
    for (double k : linspace(std::max(ka, p.k_star - dk), std::min(kb, p.k_star + dk), 201)) {
        const double c = -p.dispersion.dE_dk(k) * t;
        r.lo = std::min(r.lo, c - reach);
        r.hi = std::max(r.hi, c + reach);
    }
    const auto& x = field.x;
    if (x.front() > r.lo || x.back() < r.hi) throw Error(ErrorCode::GridCoverage, "grid does not cover C_t");
    double total = 0.0, inside = 0.0, first = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        const double h = x[i + 1] - x[i];
        const double a = field.values.row(Eigen::Index(i)).squaredNorm(), b = field.values.row(Eigen::Index(i + 1)).squaredNorm();
        const double m = 0.5 * h * (a + b), xm = 0.5 * (x[i] + x[i + 1]);
        total += m;
        first += 0.5 * h * (a * x[i] + b * x[i + 1]);
        if (xm >= r.lo && xm <= r.hi) inside += m;
    }
    r.fraction = inside / total;
    r.center = first / total;
    r.predicted_center = -p.dE_dk * t;
    r.tolerance = reach;
    return r;
}

/// K_- and K_+ from 1/|dk_j/dE| at both ends over the window.
inline std::pair<double, double> velocity_bounds(const Model& model, int j) {
    const auto [lo, hi] = model.spec().energy_window;
    const double h = 1e-4;
    double Kmin = std::numeric_limits<double>::infinity(), Kmax = 0.0;
    for (double E : linspace(lo + h, hi - h, 41)) {
        auto a = limit_spectra(model, E - h), b = limit_spectra(model, E + h);
        for (double s : {(b.first(j) - a.first(j)) / (2 * h), (b.second(j) - a.second(j)) / (2 * h)}) {
            Kmin = std::min(Kmin, 1.0 / std::abs(s));
            Kmax = std::max(Kmax, 1.0 / std::abs(s));
        }
    }
    return {Kmin, Kmax};
}

struct ConeSample {
    double x = 0.0, t = 0.0, value = 0.0;  // value = |phi(x, t)|
};

struct ConeReport {
    std::vector<std::pair<double, double>> products;  // (|x|, sup |x| |phi|) per |x| level, ascending
    bool bounded = true;
    double growth = 0.0;  // largest ratio between consecutive levels
};

/// Outside-cone samples grouped by |x|; bounded means the product does not
/// grow from one |x| level to the next beyond `slack`.
inline ConeReport cone_decay_check(const std::vector<ConeSample>& samples, const DiagnosticsConfig& cfg, double slack = 1.0,
                                   double floor = 0.0) {
    std::map<double, double> level;
    for (const auto& s : samples) {
        const double r = std::abs(s.x);
        if (s.t != 0.0) {
            const double q = std::abs(s.x / s.t);
            const double a = cfg.K_minus / (1.0 + cfg.beta), b = cfg.K_plus / (1.0 - cfg.beta);
            if (q >= a && q <= b) continue;  // inside the cone
        }
        level[r] = std::max(level[r], r * s.value);
    }
    ConeReport rep;
    for (auto& [r, v] : level) rep.products.push_back({r, v});
    for (std::size_t i = 1; i < rep.products.size(); ++i) {
        const double prev = std::max(rep.products[i - 1].second, floor), cur = rep.products[i].second;
        const double g = prev > 0 ? cur / prev : 0.0;
        rep.growth = std::max(rep.growth, g);
        if (cur > slack * prev) rep.bounded = false;
    }
    return rep;
}

/// Which asymptotic pieces of mode j carry mass at large |t|.
enum class Channel { Both, MinusOnly, PlusOnly, None };

inline const char* to_string(Channel c) {
    switch (c) {
    case Channel::Both: return "both";
    case Channel::MinusOnly: return "minus-only";
    case Channel::PlusOnly: return "plus-only";
    case Channel::None: return "none";
    }
    return "?";
}

/// Signs of dk_j/dE at -inf and +inf, and the sign of t.
inline Channel classify_channel(double dk_minus, double dk_plus, double t) {
    const bool same = dk_minus * dk_plus > 0;
    const bool toward = t * dk_plus < 0;
    if (!same && toward) return Channel::Both;
    if (same && !toward) return Channel::MinusOnly;
    if (same && toward) return Channel::PlusOnly;
    return Channel::None;
}

/// L2 mass of a field restricted to x < 0 and x > 0.
inline std::pair<double, double> side_masses(const WaveField& w) {
    double left = 0.0, right = 0.0;
    for (std::size_t i = 0; i + 1 < w.x.size(); ++i) {
        const double m = 0.5 * (w.x[i + 1] - w.x[i]) *
                         (w.values.row(Eigen::Index(i)).squaredNorm() + w.values.row(Eigen::Index(i + 1)).squaredNorm());
        (0.5 * (w.x[i] + w.x[i + 1]) < 0 ? left : right) += m;
    }
    return {std::sqrt(left), std::sqrt(right)};
}

}  // namespace cwkb
