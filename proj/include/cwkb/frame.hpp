#pragma once

// Kato-normalized eigenvector frames, coupling coefficients a_jl, phase
// integrals and loop prefactors theta_j.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "cwkb/modes.hpp"
#include "cwkb/ode.hpp"

namespace cwkb {

// ---------------------------------------------------------------- projectors

/// P_j = prod_{l != j} (H - k_l)/(k_j - k_l).
inline std::vector<CMatrix> spectral_projectors(const CMatrix& H, const CVector& k) {
    const int n = int(k.size());
    const double scale = spectral_scale(k);
    if (n > 1 && min_gap(k) <= 1e-10 * scale) throw Error(ErrorCode::GapTooSmall, "eigenvalues too close for projectors");
    std::vector<CMatrix> P(n);
    const CMatrix Id = CMatrix::Identity(H.rows(), H.cols());
    for (int j = 0; j < n; ++j) {
        P[j] = Id;
        for (int l = 0; l < n; ++l)
            if (l != j) P[j] = (P[j] * (H - k(l) * Id) / (k(j) - k(l))).eval();
    }
    return P;
}

/// Rank-one projectors v_j w_j from a decomposition.
inline std::vector<CMatrix> projectors(const Spectral& s) {
    std::vector<CMatrix> P(s.k.size());
    for (int j = 0; j < s.k.size(); ++j) P[j] = s.V.col(j) * s.W.row(j);
    return P;
}

/// dP_j = sum_{l != j} (P_l dH P_j + P_j dH P_l)/(k_j - k_l).
inline std::vector<CMatrix> projector_derivatives(const std::vector<CMatrix>& P, const CVector& k, const CMatrix& dH) {
    const int n = int(P.size());
    std::vector<CMatrix> dP(n);
    for (int j = 0; j < n; ++j) {
        dP[j] = CMatrix::Zero(dH.rows(), dH.cols());
        for (int l = 0; l < n; ++l)
            if (l != j) dP[j] += (P[l] * dH * P[j] + P[j] * dH * P[l]) / (k(j) - k(l));
    }
    return dP;
}

/// Columns dPhi_j = P_j' Phi_j, using G = W dH V and coefficients C = W Phi.
inline CMatrix kato_derivative(const Spectral& s, const CMatrix& dH, const CMatrix& Phi) {
    const int n = int(s.k.size());
    const CMatrix G = s.W * dH * s.V;
    const CMatrix C = s.W * Phi;
    CMatrix out = CMatrix::Zero(Phi.rows(), Phi.cols());
    for (int j = 0; j < Phi.cols(); ++j)
        for (int l = 0; l < n; ++l) {
            if (l == j) continue;
            const cplx inv = 1.0 / (s.k(j) - s.k(l));
            out.col(j) += inv * (G(l, j) * C(j, j)) * s.V.col(l) + inv * (G(j, l) * C(l, j)) * s.V.col(j);
        }
    return out;
}

/// Eigenbasis at the base point: unit columns, first non-negligible entry real positive.
inline CMatrix gauge_frame(const Spectral& s) {
    CMatrix Phi = s.V;
    for (int j = 0; j < Phi.cols(); ++j) {
        Phi.col(j).normalize();
        const double big = Phi.col(j).cwiseAbs().maxCoeff();
        for (int i = 0; i < Phi.rows(); ++i)
            if (std::abs(Phi(i, j)) > 1e-6 * big) {
                Phi.col(j) *= std::conj(Phi(i, j)) / std::abs(Phi(i, j));
                break;
            }
    }
    return Phi;
}

// ---------------------------------------------------------------- frame table

struct FrameOptions {
    double h_max = 0.00625;
    double h_min = 1e-3;
    double resolution = 0.1;  // h <= resolution * min gap / max slope spread
    double rtol = 1e-11;
    double atol = 1e-13;
    bool diagnostics = true;
};

/// Kato frame on a uniform grid over [-X, X] containing x = 0.
struct EigenFrame {
    double E = 0.0, delta = 0.0;
    int d = 1, md = 1;
    double x0 = 0.0, h = 1.0;
    int n = 0, zero_index = 0;
    std::vector<double> grid;
    std::vector<CVector> k, dk, Lambda;
    std::vector<CMatrix> Phi, dPhi, Dual, a;
    CVector k_minus, k_plus, omega_minus, omega_plus;
    CMatrix phi_minus, phi_plus;  // d x md
    double omega_tail = 0.0;

    // diagnostics
    double projector_residual = 0.0;
    double kato_residual = 0.0;       // |P_j dPhi_j| and |(1 - P_j) Phi_j|, relative
    double difference_residual = 0.0; // same with dPhi from finite differences
    double intertwining_residual = 0.0;
    double block_residual = 0.0;
    double diagonal_coupling = 0.0;
    std::size_t transport_steps = 0;

    double x_max() const { return x0 + h * (n - 1); }

    CMatrix phi(int i) const { return Phi[i].topRows(d); }

    /// Local coupling a_jl(x) by 8-point Lagrange interpolation; zero beyond the table.
    void coupling_at(double x, CMatrix& out) const {
        if (x < x0 || x > x_max()) {
            out.setZero(md, md);
            return;
        }
        UniformStencil s = uniform_stencil(x0, h, n, x, 8);
        out.setZero(md, md);
        for (int q = 0; q < s.count; ++q) out += s.w[q] * a[s.first + q];
    }
    CMatrix coupling_at(double x) const {
        CMatrix out;
        coupling_at(x, out);
        return out;
    }

    /// Lambda_j(x) = int_0^x k_j, quintic Hermite inside, linear with slope k(+-inf) outside.
    void phase_at(double x, CVector& out) const {
        out.resize(md);
        if (x <= x0) {
            out = Lambda.front() + (x - x0) * k_minus;
            return;
        }
        if (x >= x_max()) {
            out = Lambda.back() + (x - x_max()) * k_plus;
            return;
        }
        int i = std::min(int((x - x0) / h), n - 2);
        const double t = x - (x0 + i * h);
        for (int j = 0; j < md; ++j)
            out(j) = quintic_hermite(t, h, Lambda[i](j), k[i](j), dk[i](j), Lambda[i + 1](j), k[i + 1](j), dk[i + 1](j));
    }
    CVector phase_at(double x) const {
        CVector out;
        phase_at(x, out);
        return out;
    }

    /// Canonical vectors phi_j(x) as columns of a d x md matrix.
    CMatrix phi_at(double x) const {
        if (x <= x0) return phi_minus;
        if (x >= x_max()) return phi_plus;
        UniformStencil s = uniform_stencil(x0, h, n, x, 8);
        CMatrix out = CMatrix::Zero(d, md);
        for (int q = 0; q < s.count; ++q) out += s.w[q] * Phi[s.first + q].topRows(d);
        return out;
    }

    /// r_j^{side}(x) = Lambda_j(x) - x k_j(side inf) - omega_j(side inf).
    CVector remainder(double x, int side) const {
        return phase_at(x) - x * (side > 0 ? k_plus : k_minus) - (side > 0 ? omega_plus : omega_minus);
    }
};

namespace detail {

inline double slope_spread(const ModeField& f) {
    double s = 1e-12;
    for (Eigen::Index r = 0; r < f.slopes.rows(); ++r)
        for (int i = 0; i < f.modes(); ++i)
            for (int j = i + 1; j < f.modes(); ++j) s = std::max(s, std::abs(f.slopes(r, i) - f.slopes(r, j)));
    return s;
}

inline void pack(const CMatrix& Phi, const CVector& L, ode::State& y) {
    const auto n = Phi.size();
    y.resize(std::size_t(n + L.size()));
    std::copy(Phi.data(), Phi.data() + n, y.begin());
    std::copy(L.data(), L.data() + L.size(), y.begin() + n);
}

inline void unpack(const ode::State& y, int md, CMatrix& Phi, CVector& L) {
    Phi.resize(md, md);
    L.resize(md);
    std::copy(y.begin(), y.begin() + md * md, Phi.data());
    std::copy(y.begin() + md * md, y.end(), L.data());
}

}  // namespace detail

/// Transport the eigenbasis from x = 0 with the Kato generator and tabulate
/// frame, duals, couplings and phases.
inline EigenFrame kato_transport(const Model& model, double E, const FrameOptions& opt = {}) {
    const int md = model.md();
    const double X = model.truncation();
    EigenFrame f;
    f.E = E;
    f.delta = model.delta();
    f.d = model.d();
    f.md = md;

    double h_target = opt.h_max;
    if (md > 1) {
        ModeField scan = track_modes(model, E, default_grid(model, 400));
        const double g = scan.min_gap();
        if (!(g > 0.0)) throw Error(ErrorCode::GapTooSmall, "modes are not distinct on the real axis");
        h_target = std::clamp(opt.resolution * g / detail::slope_spread(scan), opt.h_min, opt.h_max);
    }
    const int N = int(std::ceil(X / h_target));
    f.h = X / N;
    f.n = 2 * N + 1;
    f.x0 = -X;
    f.zero_index = N;
    f.grid.resize(f.n);
    for (int i = 0; i < f.n; ++i) f.grid[i] = (i == N) ? 0.0 : -X + i * f.h;
    f.k.resize(f.n);
    f.dk.resize(f.n);
    f.Lambda.resize(f.n);
    f.Phi.resize(f.n);
    f.dPhi.resize(f.n);
    f.Dual.resize(f.n);
    f.a.resize(f.n);

    Spectral s0 = real_spectrum(model, 0.0, E);
    const CMatrix Phi0 = gauge_frame(s0);

    // Forward in x on [0, X] and in u = -x on [0, X].
    for (int dir : {1, -1}) {
        ode::System sys = [&](const ode::State& y, ode::State& dy, double u) {
            const double x = dir * u;
            CMatrix Phi;
            CVector L;
            detail::unpack(y, md, Phi, L);
            Spectral s = real_spectrum(model, x, E);
            CMatrix dPhi = kato_derivative(s, model.companion_dx(x, E), Phi);
            CVector dL = s.k;
            if (dir < 0) {
                dPhi = -dPhi;
                dL = -dL;
            }
            detail::pack(dPhi, dL, dy);
        };
        std::vector<double> times;
        for (int i = 0; i <= N; ++i) times.push_back(i * f.h);
        times.back() = X;
        ode::State y;
        detail::pack(Phi0, CVector::Zero(md), y);
        int idx = 0;
        ode::Observer obs = [&](const ode::State& yy, double) {
            const int node = N + dir * idx;
            detail::unpack(yy, md, f.Phi[node], f.Lambda[node]);
            ++idx;
        };
        f.transport_steps += ode::integrate_dense(sys, y, times, opt.atol, opt.rtol, obs, 1e-3);
    }

    // Per-node spectral data.
    const CMatrix Phi0inv = Phi0.inverse();
    std::vector<std::vector<CMatrix>> P0 = {projectors(s0)};
    for (int i = 0; i < f.n; ++i) {
        const double x = f.grid[i];
        Spectral s = real_spectrum(model, x, E);
        CMatrix dH = model.companion_dx(x, E);
        f.k[i] = CVector(s.k.real().cast<cplx>());
        f.dk[i] = eigenvalue_derivatives(s, dH).real().cast<cplx>();
        f.dPhi[i] = kato_derivative(s, dH, f.Phi[i]);
        f.Dual[i] = f.Phi[i].inverse();
        CMatrix A(md, md);
        for (int j = 0; j < md; ++j) {
            const cplx den = s.W.row(j) * f.Phi[i].col(j);
            for (int l = 0; l < md; ++l) {
                cplx v = -(s.W.row(j) * f.dPhi[i].col(l))(0, 0) / den;
                if (j == l) {
                    f.diagonal_coupling = std::max(f.diagonal_coupling, std::abs(v));
                    v = 0.0;
                }
                A(j, l) = v;
            }
        }
        f.a[i] = A;
        if (opt.diagnostics) {
            const CMatrix H = model.companion(x, E);
            auto P = spectral_projectors(H, s.k);
            CMatrix sum = CMatrix::Zero(md, md);
            for (int j = 0; j < md; ++j) {
                sum += P[j];
                f.projector_residual = std::max(f.projector_residual, (P[j] * P[j] - P[j]).norm());
                f.projector_residual = std::max(f.projector_residual, (H * P[j] - s.k(j) * P[j]).norm() / spectral_scale(s.k));
            }
            f.projector_residual = std::max(f.projector_residual, (sum - CMatrix::Identity(md, md)).norm());
            // P_j applied to the transport generator at the stored frame, and
            // the drift of Phi_j out of range(P_j).
            const CMatrix C = s.W * f.Phi[i];
            const CMatrix PdPhi = s.W * f.dPhi[i];
            for (int j = 0; j < md; ++j) {
                const double nj = f.Phi[i].col(j).norm();
                f.kato_residual = std::max(f.kato_residual, (s.V.col(j) * PdPhi(j, j)).norm() / nj);
                f.kato_residual = std::max(f.kato_residual, (f.Phi[i].col(j) - s.V.col(j) * C(j, j)).norm() / nj);
            }
            const CMatrix Wt = f.Phi[i] * Phi0inv;
            auto Px = projectors(s);
            for (int j = 0; j < md; ++j) {
                f.intertwining_residual = std::max(f.intertwining_residual, (Wt * P0[0][j] - Px[j] * Wt).norm());
                const int d = f.d;
                for (int p = 1; p < model.m(); ++p) {
                    CVector blk = f.Phi[i].col(j).segment(p * d, d) - std::pow(s.k(j), p) * f.Phi[i].col(j).head(d);
                    f.block_residual = std::max(f.block_residual, blk.norm() / f.Phi[i].col(j).norm());
                }
            }
        }
    }
    if (opt.diagnostics) {
        // Fourth-order differences of the stored frame; limited by h^4 truncation.
        for (int i = 2; i + 2 < f.n; ++i) {
            const CMatrix fd = (-f.Phi[i + 2] + 8.0 * f.Phi[i + 1] - 8.0 * f.Phi[i - 1] + f.Phi[i - 2]) / (12.0 * f.h);
            const CMatrix C = f.Dual[i] * fd;
            for (int j = 0; j < md; ++j) {
                const double r = (f.Phi[i].col(j) * C(j, j)).norm() / f.Phi[i].col(j).norm();
                f.difference_residual = std::max(f.difference_residual, r);
            }
        }
    }
    // Asymptotic data.
    auto lim = limit_spectra(model, E);
    f.k_minus = lim.first.cast<cplx>();
    f.k_plus = lim.second.cast<cplx>();
    f.phi_minus = f.Phi.front().topRows(f.d);
    f.phi_plus = f.Phi.back().topRows(f.d);
    const double nu = model.spec().decay_exponent;
    f.omega_minus.resize(md);
    f.omega_plus.resize(md);
    for (int j = 0; j < md; ++j) {
        f.omega_plus(j) = f.Lambda.back()(j) - X * f.k_plus(j);
        f.omega_minus(j) = f.Lambda.front()(j) + X * f.k_minus(j);
        for (int side : {-1, 1}) {
            const cplx dev = (side > 0 ? f.k.back()(j) - f.k_plus(j) : f.k.front()(j) - f.k_minus(j));
            const double C = std::abs(dev) * std::pow(X, 2.0 + nu);
            const double tail = C / ((1.0 + nu) * std::pow(X, 1.0 + nu));
            const double om = std::abs(side > 0 ? f.omega_plus(j) : f.omega_minus(j));
            f.omega_tail = std::max(f.omega_tail, tail);
            if (tail > 1e-10 * std::max(om, 1.0))
                throw Error(ErrorCode::TailBound, "phase tail bound " + std::to_string(tail) + " too large");
        }
    }
    return f;
}

// ---------------------------------------------------------------- couplings

struct CouplingMatrix {
    std::vector<double> grid;
    std::vector<CMatrix> a_primary;    // inner-product route
    std::vector<CMatrix> a_secondary;  // explicit R-based formula
    double max_discrepancy = 0.0;      // relative, where |a| > 1e-12
    double max_diagonal = 0.0;
    // Delta_jl(x) = Lambda_j - Lambda_l
    std::vector<CMatrix> Delta;
    CVector omega_minus, omega_plus;
};

/// Left null vector u of R (u^* R = 0) via the SVD.
inline CVector left_null_vector(const CMatrix& R) {
    if (R.rows() == 1) return CVector::Ones(1);
    Eigen::JacobiSVD<CMatrix> svd(R, Eigen::ComputeFullU);
    return svd.matrixU().col(R.cols() - 1);
}

/// Explicit coupling formula in terms of the symbol at one node.  The second
/// term uses d_kR(k_l) alone; a -d_kR(k_j) inside it would only be harmless
/// for m = 1, where u_j^* N_1 phi_l = 0.  For m >= 2 it breaks agreement with
/// the companion route on pairs with u_j^* phi_l != 0 (bo2: k_l = -k_j).
inline CMatrix coupling_from_symbol(const Model& model, double E, double x, const CVector& k, const CVector& dk,
                                    const CMatrix& phi, const CMatrix& dphi) {
    const int md = int(k.size());
    CMatrix A = CMatrix::Zero(md, md);
    for (int j = 0; j < md; ++j) {
        const CVector u = left_null_vector(model.symbol(x, E, k(j)));
        const cplx den = (u.adjoint() * model.symbol_dk(x, E, k(j), 1) * phi.col(j))(0, 0);
        for (int l = 0; l < md; ++l) {
            if (l == j) continue;
            const CMatrix Rl = model.symbol(x, E, k(l));
            const CMatrix dRl = model.symbol_dk(x, E, k(l), 1);
            const cplx num = (u.adjoint() * Rl * dphi.col(l))(0, 0) + dk(l) * (u.adjoint() * dRl * phi.col(l))(0, 0);
            A(j, l) = num / ((k(j) - k(l)) * den);
        }
    }
    return A;
}

inline CouplingMatrix coupling_matrix(const EigenFrame& f, const Model& model, double E) {
    CouplingMatrix c;
    c.grid = f.grid;
    c.a_primary = f.a;
    c.max_diagonal = f.diagonal_coupling;
    c.a_secondary.resize(f.n);
    c.Delta.resize(f.n);
    for (int i = 0; i < f.n; ++i) {
        const CMatrix phi = f.Phi[i].topRows(f.d);
        const CMatrix dphi = f.dPhi[i].topRows(f.d);
        c.a_secondary[i] = coupling_from_symbol(model, E, f.grid[i], f.k[i], f.dk[i], phi, dphi);
        for (int j = 0; j < f.md; ++j)
            for (int l = 0; l < f.md; ++l) {
                const cplx p = f.a[i](j, l), q = c.a_secondary[i](j, l);
                if (std::abs(p) > 1e-12)
                    c.max_discrepancy = std::max(c.max_discrepancy, std::abs(p - q) / std::abs(p));
            }
        CMatrix D(f.md, f.md);
        for (int j = 0; j < f.md; ++j)
            for (int l = 0; l < f.md; ++l) D(j, l) = f.Lambda[i](j) - f.Lambda[i](l);
        c.Delta[i] = D;
    }
    c.omega_minus = f.omega_minus;
    c.omega_plus = f.omega_plus;
    if (c.max_discrepancy > 1e-5)
        throw Error(ErrorCode::RouteDiscrepancy, "coupling routes disagree by " + std::to_string(c.max_discrepancy));
    return c;
}

// ---------------------------------------------------------------- direct canonical route

/// Canonical vectors phi_j = alpha_j xi_j with xi_j the first block of
/// P_j(x) Phi_j(0) and alpha_j from the R-based normalization integral.
/// Returns d x md matrices on the frame grid.
inline std::vector<CMatrix> canonical_direct(const Model& model, double E, const EigenFrame& f, double rtol = 1e-11) {
    const int md = f.md, d = f.d, N = f.zero_index;
    const CMatrix V0 = f.Phi[N];
    auto xi_data = [&](double x, int j, CVector& xi, CVector& dxi, cplx& beta) {
        Spectral s = real_spectrum(model, x, E);
        CMatrix dH = model.companion_dx(x, E);
        CVector dk = eigenvalue_derivatives(s, dH);
        CVector full = s.V.col(j) * (s.W.row(j) * V0.col(j));
        CMatrix dv = kato_derivative(s, dH, [&] {
            CMatrix tmp = CMatrix::Zero(md, md);
            tmp.col(j) = V0.col(j);
            return tmp;
        }());
        // kato_derivative uses C(j,j) and C(l,j): exact P_j' v for a general v.
        xi = full.head(d);
        dxi = dv.col(j).head(d);
        const cplx kj = s.k(j);
        const CVector u = left_null_vector(model.symbol(x, E, kj));
        const CMatrix R1 = model.symbol_dk(x, E, kj, 1), R2 = model.symbol_dk(x, E, kj, 2);
        const cplx num = (u.adjoint() * R1 * dxi)(0, 0) + 0.5 * dk(j) * (u.adjoint() * R2 * xi)(0, 0);
        const cplx den = (u.adjoint() * R1 * xi)(0, 0);
        beta = -num / den;
    };
    std::vector<CMatrix> out(f.n, CMatrix::Zero(d, md));
    for (int j = 0; j < md; ++j) {
        for (int dir : {1, -1}) {
            ode::System sys = [&](const ode::State& y, ode::State& dy, double u) {
                CVector xi, dxi;
                cplx beta;
                xi_data(dir * u, j, xi, dxi, beta);
                dy[0] = double(dir) * beta * y[0];
            };
            std::vector<double> times;
            for (int i = 0; i <= N; ++i) times.push_back(i * f.h);
            ode::State y{cplx(1.0)};
            int idx = 0;
            ode::Observer obs = [&](const ode::State& yy, double u) {
                const int node = N + dir * idx++;
                CVector xi, dxi;
                cplx beta;
                xi_data(dir * u, j, xi, dxi, beta);
                out[node].col(j) = yy[0] * xi;
            };
            ode::integrate_dense(sys, y, times, 1e-14, rtol, obs, 1e-3);
        }
    }
    return out;
}

// ---------------------------------------------------------------- loops

/// Canonical loop: real segment from the base point to Re z0, vertical segment
/// to the circle, one or more turns around z0, and back.  Turns are clockwise
/// for Im z0 > 0 and counter-clockwise for Im z0 < 0.
struct CanonicalLoop {
    double basepoint = 0.0;
    cplx z0;
    double radius = 0.1;
    int turns = 1;

    int orientation() const { return z0.imag() > 0 ? -1 : 1; }
    cplx foot() const { return z0 - cplx(0.0, radius) * (z0.imag() > 0 ? 1.0 : -1.0); }
    double start_angle() const { return z0.imag() > 0 ? -0.5 * std::numbers::pi : 0.5 * std::numbers::pi; }

    /// Pieces as (z(s), z'(s)) on s in [0,1].
    struct Piece {
        bool arc = false;
        cplx a, b;      // segment end points
        double th0 = 0, th1 = 0;
    };
    std::vector<Piece> pieces() const {
        std::vector<Piece> p;
        const cplx base(basepoint), mid(z0.real()), ft = foot();
        if (std::abs(mid - base) > 0) p.push_back({false, base, mid});
        p.push_back({false, mid, ft});
        const double th0 = start_angle();
        const double th1 = th0 + orientation() * 2.0 * std::numbers::pi * turns;
        p.push_back({true, {}, {}, th0, th1});
        p.push_back({false, ft, mid});
        if (std::abs(mid - base) > 0) p.push_back({false, mid, base});
        return p;
    }
    cplx point(const Piece& pc, double s) const {
        if (!pc.arc) return pc.a + s * (pc.b - pc.a);
        const double th = pc.th0 + s * (pc.th1 - pc.th0);
        return z0 + radius * std::exp(cplx(0.0, th));
    }
    cplx tangent(const Piece& pc, double s) const {
        if (!pc.arc) return pc.b - pc.a;
        const double th = pc.th0 + s * (pc.th1 - pc.th0);
        return radius * cplx(0.0, pc.th1 - pc.th0) * std::exp(cplx(0.0, th));
    }
    /// Polyline approximation (for label continuation).
    std::vector<cplx> polyline(int arc_points = 128) const {
        std::vector<cplx> out;
        for (auto& pc : pieces()) {
            if (out.empty()) out.push_back(point(pc, 0.0));
            if (!pc.arc) {
                out.push_back(point(pc, 1.0));
            } else {
                const int n = arc_points * turns;
                for (int q = 1; q <= n; ++q) out.push_back(point(pc, double(q) / n));
            }
        }
        return out;
    }
};

inline CanonicalLoop canonical_loop(const BranchPoint& bp, double basepoint = 0.0, int turns = 1) {
    CanonicalLoop L;
    L.basepoint = basepoint;
    L.z0 = bp.z0;
    L.radius = bp.loop_radius;
    L.turns = turns;
    return L;
}

struct LoopPrefactor {
    std::vector<cplx> theta;        // theta_j
    std::vector<cplx> factor;       // e^{-i theta_j}
    std::vector<int> pi0;           // transported j ends on label pi0[j]
    double parallelism_residual = 0.0;
    double radius_discrepancy = 0.0;
};

namespace detail {

/// Kato transport of the full frame around a loop; returns end frame and labels.
inline std::pair<CMatrix, CVector> transport_loop(const Model& model, double E, const CanonicalLoop& loop, const CMatrix& Phi0,
                                                  const CVector& k0, double rtol) {
    const int md = model.md();
    CVector ref = k0;
    CMatrix Phi = Phi0;
    for (const auto& pc : loop.pieces()) {
        ode::System sys = [&](const ode::State& y, ode::State& dy, double s) {
            const cplx z = loop.point(pc, s), dz = loop.tangent(pc, s);
            CMatrix H = model.companion(z, E);
            Spectral sp = decompose(H);
            Assignment asg = optimal_assignment(ref, sp.k);
            sp = permute(sp, asg.perm);
            CMatrix P(md, md);
            std::copy(y.begin(), y.end(), P.data());
            CMatrix dP = kato_derivative(sp, model.companion_dx(z, E), P) * dz;
            dy.assign(dP.data(), dP.data() + dP.size());
        };
        ode::Observer obs = [&](const ode::State&, double s) {
            CVector cand = eigenvalues(model.companion(loop.point(pc, s), E));
            Assignment asg = optimal_assignment(ref, cand);
            for (int j = 0; j < md; ++j) ref(j) = cand(asg.perm[j]);
        };
        ode::State y(Phi.data(), Phi.data() + Phi.size());
        const double max_dt = pc.arc ? 1.0 / (96.0 * loop.turns) : 1.0 / 16.0;
        ode::integrate_adaptive(sys, y, 0.0, 1.0, 1e-13, rtol, obs, max_dt / 4, max_dt);
        std::copy(y.begin(), y.end(), Phi.data());
    }
    return {Phi, ref};
}

inline LoopPrefactor prefactor_once(const Model& model, double E, const CanonicalLoop& loop, double rtol) {
    Spectral s0 = real_spectrum(model, loop.basepoint, E);
    const CMatrix Phi0 = gauge_frame(s0);
    auto [Phi, kend] = transport_loop(model, E, loop, Phi0, s0.k, rtol);
    LoopPrefactor out;
    const int md = model.md();
    out.pi0 = optimal_assignment(kend, s0.k).perm;
    for (int j = 0; j < md; ++j) {
        const CVector target = Phi0.col(out.pi0[j]);
        const CVector got = Phi.col(j);
        const cplx sc = target.dot(got) / target.squaredNorm();
        out.parallelism_residual = std::max(out.parallelism_residual, (got - sc * target).norm() / got.norm());
        out.factor.push_back(sc);
        out.theta.push_back(I1 * std::log(sc));
    }
    return out;
}

}  // namespace detail

/// theta_j from Kato transport around the canonical loop of `bp`; the result
/// is recomputed at 0.8 times the radius as a consistency check.
inline LoopPrefactor loop_prefactor(const Model& model, double E, const BranchPoint& bp, double basepoint = 0.0, int turns = 1,
                                    double rtol = 1e-11) {
    CanonicalLoop loop = canonical_loop(bp, basepoint, turns);
    LoopPrefactor a = detail::prefactor_once(model, E, loop, rtol);
    loop.radius *= 0.8;
    LoopPrefactor b = detail::prefactor_once(model, E, loop, rtol);
    if (a.pi0 != b.pi0) throw Error(ErrorCode::ThetaInconsistent, "monodromy changed with the loop radius");
    for (std::size_t j = 0; j < a.factor.size(); ++j)
        a.radius_discrepancy = std::max(a.radius_discrepancy, std::abs(a.factor[j] - b.factor[j]));
    a.parallelism_residual = std::max(a.parallelism_residual, b.parallelism_residual);
    if (a.parallelism_residual > 1e-6)
        throw Error(ErrorCode::ParallelismResidual, "transported vector not parallel: " + std::to_string(a.parallelism_residual));
    if (a.radius_discrepancy > 1e-6)
        throw Error(ErrorCode::ThetaInconsistent, "theta differs between radii by " + std::to_string(a.radius_discrepancy));
    return a;
}

/// Loop around an arbitrary point (used for the trivial-monodromy check).
inline LoopPrefactor loop_prefactor_at(const Model& model, double E, cplx center, double radius, double basepoint = 0.0,
                                       int turns = 1, double rtol = 1e-11) {
    CanonicalLoop loop;
    loop.basepoint = basepoint;
    loop.z0 = center;
    loop.radius = radius;
    loop.turns = turns;
    return detail::prefactor_once(model, E, loop, rtol);
}

}  // namespace cwkb
