#pragma once

// Small numerical building blocks: Gauss-Legendre rules, interpolation on
// uniform grids, cubic splines, 1-D minimization and optimal assignment.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numeric>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "cwkb/error.hpp"

namespace cwkb {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
inline constexpr cplx I1{0.0, 1.0};

// ---------------------------------------------------------------- Gauss-Legendre

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
    std::size_t size() const { return nodes.size(); }
};

/// n-point Gauss-Legendre rule on [a, b] (Newton on P_n, Chebyshev start).
inline QuadratureRule gauss_legendre(int n, double a = -1.0, double b = 1.0) {
    QuadratureRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const double xm = 0.5 * (b + a), xl = 0.5 * (b - a);
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        r.nodes[i] = xm - xl * z;
        r.nodes[n - 1 - i] = xm + xl * z;
        r.weights[i] = 2.0 * xl / ((1.0 - z * z) * pp * pp);
        r.weights[n - 1 - i] = r.weights[i];
    }
    return r;
}

/// Composite rule: `panels` equal panels of an `order`-point Gauss rule.
inline QuadratureRule composite_gauss(double a, double b, int panels, int order = 20) {
    QuadratureRule base = gauss_legendre(order);
    QuadratureRule r;
    r.nodes.reserve(std::size_t(panels) * order);
    r.weights.reserve(std::size_t(panels) * order);
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h;
        for (int i = 0; i < order; ++i) {
            r.nodes.push_back(lo + 0.5 * h * (base.nodes[i] + 1.0));
            r.weights.push_back(0.5 * h * base.weights[i]);
        }
    }
    return r;
}

// ---------------------------------------------------------------- uniform grids

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(n);
    if (n == 1) {
        v[0] = a;
        return v;
    }
    for (int i = 0; i < n; ++i) v[i] = a + (b - a) * double(i) / double(n - 1);
    return v;
}

/// Local Lagrange interpolation on a uniform grid x_i = x0 + i h with a
/// stencil of `order` points centred on the target.
struct UniformStencil {
    int first = 0;
    int count = 0;
    double w[12];
};

inline UniformStencil uniform_stencil(double x0, double h, int n, double x, int order = 8) {
    UniformStencil s;
    order = std::min(order, n);
    s.count = order;
    double u = (x - x0) / h;
    int i0 = int(std::floor(u)) - (order / 2 - 1);
    i0 = std::clamp(i0, 0, n - order);
    s.first = i0;
    // Barycentric weights for equispaced nodes are binomial with alternating sign.
    for (int k = 0; k < order; ++k) {
        double d = u - double(i0 + k);
        if (d == 0.0) {
            for (int j = 0; j < order; ++j) s.w[j] = j == k ? 1.0 : 0.0;
            return s;
        }
    }
    double sum = 0.0;
    double binom = 1.0;
    for (int k = 0; k < order; ++k) {
        if (k > 0) binom = binom * double(order - k) / double(k);
        double wk = ((k % 2) ? -binom : binom) / (u - double(i0 + k));
        s.w[k] = wk;
        sum += wk;
    }
    for (int k = 0; k < order; ++k) s.w[k] /= sum;
    return s;
}

/// Quintic Hermite interpolation of f on [0, h] from f, f', f'' at both ends.
inline cplx quintic_hermite(double t, double h, cplx f0, cplx d0, cplx s0, cplx f1, cplx d1, cplx s1) {
    const double u = t / h, u2 = u * u, u3 = u2 * u, u4 = u3 * u, u5 = u4 * u;
    const double h00 = 1 - 10 * u3 + 15 * u4 - 6 * u5;
    const double h10 = u - 6 * u3 + 8 * u4 - 3 * u5;
    const double h20 = 0.5 * (u2 - 3 * u3 + 3 * u4 - u5);
    const double h01 = 10 * u3 - 15 * u4 + 6 * u5;
    const double h11 = -4 * u3 + 7 * u4 - 3 * u5;
    const double h21 = 0.5 * (u3 - 2 * u4 + u5);
    return h00 * f0 + h * h10 * d0 + h * h * h20 * s0 + h01 * f1 + h * h11 * d1 + h * h * h21 * s1;
}

// ---------------------------------------------------------------- cubic spline

/// Not-a-knot cubic spline; keeps second derivatives honest at the ends.
class CubicSpline {
public:
    CubicSpline() = default;
    CubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        const int n = int(x_.size());
        if (n < 4) throw Error(ErrorCode::Validation, "spline needs at least 4 knots");
        // Solve for second derivatives M_i.
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
        for (int i = 1; i < n - 1; ++i) {
            double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
            A(i, i - 1) = h0 / 6.0;
            A(i, i) = (h0 + h1) / 3.0;
            A(i, i + 1) = h1 / 6.0;
            rhs(i) = (y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0;
        }
        double h0 = x_[1] - x_[0], h1 = x_[2] - x_[1];
        A(0, 0) = h1;
        A(0, 1) = -(h0 + h1);
        A(0, 2) = h0;
        double g0 = x_[n - 2] - x_[n - 3], g1 = x_[n - 1] - x_[n - 2];
        A(n - 1, n - 3) = g1;
        A(n - 1, n - 2) = -(g0 + g1);
        A(n - 1, n - 1) = g0;
        Eigen::VectorXd M = A.partialPivLu().solve(rhs);
        m_.assign(M.data(), M.data() + n);
    }

    double operator()(double x) const { return eval(x, 0); }
    double derivative(double x, int order = 1) const { return eval(x, order); }
    double front() const { return x_.front(); }
    double back() const { return x_.back(); }
    const std::vector<double>& knots() const { return x_; }
    const std::vector<double>& values() const { return y_; }

private:
    std::vector<double> x_, y_, m_;

    double eval(double x, int order) const {
        int n = int(x_.size());
        int i = int(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin()) - 1;
        i = std::clamp(i, 0, n - 2);
        double h = x_[i + 1] - x_[i];
        double a = (x_[i + 1] - x) / h, b = (x - x_[i]) / h;
        switch (order) {
        case 0:
            return a * y_[i] + b * y_[i + 1] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
        case 1:
            return (y_[i + 1] - y_[i]) / h - (3 * a * a - 1) * h / 6.0 * m_[i] + (3 * b * b - 1) * h / 6.0 * m_[i + 1];
        case 2:
            return a * m_[i] + b * m_[i + 1];
        default:
            return (m_[i + 1] - m_[i]) / h;
        }
    }
};

// ---------------------------------------------------------------- minimization

/// Golden-section search for a minimum of f on [a, b].
inline double golden_section(const std::function<double(double)>& f, double a, double b, double tol = 1e-12) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    while (std::abs(b - a) > tol * (1.0 + std::abs(a) + std::abs(b))) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

// ---------------------------------------------------------------- assignment

struct Assignment {
    std::vector<int> perm;  // label j -> candidate index
    double cost = 0.0;
    double runner_up = std::numeric_limits<double>::infinity();
};

/// Minimal total |reference_j - candidate_perm(j)| assignment.  Exhaustive for
/// n <= 7 (exact runner-up); Hungarian plus transposition runner-up above that.
inline Assignment optimal_assignment(const CVector& ref, const CVector& cand) {
    const int n = int(ref.size());
    Eigen::MatrixXd C(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) C(i, j) = std::abs(ref(i) - cand(j));
    Assignment out;
    if (n <= 7) {
        std::vector<int> p(n);
        std::iota(p.begin(), p.end(), 0);
        double best = std::numeric_limits<double>::infinity(), second = best;
        std::vector<int> bestp = p;
        do {
            double c = 0.0;
            for (int i = 0; i < n; ++i) c += C(i, p[i]);
            if (c < best) {
                second = best;
                best = c;
                bestp = p;
            } else if (c < second) {
                second = c;
            }
        } while (std::next_permutation(p.begin(), p.end()));
        out.perm = bestp;
        out.cost = best;
        out.runner_up = second;
        return out;
    }
    // Hungarian algorithm (Jonker-Volgenant style potentials), 1-based internals.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1), v(n + 1);
    std::vector<int> p(n + 1), way(n + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, false);
        do {
            used[j0] = true;
            int i0 = p[j0], j1 = 0;
            double delta = inf;
            for (int j = 1; j <= n; ++j)
                if (!used[j]) {
                    double cur = C(i0 - 1, j - 1) - u[i0] - v[j];
                    if (cur < minv[j]) {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if (minv[j] < delta) {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            for (int j = 0; j <= n; ++j)
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    out.perm.assign(n, 0);
    for (int j = 1; j <= n; ++j) out.perm[p[j] - 1] = j - 1;
    out.cost = 0.0;
    for (int i = 0; i < n; ++i) out.cost += C(i, out.perm[i]);
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) {
            double c = out.cost - C(a, out.perm[a]) - C(b, out.perm[b]) + C(a, out.perm[b]) + C(b, out.perm[a]);
            out.runner_up = std::min(out.runner_up, c);
        }
    return out;
}

inline double min_gap(const CVector& k) {
    double g = std::numeric_limits<double>::infinity();
    for (int i = 0; i < k.size(); ++i)
        for (int j = i + 1; j < k.size(); ++j) g = std::min(g, std::abs(k(i) - k(j)));
    return g;
}

/// Trapezoid L2 norm of a sampled vector field (rows = grid points).
inline double l2_norm(const std::vector<double>& x, const CMatrix& values) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        double a = values.row(Eigen::Index(i)).squaredNorm(), b = values.row(Eigen::Index(i + 1)).squaredNorm();
        s += 0.5 * (x[i + 1] - x[i]) * (a + b);
    }
    return std::sqrt(s);
}

}  // namespace cwkb
