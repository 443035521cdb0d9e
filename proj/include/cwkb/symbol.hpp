#pragma once

// The total symbol R(x,E,k,delta) = sum_{l,n} A_ln(x,delta) k^l E^n, its
// reduced matrices N_l and the companion matrix H.

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cwkb/expr.hpp"
#include "cwkb/numerics.hpp"

namespace cwkb {

/// Square matrix of expressions, row major.
struct ExprMatrix {
    int dim = 0;
    std::vector<expr::Expression> entries;

    ExprMatrix() = default;
    explicit ExprMatrix(int d) : dim(d), entries(std::size_t(d) * d) {}
    expr::Expression& operator()(int i, int j) { return entries[std::size_t(i) * dim + j]; }
    const expr::Expression& operator()(int i, int j) const { return entries[std::size_t(i) * dim + j]; }
};

/// Optional energy density e^{-G/eps} e^{-iJ/eps} P attached to a model file.
struct DensitySpec {
    double E0 = 0.0;
    double g = 1.0;
    std::string G, J = "0", P = "1";
};

struct ModelSpec {
    std::string name;
    int d = 1, m = 1, r = 1;
    std::map<std::pair<int, int>, ExprMatrix> A;               // (l, n)
    std::map<std::tuple<int, int, int>, ExprMatrix> A_limits;  // (l, n, side = -1 | +1)
    double delta = 0.0;
    std::array<double, 2> energy_window{0.0, 1.0};
    double strip_half_width = 1.0;
    double decay_exponent = 1.0;
    double truncation = 20.0;
    std::map<std::string, double> params;
    std::vector<std::pair<int, int>> quadratic_dispersion;  // (mode, side)
    bool claims_ac = false;
    std::optional<DensitySpec> density;

    int md() const { return m * d; }

    bool has_quadratic_flag(int mode, int side) const {
        for (auto& q : quadratic_dispersion)
            if (q.first == mode && q.second == side) return true;
        return false;
    }
};

/// Compiled, immutable view of a ModelSpec.  Cheap to copy.
class Model {
public:
    Model() = default;
    explicit Model(ModelSpec spec) : spec_(std::make_shared<ModelSpec>(std::move(spec))) { compile(); }

    const ModelSpec& spec() const { return *spec_; }
    int d() const { return spec_->d; }
    int m() const { return spec_->m; }
    int r() const { return spec_->r; }
    int md() const { return spec_->md(); }
    double delta() const { return delta_; }
    double truncation() const { return spec_->truncation; }

    /// Same model at another delta.
    Model with_delta(double delta) const {
        Model out = *this;
        out.delta_ = delta;
        out.refresh_limits();
        return out;
    }

    /// N_l(z,E) = sum_n A_ln(z) E^n, evaluated by Horner in E.
    CMatrix reduced(cplx z, double E, int l) const { return reduced_impl(z, E, l, prog_); }
    /// d/dz N_l(z,E).
    CMatrix reduced_dx(cplx z, double E, int l) const { return reduced_impl(z, E, l, dprog_); }

    /// R(z,E,k) = sum_l N_l k^l.
    CMatrix symbol(cplx z, double E, cplx k) const {
        CMatrix R = reduced(z, E, spec_->m);
        for (int l = spec_->m - 1; l >= 0; --l) R = (R * k + reduced(z, E, l)).eval();
        return R;
    }

    /// p-th k-derivative of R.
    CMatrix symbol_dk(cplx z, double E, cplx k, int p) const {
        const int d = spec_->d;
        CMatrix R = CMatrix::Zero(d, d);
        for (int l = p; l <= spec_->m; ++l) {
            double fall = 1.0;
            for (int q = 0; q < p; ++q) fall *= double(l - q);
            R += fall * std::pow(k, l - p) * reduced(z, E, l);
        }
        return R;
    }

    /// Companion matrix of the polynomial eigenproblem (identity superdiagonal,
    /// bottom block row -N_m^{-1} N_l).
    CMatrix companion(cplx z, double E) const {
        std::array<CMatrix, 16> N;
        for (int l = 0; l <= spec_->m; ++l) N[l] = reduced(z, E, l);
        return assemble(N, z, E);
    }

    /// dH/dz, from d(N_m^{-1}N_l) = N_m^{-1}(N_l' - N_m' N_m^{-1} N_l).
    CMatrix companion_dx(cplx z, double E) const {
        const int d = spec_->d, m = spec_->m, md = d * m;
        CMatrix Nm = reduced(z, E, m);
        Eigen::PartialPivLU<CMatrix> lu(Nm);
        check_leading(lu, z, E);
        CMatrix dNm = reduced_dx(z, E, m);
        CMatrix out = CMatrix::Zero(md, md);
        for (int l = 0; l < m; ++l) {
            CMatrix Bl = lu.solve(reduced(z, E, l));
            CMatrix dB = lu.solve(reduced_dx(z, E, l) - dNm * Bl);
            out.block((m - 1) * d, l * d, d, d) = -dB;
        }
        return out;
    }

    /// Companion matrix built from the declared limits at side = -1 or +1.
    CMatrix companion_limit(int side, double E) const {
        std::array<CMatrix, 16> N;
        for (int l = 0; l <= spec_->m; ++l) N[l] = reduced_limit(side, E, l);
        return assemble(N, cplx(side * spec_->truncation), E);
    }

    CMatrix reduced_limit(int side, double E, int l) const {
        const int d = spec_->d;
        CMatrix out = CMatrix::Zero(d, d);
        for (int n = spec_->r; n >= 0; --n) {
            out *= E;
            auto it = limits_.find({l, n, side});
            if (it != limits_.end()) out += it->second;
        }
        return out;
    }

    /// Values of every declared entry at z (for pole screening and tail fits).
    CMatrix coefficient(cplx z, int l, int n) const {
        const int d = spec_->d;
        CMatrix out = CMatrix::Zero(d, d);
        auto it = prog_.find({l, n});
        if (it == prog_.end()) return out;
        std::array<cplx, 32> vars;
        fill_vars(z, vars);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) out(i, j) = it->second[std::size_t(i) * d + j](vars);
        return out;
    }
    CMatrix coefficient_limit(int l, int n, int side) const {
        auto it = limits_.find({l, n, side});
        if (it == limits_.end()) return CMatrix::Zero(spec_->d, spec_->d);
        return it->second;
    }

    std::vector<std::string> slot_names() const { return slots_; }

private:
    using ProgMap = std::map<std::pair<int, int>, std::vector<expr::Program>>;
    std::shared_ptr<const ModelSpec> spec_;
    double delta_ = 0.0;
    std::vector<std::string> slots_;
    ProgMap prog_, dprog_;
    std::map<std::tuple<int, int, int>, CMatrix> limits_;
    std::vector<cplx> param_values_;

    void compile() {
        if (spec_->m + 1 > 16) throw Error(ErrorCode::Schema, "x-order above 15 is not supported");
        if (spec_->params.size() > 29) throw Error(ErrorCode::Schema, "too many parameters");
        delta_ = spec_->delta;
        slots_ = {"x", "delta"};
        for (auto& [k, v] : spec_->params) {
            slots_.push_back(k);
            param_values_.push_back(v);
        }
        for (auto& [key, M] : spec_->A) {
            std::vector<expr::Program> p, dp;
            for (auto& e : M.entries) {
                p.emplace_back(e, slots_);
                dp.emplace_back(expr::derivative(e, "x"), slots_);
            }
            prog_[key] = std::move(p);
            dprog_[key] = std::move(dp);
        }
        refresh_limits();
    }

    void refresh_limits() {
        limits_.clear();
        std::array<cplx, 32> vars;
        fill_vars(cplx(0.0), vars);
        for (auto& [key, M] : spec_->A_limits) {
            CMatrix v(M.dim, M.dim);
            for (int i = 0; i < M.dim; ++i)
                for (int j = 0; j < M.dim; ++j) {
                    expr::Program p(M(i, j), slots_);
                    v(i, j) = p(vars);
                }
            limits_[key] = v;
        }
    }

    void fill_vars(cplx z, std::array<cplx, 32>& vars) const {
        vars[0] = z;
        vars[1] = delta_;
        for (std::size_t k = 0; k < param_values_.size(); ++k) vars[2 + k] = param_values_[k];
    }

    CMatrix reduced_impl(cplx z, double E, int l, const ProgMap& progs) const {
        const int d = spec_->d;
        std::array<cplx, 32> vars;
        fill_vars(z, vars);
        CMatrix out = CMatrix::Zero(d, d);
        for (int n = spec_->r; n >= 0; --n) {
            out *= E;
            auto it = progs.find({l, n});
            if (it == progs.end()) continue;
            const auto& ps = it->second;
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    const auto& p = ps[std::size_t(i) * d + j];
                    if (!p.is_zero()) out(i, j) += p(vars);
                }
        }
        return out;
    }

    void check_leading(const Eigen::PartialPivLU<CMatrix>& lu, cplx z, double E) const {
        const double rc = lu.rcond();
        if (!(rc > 1e-12))
            throw Error(ErrorCode::SingularLeadingMatrix, "N_m is singular at z=(" + std::to_string(z.real()) + "," +
                                                              std::to_string(z.imag()) + "), E=" + std::to_string(E));
    }

    CMatrix assemble(const std::array<CMatrix, 16>& N, cplx z, double E) const {
        const int d = spec_->d, m = spec_->m, md = d * m;
        Eigen::PartialPivLU<CMatrix> lu(N[m]);
        check_leading(lu, z, E);
        CMatrix H = CMatrix::Zero(md, md);
        for (int p = 0; p + 1 < m; ++p) H.block(p * d, (p + 1) * d, d, d).setIdentity();
        for (int l = 0; l < m; ++l) H.block((m - 1) * d, l * d, d, d) = -lu.solve(N[l]);
        for (Eigen::Index i = 0; i < H.size(); ++i)
            if (!expr::detail::finite(H.data()[i])) throw Error(ErrorCode::NonFinite, "companion matrix not finite");
        return H;
    }
};

}  // namespace cwkb
