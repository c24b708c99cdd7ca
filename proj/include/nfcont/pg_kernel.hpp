#pragma once
// Finite-rank connectivity operators J(r,r') = sum_k X_k(r) Y_k^T(r').
// Fields are population-major node-sample vectors of length p * nodes.
// The nonzero spectrum lives on the N x N coordinate matrix M_jk = <Y_j, X_k>;
// adjoint eigenvectors come from M^T in the same coordinates, so downstream
// inner products can all be taken in L2.

#include <Eigen/Dense>

#include <complex>
#include <optional>
#include <stdexcept>
#include <vector>

#include "nfcont/expression.hpp"
#include "nfcont/quadrature.hpp"

namespace nfcont {

/// One eigenpair of the coordinate matrix, mapped back to function space.
/// coords expands e_n over {X_k}; adjoint_coords expands e*_n over {Y_k}.
/// Normalization (applied when sigma is simple and the pairing is regular):
/// ||e_n||_2 = 1 and <e_n, e*_n>_2 = 1.
struct SpectralMode {
    std::complex<double> sigma;
    Eigen::VectorXcd coords;
    Eigen::VectorXcd adjoint_coords;
    bool simple = true;
};

struct SpectrumReport {
    std::vector<SpectralMode> modes;  // sorted by decreasing real part
};

class PGKernel {
public:
    /// Analytic construction: factors[k][i] is population component i of the
    /// k-th factor. Samples are cached once; expressions are kept for
    /// pointwise evaluation and Sobolev derivatives.
    PGKernel(QuadratureGrid grid, int populations,
             std::vector<std::vector<Expr>> x_factors,
             std::vector<std::vector<Expr>> y_factors)
        : grid_(std::move(grid)),
          p_(populations),
          x_exprs_(std::move(x_factors)),
          y_exprs_(std::move(y_factors)) {
        if (p_ < 1) throw std::invalid_argument("PGKernel: need at least one population");
        if (x_exprs_.empty() || x_exprs_.size() != y_exprs_.size())
            throw std::invalid_argument("PGKernel: factor lists empty or mismatched");
        const int n = static_cast<int>(x_exprs_.size());
        X_.resize(field_size(), n);
        Y_.resize(field_size(), n);
        for (int k = 0; k < n; ++k) {
            if (static_cast<int>(x_exprs_[k].size()) != p_ ||
                static_cast<int>(y_exprs_[k].size()) != p_)
                throw std::invalid_argument("PGKernel: factor population count mismatch");
            X_.col(k) = sample_factor(x_exprs_[k]);
            Y_.col(k) = sample_factor(y_exprs_[k]);
        }
        init_weights();
    }

    /// Sample-only construction; Sobolev norms of order >= 1 are unavailable.
    static PGKernel from_samples(QuadratureGrid grid, int populations,
                                 Eigen::MatrixXd X, Eigen::MatrixXd Y) {
        PGKernel k(std::move(grid), populations, std::move(X), std::move(Y));
        return k;
    }

    int rank() const { return static_cast<int>(X_.cols()); }
    int populations() const { return p_; }
    const QuadratureGrid& grid() const { return grid_; }
    Eigen::Index field_size() const {
        return static_cast<Eigen::Index>(p_) * static_cast<Eigen::Index>(grid_.size());
    }
    const Eigen::MatrixXd& x_samples() const { return X_; }
    const Eigen::MatrixXd& y_samples() const { return Y_; }
    const Eigen::VectorXd& field_weights() const { return w_; }
    bool has_analytic_factors() const { return !x_exprs_.empty(); }

    /// L2 inner product over the domain, summed across populations.
    double field_inner(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
        check_field(f);
        check_field(g);
        return (f.array() * g.array() * w_.array()).sum();
    }
    double field_norm(const Eigen::VectorXd& f) const {
        return std::sqrt(std::max(0.0, field_inner(f, f)));
    }

    /// Coordinates <Y_k, U>_2 of the projection data for a sampled field.
    Eigen::VectorXd project_coords(const Eigen::VectorXd& field) const {
        check_field(field);
        return WY_.transpose() * field;
    }

    /// Field samples of sum_k v_k X_k.
    Eigen::VectorXd reconstruct(const Eigen::VectorXd& coords) const {
        if (coords.size() != X_.cols())
            throw std::invalid_argument("PGKernel: coordinate length mismatch");
        return X_ * coords;
    }

    /// J U = sum_k X_k <Y_k, U>; the result lies in span{X_k}.
    Eigen::VectorXd apply(const Eigen::VectorXd& field) const {
        return X_ * project_coords(field);
    }

    /// J* U = sum_k Y_k <X_k, U>.
    Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& field) const {
        check_field(field);
        return Y_ * (WX_.transpose() * field);
    }

    /// M_jk = <Y_j, X_k>: coordinates of J restricted to its range.
    Eigen::MatrixXd coordinate_matrix() const { return WY_.transpose() * X_; }

    /// Gram matrix of the X factors and its numerical rank.
    Eigen::MatrixXd gram_x() const { return WX_.transpose() * X_; }
    int gram_rank() const {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(gram_x());
        lu.setThreshold(1e-10);
        return static_cast<int>(lu.rank());
    }

    /// Pointwise kernel entry J_ij(r, r') from the analytic factors.
    double eval_entry(int i, int j, double rx, double ry, double sx, double sy) const {
        require_analytic("eval_entry");
        double acc = 0.0;
        for (int k = 0; k < rank(); ++k)
            acc += x_exprs_[k][i].eval(rx, ry) * y_exprs_[k][j].eval(sx, sy);
        return acc;
    }

    /// W^{m,2} Frobenius norm: sum over derivative multi-indices up to order m
    /// on each argument of the squared L2 norm of D^a D^a' J. Separability
    /// reduces it to Gram matrices of differentiated factor samples.
    double sobolev_frobenius_norm(int m) const {
        if (m < 0) throw std::invalid_argument("sobolev_frobenius_norm: m >= 0");
        if (m > 0) require_analytic("sobolev_frobenius_norm with m >= 1");
        Eigen::MatrixXd SA = Eigen::MatrixXd::Zero(rank(), rank());
        Eigen::MatrixXd SB = Eigen::MatrixXd::Zero(rank(), rank());
        for (const auto& [ax, ay] : multi_indices(m)) {
            SA += derivative_gram(x_exprs_, X_, ax, ay);
            SB += derivative_gram(y_exprs_, Y_, ax, ay);
        }
        const double sq = (SA.array() * SB.array()).sum();
        return std::sqrt(std::max(0.0, sq));
    }

    /// Eigen-decomposition of the coordinate matrix, sorted by decreasing
    /// real part, with adjoint eigenvectors and simplicity flags.
    SpectrumReport spectrum() const {
        const Eigen::MatrixXd M = coordinate_matrix();
        Eigen::EigenSolver<Eigen::MatrixXd> es(M);
        Eigen::EigenSolver<Eigen::MatrixXd> esT(M.transpose().eval());
        if (es.info() != Eigen::Success || esT.info() != Eigen::Success)
            throw std::runtime_error("PGKernel::spectrum: eigensolver failed");

        const int n = rank();
        std::vector<int> order(n);
        for (int i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            const auto va = es.eigenvalues()[a], vb = es.eigenvalues()[b];
            if (va.real() != vb.real()) return va.real() > vb.real();
            return va.imag() > vb.imag();
        });

        double maxabs = 0.0;
        for (int i = 0; i < n; ++i) maxabs = std::max(maxabs, std::abs(es.eigenvalues()[i]));
        const double tol = 1e-8 * std::max(maxabs, 1e-300);

        // match adjoint eigenpairs to forward ones by eigenvalue proximity
        std::vector<bool> used(n, false);
        SpectrumReport rep;
        rep.modes.reserve(n);
        for (int oi = 0; oi < n; ++oi) {
            const int i = order[oi];
            SpectralMode mode;
            mode.sigma = es.eigenvalues()[i];
            mode.coords = es.eigenvectors().col(i);

            int best = -1;
            double bestd = std::numeric_limits<double>::infinity();
            for (int j = 0; j < n; ++j) {
                if (used[j]) continue;
                const double d = std::abs(esT.eigenvalues()[j] - mode.sigma);
                if (d < bestd) { bestd = d; best = j; }
            }
            used[best] = true;
            mode.adjoint_coords = esT.eigenvectors().col(best);

            int close = 0;
            for (int j = 0; j < n; ++j)
                if (std::abs(es.eigenvalues()[j] - mode.sigma) < tol) ++close;
            mode.simple = (close == 1);

            normalize_mode(mode);
            rep.modes.push_back(std::move(mode));
        }
        return rep;
    }

    /// Real node samples of a (real) eigenmode and its adjoint partner.
    Eigen::VectorXd mode_field(const SpectralMode& m) const {
        return X_ * m.coords.real();
    }
    Eigen::VectorXd adjoint_mode_field(const SpectralMode& m) const {
        return Y_ * m.adjoint_coords.real();
    }

private:
    PGKernel(QuadratureGrid grid, int populations, Eigen::MatrixXd X, Eigen::MatrixXd Y)
        : grid_(std::move(grid)), p_(populations), X_(std::move(X)), Y_(std::move(Y)) {
        if (p_ < 1) throw std::invalid_argument("PGKernel: need at least one population");
        if (X_.rows() != field_size() || Y_.rows() != field_size() || X_.cols() != Y_.cols() ||
            X_.cols() < 1)
            throw std::invalid_argument("PGKernel: sample matrix shape mismatch");
        init_weights();
    }

    void init_weights() {
        const auto npts = static_cast<Eigen::Index>(grid_.size());
        w_.resize(field_size());
        for (int i = 0; i < p_; ++i)
            for (Eigen::Index q = 0; q < npts; ++q) w_[i * npts + q] = grid_.w[q];
        WX_ = w_.asDiagonal() * X_;
        WY_ = w_.asDiagonal() * Y_;
    }

    Eigen::VectorXd sample_factor(const std::vector<Expr>& per_pop) const {
        const auto npts = static_cast<Eigen::Index>(grid_.size());
        Eigen::VectorXd out(field_size());
        for (int i = 0; i < p_; ++i)
            for (Eigen::Index q = 0; q < npts; ++q)
                out[i * npts + q] = per_pop[i].eval(grid_.px[q], grid_.py[q]);
        return out;
    }

    void check_field(const Eigen::VectorXd& f) const {
        if (f.size() != field_size())
            throw std::invalid_argument("PGKernel: field sample length mismatch");
    }

    void require_analytic(const char* what) const {
        if (x_exprs_.empty())
            throw std::logic_error(std::string("PGKernel: ") + what +
                                   " needs analytic factors");
    }

    std::vector<std::pair<int, int>> multi_indices(int m) const {
        std::vector<std::pair<int, int>> out;
        if (grid_.dim == 1) {
            for (int a = 0; a <= m; ++a) out.emplace_back(a, 0);
        } else {
            for (int ax = 0; ax <= m; ++ax)
                for (int ay = 0; ay + ax <= m; ++ay) out.emplace_back(ax, ay);
        }
        return out;
    }

    Eigen::MatrixXd derivative_gram(const std::vector<std::vector<Expr>>& exprs,
                                    const Eigen::MatrixXd& base_samples, int ax,
                                    int ay) const {
        if (ax == 0 && ay == 0) {
            Eigen::MatrixXd S = base_samples.transpose() * (w_.asDiagonal() * base_samples);
            return S;
        }
        const int n = rank();
        Eigen::MatrixXd D(field_size(), n);
        for (int k = 0; k < n; ++k) {
            std::vector<Expr> dk(exprs[k]);
            for (auto& e : dk) {
                for (int a = 0; a < ax; ++a) e = e.derivative(0);
                for (int a = 0; a < ay; ++a) e = e.derivative(1);
            }
            D.col(k) = sample_factor(dk);
        }
        return D.transpose() * (w_.asDiagonal() * D);
    }

    void normalize_mode(SpectralMode& mode) const {
        // complex L2 norms through the weighted sample metric
        const Eigen::VectorXcd e = X_.cast<std::complex<double>>() * mode.coords;
        const double nrm = std::sqrt(std::abs(
            (e.array().conjugate() * e.array() * w_.cast<std::complex<double>>().array()).sum()));
        if (nrm > 1e-300) mode.coords /= nrm;
        const Eigen::VectorXcd en = X_.cast<std::complex<double>>() * mode.coords;
        const Eigen::VectorXcd a = Y_.cast<std::complex<double>>() * mode.adjoint_coords;
        const std::complex<double> pair =
            (a.array() * en.array() * w_.cast<std::complex<double>>().array()).sum();
        if (std::abs(pair) > 1e-12) mode.adjoint_coords /= pair;
    }

    QuadratureGrid grid_;
    int p_ = 1;
    Eigen::MatrixXd X_, Y_;    // factor samples, one column per factor
    Eigen::MatrixXd WX_, WY_;  // weight-scaled copies
    Eigen::VectorXd w_;        // node weights tiled per population
    std::vector<std::vector<Expr>> x_exprs_, y_exprs_;
};

}  // namespace nfcont
