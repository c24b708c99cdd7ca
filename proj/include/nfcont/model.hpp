#pragma once
// The full problem object: kernel + nonlinearity + decay + input + homotopy
// parameters, with the residual and Jacobian of the persistent-state equation
// in reduced coordinates.
//
// Reduced form (voltage variant): with V = X v + eps * I_ext,
//   r_k = v_k - <Y_k, S0(lambda V)> - mu * (S(0) <Y_k, 1_p> + t_k)
// where t is the Gram projection of the additive threshold field onto
// span{X_k}. r = 0 iff V is a persistent state of the mu-homotopy equation.
// The activity variant shifts the threshold into the sigmoid argument side;
// its states map to voltage states by a = v - mu t exactly.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nfcont/pg_kernel.hpp"
#include "nfcont/sigmoid.hpp"

namespace nfcont {

struct Homotopy {
    double lambda = 0.0;
    double mu = 0.0;
    double eps = 0.0;
};

enum class Variant { Voltage, Activity };

/// Analytic solution bounds: every equilibrium satisfies ||V|| <= B1 and
/// ||V - V0f|| <= B2; lambda_star is the contraction (uniqueness) threshold,
/// lambda_L the global-stability threshold from the symmetrized operator.
struct Bounds {
    double B1 = 0.0;
    double B2 = 0.0;
    double lambda_star = 0.0;
    double lambda_L = 0.0;
};

class FieldModel {
public:
    FieldModel(std::shared_ptr<const PGKernel> kernel, Nonlinearity nl,
               std::vector<double> tau, Eigen::VectorXd input, double theta_add,
               Homotopy h = {}, Variant variant = Variant::Voltage)
        : kernel_(std::move(kernel)),
          nl_(nl),
          tau_(std::move(tau)),
          input_(std::move(input)),
          theta_add_(theta_add),
          h_(h),
          variant_(variant) {
        if (!kernel_) throw std::invalid_argument("FieldModel: null kernel");
        if (static_cast<int>(tau_.size()) != kernel_->populations())
            throw std::invalid_argument("FieldModel: decay vector length != populations");
        for (double t : tau_)
            if (!(t > 0.0)) throw std::invalid_argument("FieldModel: decay times must be positive");
        if (input_.size() == 0) input_ = Eigen::VectorXd::Zero(kernel_->field_size());
        if (input_.size() != kernel_->field_size())
            throw std::invalid_argument("FieldModel: input sample length mismatch");
        validate_params(h_);

        // Gram projection of the threshold and input onto span{X}; the
        // orthogonal input remainder stays inside the sigmoid argument via
        // full-sample reconstruction, its norm is reported for diagnostics.
        const Eigen::MatrixXd G = kernel_->gram_x();
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(G);
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(kernel_->field_size());
        theta_coords_ = cod.solve(kernel_->x_samples().transpose() *
                                  (kernel_->field_weights().asDiagonal() *
                                   (theta_add_ * ones).eval()));
        const Eigen::VectorXd icoords = cod.solve(
            kernel_->x_samples().transpose() *
            (kernel_->field_weights().asDiagonal() * input_));
        input_orth_norm_ = kernel_->field_norm(input_ - kernel_->reconstruct(icoords));
        ones_coords_ = kernel_->project_coords(ones);  // <Y_k, 1_p>
    }

    const PGKernel& kernel() const { return *kernel_; }
    std::shared_ptr<const PGKernel> kernel_ptr() const { return kernel_; }
    const Nonlinearity& nonlinearity() const { return nl_; }
    const std::vector<double>& decay() const { return tau_; }
    const Eigen::VectorXd& input() const { return input_; }
    double theta_add() const { return theta_add_; }
    const Homotopy& params() const { return h_; }
    Variant variant() const { return variant_; }
    int dim() const { return kernel_->rank(); }
    /// Coordinates of the additive threshold field in span{X}.
    const Eigen::VectorXd& theta_coords() const { return theta_coords_; }
    /// Norm of the input component outside span{X} (warn-level diagnostic).
    double input_orth_norm() const { return input_orth_norm_; }

    /// Copy with different homotopy parameters; shares the kernel.
    FieldModel at(const Homotopy& h) const {
        FieldModel m(*this);
        m.validate_params(h);
        m.h_ = h;
        return m;
    }

    /// Sampled field V for reduced coordinates v. The activity variant carries
    /// the threshold inside the field argument instead of the residual.
    Eigen::VectorXd reconstruct(const Eigen::VectorXd& v) const {
        Eigen::VectorXd V = kernel_->reconstruct(v) + h_.eps * input_;
        if (variant_ == Variant::Activity)
            V += h_.mu * kernel_->reconstruct(theta_coords_);
        return V;
    }

    Eigen::VectorXd residual(const Eigen::VectorXd& v) const {
        if (!v.allFinite()) throw std::invalid_argument("FieldModel::residual: non-finite state");
        return v - picard(v);
    }

    /// The fixed-point map F with v = F(v) at equilibria; Picard iteration
    /// v <- F(v) contracts for lambda < lambda_star.
    Eigen::VectorXd picard(const Eigen::VectorXd& v) const {
        const Eigen::VectorXd V = reconstruct(v);
        Eigen::VectorXd s(V.size());
        for (Eigen::Index i = 0; i < V.size(); ++i)
            s[i] = nl_.eval_shifted(h_.lambda * V[i]);
        Eigen::VectorXd F = kernel_->project_coords(s) + h_.mu * nl_.center() * ones_coords_;
        if (variant_ == Variant::Voltage) F += h_.mu * theta_coords_;
        return F;
    }

    /// d r / d v with entries delta_jk - lambda <Y_j, S'(lambda V) X_k>.
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& v) const {
        if (!v.allFinite()) throw std::invalid_argument("FieldModel::jacobian: non-finite state");
        const Eigen::VectorXd V = reconstruct(v);
        Eigen::VectorXd d(V.size());
        for (Eigen::Index i = 0; i < V.size(); ++i)
            d[i] = h_.lambda * nl_.deriv(h_.lambda * V[i], 1) * kernel_->field_weights()[i];
        return Eigen::MatrixXd::Identity(dim(), dim()) -
               kernel_->y_samples().transpose() * d.asDiagonal() * kernel_->x_samples();
    }

    Eigen::VectorXd dresidual_dlambda(const Eigen::VectorXd& v) const {
        const Eigen::VectorXd V = reconstruct(v);
        Eigen::VectorXd d(V.size());
        for (Eigen::Index i = 0; i < V.size(); ++i)
            d[i] = nl_.deriv(h_.lambda * V[i], 1) * V[i] * kernel_->field_weights()[i];
        return -(kernel_->y_samples().transpose() * d);
    }

    Eigen::VectorXd dresidual_dmu(const Eigen::VectorXd& v) const {
        Eigen::VectorXd out = -nl_.center() * ones_coords_;
        if (variant_ == Variant::Voltage) {
            out -= theta_coords_;
        } else {
            // mu moves the threshold field inside the sigmoid argument
            const Eigen::VectorXd V = reconstruct(v);
            const Eigen::VectorXd T = kernel_->reconstruct(theta_coords_);
            Eigen::VectorXd d(V.size());
            for (Eigen::Index i = 0; i < V.size(); ++i)
                d[i] = h_.lambda * nl_.deriv(h_.lambda * V[i], 1) * T[i] *
                       kernel_->field_weights()[i];
            out -= kernel_->y_samples().transpose() * d;
        }
        return out;
    }

    Eigen::VectorXd dresidual_deps(const Eigen::VectorXd& v) const {
        const Eigen::VectorXd V = reconstruct(v);
        Eigen::VectorXd d(V.size());
        for (Eigen::Index i = 0; i < V.size(); ++i)
            d[i] = h_.lambda * nl_.deriv(h_.lambda * V[i], 1) * input_[i] *
                   kernel_->field_weights()[i];
        return -(kernel_->y_samples().transpose() * d);
    }

    /// Decay time for each reduced coordinate. Each range factor must be
    /// supported inside a single population (or populations sharing one tau),
    /// otherwise the field equation has no finite-dimensional reduction.
    Eigen::VectorXd coordinate_decay() const {
        const auto& X = kernel_->x_samples();
        const Eigen::Index npts = X.rows() / kernel_->populations();
        Eigen::VectorXd out(dim());
        for (int k = 0; k < dim(); ++k) {
            double t = 0.0;
            for (int p = 0; p < kernel_->populations(); ++p) {
                if (X.col(k).segment(p * npts, npts).cwiseAbs().maxCoeff() == 0.0)
                    continue;
                if (t == 0.0) {
                    t = tau_[static_cast<std::size_t>(p)];
                } else if (t != tau_[static_cast<std::size_t>(p)]) {
                    throw std::invalid_argument(
                        "FieldModel::coordinate_decay: factor spans populations "
                        "with different decay times");
                }
            }
            out[k] = t > 0.0 ? t : tau_[0];
        }
        return out;
    }

    /// Exact lambda = 0 solution: the homotopy constants themselves.
    Eigen::VectorXd trivial_coords() const {
        Eigen::VectorXd v = h_.mu * nl_.center() * ones_coords_;
        if (variant_ == Variant::Voltage) v += h_.mu * theta_coords_;
        return v;
    }

    /// Field samples of the lambda = 0 state V0f.
    Eigen::VectorXd trivial_field() const { return reconstruct(trivial_coords()); }

    /// Analytic bounds; the kernel norm uses the order-m Sobolev-Frobenius
    /// norm (m = dim) when analytic factors are available, else m = 0.
    Bounds bounds() const {
        const int m = kernel_->has_analytic_factors() ? kernel_->grid().dim : 0;
        const double jn = kernel_->sobolev_frobenius_norm(m);
        const double mass = [&] {
            double s = 0.0;
            for (double wi : kernel_->grid().w) s += wi;
            return s;
        }();
        const double sq = std::sqrt(kernel_->populations() * mass);
        Bounds b;
        b.B1 = sq * jn + kernel_->field_norm(input_);
        b.B2 = 0.5 * sq * jn;
        const double inf = std::numeric_limits<double>::infinity();
        b.lambda_star = jn > 0.0 ? 1.0 / jn : inf;
        b.lambda_L = [&] {
            const double rho = symmetrized_radius();
            return rho > 0.0 ? 1.0 / rho : inf;
        }();
        return b;
    }

private:
    void validate_params(const Homotopy& h) const {
        if (!(h.lambda >= 0.0))
            throw std::invalid_argument("FieldModel: lambda must be >= 0");
        const double slack = 1e-9;
        if (h.mu < -slack || h.mu > 1.0 + slack)
            throw std::invalid_argument("FieldModel: mu outside [0, 1]");
        if (h.eps < -slack || h.eps > 1.0 + slack)
            throw std::invalid_argument("FieldModel: eps outside [0, 1]");
    }

    /// Spectral radius of (J + J*)/2 through the stacked coordinate matrix of
    /// the rank-2N separable form.
    double symmetrized_radius() const {
        const auto& X = kernel_->x_samples();
        const auto& Y = kernel_->y_samples();
        const int n = dim();
        Eigen::MatrixXd U(X.rows(), 2 * n), W(X.rows(), 2 * n);
        U.leftCols(n) = X;
        U.rightCols(n) = Y;
        W.leftCols(n) = 0.5 * Y;
        W.rightCols(n) = 0.5 * X;
        const Eigen::MatrixXd Ms =
            W.transpose() * (kernel_->field_weights().asDiagonal() * U);
        return Ms.eigenvalues().cwiseAbs().maxCoeff();
    }

    std::shared_ptr<const PGKernel> kernel_;
    Nonlinearity nl_;
    std::vector<double> tau_;
    Eigen::VectorXd input_;
    double theta_add_ = 0.0;
    Homotopy h_;
    Variant variant_ = Variant::Voltage;
    Eigen::VectorXd theta_coords_, ones_coords_;
    double input_orth_norm_ = 0.0;
};

}  // namespace nfcont
