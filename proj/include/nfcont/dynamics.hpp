#pragma once
// Time integration of the reduced coordinate flow, stability classification,
// energy identities, recurrence detection, and the absorbing-ball bound.
//
// Flow: tau_k dv_k/dt = -r_k(v), the negated residual scaled per coordinate.
// The component of the field outside span{X} decouples and decays in closed
// form, entering the sigmoid argument as a vanishing deviation field.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nfcont/model.hpp"
#include "nfcont/stationary.hpp"

namespace nfcont {

/// Adaptive integrator controls. orth_dev0 is the initial deviation of the
/// orthogonal field component from its asymptote; it decays as exp(-t/tau)
/// per population and is projected off span{X} at setup.
struct IntegrateOptions {
    double abs_tol = 1e-9;
    double rel_tol = 1e-7;
    double h0 = 0.0;  // 0 = automatic
    long max_steps = 2000000;
    Eigen::VectorXd orth_dev0;  // empty = none
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> states;    // reduced coordinates per node
    std::vector<Eigen::VectorXd> derivs;    // flow value per node
    std::vector<Eigen::VectorXd> orth_amp;  // exp(-t/tau_p) per population
    long n_steps = 0;
    long n_rejected = 0;
    long n_rhs = 0;
    bool complete = false;

    /// Cubic Hermite dense output between stored nodes.
    Eigen::VectorXd sample(double t) const { return hermite(t, false); }
    /// Time derivative of the dense output.
    Eigen::VectorXd sample_deriv(double t) const { return hermite(t, true); }

private:
    Eigen::VectorXd hermite(double t, bool deriv) const {
        if (times.size() < 2) {
            if (times.empty()) throw std::runtime_error("Trajectory: empty");
            return deriv ? derivs.front() : states.front();
        }
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        std::size_t i = it == times.begin()
                            ? 0
                            : static_cast<std::size_t>(it - times.begin()) - 1;
        i = std::min(i, times.size() - 2);
        const double h = times[i + 1] - times[i];
        const double s = std::clamp((t - times[i]) / h, 0.0, 1.0);
        const Eigen::VectorXd &y0 = states[i], &y1 = states[i + 1];
        const Eigen::VectorXd &d0 = derivs[i], &d1 = derivs[i + 1];
        const double s2 = s * s, s3 = s2 * s;
        if (!deriv)
            return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0 +
                   (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * d1;
        return ((6 * s2 - 6 * s) * y0 + (3 * s2 - 4 * s + 1) * h * d0 +
                (-6 * s2 + 6 * s) * y1 + (3 * s2 - 2 * s) * h * d1) /
               h;
    }
};

/// Thrown when the step size underflows; carries the progress made so far.
struct IntegrationError : std::runtime_error {
    IntegrationError(const std::string& what, Trajectory partial_)
        : std::runtime_error(what), partial(std::move(partial_)) {}
    Trajectory partial;
};

enum class StabilityLabel {
    StableNode,
    StableFocus,
    Saddle,
    UnstableNode,
    UnstableFocus,
    Inconclusive
};

struct StabilityRecord {
    int n_unstable = 0;
    bool marginal = false;
    StabilityLabel label = StabilityLabel::Inconclusive;
    Eigen::VectorXcd eigenvalues;
};

/// Confinement data: trajectories starting outside radius R enter the ball in
/// finite time; delta is the uniform squared-norm decrease rate outside it.
struct AbsorbingBall {
    double R = 0.0;
    double delta = 0.0;
    double tau_max = 0.0;

    /// Upper bound on the entry time from field norm ||V0|| > R.
    double entry_time_bound(double v0_norm) const {
        return std::max(0.0, (v0_norm * v0_norm - R * R) / (2.0 * delta));
    }
};

struct RecurrenceReport {
    bool found = false;
    double t_visit = 0.0;
    double t_return = 0.0;
    double distance = 0.0;
};

namespace detail {

// Per-population decay applied to a stacked field vector.
inline Eigen::VectorXd population_decay_pow(const FieldModel& m, double t) {
    const int p = m.kernel().populations();
    const Eigen::Index npts = m.kernel().field_size() / p;
    Eigen::VectorXd f(m.kernel().field_size());
    for (int i = 0; i < p; ++i)
        f.segment(i * npts, npts)
            .setConstant(std::exp(-t / m.decay()[static_cast<std::size_t>(i)]));
    return f;
}

// Flow right-hand side with the decaying orthogonal deviation inside the
// sigmoid argument: tau_k vdot_k = -v_k + <Y_k, S0(lambda (U + D exp(-t/tau)))> + m_k.
struct Flow {
    const FieldModel& m;
    Eigen::VectorXd inv_tau;       // 1/tau_k per coordinate
    Eigen::VectorXd dev0;          // orthogonal deviation at t = 0 (may be empty)
    Eigen::VectorXd const_coords;  // m_k, the v-independent residual part

    explicit Flow(const FieldModel& model) : m(model) {
        inv_tau = m.coordinate_decay().cwiseInverse();
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m.kernel().field_size());
        const_coords =
            m.params().mu * m.nonlinearity().center() * m.kernel().project_coords(ones);
        if (m.variant() == Variant::Voltage)
            const_coords += m.params().mu * m.theta_coords();
    }

    Eigen::VectorXd operator()(double t, const Eigen::VectorXd& v) const {
        Eigen::VectorXd arg = m.reconstruct(v);
        if (dev0.size() > 0)
            arg += population_decay_pow(m, t).cwiseProduct(dev0);
        const double lam = m.params().lambda;
        Eigen::VectorXd s(arg.size());
        for (Eigen::Index i = 0; i < arg.size(); ++i)
            s[i] = m.nonlinearity().eval_shifted(lam * arg[i]);
        Eigen::VectorXd out = -v + m.kernel().project_coords(s) + const_coords;
        return inv_tau.cwiseProduct(out);
    }
};

// Dormand-Prince 5(4) tableau.
constexpr double dp_c[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double dp_a[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
constexpr double dp_b5[7] = {35.0 / 384,      0.0,  500.0 / 1113, 125.0 / 192,
                             -2187.0 / 6784, 11.0 / 84, 0.0};
constexpr double dp_b4[7] = {5179.0 / 57600,  0.0,        7571.0 / 16695,
                             393.0 / 640,     -92097.0 / 339200,
                             187.0 / 2100,    1.0 / 40};

template <class RHS>
Eigen::VectorXd dp_step(const RHS& f, double t, const Eigen::VectorXd& y,
                        double h, const Eigen::VectorXd& k1,
                        Eigen::VectorXd& err, Eigen::VectorXd& k_last) {
    const Eigen::Index n = y.size();
    Eigen::MatrixXd k(n, 7);
    k.col(0) = k1;
    for (int s = 1; s < 7; ++s) {
        Eigen::VectorXd ys = y;
        for (int j = 0; j < s; ++j)
            if (dp_a[s][j] != 0.0) ys += (h * dp_a[s][j]) * k.col(j);
        k.col(s) = f(t + dp_c[s] * h, ys);
    }
    Eigen::VectorXd y5 = y, e = Eigen::VectorXd::Zero(n);
    for (int s = 0; s < 7; ++s) {
        if (dp_b5[s] != 0.0) y5 += (h * dp_b5[s]) * k.col(s);
        e += (h * (dp_b5[s] - dp_b4[s])) * k.col(s);
    }
    err = e;
    k_last = k.col(6);  // FSAL: equals f at (t + h, y5)
    return y5;
}

inline double error_norm(const Eigen::VectorXd& e, const Eigen::VectorXd& y0,
                         const Eigen::VectorXd& y1, double atol, double rtol) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        const double sc =
            atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        acc += (e[i] / sc) * (e[i] / sc);
    }
    return std::sqrt(acc / static_cast<double>(e.size()));
}

// Ratio of each range factor to its projection factor; requires Y_k = c_k X_k
// pointwise, the structure that makes the kernel symmetric.
inline Eigen::VectorXd symmetric_signature(const FieldModel& m) {
    const auto& X = m.kernel().x_samples();
    const auto& Y = m.kernel().y_samples();
    Eigen::VectorXd c(m.dim());
    for (int k = 0; k < m.dim(); ++k) {
        const double xx = m.kernel().field_inner(X.col(k), X.col(k));
        c[k] = m.kernel().field_inner(X.col(k), Y.col(k)) / xx;
        const double scale = std::max(1.0, Y.col(k).cwiseAbs().maxCoeff());
        if ((Y.col(k) - c[k] * X.col(k)).cwiseAbs().maxCoeff() > 1e-9 * scale)
            throw std::invalid_argument(
                "energy: kernel is not symmetric-structured (Y_k != c_k X_k)");
        if (std::abs(c[k]) < 1e-12)
            throw std::invalid_argument("energy: zero factor weight");
    }
    return c;
}

// Binary entropy term u ln u + (1-u) ln(1-u), continuous limit 0 at the ends.
inline double entropy_h(double u) {
    u = std::clamp(u, 0.0, 1.0);
    double out = 0.0;
    if (u > 0.0) out += u * std::log(u);
    if (u < 1.0) out += (1.0 - u) * std::log(1.0 - u);
    return out;
}

// exp(-t/tau_p) per population, the orthogonal-component amplitudes.
inline Eigen::VectorXd orth_amplitudes(const FieldModel& m, double t) {
    Eigen::VectorXd a(m.kernel().populations());
    for (int p = 0; p < m.kernel().populations(); ++p)
        a[p] = std::exp(-t / m.decay()[static_cast<std::size_t>(p)]);
    return a;
}

}  // namespace detail

/// Integrate the reduced flow from v0 for t in [0, t_end] with an embedded
/// 5(4) pair. Throws IntegrationError (with partial data) on step underflow
/// or step-budget exhaustion. Thread-safe for a shared model.
inline Trajectory integrate(const FieldModel& m, const Eigen::VectorXd& v0,
                            double t_end, const IntegrateOptions& opt = {}) {
    if (!(t_end > 0.0)) throw std::invalid_argument("integrate: t_end must be positive");
    if (v0.size() != m.dim()) throw std::invalid_argument("integrate: state size mismatch");
    if (!(opt.abs_tol > 0.0) || !(opt.rel_tol >= 0.0))
        throw std::invalid_argument("integrate: tolerances must be positive");

    detail::Flow f(m);
    if (opt.orth_dev0.size() > 0) {
        if (opt.orth_dev0.size() != m.kernel().field_size())
            throw std::invalid_argument("integrate: orth_dev0 size mismatch");
        // remove any span{X} component so the deviation is purely orthogonal
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(
            m.kernel().gram_x());
        const Eigen::VectorXd coords =
            cod.solve(m.kernel().x_samples().transpose() *
                      (m.kernel().field_weights().asDiagonal() *
                       opt.orth_dev0));
        f.dev0 = opt.orth_dev0 - m.kernel().reconstruct(coords);
    }

    Trajectory traj;
    double t = 0.0;
    Eigen::VectorXd y = v0;
    Eigen::VectorXd k1 = f(t, y);
    traj.n_rhs = 1;
    traj.times.push_back(0.0);
    traj.states.push_back(y);
    traj.derivs.push_back(k1);
    traj.orth_amp.push_back(detail::orth_amplitudes(m, 0.0));

    double h = opt.h0;
    if (h <= 0.0) {
        // conventional starting-step heuristic from the scaled norms
        const double d0 = detail::error_norm(y, y, y, opt.abs_tol, opt.rel_tol);
        const double d1 = detail::error_norm(k1, y, y, opt.abs_tol, opt.rel_tol);
        h = (d0 > 1e-10 && d1 > 1e-10) ? 0.01 * d0 / d1 : 1e-6;
        h = std::min(h, t_end);
    }

    Eigen::VectorXd err(m.dim()), k_last(m.dim());
    while (t < t_end) {
        if (traj.n_steps + traj.n_rejected >= opt.max_steps)
            throw IntegrationError("integrate: step budget exhausted", std::move(traj));
        const double h_try = std::min(h, t_end - t);
        if (!(h_try > std::abs(t) * 1e-15 + 1e-300))
            throw IntegrationError("integrate: step size underflow", std::move(traj));
        const Eigen::VectorXd y_new =
            detail::dp_step(f, t, y, h_try, k1, err, k_last);
        traj.n_rhs += 6;
        const double en =
            detail::error_norm(err, y, y_new, opt.abs_tol, opt.rel_tol);
        if (en <= 1.0 || h_try <= 1e-14 * std::max(1.0, std::abs(t))) {
            t += h_try;
            y = y_new;
            k1 = k_last;
            ++traj.n_steps;
            traj.times.push_back(t);
            traj.states.push_back(y);
            traj.derivs.push_back(k1);
            traj.orth_amp.push_back(detail::orth_amplitudes(m, t));
        } else {
            ++traj.n_rejected;
        }
        const double fac =
            en > 0.0 ? 0.9 * std::pow(en, -0.2) : 5.0;
        h = h_try * std::clamp(fac, 0.2, 5.0);
    }
    traj.complete = true;
    return traj;
}

/// Fixed-step fifth-order reference integration (no error control); used for
/// convergence-order verification.
inline Trajectory integrate_fixed(const FieldModel& m, const Eigen::VectorXd& v0,
                                  double t_end, double h) {
    if (!(t_end > 0.0) || !(h > 0.0))
        throw std::invalid_argument("integrate_fixed: t_end and h must be positive");
    detail::Flow f(m);
    Trajectory traj;
    double t = 0.0;
    Eigen::VectorXd y = v0, k1 = f(t, y), err(m.dim()), k_last(m.dim());
    traj.times.push_back(0.0);
    traj.states.push_back(y);
    traj.derivs.push_back(k1);
    traj.orth_amp.push_back(detail::orth_amplitudes(m, 0.0));
    while (t < t_end - 1e-12 * t_end) {
        const double h_step = std::min(h, t_end - t);
        y = detail::dp_step(f, t, y, h_step, k1, err, k_last);
        t += h_step;
        k1 = k_last;
        ++traj.n_steps;
        traj.n_rhs += 6;
        traj.times.push_back(t);
        traj.states.push_back(y);
        traj.derivs.push_back(k1);
        traj.orth_amp.push_back(detail::orth_amplitudes(m, t));
    }
    traj.complete = true;
    return traj;
}

/// Linear stability at an equilibrium: eigenvalues of the flow Jacobian
/// -diag(1/tau_k) J_r(v), unstable count, and a node/saddle/focus label.
/// Any eigenvalue real part within the margin of zero makes the record
/// inconclusive. Requires residual(v) below 1e-8.
inline StabilityRecord classify(const FieldModel& m, const Eigen::VectorXd& v,
                                double margin = 1e-8) {
    if (m.residual(v).cwiseAbs().maxCoeff() >= 1e-8)
        throw std::invalid_argument("classify: state is not an equilibrium");
    StabilityRecord rec;
    const Eigen::VectorXd tau = m.coordinate_decay();
    const Eigen::MatrixXd A =
        (-tau.cwiseInverse()).asDiagonal() * m.jacobian(v);
    Eigen::EigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("classify: eigensolver failed");
    rec.eigenvalues = es.eigenvalues();
    bool complex_pair = false;
    double scale = 0.0;
    for (Eigen::Index i = 0; i < rec.eigenvalues.size(); ++i)
        scale = std::max(scale, std::abs(rec.eigenvalues[i]));
    for (Eigen::Index i = 0; i < rec.eigenvalues.size(); ++i) {
        const double re = rec.eigenvalues[i].real();
        if (re > margin) ++rec.n_unstable;
        if (std::abs(re) <= margin) rec.marginal = true;
        if (std::abs(rec.eigenvalues[i].imag()) > 1e-9 * std::max(1.0, scale))
            complex_pair = true;
    }
    if (rec.marginal) {
        rec.label = StabilityLabel::Inconclusive;
    } else if (rec.n_unstable == 0) {
        rec.label = complex_pair ? StabilityLabel::StableFocus
                                 : StabilityLabel::StableNode;
    } else if (rec.n_unstable == m.dim()) {
        rec.label = complex_pair ? StabilityLabel::UnstableFocus
                                 : StabilityLabel::UnstableNode;
    } else {
        rec.label = StabilityLabel::Saddle;
    }
    return rec;
}

/// Potential whose signature-weighted gradient generates the flow:
///   tau_k dv_k/dt = c_k dE/dv_k,  c_k the factor weights with Y_k = c_k X_k.
/// E(v) = -sum v_k^2/(2 c_k) + (1/lambda) int Sbar0(lambda U) dmu
///        + sum m_k v_k / c_k,   U = reconstruct(v).
/// The nonlinear term vanishes analytically at lambda = 0.
inline double potential(const FieldModel& m, const Eigen::VectorXd& v) {
    if (!m.nonlinearity().smooth())
        throw std::invalid_argument("potential: requires a smooth nonlinearity");
    const Eigen::VectorXd c = detail::symmetric_signature(m);
    const detail::Flow f(m);
    double e = 0.0;
    for (int k = 0; k < m.dim(); ++k)
        e += -v[k] * v[k] / (2.0 * c[k]) + f.const_coords[k] * v[k] / c[k];
    const double lam = m.params().lambda;
    if (lam > 0.0) {
        const Eigen::VectorXd U = m.reconstruct(v);
        const auto& w = m.kernel().field_weights();
        double nl = 0.0;
        for (Eigen::Index i = 0; i < U.size(); ++i)
            nl += w[i] * m.nonlinearity().antideriv_shifted(lam * U[i]);
        e += nl / lam;
    }
    return e;
}

/// Rate-space energy, nondecreasing along every trajectory of a
/// symmetric-structured model (ascent sign convention):
///   E(v) = (1/2) <r, J r> + <h, r> - (1/lambda) int G(r) dmu,
/// r = S0(lambda U), G the primitive of the sigmoid inverse, h the constant
/// forcing field. Strictly increasing except at equilibria.
inline double rate_energy(const FieldModel& m, const Eigen::VectorXd& v) {
    if (!m.nonlinearity().smooth())
        throw std::invalid_argument("rate_energy: requires a smooth nonlinearity");
    detail::symmetric_signature(m);  // validates the symmetric structure
    const double lam = m.params().lambda;
    const Eigen::VectorXd U = m.reconstruct(v);
    Eigen::VectorXd r(U.size());
    for (Eigen::Index i = 0; i < U.size(); ++i)
        r[i] = m.nonlinearity().eval_shifted(lam * U[i]);

    // <r, J r> through the separable form
    const Eigen::VectorXd p = m.kernel().project_coords(r);  // <Y_k, r>
    const Eigen::VectorXd q =
        m.kernel().x_samples().transpose() *
        (m.kernel().field_weights().asDiagonal() * r);  // <X_k, r>
    double e = 0.5 * p.dot(q);

    // constant forcing: eps I plus the reduced homotopy constants mapped back
    const detail::Flow f(m);
    Eigen::VectorXd h = m.params().eps * m.input() +
                        m.kernel().reconstruct(f.const_coords);
    if (m.variant() == Variant::Activity)
        h += m.params().mu * m.kernel().reconstruct(m.theta_coords());
    e += m.kernel().field_inner(h, r);

    if (lam > 0.0) {
        // G(rho) = a rho + H(rho + c0) - H(c0), the primitive of S0^{-1}
        const double a = m.nonlinearity().argument_shift();
        const double c0 = m.nonlinearity().center();
        const auto& w = m.kernel().field_weights();
        double g = 0.0;
        for (Eigen::Index i = 0; i < r.size(); ++i)
            g += w[i] * (a * r[i] + detail::entropy_h(r[i] + c0) -
                         detail::entropy_h(c0));
        e -= g / lam;
    }
    return e;
}

/// Max component error of the literal gradient identity
///   tau_k dv_k/dt = c_k dE/dv_k
/// with dE/dv_k estimated by central differences of the potential.
inline double gradient_check(const FieldModel& m, const Eigen::VectorXd& v,
                             double fd_step = 1e-6) {
    const Eigen::VectorXd c = detail::symmetric_signature(m);
    const Eigen::VectorXd tau = m.coordinate_decay();
    const Eigen::VectorXd rhs = tau.cwiseInverse().cwiseProduct(-m.residual(v));
    double worst = 0.0;
    for (int k = 0; k < m.dim(); ++k) {
        Eigen::VectorXd vp = v, vm = v;
        vp[k] += fd_step;
        vm[k] -= fd_step;
        const double g = (potential(m, vp) - potential(m, vm)) / (2.0 * fd_step);
        worst = std::max(worst, std::abs(rhs[k] - (c[k] / tau[k]) * g));
    }
    return worst;
}

/// Confinement ball from the analytic bound: R = 2 tau_max B1 and
/// delta = 2 tau_max B1^2, with B1 the equilibrium norm bound.
inline AbsorbingBall absorbing_ball(const FieldModel& m) {
    AbsorbingBall ball;
    ball.tau_max = *std::max_element(m.decay().begin(), m.decay().end());
    const double b = m.bounds().B1;
    ball.R = 2.0 * ball.tau_max * b;
    ball.delta = 2.0 * ball.tau_max * b * b;
    return ball;
}

/// Field norm of the state a coordinate vector represents.
inline double state_field_norm(const FieldModel& m, const Eigen::VectorXd& v) {
    return m.kernel().field_norm(m.reconstruct(v));
}

/// Scan a trajectory for a return to within return_tol of an earlier state
/// after leaving it by leave_factor times that radius, with nonzero speed at
/// the return. Absence certifies no periodic orbit was traversed.
inline RecurrenceReport detect_recurrence(const Trajectory& traj,
                                          double return_tol = 1e-6,
                                          double leave_factor = 10.0,
                                          double min_speed = 1e-6) {
    RecurrenceReport rep;
    const std::size_t n = traj.states.size();
    for (std::size_t i = 0; i + 2 < n; ++i) {
        double excursion = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = (traj.states[j] - traj.states[i]).norm();
            if (excursion > leave_factor * return_tol && d < return_tol &&
                traj.derivs[j].norm() > min_speed) {
                rep.found = true;
                rep.t_visit = traj.times[i];
                rep.t_return = traj.times[j];
                rep.distance = d;
                return rep;
            }
            excursion = std::max(excursion, d);
        }
    }
    return rep;
}

/// Index of the nearest solution in a set, with its distance; labels
/// trajectory endpoints when reading off heteroclinic structure.
inline std::pair<int, double> nearest_equilibrium(const SolutionSet& set,
                                                  const Eigen::VectorXd& v) {
    int best = -1;
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < set.solutions.size(); ++i) {
        const double d = (set.solutions[i].v - v).norm();
        if (d < dist) {
            dist = d;
            best = static_cast<int>(i);
        }
    }
    return {best, dist};
}

}  // namespace nfcont
