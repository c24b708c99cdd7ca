#pragma once
// Firing-rate nonlinearities: the logistic sigmoid, its centered shift,
// closed-form derivatives, and the square bound used by the solution-bound
// suite.

#include <cmath>
#include <stdexcept>

namespace nfcont {

/// log(1 + e^z) without overflow.
inline double softplus(double z) {
    if (z > 35.0) return z;
    if (z < -35.0) return std::exp(z);
    return std::log1p(std::exp(z));
}

/// A smooth rate function evaluated as base(z - shift), plus the Heaviside
/// limit. The centered value eval(0) and the series coefficients s(q) are
/// what the bifurcation formulas consume; models fold thresholds into either
/// `shift` or their own residual assembly.
class Nonlinearity {
public:
    enum class Kind { Logistic, Heaviside };

    static Nonlinearity logistic() { return Nonlinearity(Kind::Logistic, 0.0); }
    /// Logistic with argument shift a: z -> 1/(1 + e^{-(z-a)}).
    static Nonlinearity logistic_shifted(double a) { return Nonlinearity(Kind::Logistic, a); }
    static Nonlinearity heaviside() { return Nonlinearity(Kind::Heaviside, 0.0); }

    /// Rate in (0,1); strictly increasing for the logistic kind.
    double eval(double z) const {
        const double x = z - shift_;
        if (kind_ == Kind::Heaviside) return x > 0.0 ? 1.0 : (x < 0.0 ? 0.0 : 0.5);
        // stable two-sided form; saturates cleanly in floating point
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    }

    /// Centered rate eval(z) - eval(0); odd for the unshifted logistic.
    double eval_shifted(double z) const {
        if (kind_ == Kind::Logistic && shift_ == 0.0)
            return 0.5 * std::tanh(0.5 * z);  // exact and cancellation-free
        return eval(z) - center();
    }

    /// q-th derivative, q in 1..4, from the recurrence S' = S(1-S).
    double deriv(double z, int q) const {
        if (q < 1 || q > 4) throw std::invalid_argument("Nonlinearity::deriv: order must be in 1..4");
        if (kind_ == Kind::Heaviside) {
            if (z == shift_) throw std::domain_error("Nonlinearity::deriv: Heaviside not smooth at its step");
            return 0.0;
        }
        const double S = eval(z);
        const double d1 = S * (1.0 - S);
        switch (q) {
            case 1: return d1;
            case 2: return d1 * (1.0 - 2.0 * S);
            case 3: return d1 * (1.0 - 6.0 * S + 6.0 * S * S);
            default: return d1 * (1.0 - 2.0 * S) * (1.0 - 12.0 * S + 12.0 * S * S);
        }
    }

    /// Series coefficient s_q of the centered nonlinearity at 0.
    double s(int q) const { return deriv(0.0, q); }

    /// eval(0); the homotopy offset uses this value.
    double center() const { return eval(0.0); }

    /// Integral of eval_shifted from 0 to u, in closed form.
    double antideriv_shifted(double u) const {
        if (kind_ == Kind::Heaviside) {
            const double c = center();
            return u > 0.0 ? u * (1.0 - c) : -u * c;
        }
        return softplus(u - shift_) - softplus(-shift_) - center() * u;
    }

    /// Integral of t * d/dt eval_shifted(t) from 0 to u (by parts).
    double moment_integral(double u) const { return u * eval_shifted(u) - antideriv_shifted(u); }

    bool smooth() const { return kind_ == Kind::Logistic; }
    double argument_shift() const { return shift_; }

private:
    Nonlinearity(Kind k, double a) : kind_(k), shift_(a) {}
    Kind kind_;
    double shift_;
};

/// Truth of (S(lx) - S(0))^2 <= S(l^2 x^2) - S(0) for the plain logistic;
/// holds for all real x, l and backs the equilibrium norm bound.
inline bool square_bound_check(double x, double l) {
    const Nonlinearity s = Nonlinearity::logistic();
    const double lhs = s.eval_shifted(l * x);
    return lhs * lhs <= s.eval_shifted(l * l * x * x);
}

}  // namespace nfcont
