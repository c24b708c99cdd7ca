#pragma once
// Constructors for the two concrete reference models and their analytic
// predictions: the ring model (hypercolumn, d = p = 1, N = 3) and the
// two-population flat-cortex model (d = p = 2, N = 100), plus random
// separable-kernel models for property tests.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "nfcont/expression.hpp"
#include "nfcont/model.hpp"
#include "nfcont/pg_kernel.hpp"
#include "nfcont/quadrature.hpp"
#include "nfcont/sigmoid.hpp"

namespace nfcont {

struct RingParams {
    double J0 = -1.0;  // sign eps0, |J0| = 1 (normalization)
    double J1 = 1.5;
    double alpha = 2.2;  // != 2: keeps the translation symmetry broken
    double beta = 0.1;   // input contrast shape
    double x0 = 0.1;     // input peak angle
    double theta = 0.1;
    double tau = 1.0;
    Homotopy h = {};
    int n_quad = 64;
    Variant variant = Variant::Voltage;
};

/// Ring kernel J0 + J1 cos(alpha (x - y)) on (-pi/2, pi/2) with dx/pi
/// measure, factored as (1, s|J1| cos, s|J1| sin) with signs in Y.
inline FieldModel build_ring(const RingParams& p) {
    if (std::abs(std::abs(p.J0) - 1.0) > 1e-12)
        throw std::invalid_argument("build_ring: |J0| must be 1");
    if (std::abs(p.alpha - 2.0) < 1e-9)
        throw std::invalid_argument(
            "build_ring: alpha = 2 is the symmetric case this construction avoids");
    const double e0 = p.J0 > 0 ? 1.0 : -1.0;
    const double e1 = p.J1 >= 0 ? 1.0 : -1.0;
    const double rj = std::sqrt(std::abs(p.J1));
    const double half_pi = std::acos(0.0);
    auto grid = build_grid(1, p.n_quad, {-half_pi, half_pi}, {0.0, 0.0},
                           1.0 / (2.0 * half_pi));

    const Expr one = Expr::constant(1.0);
    const Expr ca = Expr::cos(Expr::constant(p.alpha) * Expr::x());
    const Expr sa = Expr::sin(Expr::constant(p.alpha) * Expr::x());
    std::vector<std::vector<Expr>> X = {{one}, {Expr::constant(rj) * ca},
                                        {Expr::constant(rj) * sa}};
    std::vector<std::vector<Expr>> Y = {{Expr::constant(e0) * one},
                                        {Expr::constant(e1 * rj) * ca},
                                        {Expr::constant(e1 * rj) * sa}};
    auto kernel = std::make_shared<const PGKernel>(grid, 1, X, Y);

    const Expr input = Expr::constant(1.0 - p.beta) +
                       Expr::constant(p.beta) *
                           Expr::cos(Expr::constant(p.alpha) *
                                     (Expr::x() - Expr::constant(p.x0)));
    const auto nn = static_cast<Eigen::Index>(grid.size());
    Eigen::VectorXd I(nn);
    for (Eigen::Index i = 0; i < nn; ++i) I[i] = input.eval(grid.px[i], 0.0);

    return FieldModel(kernel, Nonlinearity::logistic(), {p.tau}, I, p.theta,
                      p.h, p.variant);
}

/// Closed-form coordinate matrix of the ring kernel; the Jacobian of the
/// reduced system at v = 0 is -Id + lambda s1 K.
inline Eigen::Matrix3d ring_K(const RingParams& p) {
    const double e0 = p.J0 > 0 ? 1.0 : -1.0;
    const double e1 = p.J1 >= 0 ? 1.0 : -1.0;
    const double rj = std::sqrt(std::abs(p.J1));
    const double pi = 2.0 * std::acos(0.0);
    const double c1 = 2.0 * std::sin(p.alpha * pi / 2.0) / (p.alpha * pi);
    const double cc = 0.5 + std::sin(p.alpha * pi) / (2.0 * p.alpha * pi);
    const double ss = 0.5 - std::sin(p.alpha * pi) / (2.0 * p.alpha * pi);
    Eigen::Matrix3d K;
    K << e0, e0 * rj * c1, 0.0,
         e1 * rj * c1, p.J1 * cc, 0.0,
         0.0, 0.0, p.J1 * ss;
    return K;
}

struct TwoPopParams {
    double a = 10.0, b = 15.0, c = 12.75;  // connection strengths, all > 0
    double a11 = 3.0, a12 = 2.0, a21 = 2.0, a22 = 4.0;      // bell exponents, r side
    double a11p = 3.0, a12p = 2.0, a21p = 2.0, a22p = 4.0;  // r' side
    int taylor_order = 4;
    std::array<double, 4> C = {0.0, 0.0, 0.0, 0.0};  // constant offsets, row-major
    double theta = 1.3;  // sigmoid argument shift
    double l_decay = 0.5;
    Homotopy h = {};
    int n_quad = 32;
    Variant variant = Variant::Voltage;
};

namespace detail {

inline Expr bell(double exponent) {
    const int e = static_cast<int>(exponent);
    if (std::abs(exponent - e) > 1e-12 || e < 1)
        throw std::invalid_argument("two-population bell exponent must be a positive integer");
    return Expr::pow(Expr::constant(1.0) - Expr::x() * Expr::x() -
                         Expr::y() * Expr::y(),
                     e);
}

inline Expr monomial(int kx, int ky) {
    return Expr::pow(Expr::x(), kx) * Expr::pow(Expr::y(), ky);
}

}  // namespace detail

/// Two-population kernel on [-1,1]^2: per block (i,j) the separable form
/// strength * bell^{a_ij}(r) bell^{a'_ij}(r') T(e^{x x'/s}) T(e^{y y'/s})
/// with per-axis Taylor truncation, giving (order+1)^2 factors per block;
/// at the reference settings the state dimension is exactly 100.
/// The uniform decay l Id is absorbed into the factor gains, so fixed points
/// of the reduced map are persistent states of the original rate dynamics.
inline FieldModel build_twopop(const TwoPopParams& p) {
    const std::array<double, 4> expo = {p.a11, p.a12, p.a21, p.a22};
    const std::array<double, 4> expop = {p.a11p, p.a12p, p.a21p, p.a22p};
    for (double e : expo)
        if (!(e > 0.5)) throw std::invalid_argument("build_twopop: exponents must exceed 1/2");
    for (double e : expop)
        if (!(e > 0.5)) throw std::invalid_argument("build_twopop: exponents must exceed 1/2");
    if (p.taylor_order < 0)
        throw std::invalid_argument("build_twopop: negative Taylor order");
    if (!(p.a > 0.0 && p.b > 0.0 && p.c > 0.0))
        throw std::invalid_argument("build_twopop: strengths must be positive");

    if (!(p.l_decay > 0.0))
        throw std::invalid_argument("build_twopop: decay rate must be positive");

    auto grid = build_grid(2, p.n_quad, {-1.0, 1.0}, {-1.0, 1.0}, 1.0);
    const Expr zero = Expr::constant(0.0);
    const double tau = 1.0 / p.l_decay;
    // block strengths with the excitatory/inhibitory sign pattern, scaled by
    // the absorbed decay
    const std::array<double, 4> strength = {tau * p.a, -tau * p.b, tau * p.b,
                                            -tau * p.c};
    const std::array<double, 4> sigma_inv = {p.a11, p.a12, p.a21, p.a22};

    std::vector<std::vector<Expr>> X, Y;
    for (int blk = 0; blk < 4; ++blk) {
        const int pi = blk / 2, pj = blk % 2;
        const Expr bx = detail::bell(expo[blk]);
        const Expr by = detail::bell(expop[blk]);
        for (int kx = 0; kx <= p.taylor_order; ++kx) {
            for (int ky = 0; ky <= p.taylor_order; ++ky) {
                double coeff = strength[blk];
                for (int t = 1; t <= kx; ++t) coeff *= sigma_inv[blk] / t;
                for (int t = 1; t <= ky; ++t) coeff *= sigma_inv[blk] / t;
                const Expr mono = detail::monomial(kx, ky);
                std::vector<Expr> xf(2, zero), yf(2, zero);
                xf[pi] = mono * bx;
                yf[pj] = Expr::constant(coeff) * mono * by;
                X.push_back(xf);
                Y.push_back(yf);
            }
        }
        if (p.C[blk] != 0.0) {
            std::vector<Expr> xf(2, zero), yf(2, zero);
            xf[pi] = Expr::constant(1.0);
            yf[pj] = Expr::constant(tau * p.C[blk]);
            X.push_back(xf);
            Y.push_back(yf);
        }
    }
    auto kernel = std::make_shared<const PGKernel>(grid, 2, X, Y);
    return FieldModel(kernel, Nonlinearity::logistic_shifted(p.theta),
                      {tau, tau}, Eigen::VectorXd(), 0.0, p.h, p.variant);
}

/// Fourier-side prediction for the un-approximated Gaussian convolution
/// kernel: eigenvalues of J restricted to the cos(n.r) plane.
struct FourierMode {
    int n1 = 0, n2 = 0;
    std::complex<double> sigma1, sigma2;
    bool hopf_relevant = false;  // complex pair: candidate oscillatory mode
};

inline std::vector<FourierMode> twopop_fourier_predictions(const TwoPopParams& p,
                                                           int n_cap = 3) {
    auto grid = build_grid(2, p.n_quad, {-1.0, 1.0}, {-1.0, 1.0}, 1.0);
    const double tau = 1.0 / p.l_decay;
    auto ghat = [&](double sigma_inv, int n1, int n2) {
        double s = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double r2 = grid.px[i] * grid.px[i] + grid.py[i] * grid.py[i];
            s += grid.w[i] * std::exp(-0.5 * sigma_inv * r2) *
                 std::cos(n1 * grid.px[i] + n2 * grid.py[i]);
        }
        return s;
    };
    std::vector<FourierMode> out;
    for (int n1 = 0; n1 <= n_cap; ++n1) {
        for (int n2 = 0; n2 <= n_cap; ++n2) {
            const double g1 = ghat(p.a11, n1, n2);
            const double g2 = ghat(p.a12, n1, n2);
            const double g3 = ghat(p.a22, n1, n2);
            const double tr = tau * (p.a * g1 - p.c * g3);
            const double det =
                tau * tau * (-p.a * g1 * p.c * g3 + p.b * g2 * p.b * g2);
            const std::complex<double> disc =
                std::sqrt(std::complex<double>(tr * tr - 4.0 * det, 0.0));
            FourierMode m;
            m.n1 = n1;
            m.n2 = n2;
            m.sigma1 = 0.5 * (tr + disc);
            m.sigma2 = 0.5 * (tr - disc);
            m.hopf_relevant = tr * tr - 4.0 * det < 0.0;
            out.push_back(m);
        }
    }
    return out;
}

/// Random low-rank model on (-1,1) with trig/polynomial factors; used by the
/// property suites. Rank, signs, and shapes drawn from the given engine.
inline FieldModel random_model(std::mt19937_64& rng, int max_rank = 6,
                               double lambda = 1.0) {
    std::uniform_int_distribution<int> rank_d(1, max_rank);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    std::uniform_int_distribution<int> shape(0, 2);
    const int n = rank_d(rng);
    auto grid = build_grid(1, 48, {-1.0, 1.0}, {0.0, 0.0}, 0.5);
    auto factor = [&]() {
        switch (shape(rng)) {
            case 0:
                return Expr::constant(coef(rng)) +
                       Expr::constant(coef(rng)) * Expr::x();
            case 1:
                return Expr::constant(coef(rng)) *
                       Expr::cos(Expr::constant(1.0 + 2.0 * std::abs(coef(rng))) *
                                 Expr::x());
            default:
                return Expr::constant(coef(rng)) *
                       Expr::sin(Expr::constant(1.0 + 2.0 * std::abs(coef(rng))) *
                                 Expr::x());
        }
    };
    std::vector<std::vector<Expr>> X, Y;
    for (int k = 0; k < n; ++k) {
        X.push_back({factor()});
        Y.push_back({factor()});
    }
    auto kernel = std::make_shared<const PGKernel>(grid, 1, X, Y);
    const auto nn = static_cast<Eigen::Index>(grid.size());
    Eigen::VectorXd I(nn);
    const double i0 = coef(rng), i1 = coef(rng);
    for (Eigen::Index i = 0; i < nn; ++i) I[i] = i0 + i1 * grid.px[i];
    Homotopy h;
    h.lambda = lambda;
    h.mu = 0.5 * (1.0 + coef(rng));
    h.eps = 0.5 * (1.0 + coef(rng));
    return FieldModel(kernel, Nonlinearity::logistic(), {1.0}, I,
                      0.3 * coef(rng), h);
}

}  // namespace nfcont
