#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "nfcont/pg_kernel.hpp"

using nfcont::Expr;
using nfcont::PGKernel;
using nfcont::QuadratureGrid;
using nfcont::build_grid;

namespace {

constexpr double kPi = std::numbers::pi;

QuadratureGrid ring_grid(int n = 64) {
    return build_grid(1, n, {-kPi / 2.0, kPi / 2.0}, {0.0, 0.0}, 1.0 / kPi);
}

// Ring connectivity J0 + J1 cos(a(x-y)) as a rank-3 separable kernel with the
// sign of J0 and J1 folded into the Y factors.
PGKernel ring_kernel(double J0, double J1, double alpha, int n = 64) {
    const double e0 = J0 >= 0 ? 1.0 : -1.0;
    const double e1 = J1 >= 0 ? 1.0 : -1.0;
    const double r = std::sqrt(std::abs(J1));
    const Expr one = Expr::constant(1.0);
    const Expr ca = Expr::cos(Expr::constant(alpha) * Expr::x());
    const Expr sa = Expr::sin(Expr::constant(alpha) * Expr::x());
    const Expr rc = Expr::constant(r) * ca;
    const Expr rs = Expr::constant(r) * sa;
    std::vector<std::vector<Expr>> xs = {{one}, {rc}, {rs}};
    std::vector<std::vector<Expr>> ys = {{Expr::constant(e0) * one},
                                         {Expr::constant(e1) * rc},
                                         {Expr::constant(e1) * rs}};
    return PGKernel(ring_grid(n), 1, xs, ys);
}

}  // namespace

// frozen ring constants at alpha = 2.2, J0 = -1, J1 = 1.5
static constexpr double kSigSin = 0.6862166397416837;
static constexpr double kSigCosPlus = 0.8071462724211136;
static constexpr double kSigCosMinus = -0.9933629121627973;

TEST_CASE("apply maps sin mode to itself", "[pg_kernel]") {
    const auto J = ring_kernel(-1.0, 1.5, 2.2);
    const auto& g = J.grid();
    Eigen::VectorXd u(J.field_size());
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = std::sin(2.2 * g.px[i]);
    const Eigen::VectorXd out = J.apply(u);
    // J sin_a = J1 <1, sin_a^2> sin_a
    const Eigen::VectorXd expect = kSigSin * u;
    CHECK((out - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rank-1 kernel applies as a projection", "[pg_kernel]") {
    const auto g = build_grid(1, 32, {-1.0, 1.0});
    std::vector<std::vector<Expr>> xs = {{Expr::x()}};
    std::vector<std::vector<Expr>> ys = {{Expr::constant(1.0)}};
    const PGKernel J(g, 1, xs, ys);
    Eigen::VectorXd u = Eigen::VectorXd::Constant(J.field_size(), 1.0);
    // <1, 1> over [-1,1] is 2, so J u = 2 X
    const Eigen::VectorXd out = J.apply(u);
    for (Eigen::Index i = 0; i < out.size(); ++i)
        CHECK(out[i] == Catch::Approx(2.0 * g.px[i]).margin(1e-13));
    CHECK(J.apply(Eigen::VectorXd::Zero(J.field_size())).norm() == 0.0);
}

TEST_CASE("apply is linear", "[pg_kernel]") {
    const auto J = ring_kernel(-1.0, 1.5, 2.2, 32);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> gauss;
    Eigen::VectorXd u(J.field_size()), v(J.field_size());
    for (Eigen::Index i = 0; i < u.size(); ++i) { u[i] = gauss(rng); v[i] = gauss(rng); }
    const double a = 0.7, b = -1.9;
    const Eigen::VectorXd lhs = J.apply(a * u + b * v);
    const Eigen::VectorXd rhs = a * J.apply(u) + b * J.apply(v);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ring spectrum matches closed forms", "[pg_kernel]") {
    const auto J = ring_kernel(-1.0, 1.5, 2.2);
    const auto rep = J.spectrum();
    REQUIRE(rep.modes.size() == 3);
    // sorted by decreasing real part
    CHECK(rep.modes[0].sigma.real() == Catch::Approx(kSigCosPlus).epsilon(1e-10));
    CHECK(rep.modes[1].sigma.real() == Catch::Approx(kSigSin).epsilon(1e-10));
    CHECK(rep.modes[2].sigma.real() == Catch::Approx(kSigCosMinus).epsilon(1e-10));
    for (const auto& m : rep.modes) {
        CHECK(m.simple);
        CHECK(std::abs(m.sigma.imag()) < 1e-12);
        // eigen residual in L2: ||J e - sigma e||
        const Eigen::VectorXd e = J.mode_field(m);
        const Eigen::VectorXd r = J.apply(e) - m.sigma.real() * e;
        CHECK(J.field_norm(r) < 1e-10);
        // normalization contract
        CHECK(J.field_norm(e) == Catch::Approx(1.0).epsilon(1e-12));
        const Eigen::VectorXd es = J.adjoint_mode_field(m);
        CHECK(J.field_inner(e, es) == Catch::Approx(1.0).epsilon(1e-10));
    }
    // biorthogonality across distinct modes
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            if (a == b) continue;
            const double ip = J.field_inner(J.mode_field(rep.modes[a]),
                                            J.adjoint_mode_field(rep.modes[b]));
            CHECK(std::abs(ip) < 1e-10);
        }
}

TEST_CASE("orthonormal diagonal kernel has exact spectrum", "[pg_kernel]") {
    // 1, sqrt(2) cos 2x, sqrt(2) sin 2x are orthonormal under dx/pi on the ring
    const auto g = ring_grid();
    const Expr c = Expr::constant(std::sqrt(2.0)) * Expr::cos(Expr::constant(2.0) * Expr::x());
    const Expr s = Expr::constant(std::sqrt(2.0)) * Expr::sin(Expr::constant(2.0) * Expr::x());
    const double sig[3] = {2.0, -1.0, 0.5};
    std::vector<std::vector<Expr>> xs = {{Expr::constant(1.0)}, {c}, {s}};
    std::vector<std::vector<Expr>> ys = {{Expr::constant(sig[0])},
                                         {Expr::constant(sig[1]) * c},
                                         {Expr::constant(sig[2]) * s}};
    const PGKernel J(g, 1, xs, ys);
    const auto rep = J.spectrum();
    REQUIRE(rep.modes.size() == 3);
    CHECK(rep.modes[0].sigma.real() == Catch::Approx(2.0).margin(1e-12));
    CHECK(rep.modes[1].sigma.real() == Catch::Approx(0.5).margin(1e-12));
    CHECK(rep.modes[2].sigma.real() == Catch::Approx(-1.0).margin(1e-12));
}

TEST_CASE("pointwise kernel reproduction", "[pg_kernel]") {
    const auto J = ring_kernel(-1.0, 1.5, 2.2);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-kPi / 2.0, kPi / 2.0);
    for (int i = 0; i < 50; ++i) {
        const double x = u(rng), yv = u(rng);
        const double direct = -1.0 + 1.5 * std::cos(2.2 * (x - yv));
        CHECK(J.eval_entry(0, 0, x, 0.0, yv, 0.0) == Catch::Approx(direct).margin(1e-12));
    }
    CHECK(J.gram_rank() == 3);
}

TEST_CASE("frobenius norm against brute-force double quadrature", "[pg_kernel]") {
    const auto J = ring_kernel(-1.0, 1.5, 2.2, 48);
    const auto& g = J.grid();
    double brute = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j) {
            const double v = -1.0 + 1.5 * std::cos(2.2 * (g.px[i] - g.px[j]));
            brute += g.w[i] * g.w[j] * v * v;
        }
    const double m0 = J.sobolev_frobenius_norm(0);
    CHECK(m0 * m0 == Catch::Approx(brute).epsilon(1e-8));
    // frozen closed form: J0^2 + J1^2(<1,cos^2>^2 + <1,sin^2>^2) + 2 J0 J1 <1,cos>^2
    CHECK(m0 * m0 == Catch::Approx(2.1091482570022144).epsilon(1e-10));
}

TEST_CASE("first-order sobolev norm from symbolic derivatives", "[pg_kernel]") {
    const auto J = ring_kernel(-1.0, 1.5, 2.2, 48);
    const auto& g = J.grid();
    // terms (0,0), (1,0), (0,1), (1,1) of the W^{1,2} double integral
    double brute = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j) {
            const double d = 2.2 * (g.px[i] - g.px[j]);
            const double v = -1.0 + 1.5 * std::cos(d);
            const double vx = -1.5 * 2.2 * std::sin(d);
            const double vy = 1.5 * 2.2 * std::sin(d);
            const double vxy = 1.5 * 2.2 * 2.2 * std::cos(d);
            brute += g.w[i] * g.w[j] * (v * v + vx * vx + vy * vy + vxy * vxy);
        }
    const double m1 = J.sobolev_frobenius_norm(1);
    CHECK(m1 * m1 == Catch::Approx(brute).epsilon(1e-8));
    CHECK(m1 > J.sobolev_frobenius_norm(0));
}

TEST_CASE("operator norm bounded by frobenius norm", "[pg_kernel]") {
    const auto J = ring_kernel(-1.0, 1.5, 2.2, 32);
    const double fro = J.sobolev_frobenius_norm(0);
    std::mt19937_64 rng(23);
    std::normal_distribution<double> gauss;
    for (int rep = 0; rep < 100; ++rep) {
        Eigen::VectorXd u(J.field_size());
        for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = gauss(rng);
        const double nu = J.field_norm(u);
        if (nu < 1e-12) continue;
        CHECK(J.field_norm(J.apply(u)) / nu <= fro + 1e-10);
    }
}

TEST_CASE("adjoint pairs with apply under the L2 inner product", "[pg_kernel]") {
    const auto J = ring_kernel(-1.0, 1.5, 2.2, 32);
    std::mt19937_64 rng(29);
    std::normal_distribution<double> gauss;
    Eigen::VectorXd u(J.field_size()), v(J.field_size());
    for (Eigen::Index i = 0; i < u.size(); ++i) { u[i] = gauss(rng); v[i] = gauss(rng); }
    CHECK(J.field_inner(J.apply(u), v) ==
          Catch::Approx(J.field_inner(u, J.apply_adjoint(v))).margin(1e-10));
}

TEST_CASE("shape validation", "[pg_kernel]") {
    const auto J = ring_kernel(-1.0, 1.5, 2.2, 16);
    Eigen::VectorXd bad(5);
    bad.setZero();
    CHECK_THROWS(J.apply(bad));
    CHECK_THROWS(J.field_inner(bad, bad));
    const auto g = build_grid(1, 8, {-1.0, 1.0});
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(8, 1), Y = Eigen::MatrixXd::Ones(8, 1);
    const auto K = PGKernel::from_samples(g, 1, X, Y);
    CHECK(K.sobolev_frobenius_norm(0) > 0.0);
    CHECK_THROWS(K.sobolev_frobenius_norm(1));  // no analytic factors
    CHECK_THROWS(K.eval_entry(0, 0, 0.0, 0.0, 0.0, 0.0));
}
