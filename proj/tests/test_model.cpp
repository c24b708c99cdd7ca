#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "nfcont/model.hpp"
#include "nfcont/model_zoo.hpp"

using nfcont::build_ring;
using nfcont::Expr;
using nfcont::FieldModel;
using nfcont::Homotopy;
using nfcont::Nonlinearity;
using nfcont::PGKernel;
using nfcont::random_model;
using nfcont::RingParams;
using nfcont::Variant;
using nfcont::build_grid;

namespace {

FieldModel ring_at(double lambda, double mu = 0.0, double eps = 0.0,
                   Variant var = Variant::Voltage) {
    RingParams p;
    p.h = Homotopy{lambda, mu, eps};
    p.variant = var;
    return build_ring(p);
}

Eigen::MatrixXd fd_jacobian(const FieldModel& m, const Eigen::VectorXd& v,
                            double h = 1e-6) {
    const int n = m.dim();
    Eigen::MatrixXd J(n, n);
    for (int k = 0; k < n; ++k) {
        Eigen::VectorXd vp = v, vm = v;
        vp[k] += h;
        vm[k] -= h;
        J.col(k) = (m.residual(vp) - m.residual(vm)) / (2.0 * h);
    }
    return J;
}

}  // namespace

TEST_CASE("origin is stationary without threshold or input coupling", "[model]") {
    for (double lam : {0.0, 1.0, 7.5}) {
        const auto m = ring_at(lam);
        const Eigen::VectorXd r = m.residual(Eigen::VectorXd::Zero(3));
        CHECK(r.cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("zero gain gives the identity jacobian", "[model]") {
    const auto m = ring_at(0.0, 0.6, 0.4);
    Eigen::VectorXd v(3);
    v << 0.3, -1.2, 0.8;
    const Eigen::MatrixXd J = m.jacobian(v);
    CHECK((J - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("trivial coordinates solve the zero-gain system", "[model]") {
    for (auto var : {Variant::Voltage, Variant::Activity}) {
        const auto m = ring_at(0.0, 0.8, 0.4, var);
        const Eigen::VectorXd v = m.trivial_coords();
        CHECK(m.residual(v).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("jacobian at origin is identity minus scaled coordinate matrix", "[model]") {
    const double lam = 2.0;
    const auto m = ring_at(lam);
    const Eigen::Matrix3d K = nfcont::ring_K(RingParams{});
    const double s1 = m.nonlinearity().s(1);  // 1/4 for the plain logistic
    const Eigen::MatrixXd expect = Eigen::MatrixXd::Identity(3, 3) - lam * s1 * K;
    CHECK((m.jacobian(Eigen::VectorXd::Zero(3)) - expect).cwiseAbs().maxCoeff() <
          1e-12);
}

TEST_CASE("analytic jacobian matches finite differences", "[model]") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(-0.8, 0.8);

    auto check = [&](const FieldModel& m) {
        Eigen::VectorXd v(m.dim());
        for (int i = 0; i < m.dim(); ++i) v[i] = u(rng);
        const Eigen::MatrixXd Ja = m.jacobian(v);
        const Eigen::MatrixXd Jf = fd_jacobian(m, v);
        const double scale = std::max(1.0, Ja.cwiseAbs().maxCoeff());
        CHECK((Ja - Jf).cwiseAbs().maxCoeff() / scale < 1e-6);
    };

    check(ring_at(3.0, 0.5, 0.7));
    check(ring_at(1.2, 1.0, 0.0, Variant::Activity));
    for (int s = 0; s < 5; ++s) {
        std::mt19937_64 mr(100 + s);
        check(random_model(mr, 5, 0.8));
    }
}

TEST_CASE("parameter derivatives match finite differences", "[model]") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-0.5, 0.5);

    auto check = [&](const FieldModel& m) {
        Eigen::VectorXd v(m.dim());
        for (int i = 0; i < m.dim(); ++i) v[i] = u(rng);
        const Homotopy h = m.params();
        const double step = 1e-6;

        auto fd = [&](auto bump) {
            Homotopy hp = h, hm = h;
            bump(hp, step);
            bump(hm, -step);
            return Eigen::VectorXd(
                (m.at(hp).residual(v) - m.at(hm).residual(v)) / (2.0 * step));
        };
        const Eigen::VectorXd dl =
            fd([](Homotopy& q, double d) { q.lambda += d; });
        const Eigen::VectorXd dm = fd([](Homotopy& q, double d) { q.mu += d; });
        const Eigen::VectorXd de = fd([](Homotopy& q, double d) { q.eps += d; });
        CHECK((m.dresidual_dlambda(v) - dl).cwiseAbs().maxCoeff() < 1e-6);
        CHECK((m.dresidual_dmu(v) - dm).cwiseAbs().maxCoeff() < 1e-6);
        CHECK((m.dresidual_deps(v) - de).cwiseAbs().maxCoeff() < 1e-6);
    };

    check(ring_at(2.5, 0.5, 0.5));
    check(ring_at(1.5, 0.5, 0.5, Variant::Activity));
    std::mt19937_64 mr(55);
    check(random_model(mr, 4, 0.6));
}

// frozen by independent adaptive quadrature of the definition
TEST_CASE("voltage residual matches independently integrated values", "[model]") {
    const auto m = ring_at(2.0, 0.7, 0.3);
    Eigen::VectorXd v(3);
    v << 0.1, -0.2, 0.3;
    const Eigen::VectorXd r = m.residual(v);
    CHECK(r[0] == Catch::Approx(0.55247209604978463).margin(1e-12));
    CHECK(r[1] == Catch::Approx(-0.082041278492961882).margin(1e-12));
    CHECK(r[2] == Catch::Approx(0.21105771869860075).margin(1e-12));
}

TEST_CASE("activity residual matches independently integrated values", "[model]") {
    const auto m = ring_at(1.7, 0.6, 0.25, Variant::Activity);
    Eigen::VectorXd a(3);
    a << 0.05, -0.1, 0.2;
    const Eigen::VectorXd r = m.residual(a);
    CHECK(r[0] == Catch::Approx(0.48901325940717797).margin(1e-12));
    CHECK(r[1] == Catch::Approx(-0.026731974893725817).margin(1e-12));
    CHECK(r[2] == Catch::Approx(0.14551886946978627).margin(1e-12));
}

TEST_CASE("activity coordinates are the threshold-shifted voltage ones", "[model]") {
    // same kernel, same parameters: r_act(v - mu t) == r_volt(v) identically
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const auto mv = ring_at(2.3, 0.7, 0.4, Variant::Voltage);
    const auto ma = ring_at(2.3, 0.7, 0.4, Variant::Activity);
    const Eigen::VectorXd t = mv.theta_coords();
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd v(3);
        for (int i = 0; i < 3; ++i) v[i] = u(rng);
        const Eigen::VectorXd shifted = v - mv.params().mu * t;
        CHECK((ma.residual(shifted) - mv.residual(v)).cwiseAbs().maxCoeff() <
              1e-12);
    }
}

TEST_CASE("solution bounds carry the frozen ring values", "[model]") {
    const auto m = ring_at(0.5);
    const auto b = m.bounds();
    CHECK(b.B1 == Catch::Approx(7.1763473998164227).margin(1e-8));
    CHECK(b.B2 == Catch::Approx(3.1410504283827121).margin(1e-8));
    CHECK(b.lambda_star == Catch::Approx(0.15918241728371225).margin(1e-8));
    CHECK(b.lambda_L == Catch::Approx(1.0066814330955362).margin(1e-8));
}

TEST_CASE("smooth spectral threshold never exceeds the linear one", "[model]") {
    for (int s = 0; s < 20; ++s) {
        std::mt19937_64 rng(500 + s);
        const auto m = random_model(rng, 6, 0.5);
        const auto b = m.bounds();
        REQUIRE(std::isfinite(b.lambda_star));
        CHECK(b.lambda_star <= b.lambda_L + 1e-12);
        CHECK(b.B2 <= b.B1 + 1e-12);
    }
}

TEST_CASE("picard map contracts below the critical gain", "[model]") {
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int s = 0; s < 10; ++s) {
        std::mt19937_64 mr(900 + s);
        auto m0 = random_model(mr, 5, 0.1);
        const auto b = m0.bounds();
        Homotopy h = m0.params();
        h.lambda = 0.9 * b.lambda_star;
        const auto m = m0.at(h);
        const double bound = h.lambda / b.lambda_star;  // = 0.9 by construction
        for (int trial = 0; trial < 4; ++trial) {
            Eigen::VectorXd a(m.dim()), c(m.dim());
            for (int i = 0; i < m.dim(); ++i) {
                a[i] = u(rng);
                c[i] = u(rng);
            }
            const auto& K = m.kernel();
            const double num =
                K.field_norm(K.reconstruct(m.picard(a) - m.picard(c)));
            const double den = K.field_norm(K.reconstruct(a - c));
            if (den < 1e-12) continue;
            CHECK(num / den <= bound + 1e-3);
        }
    }
}

TEST_CASE("construction validates its inputs", "[model]") {
    RingParams p;
    p.h.lambda = -0.5;
    CHECK_THROWS_AS(build_ring(p), std::invalid_argument);
    p.h = Homotopy{1.0, 1.5, 0.0};
    CHECK_THROWS_AS(build_ring(p), std::invalid_argument);
    p.h = Homotopy{1.0, 0.0, -0.2};
    CHECK_THROWS_AS(build_ring(p), std::invalid_argument);
    p.h = Homotopy{};
    p.tau = -1.0;
    CHECK_THROWS_AS(build_ring(p), std::invalid_argument);

    CHECK_THROWS_AS(FieldModel(nullptr, Nonlinearity::logistic(), {1.0},
                               Eigen::VectorXd(), 0.0),
                    std::invalid_argument);

    const auto base = build_ring(RingParams{});
    CHECK_THROWS_AS(FieldModel(base.kernel_ptr(), Nonlinearity::logistic(),
                               {1.0, 1.0}, Eigen::VectorXd(), 0.0),
                    std::invalid_argument);  // decay count != populations
    CHECK_THROWS_AS(FieldModel(base.kernel_ptr(), Nonlinearity::logistic(),
                               {1.0}, Eigen::VectorXd::Ones(5), 0.0),
                    std::invalid_argument);  // input sample length mismatch
}

TEST_CASE("non-finite states are rejected", "[model]") {
    const auto m = ring_at(1.0);
    Eigen::VectorXd v(3);
    v << 0.1, std::numeric_limits<double>::quiet_NaN(), 0.0;
    CHECK_THROWS(m.residual(v));
    CHECK_THROWS(m.jacobian(v));
}

TEST_CASE("input orthogonal to the range is reported, not dropped", "[model]") {
    // ring input lies in span{1, cos, sin}: remainder must vanish
    CHECK(ring_at(1.0, 0.0, 0.5).input_orth_norm() < 1e-10);

    // X = {x} with constant input: the projection is zero by parity
    auto g = build_grid(1, 32, {-1.0, 1.0}, {0.0, 0.0}, 0.5);
    std::vector<std::vector<Expr>> xs = {{Expr::x()}};
    std::vector<std::vector<Expr>> ys = {{Expr::x()}};
    auto k = std::make_shared<const PGKernel>(g, 1, xs, ys);
    const auto nn = static_cast<Eigen::Index>(g.size());
    const FieldModel m(k, Nonlinearity::logistic(), {1.0},
                       Eigen::VectorXd::Ones(nn), 0.0, Homotopy{1.0, 0.0, 1.0});
    CHECK(m.input_orth_norm() == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("rebinding parameters shares the kernel", "[model]") {
    const auto m = ring_at(1.0, 0.2, 0.1);
    const auto m2 = m.at(Homotopy{4.0, 0.9, 0.0});
    CHECK(m2.params().lambda == 4.0);
    CHECK(m2.params().mu == 0.9);
    CHECK(m2.params().eps == 0.0);
    CHECK(m.params().lambda == 1.0);  // original untouched
    CHECK(m2.kernel_ptr().get() == m.kernel_ptr().get());
    CHECK_THROWS_AS(m.at(Homotopy{-1.0, 0.0, 0.0}), std::invalid_argument);
}
