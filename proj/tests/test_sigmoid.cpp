#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "nfcont/sigmoid.hpp"

using nfcont::Nonlinearity;

// ---------------------------------------------------------------------------
// point values
// ---------------------------------------------------------------------------

TEST_CASE("logistic point values", "[sigmoid]") {
    const auto s = Nonlinearity::logistic();
    CHECK(s.eval(0.0) == 0.5);
    CHECK(s.eval(2.0) == Catch::Approx(0.8807970779778823).epsilon(1e-14));
    CHECK(s.eval(1.7) == Catch::Approx(1.0 - s.eval(-1.7)).epsilon(1e-14));
    CHECK(s.eval_shifted(0.0) == 0.0);
    CHECK(s.eval_shifted(2.0) == Catch::Approx(0.3807970779778823).epsilon(1e-14));
    CHECK(std::abs(s.eval_shifted(0.3) + s.eval_shifted(-0.3)) < 1e-15);
}

TEST_CASE("centered series coefficients", "[sigmoid]") {
    const auto s = Nonlinearity::logistic();
    CHECK(s.deriv(0.0, 1) == 0.25);
    CHECK(s.deriv(0.0, 2) == 0.0);
    CHECK(s.deriv(0.0, 3) == -0.125);
    CHECK(s.deriv(0.0, 4) == 0.0);
    CHECK_THROWS(s.deriv(0.0, 5));
    CHECK_THROWS(s.deriv(0.0, 0));
}

TEST_CASE("argument-shifted variant", "[sigmoid]") {
    const auto s = Nonlinearity::logistic_shifted(1.3);
    const auto base = Nonlinearity::logistic();
    CHECK(s.eval(1.3) == 0.5);
    CHECK(s.eval(0.0) == Catch::Approx(base.eval(-1.3)).epsilon(1e-14));
    CHECK(s.eval_shifted(0.0) == 0.0);
    // series values at theta = 1.3, frozen from closed-form S' = S(1-S)
    CHECK(s.s(1) == Catch::Approx(0.16829836246906023).epsilon(1e-12));
    CHECK(s.s(2) == Catch::Approx(0.09621111916486843).epsilon(1e-12));
    CHECK(s.s(3) == Catch::Approx(-0.0016476703895428564).epsilon(1e-9));
}

// ---------------------------------------------------------------------------
// properties
// ---------------------------------------------------------------------------

TEST_CASE("monotone and bounded", "[sigmoid]") {
    const auto s = Nonlinearity::logistic();
    // strictly inside (0,1) and strictly increasing while representable
    double prev = s.eval(-36.0);
    for (double z = -35.0; z <= 36.0; z += 1.0) {
        const double v = s.eval(z);
        CHECK(v > prev);
        CHECK(v > 0.0);
        CHECK(v < 1.0);
        prev = v;
    }
    // beyond that the value saturates instead of overflowing
    CHECK(s.eval(1000.0) == 1.0);
    CHECK(s.eval(-1000.0) == 0.0);
    CHECK(std::isfinite(s.eval(708.0)));
}

TEST_CASE("derivatives match finite differences", "[sigmoid]") {
    const auto s = Nonlinearity::logistic();
    const double h = 1e-5;
    for (int q = 2; q <= 4; ++q) {
        double worst = 0.0;
        for (double z = -5.0; z <= 5.0; z += 0.25) {
            const double fd = (s.deriv(z + h, q - 1) - s.deriv(z - h, q - 1)) / (2.0 * h);
            const double an = s.deriv(z, q);
            worst = std::max(worst, std::abs(fd - an) / std::max(std::abs(an), 1e-3));
        }
        CHECK(worst < 1e-6);
    }
    // first derivative against eval itself
    double worst = 0.0;
    for (double z = -5.0; z <= 5.0; z += 0.25) {
        const double fd = (s.eval(z + h) - s.eval(z - h)) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - s.deriv(z, 1)) / std::max(std::abs(s.deriv(z, 1)), 1e-3));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("square bound sweep", "[sigmoid]") {
    std::mt19937_64 rng(20240817);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    for (int i = 0; i < 10000; ++i) {
        const double x = u(rng), l = u(rng);
        REQUIRE(nfcont::square_bound_check(x, l));
    }
    CHECK(nfcont::square_bound_check(0.0, 123.4));
    CHECK(nfcont::square_bound_check(1.0, 1.0));
}

TEST_CASE("slope bound |S(lx)-S(0)| <= (l/4)|x|", "[sigmoid]") {
    const auto s = Nonlinearity::logistic();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    std::uniform_real_distribution<double> ul(0.0, 40.0);
    for (int i = 0; i < 2000; ++i) {
        const double x = u(rng), l = ul(rng);
        CHECK(std::abs(s.eval_shifted(l * x)) <= 0.25 * l * std::abs(x) + 1e-15);
    }
}

TEST_CASE("antiderivative of the centered rate", "[sigmoid]") {
    // trapezoid refinement cross-check of the closed form
    const auto s = Nonlinearity::logistic_shifted(0.7);
    for (double u : {-3.0, -0.5, 0.0, 1.2, 4.0}) {
        const int n = 20000;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            const double a = u * i / n, b = u * (i + 1) / n;
            acc += 0.5 * (s.eval_shifted(a) + s.eval_shifted(b)) * (b - a);
        }
        CHECK(s.antideriv_shifted(u) == Catch::Approx(acc).margin(1e-8));
        // moment integral via integration by parts of the same data
        double mom = 0.0;
        for (int i = 0; i < n; ++i) {
            const double a = u * i / n, b = u * (i + 1) / n;
            const double da = s.deriv(a, 1), db = s.deriv(b, 1);
            mom += 0.5 * (a * da + b * db) * (b - a);
        }
        CHECK(s.moment_integral(u) == Catch::Approx(mom).margin(1e-6));
    }
}

TEST_CASE("heaviside limit", "[sigmoid]") {
    const auto h = Nonlinearity::heaviside();
    CHECK(h.eval(3.0) == 1.0);
    CHECK(h.eval(-3.0) == 0.0);
    CHECK(h.eval(0.0) == 0.5);
    CHECK(h.deriv(1.0, 1) == 0.0);
    CHECK_THROWS(h.deriv(0.0, 1));
    CHECK_FALSE(h.smooth());
}
