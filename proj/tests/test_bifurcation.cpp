#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "nfcont/bifurcation.hpp"
#include "nfcont/model_zoo.hpp"

using namespace nfcont;
using Catch::Approx;

namespace {

FieldModel ring_signed(double J0, double J1) {
    RingParams p;
    p.J0 = J0;
    p.J1 = J1;
    return build_ring(p);
}

int pitchfork_count(const BifurcationReport& rep) {
    int n = 0;
    for (const auto& pt : rep.points)
        if (pt.admissible && pt.type == BranchType::Pitchfork) ++n;
    return n;
}

}  // namespace

TEST_CASE("ring candidates sit at the two frozen crossing gains", "[bifurcation]") {
    const auto rep = candidates(ring_signed(-1.0, 1.5));
    REQUIRE(rep.admissible_count() == 2);

    double lam_plane = 0.0, lam_axis = 0.0;
    for (const auto& p : rep.points) {
        if (!p.admissible) continue;
        const Eigen::Vector3d u = p.mode_coords.real();
        if (std::abs(u[2]) > 0.5) {
            lam_axis = p.lambda_c;
            CHECK(std::abs(u[0]) < 1e-10);
            CHECK(std::abs(u[1]) < 1e-10);
        } else {
            lam_plane = p.lambda_c;
            CHECK(std::abs(u[2]) < 1e-10);
        }
        CHECK(p.q == 3);
        CHECK(p.type == BranchType::Pitchfork);
        CHECK(p.chi < 0.0);
        CHECK(p.orientation == Orientation::TowardLarger);
    }
    CHECK(lam_plane == Approx(4.9557312431136078).margin(1e-10));
    CHECK(lam_axis == Approx(5.8290629640017793).margin(1e-10));
    // the in-plane crossing comes first for a kernel falloff steeper than 2
    CHECK(lam_plane < lam_axis);
}

TEST_CASE("admissible pitchfork counts follow the sign table", "[bifurcation]") {
    CHECK(pitchfork_count(candidates(ring_signed(-1.0, -1.5))) == 0);
    CHECK(pitchfork_count(candidates(ring_signed(-1.0, 1.5))) == 2);
    CHECK(pitchfork_count(candidates(ring_signed(1.0, -1.5))) == 1);
    CHECK(pitchfork_count(candidates(ring_signed(1.0, 1.5))) == 3);
}

TEST_CASE("an all-negative spectrum admits no stationary candidates", "[bifurcation]") {
    const auto rep = candidates(ring_signed(-1.0, -1.5));
    CHECK(rep.admissible_count() == 0);
    for (const auto& p : rep.points) CHECK(p.type != BranchType::Transcritical);
}

TEST_CASE("the symmetric rate function has no quadratic coefficient", "[bifurcation]") {
    const auto m = ring_signed(-1.0, 1.5);
    CHECK_THROWS_AS(chi(m, 0, 2), std::invalid_argument);
    CHECK(chi(m, 0, 3) < 0.0);
}

TEST_CASE("two-population candidates match the frozen spectrum", "[bifurcation]") {
    TwoPopParams p;
    const auto m = build_twopop(p);
    const auto rep = candidates(m);

    // leading modes: simple transcritical, even doublet, simple pitchfork
    REQUIRE(rep.points.size() >= 4);
    CHECK(rep.points[0].simple);
    CHECK(rep.points[0].admissible);
    CHECK(rep.points[0].lambda_c == Approx(0.32197550188005003).margin(1e-9));
    CHECK(rep.points[0].q == 2);
    CHECK(rep.points[0].type == BranchType::Transcritical);
    CHECK(std::abs(rep.points[0].chi) == Approx(0.3406).margin(2e-3));

    CHECK_FALSE(rep.points[1].simple);
    CHECK_FALSE(rep.points[1].admissible);
    CHECK(rep.points[1].q == 0);
    CHECK(rep.points[1].lambda_c == Approx(0.40456004311705218).margin(1e-9));
    CHECK_FALSE(rep.points[2].simple);

    CHECK(rep.points[3].simple);
    CHECK(rep.points[3].admissible);
    CHECK(rep.points[3].lambda_c == Approx(0.47664175146858512).margin(1e-9));
    CHECK(rep.points[3].q == 3);
    CHECK(rep.points[3].type == BranchType::Pitchfork);
    CHECK(rep.points[3].chi == Approx(-8.543e-3).margin(2e-5));
    CHECK(rep.points[3].orientation == Orientation::TowardLarger);

    CHECK_THROWS_AS(chi(m, 1, 3), std::invalid_argument);
}

TEST_CASE("truncated cubic roots open and close with the gain", "[bifurcation]") {
    const double sigma = 0.6862166397416837;
    const double lam_n = 4.0 / sigma;

    const auto below = reduced_roots(5.0, sigma, -1.0, 3, 0.0);
    REQUIRE(below.size() == 1);
    CHECK(below[0] == Approx(0.0).margin(1e-12));

    const auto above = reduced_roots(6.5, sigma, -1.0, 3, 0.0);
    REQUIRE(above.size() == 3);
    const double amp = std::sqrt(-1.0 + 6.5 * 0.25 * sigma);
    CHECK(above[0] == Approx(-amp).margin(1e-9));
    CHECK(above[1] == Approx(0.0).margin(1e-9));
    CHECK(above[2] == Approx(amp).margin(1e-9));

    // small forcing bends the pitchfork into a cusp
    CHECK(reduced_roots(lam_n + 0.3, sigma, -1.0, 3, 1e-3).size() == 3);
    CHECK(reduced_roots(lam_n - 0.3, sigma, -1.0, 3, 1e-3).size() == 1);
    CHECK(reduced_roots(lam_n + 0.3, sigma, -1.0, 3, 1e-2).size() == 1);
}

TEST_CASE("truncated quadratic roots form a pair or vanish", "[bifurcation]") {
    const double sigma = 18.454287440995582, s1 = 0.16829836246906023;
    const double lam_n = 1.0 / (s1 * sigma);
    const double a = -1.0 + (lam_n + 0.05) * s1 * sigma;

    const auto pair = reduced_roots(lam_n + 0.05, sigma, -0.34, 2, 0.0, s1);
    REQUIRE(pair.size() == 2);
    CHECK(std::min(std::abs(pair[0]), std::abs(pair[1])) < 1e-12);
    CHECK(std::max(pair[0], pair[1]) == Approx(a / 0.34).margin(1e-9));

    CHECK(reduced_roots(lam_n + 0.01, sigma, -0.34, 2, -0.1, s1).empty());
    CHECK(reduced_roots(lam_n + 0.01, sigma, -0.34, 2, 1e-4, s1).size() == 2);

    CHECK_THROWS_AS(reduced_roots(1.0, sigma, 0.0, 2, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(reduced_roots(1.0, sigma, -1.0, 4, 0.0), std::invalid_argument);
}

TEST_CASE("the first Lyapunov coefficient follows the closed form", "[bifurcation]") {
    TwoPopParams p;  // argument shift 1.3
    const auto m = build_twopop(p);
    CHECK(hopf_l1(m, 1.0, 1.0, 2.9709142303266285) ==
          Approx(-0.75167674348051382).epsilon(1e-12));
    CHECK_THROWS_AS(hopf_l1(m, 0.0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(hopf_l1(m, -0.5, 1.0, 1.0), std::invalid_argument);

    // symmetric rate function: quadratic coefficient zero, degenerate
    const auto ring = ring_signed(-1.0, 1.5);
    CHECK(hopf_l1(ring, 1.0, 1.0, 2.0) == 0.0);

    // bracket zero: the cubic term cancels the quadratic one exactly
    const auto shifted = FieldModel(ring.kernel_ptr(),
                                    Nonlinearity::logistic_shifted(1.35),
                                    ring.decay(), ring.input(), 0.0, Homotopy{});
    const double lamH = 1.0 / (2.0 * shifted.nonlinearity().s(1));
    CHECK(std::abs(hopf_l1(shifted, 1.0, 18.115405940531294, lamH)) < 1e-12);
}

TEST_CASE("the axis pitchfork persists under the threshold homotopy", "[bifurcation]") {
    const auto m = ring_signed(-1.0, 1.5);

    const auto at0 = pitchfork_persistence(m, 0.0);
    CHECK(at0.v1 == Approx(0.0).margin(1e-9));
    CHECK(at0.v2 == Approx(0.0).margin(1e-9));
    CHECK(at0.lambda == Approx(5.8290629640017793).margin(1e-9));

    const auto at01 = pitchfork_persistence(m, 0.1);
    CHECK(std::abs(at01.lambda - at0.lambda) < 0.5);
    const auto m01 = m.at(Homotopy{at01.lambda, 0.1, 0.0});
    Eigen::VectorXd v = Eigen::VectorXd::Zero(3);
    v[0] = at01.v1;
    v[1] = at01.v2;
    CHECK(std::abs(m01.residual(v)[0]) < 1e-9);
    CHECK(std::abs(m01.residual(v)[1]) < 1e-9);
    CHECK(std::abs(m01.jacobian(v)(2, 2)) < 1e-9);

    const auto at1 = pitchfork_persistence(m, 1.0);
    const auto m1 = m.at(Homotopy{at1.lambda, 1.0, 0.0});
    v[0] = at1.v1;
    v[1] = at1.v2;
    CHECK(std::abs(m1.residual(v)[0]) < 1e-9);
    CHECK(std::abs(m1.jacobian(v)(2, 2)) < 1e-9);
}

TEST_CASE("persistence requires the axis symmetry", "[bifurcation]") {
    RingParams p;
    p.h = Homotopy{5.0, 0.0, 0.1};  // off-center input drive breaks it
    CHECK_THROWS_AS(pitchfork_persistence(build_ring(p), 0.5),
                    std::invalid_argument);
    TwoPopParams tp;
    CHECK_THROWS_AS(pitchfork_persistence(build_twopop(tp), 0.0),
                    std::invalid_argument);
}
