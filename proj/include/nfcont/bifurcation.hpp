#pragma once
// Local theory at the trivial state: candidate gain values from the kernel
// spectrum, leading reduced-equation coefficients chi_q, branch type and
// orientation, truncated root counts, the first Lyapunov coefficient for
// oscillatory candidates, and the persistence system for the axis pitchfork
// under the threshold homotopy.

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "nfcont/model.hpp"

namespace nfcont {

enum class BranchType { Pitchfork, Transcritical, HopfCandidate, Unclassified };
enum class Orientation { TowardLarger, TowardSmaller, None };

/// One spectral candidate. lambda_c solves the linear crossing condition
/// lambda * s1 * Re(sigma) = 1 for real modes and lambda * 2 * s1 * g1 = 1
/// for oscillatory pairs; it is meaningful only when admissible or of Hopf
/// type. Eigenvectors identify the mode explicitly, so callers never rely on
/// index order.
struct BifurcationPoint {
    std::complex<double> sigma;
    bool simple = true;
    bool admissible = false;  // simple, real, sigma > 0: stationary candidate
    double lambda_c = 0.0;
    int q = 0;        // leading reduced order; 0 when no chi was computed
    double chi = 0.0;
    BranchType type = BranchType::Unclassified;
    Orientation orientation = Orientation::None;
    Eigen::VectorXcd mode_coords;     // right eigenvector, ||X u||_2 = 1
    Eigen::VectorXcd adjoint_coords;  // left partner, <e, e*>_2 = 1
};

struct BifurcationReport {
    std::vector<BifurcationPoint> points;  // sorted by decreasing Re(sigma)

    int admissible_count() const {
        int n = 0;
        for (const auto& p : points) n += p.admissible ? 1 : 0;
        return n;
    }
};

namespace detail {

// Sign convention for real modes: the largest-magnitude coordinate entry is
// positive. Flipping e and e* together preserves both normalizations.
inline void canonical_sign(Eigen::VectorXcd& coords, Eigen::VectorXcd& adjoint) {
    Eigen::Index imax = 0;
    coords.real().cwiseAbs().maxCoeff(&imax);
    if (coords.real()[imax] < 0.0) {
        coords = -coords;
        adjoint = -adjoint;
    }
}

// <e^q, e*>_2 with the canonical eigenvector sign; e* reduces the integral
// to adjoint-side projection coordinates.
inline double mode_inner(const FieldModel& m, const SpectralMode& mode, int q) {
    Eigen::VectorXcd coords = mode.coords, adjoint = mode.adjoint_coords;
    canonical_sign(coords, adjoint);
    const Eigen::VectorXd e = m.kernel().reconstruct(coords.real());
    const Eigen::VectorXd eq = e.array().pow(q);
    return adjoint.real().dot(m.kernel().project_coords(eq));
}

inline double chi_prefactor(const FieldModel& m, int q, double lambda_n) {
    const double sq = m.nonlinearity().s(q);
    if (std::abs(sq) < 1e-14)
        throw std::invalid_argument(
            "chi: the series coefficient s_q vanishes at this order; increase q");
    double fact = 1.0;
    for (int i = 2; i <= q; ++i) fact *= i;
    return std::pow(lambda_n, q - 1) * sq / (fact * m.nonlinearity().s(1));
}

}  // namespace detail

/// chi_q for spectrum mode n (index into the report order, decreasing real
/// part): lambda_n^{q-1} s_q / (q! s1) <e^q, e*>_2 with the canonical
/// eigenvector sign. Requires a simple real positive eigenvalue.
inline double chi(const FieldModel& m, int n, int q) {
    if (q < 2 || q > 4) throw std::invalid_argument("chi: order must be in 2..4");
    const auto spec = m.kernel().spectrum();
    if (n < 0 || n >= static_cast<int>(spec.modes.size()))
        throw std::invalid_argument("chi: mode index out of range");
    const auto& mode = spec.modes[static_cast<std::size_t>(n)];
    const double scale = std::abs(spec.modes.front().sigma);
    if (std::abs(mode.sigma.imag()) > 1e-9 * std::max(scale, 1.0))
        throw std::invalid_argument("chi: mode is not real");
    if (!mode.simple) throw std::invalid_argument("chi: eigenvalue is not simple");
    if (mode.sigma.real() <= 0.0)
        throw std::invalid_argument("chi: eigenvalue must be positive");
    const double lambda_n = 1.0 / (m.nonlinearity().s(1) * mode.sigma.real());
    return detail::chi_prefactor(m, q, lambda_n) * detail::mode_inner(m, mode, q);
}

/// Scan the kernel spectrum and classify every local candidate. Real simple
/// positive eigenvalues get a crossing gain and a leading coefficient (first
/// q in {2, 3} with s_q != 0 and |<e^q, e*>| > 1e-10); oscillatory pairs
/// with positive real part are reported once as Hopf candidates. Degenerate
/// or inadmissible entries stay in the report with chi skipped.
inline BifurcationReport candidates(const FieldModel& m) {
    if (!m.nonlinearity().smooth())
        throw std::invalid_argument("candidates: local theory needs a smooth rate function");
    const double s1 = m.nonlinearity().s(1);
    const auto spec = m.kernel().spectrum();
    const double scale = spec.modes.empty()
                             ? 1.0
                             : std::max(std::abs(spec.modes.front().sigma), 1.0);
    BifurcationReport rep;
    for (int n = 0; n < static_cast<int>(spec.modes.size()); ++n) {
        const auto& mode = spec.modes[static_cast<std::size_t>(n)];
        const bool is_real = std::abs(mode.sigma.imag()) <= 1e-9 * scale;
        if (!is_real && mode.sigma.imag() < 0.0) continue;  // conjugate partner

        BifurcationPoint p;
        p.sigma = mode.sigma;
        p.simple = mode.simple;
        p.mode_coords = mode.coords;
        p.adjoint_coords = mode.adjoint_coords;
        if (is_real) detail::canonical_sign(p.mode_coords, p.adjoint_coords);

        if (!is_real) {
            if (mode.sigma.real() > 0.0) {
                p.type = BranchType::HopfCandidate;
                p.lambda_c = 1.0 / (2.0 * s1 * mode.sigma.real());
            }
        } else if (mode.simple && mode.sigma.real() > 1e-12 * scale) {
            p.admissible = true;
            p.lambda_c = 1.0 / (s1 * mode.sigma.real());
            for (int q = 2; q <= 3; ++q) {
                if (std::abs(m.nonlinearity().s(q)) < 1e-14) continue;
                const double inner = detail::mode_inner(m, mode, q);
                if (std::abs(inner) <= 1e-10) continue;
                p.q = q;
                p.chi = detail::chi_prefactor(m, q, p.lambda_c) * inner;
                p.type = q == 2 ? BranchType::Transcritical : BranchType::Pitchfork;
                p.orientation = p.chi < 0.0 ? Orientation::TowardLarger
                                            : Orientation::TowardSmaller;
                break;
            }
        } else if (mode.sigma.real() > 1e-12 * scale) {
            // positive but non-simple: crossing gain is still reported
            p.lambda_c = 1.0 / (s1 * mode.sigma.real());
        }
        rep.points.push_back(std::move(p));
    }
    return rep;
}

/// Real roots (ascending, with multiplicity) of the truncated reduced
/// equation (-1 + lambda s1 sigma) x + chi x^q + input = 0 for q in {2, 3}.
inline std::vector<double> reduced_roots(double lambda, double sigma, double chi_q,
                                         int q, double input, double s1 = 0.25) {
    if (q != 2 && q != 3) throw std::invalid_argument("reduced_roots: q must be 2 or 3");
    if (chi_q == 0.0)
        throw std::invalid_argument("reduced_roots: degenerate at chi = 0");
    const double a = -1.0 + lambda * s1 * sigma;
    std::vector<double> roots;
    if (q == 2) {
        const double disc = a * a - 4.0 * chi_q * input;
        const double scale = std::max({a * a, std::abs(4.0 * chi_q * input), 1e-300});
        if (disc < -1e-12 * scale) return roots;
        if (disc <= 1e-12 * scale) {
            roots.assign(2, -a / (2.0 * chi_q));
            return roots;
        }
        // cancellation-free quadratic pair
        const double sd = std::sqrt(disc);
        const double b = -0.5 * (a + (a >= 0.0 ? sd : -sd));
        roots.push_back(b / chi_q);
        roots.push_back(input / b);
    } else {
        // companion matrix of x^3 + c1 x + c0
        const double c1 = a / chi_q, c0 = input / chi_q;
        Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
        C(1, 0) = 1.0;
        C(2, 1) = 1.0;
        C(0, 2) = -c0;
        C(1, 2) = -c1;
        const Eigen::Vector3cd ev = C.eigenvalues();
        const double rscale =
            std::max(1.0, std::max(std::abs(c0), std::abs(c1)));
        for (int i = 0; i < 3; ++i)
            if (std::abs(ev[i].imag()) < 1e-8 * rscale) roots.push_back(ev[i].real());
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

/// First Lyapunov coefficient for an oscillatory candidate with linear part
/// g1 +/- i g2: l1 = -(lambda_H^3 s2^2)/(4 w^2 s1) (1 - sqrt(g1^2+g2^2)
/// s3 s1 / s2^2), w = sqrt(g1^2+g2^2)/(2 g1). Zero (degenerate) when the
/// quadratic series coefficient vanishes.
inline double hopf_l1(const FieldModel& m, double g1, double g2, double lambda_H) {
    if (g1 <= 0.0)
        throw std::invalid_argument("hopf_l1: needs a positive real part");
    const double s1 = m.nonlinearity().s(1);
    const double s2 = m.nonlinearity().s(2);
    const double s3 = m.nonlinearity().s(3);
    if (s2 == 0.0) return 0.0;
    const double r = std::hypot(g1, g2);
    const double w = r / (2.0 * g1);
    return -(std::pow(lambda_H, 3) / (4.0 * w * w * s1)) * (s2 * s2 - r * s3 * s1);
}

struct PersistencePoint {
    double v1 = 0.0;
    double v2 = 0.0;
    double lambda = 0.0;
};

/// Location of the axis pitchfork under the threshold homotopy: solve the
/// three-equation system (in-plane residuals at v3 = 0 plus the vanishing of
/// the axis-direction eigenvalue) for (v1, v2, lambda) at fixed mu. Requires
/// the three-coordinate model with an axis-symmetric drive.
inline PersistencePoint pitchfork_persistence(const FieldModel& m, double mu) {
    if (m.dim() != 3)
        throw std::invalid_argument("pitchfork_persistence: needs the three-coordinate model");
    const double i3 = m.params().eps * m.kernel().project_coords(m.input())[2];
    const double t3 = m.theta_coords()[2];
    if (std::abs(i3) > 1e-10 || std::abs(t3) > 1e-10)
        throw std::invalid_argument(
            "pitchfork_persistence: the axis symmetry is broken by the drive");

    // start from the trivial crossing of the axis-supported mode
    const auto spec = m.kernel().spectrum();
    double sigma_axis = 0.0;
    for (const auto& mode : spec.modes) {
        if (std::abs(mode.sigma.imag()) > 1e-12) continue;
        const Eigen::Vector3d u = mode.coords.real();
        const bool axis_supported =
            std::abs(u[2]) > 10.0 * std::max(std::abs(u[0]), std::abs(u[1]));
        if (axis_supported && mode.sigma.real() > 0.0) {
            sigma_axis = mode.sigma.real();
            break;
        }
    }
    if (sigma_axis == 0.0)
        throw std::invalid_argument("pitchfork_persistence: no positive axis mode");

    Eigen::Vector3d x;  // (v1, v2, lambda)
    x << 0.0, 0.0, 1.0 / (m.nonlinearity().s(1) * sigma_axis);

    const auto F = [&](const Eigen::Vector3d& z) {
        const auto mz = m.at(Homotopy{z[2], mu, m.params().eps});
        Eigen::VectorXd v = Eigen::VectorXd::Zero(3);
        v[0] = z[0];
        v[1] = z[1];
        const Eigen::VectorXd r = mz.residual(v);
        Eigen::Vector3d out;
        out[0] = r[0];
        out[1] = r[1];
        out[2] = mz.jacobian(v)(2, 2);
        return out;
    };

    for (int it = 0; it < 50; ++it) {
        const Eigen::Vector3d f = F(x);
        if (f.cwiseAbs().maxCoeff() < 1e-12) return {x[0], x[1], x[2]};
        Eigen::Matrix3d J;
        for (int j = 0; j < 3; ++j) {
            const double h = 1e-6 * (1.0 + std::abs(x[j]));
            Eigen::Vector3d xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            J.col(j) = (F(xp) - F(xm)) / (2.0 * h);
        }
        const Eigen::FullPivLU<Eigen::Matrix3d> lu(J);
        if (!lu.isInvertible())
            throw std::runtime_error(
                "pitchfork_persistence: singular system, outside local validity");
        const Eigen::Vector3d step = lu.solve(f);
        x -= step;
        if (step.cwiseAbs().maxCoeff() < 1e-13 &&
            F(x).cwiseAbs().maxCoeff() < 1e-10)
            return {x[0], x[1], x[2]};
    }
    throw std::runtime_error("pitchfork_persistence: no convergence");
}

}  // namespace nfcont
