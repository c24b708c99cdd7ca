#pragma once
// Pseudo-arclength continuation of stationary solutions in one active
// parameter, detection and localization of special points along a branch,
// switching onto bifurcated branches at simple crossings, and the
// multiparameter sweep that recovers solution branches disconnected from
// the trivial-seeded component.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nfcont/model.hpp"
#include "nfcont/stationary.hpp"

namespace nfcont {

/// Which homotopy parameter a trace varies; the other two stay fixed.
enum class ActiveParam { Lambda, Mu, Eps };

inline double active_value(const Homotopy& h, ActiveParam a) {
    switch (a) {
        case ActiveParam::Lambda: return h.lambda;
        case ActiveParam::Mu: return h.mu;
        default: return h.eps;
    }
}

inline void set_active(Homotopy& h, ActiveParam a, double value) {
    switch (a) {
        case ActiveParam::Lambda: h.lambda = value; break;
        case ActiveParam::Mu: h.mu = value; break;
        default: h.eps = value; break;
    }
}

/// Controls for a single pseudo-arclength trace.
struct TraceConfig {
    double ds0 = 0.01;
    double ds_min = 1e-5;
    double ds_max = 0.1;
    int max_steps = 2000;
    int max_corrector_iters = 12;
    double corrector_tol = 1e-10;
    int direction = 1;      // sign of the initial active-parameter tangent
    bool stability = true;  // record the flow instability count per sample
};

/// How a trace ended.
enum class BranchStatus { RangeExit, StepCap, Stalled };

/// One accepted point on a branch. The tangent is the unit direction of
/// travel in (state, active parameter) space, size dim()+1.
struct BranchSample {
    Homotopy params;
    Eigen::VectorXd v;
    Eigen::VectorXd tangent;
    int det_sign = 0;    // sign of det of the residual Jacobian
    int n_unstable = -1; // flow instability count, -1 when not recorded
};

/// A connected piece of the solution set traced in one active parameter.
struct Branch {
    std::vector<BranchSample> samples;
    ActiveParam active = ActiveParam::Lambda;
    std::string provenance = "user";
    BranchStatus status = BranchStatus::RangeExit;
    bool disconnected = false;
};

/// A localized event along a branch. For turning and branch kinds the
/// bracketing values are the test function at the surrounding samples;
/// for Hopf candidates they are the instability counts.
struct SpecialPoint {
    enum class Kind { Turning, Branch, HopfCandidate };
    Kind kind = Kind::Turning;
    ActiveParam active = ActiveParam::Lambda;
    Homotopy params;
    Eigen::VectorXd v;
    double before = 0.0;
    double after = 0.0;
    std::size_t segment = 0; // index of the sample preceding the event
};

/// A Newton-corrected starting point for a new branch.
struct BranchSeed {
    Homotopy params;
    Eigen::VectorXd v;
};

namespace detail {

inline Eigen::VectorXd param_column(const FieldModel& m, const Eigen::VectorXd& v,
                                    ActiveParam a) {
    switch (a) {
        case ActiveParam::Lambda: return m.dresidual_dlambda(v);
        case ActiveParam::Mu: return m.dresidual_dmu(v);
        default: return m.dresidual_deps(v);
    }
}

inline int sign_det(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu) {
    int s = lu.permutationP().determinant() >= 0 ? 1 : -1;
    const auto diag = lu.matrixLU().diagonal();
    for (Eigen::Index i = 0; i < diag.size(); ++i) {
        if (diag[i] == 0.0) return 0;
        if (diag[i] < 0.0) s = -s;
    }
    return s;
}

struct PointData {
    Eigen::VectorXd tangent;
    int det_sign = 0;
    bool ok = false;
};

// Unit curve tangent and residual-Jacobian determinant sign at a point.
// The bordered system uses the given row as the normalization constraint,
// so the returned tangent has positive inner product with that row.
inline PointData tangent_and_det(const FieldModel& at_h, const Eigen::VectorXd& v,
                                 ActiveParam active, const Eigen::VectorXd& row) {
    const Eigen::Index n = v.size();
    PointData out;
    Eigen::MatrixXd B(n + 1, n + 1);
    B.topLeftCorner(n, n) = at_h.jacobian(v);
    B.topRightCorner(n, 1) = param_column(at_h, v, active);
    B.bottomLeftCorner(1, n) = row.head(n).transpose();
    B(n, n) = row[n];
    Eigen::PartialPivLU<Eigen::MatrixXd> luJ(B.topLeftCorner(n, n));
    out.det_sign = sign_det(luJ);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    rhs[n] = 1.0;
    Eigen::VectorXd t = Eigen::PartialPivLU<Eigen::MatrixXd>(B).solve(rhs);
    if (!t.allFinite() || t.norm() == 0.0) {
        out.tangent = row.normalized();
        return out;
    }
    out.tangent = t.normalized();
    out.ok = true;
    return out;
}

struct CorrectorResult {
    Homotopy params;
    Eigen::VectorXd v;
    Eigen::VectorXd tangent;
    int det_sign = 0;
    int iterations = 0;
    bool converged = false;
};

// Newton iteration on residual plus the arclength constraint
// row . (x - anchor) = 0, with x = (v, active parameter).
inline CorrectorResult correct(const FieldModel& base, ActiveParam active,
                               const Eigen::VectorXd& row, Homotopy h,
                               Eigen::VectorXd v, const Homotopy& anchor_h,
                               const Eigen::VectorXd& anchor_v,
                               const TraceConfig& cfg) {
    const Eigen::Index n = v.size();
    CorrectorResult out;
    Eigen::MatrixXd B(n + 1, n + 1);
    Eigen::VectorXd rhs(n + 1);
    for (int it = 0; it <= cfg.max_corrector_iters; ++it) {
        if (!v.allFinite()) break;
        // Parameters may leave the model's domain mid-iteration; that is a
        // rejection, not an error, so the step can shrink back inside.
        std::optional<FieldModel> mh;
        try {
            mh.emplace(base.at(h));
        } catch (const std::invalid_argument&) {
            break;
        }
        const FieldModel& m = *mh;
        const Eigen::VectorXd r = m.residual(v);
        if (!r.allFinite()) break;
        out.iterations = it;
        if (r.norm() < cfg.corrector_tol) {
            PointData pd = tangent_and_det(m, v, active, row);
            out.params = h;
            out.v = v;
            out.tangent = pd.tangent;
            out.det_sign = pd.det_sign;
            out.converged = pd.ok;
            return out;
        }
        if (it == cfg.max_corrector_iters) break;
        B.topLeftCorner(n, n) = m.jacobian(v);
        B.topRightCorner(n, 1) = param_column(m, v, active);
        B.bottomLeftCorner(1, n) = row.head(n).transpose();
        B(n, n) = row[n];
        const double arc = row.head(n).dot(v - anchor_v) +
                           row[n] * (active_value(h, active) - active_value(anchor_h, active));
        rhs.head(n) = -r;
        rhs[n] = -arc;
        const Eigen::VectorXd d = Eigen::PartialPivLU<Eigen::MatrixXd>(B).solve(rhs);
        if (!d.allFinite()) break;
        v += d.head(n);
        set_active(h, active, active_value(h, active) + d[n]);
    }
    out.converged = false;
    return out;
}

inline int unstable_count(const FieldModel& m, const Eigen::VectorXd& v) {
    const Eigen::VectorXd tau = m.coordinate_decay();
    const Eigen::MatrixXd A = (-tau.cwiseInverse()).asDiagonal() * m.jacobian(v);
    Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
    if (es.info() != Eigen::Success) return -1;
    int c = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()[i].real() > 1e-8) ++c;
    return c;
}

inline void validate_trace_config(const TraceConfig& cfg) {
    if (!(cfg.ds_min > 0.0) || !(cfg.ds_min <= cfg.ds_max))
        throw std::invalid_argument("trace: need 0 < ds_min <= ds_max");
    if (!(cfg.ds0 > 0.0)) throw std::invalid_argument("trace: ds0 must be positive");
    if (cfg.max_steps < 1) throw std::invalid_argument("trace: max_steps must be >= 1");
    if (cfg.direction != 1 && cfg.direction != -1)
        throw std::invalid_argument("trace: direction must be +1 or -1");
    if (!(cfg.corrector_tol > 0.0))
        throw std::invalid_argument("trace: corrector_tol must be positive");
}

} // namespace detail

/// Follows the solution curve through a seed point, varying the active
/// parameter over the given range. Euler predictor along the unit tangent
/// of the bordered system; Newton corrector on residual plus arclength
/// constraint. The step halves when the corrector needs more than 5
/// iterations or rejects, grows by 1.3 when it needs at most 2, and stays
/// in [ds_min, ds_max]. A corrected point drifting from the predictor by
/// more than the step is rejected to keep the chain on one curve. Ends on
/// range exit, step cap, or a corrector stall at the minimal step; a stall
/// after the seed returns the truncated branch with status Stalled, unless
/// it happens hard against a range endpoint, which reads as range exit.
/// Throws if the seed itself does not correct at fixed parameters.
inline Branch trace(const FieldModel& model, const Homotopy& seed_params,
                    const Eigen::VectorXd& seed_state, ActiveParam active,
                    const std::array<double, 2>& range, const TraceConfig& cfg = {},
                    std::string provenance = "user") {
    detail::validate_trace_config(cfg);
    if (!(range[0] < range[1])) throw std::invalid_argument("trace: empty range");
    const double p0 = active_value(seed_params, active);
    if (p0 < range[0] - 1e-12 || p0 > range[1] + 1e-12)
        throw std::invalid_argument("trace: seed parameter outside range");
    const Eigen::Index n = model.dim();
    if (seed_state.size() != n) throw std::invalid_argument("trace: seed dimension mismatch");

    const NewtonResult nr = newton(model.at(seed_params), seed_state, cfg.corrector_tol);
    if (!nr.converged)
        throw std::runtime_error("trace: seed failed to converge at fixed parameters");

    Branch br;
    br.active = active;
    br.provenance = std::move(provenance);
    br.status = BranchStatus::StepCap;

    Eigen::VectorXd row = Eigen::VectorXd::Zero(n + 1);
    row[n] = static_cast<double>(cfg.direction);
    Homotopy h = seed_params;
    Eigen::VectorXd v = nr.v;
    {
        const FieldModel m0 = model.at(h);
        detail::PointData pd = detail::tangent_and_det(m0, v, active, row);
        BranchSample s;
        s.params = h;
        s.v = v;
        s.tangent = pd.ok ? pd.tangent : row;
        s.det_sign = pd.det_sign;
        if (cfg.stability) s.n_unstable = detail::unstable_count(m0, v);
        br.samples.push_back(std::move(s));
    }
    Eigen::VectorXd t = br.samples.back().tangent;

    double ds = std::clamp(cfg.ds0, cfg.ds_min, cfg.ds_max);
    for (int step = 0; step < cfg.max_steps; ++step) {
        detail::CorrectorResult res;
        bool accepted = false;
        while (true) {
            Homotopy hp = h;
            set_active(hp, active, active_value(h, active) + ds * t[n]);
            const Eigen::VectorXd vp = v + ds * t.head(n);
            res = detail::correct(model, active, t, hp, vp, hp, vp, cfg);
            if (res.converged) {
                const double drift =
                    std::sqrt((res.v - vp).squaredNorm() +
                              std::pow(active_value(res.params, active) -
                                           active_value(hp, active), 2));
                if (drift <= ds) {
                    accepted = true;
                    break;
                }
            }
            ds *= 0.5;
            if (ds < cfg.ds_min) break;
        }
        if (!accepted) {
            // A stall hard against a range endpoint means the curve reached
            // the boundary (the model domain may end exactly there).
            const double p = active_value(h, active);
            const bool at_edge = std::min(p - range[0], range[1] - p) <= 4.0 * cfg.ds_min;
            br.status = at_edge ? BranchStatus::RangeExit : BranchStatus::Stalled;
            break;
        }
        if (res.iterations > 5)
            ds = std::max(0.5 * ds, cfg.ds_min);
        else if (res.iterations <= 2)
            ds = std::min(1.3 * ds, cfg.ds_max);

        h = res.params;
        v = res.v;
        t = res.tangent;
        BranchSample s;
        s.params = h;
        s.v = v;
        s.tangent = t;
        s.det_sign = res.det_sign;
        if (cfg.stability) s.n_unstable = detail::unstable_count(model.at(h), v);
        br.samples.push_back(std::move(s));
        const double p = active_value(h, active);
        if (p < range[0] - 1e-12 || p > range[1] + 1e-12) {
            br.status = BranchStatus::RangeExit;
            break;
        }
    }
    return br;
}

namespace detail {

// Corrects the point at chord fraction f between two samples onto the
// curve, using the chord as the arclength row, and reports the requested
// test sign there: the active tangent component for turning points, the
// determinant sign for branch points.
struct ProbeResult {
    Homotopy params;
    Eigen::VectorXd v;
    int sign = 0;
    bool ok = false;
};

inline ProbeResult bisect_probe(const FieldModel& model, ActiveParam active,
                                const BranchSample& a, const BranchSample& b,
                                double f, bool det_test, const TraceConfig& cfg) {
    const Eigen::Index n = a.v.size();
    Eigen::VectorXd row(n + 1);
    row.head(n) = b.v - a.v;
    row[n] = active_value(b.params, active) - active_value(a.params, active);
    const double len = row.norm();
    ProbeResult out;
    if (len == 0.0) return out;
    row /= len;
    Homotopy h = a.params;
    set_active(h, active, (1.0 - f) * active_value(a.params, active) +
                              f * active_value(b.params, active));
    Eigen::VectorXd v = (1.0 - f) * a.v + f * b.v;
    CorrectorResult res = correct(model, active, row, h, v, h, v, cfg);
    if (!res.converged) return out;
    out.params = res.params;
    out.v = res.v;
    out.ok = true;
    if (det_test)
        out.sign = res.det_sign;
    else
        out.sign = res.tangent[n] > 0.0 ? 1 : (res.tangent[n] < 0.0 ? -1 : 0);
    return out;
}

} // namespace detail

/// Scans a branch for sign changes of the active tangent component
/// (turning points) and of the residual-Jacobian determinant (branch
/// points when the tangent keeps its sign), bisecting each bracket along
/// the curve until the active parameter is localized to param_tol. A jump
/// of the recorded instability count by an even amount with no determinant
/// flip is reported as a Hopf candidate at the later sample, without
/// refinement.
inline std::vector<SpecialPoint> detect_special(const FieldModel& model, const Branch& br,
                                                double param_tol = 1e-8,
                                                const TraceConfig& cfg = {}) {
    std::vector<SpecialPoint> out;
    if (br.samples.size() < 2) return out;
    const ActiveParam active = br.active;
    for (std::size_t i = 0; i + 1 < br.samples.size(); ++i) {
        const BranchSample& a = br.samples[i];
        const BranchSample& b = br.samples[i + 1];
        const Eigen::Index n = a.v.size();
        const double ta = a.tangent[n];
        const double tb = b.tangent[n];
        const bool tflip = ta * tb < 0.0;
        const bool dflip = a.det_sign * b.det_sign < 0;
        if (tflip || dflip) {
            const bool det_test = !tflip;
            int sa = det_test ? a.det_sign : (ta > 0.0 ? 1 : -1);
            double flo = 0.0, fhi = 1.0;
            Homotopy plo = a.params, phi = b.params;
            Eigen::VectorXd vlo = a.v, vhi = b.v;
            for (int it = 0; it < 80; ++it) {
                if (std::abs(active_value(phi, active) - active_value(plo, active)) <
                    param_tol)
                    break;
                const double fm = 0.5 * (flo + fhi);
                detail::ProbeResult pr =
                    detail::bisect_probe(model, active, a, b, fm, det_test, cfg);
                if (!pr.ok || pr.sign == 0) break;
                if (pr.sign == sa) {
                    flo = fm;
                    plo = pr.params;
                    vlo = pr.v;
                } else {
                    fhi = fm;
                    phi = pr.params;
                    vhi = pr.v;
                }
            }
            SpecialPoint sp;
            sp.kind = tflip ? SpecialPoint::Kind::Turning : SpecialPoint::Kind::Branch;
            sp.active = active;
            sp.params = plo;
            set_active(sp.params, active,
                       0.5 * (active_value(plo, active) + active_value(phi, active)));
            sp.v = 0.5 * (vlo + vhi);
            sp.before = det_test ? static_cast<double>(a.det_sign) : ta;
            sp.after = det_test ? static_cast<double>(b.det_sign) : tb;
            sp.segment = i;
            out.push_back(std::move(sp));
            continue;
        }
        if (a.n_unstable >= 0 && b.n_unstable >= 0) {
            const int jump = b.n_unstable - a.n_unstable;
            if (jump != 0 && jump % 2 == 0) {
                // Even jumps also arise from real eigenvalue pairs crossing
                // together (det-invisible); only a complex pair near the
                // imaginary axis qualifies as a Hopf candidate.
                const FieldModel mb = model.at(b.params);
                const Eigen::VectorXd tau = mb.coordinate_decay();
                const Eigen::MatrixXd A =
                    (-tau.cwiseInverse()).asDiagonal() * mb.jacobian(b.v);
                Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
                bool complex_pair = false;
                if (es.info() == Eigen::Success) {
                    double scale = 0.0, best = std::numeric_limits<double>::infinity();
                    Eigen::Index ib = 0;
                    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
                        scale = std::max(scale, std::abs(es.eigenvalues()[k]));
                        const double re = std::abs(es.eigenvalues()[k].real());
                        if (re < best) {
                            best = re;
                            ib = k;
                        }
                    }
                    complex_pair = std::abs(es.eigenvalues()[ib].imag()) >
                                   1e-6 * std::max(1.0, scale);
                }
                if (complex_pair) {
                    SpecialPoint sp;
                    sp.kind = SpecialPoint::Kind::HopfCandidate;
                    sp.active = active;
                    sp.params = b.params;
                    sp.v = b.v;
                    sp.before = static_cast<double>(a.n_unstable);
                    sp.after = static_cast<double>(b.n_unstable);
                    sp.segment = i;
                    out.push_back(std::move(sp));
                }
            }
        }
    }
    return out;
}

/// Newton-corrects a point of the solution set at pinned mode amplitude:
/// unknowns are (state, active parameter), the extra equation fixes
/// direction . (v - center) = amplitude, so the iteration cannot collapse
/// onto the branch through the center. Start offset shifts the initial
/// parameter guess. Empty on failure or when the parameter ran away from
/// the center point.
inline std::optional<BranchSeed> seed_along(const FieldModel& model, const Homotopy& at,
                                            ActiveParam active,
                                            const Eigen::VectorXd& center,
                                            const Eigen::VectorXd& direction,
                                            double amplitude,
                                            double corrector_tol = 1e-10,
                                            double start_offset = 0.0) {
    const Eigen::Index n = model.dim();
    if (center.size() != n || direction.size() != n)
        throw std::invalid_argument("seed_along: dimension mismatch");
    if (direction.norm() == 0.0)
        throw std::invalid_argument("seed_along: zero direction");
    const Eigen::VectorXd e = direction.normalized();
    const double pc = active_value(at, active);
    Homotopy h = at;
    set_active(h, active, pc + start_offset);
    Eigen::VectorXd v = center + amplitude * e;
    Eigen::MatrixXd B(n + 1, n + 1);
    Eigen::VectorXd rhs(n + 1);
    for (int it = 0; it < 40; ++it) {
        if (!v.allFinite()) return std::nullopt;
        std::optional<FieldModel> mh;
        try {
            mh.emplace(model.at(h));
        } catch (const std::invalid_argument&) {
            return std::nullopt;
        }
        const FieldModel& m = *mh;
        const Eigen::VectorXd r = m.residual(v);
        if (!r.allFinite()) return std::nullopt;
        if (r.norm() < corrector_tol &&
            std::abs(e.dot(v - center) - amplitude) < 1e-12 * (1.0 + std::abs(amplitude))) {
            if (std::abs(active_value(h, active) - pc) > 0.5 * (1.0 + std::abs(pc)))
                return std::nullopt;
            return BranchSeed{h, v};
        }
        B.topLeftCorner(n, n) = m.jacobian(v);
        B.topRightCorner(n, 1) = detail::param_column(m, v, active);
        B.bottomLeftCorner(1, n) = e.transpose();
        B(n, n) = 0.0;
        rhs.head(n) = -r;
        rhs[n] = -(e.dot(v - center) - amplitude);
        const Eigen::VectorXd d = Eigen::PartialPivLU<Eigen::MatrixXd>(B).solve(rhs);
        if (!d.allFinite()) return std::nullopt;
        v += d.head(n);
        set_active(h, active, active_value(h, active) + d[n]);
    }
    return std::nullopt;
}

/// Seeds for the branches crossing the given branch point: points at mode
/// amplitude +-delta along the null eigenvector of the residual Jacobian,
/// Newton-corrected with the amplitude pinned and the active parameter
/// free, so each seed lands past the point on its own leg. Both pitchfork
/// legs come back as separate seeds. Refuses a crossing with more than one
/// near-zero eigenvalue.
inline std::vector<BranchSeed> switch_branch(const FieldModel& model, const SpecialPoint& at,
                                             double delta = 0.01, double nudge = 1e-3,
                                             double corrector_tol = 1e-10) {
    if (at.kind != SpecialPoint::Kind::Branch)
        throw std::invalid_argument("switch_branch: point is not a branch point");
    if (!(delta > 0.0) || !(nudge > 0.0))
        throw std::invalid_argument("switch_branch: delta and nudge must be positive");
    const FieldModel mc = model.at(at.params);
    const Eigen::MatrixXd J = mc.jacobian(at.v);
    Eigen::EigenSolver<Eigen::MatrixXd> es(J, true);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("switch_branch: eigensolver failed");
    double scale = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        scale = std::max(scale, std::abs(es.eigenvalues()[i]));
    const double zero_tol = 1e-4 * std::max(1.0, scale);
    int n_zero = 0;
    Eigen::Index imin = 0;
    double amin = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double mag = std::abs(es.eigenvalues()[i]);
        if (mag < zero_tol) ++n_zero;
        if (mag < amin) {
            amin = mag;
            imin = i;
        }
    }
    if (n_zero > 1)
        throw std::invalid_argument("switch_branch: crossing is not simple");
    if (amin > 1e-3 * std::max(1.0, scale))
        throw std::invalid_argument("switch_branch: Jacobian is not near-singular here");
    Eigen::VectorXd e = es.eigenvectors().col(imin).real();
    if (e.norm() == 0.0) e = es.eigenvectors().col(imin).imag();
    if (e.norm() == 0.0)
        throw std::runtime_error("switch_branch: degenerate null eigenvector");
    e.normalize();

    std::vector<BranchSeed> seeds;
    for (const double s : {delta, -delta}) {
        std::optional<BranchSeed> seed;
        for (const double off : {nudge, -nudge, 0.0}) {
            seed = seed_along(model, at.params, at.active, at.v, e, s,
                              corrector_tol, off);
            if (seed) break;
        }
        if (!seed) continue;
        bool dup = false;
        for (const BranchSeed& k : seeds)
            if (std::abs(active_value(k.params, at.active) -
                         active_value(seed->params, at.active)) < 1e-9 &&
                (k.v - seed->v).norm() < 1e-6 * (1.0 + seed->v.norm()))
                dup = true;
        if (!dup) seeds.push_back(std::move(*seed));
    }
    if (seeds.empty())
        throw std::runtime_error("switch_branch: no bifurcated seed converged");
    return seeds;
}

/// Product-space distance from (params, v) to the nearest branch sample.
inline double branch_distance(const Branch& br, const Homotopy& h, const Eigen::VectorXd& v) {
    double best = std::numeric_limits<double>::infinity();
    for (const BranchSample& s : br.samples) {
        const double d = (s.v - v).norm() + std::abs(s.params.lambda - h.lambda) +
                         std::abs(s.params.mu - h.mu) + std::abs(s.params.eps - h.eps);
        best = std::min(best, d);
    }
    return best;
}

/// True when the solution (h, v) lies on the branch: a sample coincides
/// with it directly, or some sample segment straddles its active-parameter
/// value with matching fixed parameters and Newton from the segment
/// interpolant at those exact parameters lands within tol of v. The state
/// tolerance is relative to the state norm.
inline bool branch_contains(const FieldModel& model, const Branch& br, const Homotopy& h,
                            const Eigen::VectorXd& v, double tol = 1e-5) {
    const ActiveParam active = br.active;
    const double p = active_value(h, active);
    const double vtol = tol * (1.0 + v.norm());
    auto fixed_gap = [&](const Homotopy& q) {
        switch (active) {
            case ActiveParam::Lambda:
                return std::abs(q.mu - h.mu) + std::abs(q.eps - h.eps);
            case ActiveParam::Mu:
                return std::abs(q.lambda - h.lambda) + std::abs(q.eps - h.eps);
            default:
                return std::abs(q.lambda - h.lambda) + std::abs(q.mu - h.mu);
        }
    };
    for (const BranchSample& s : br.samples) {
        if (fixed_gap(s.params) > 1e-9) continue;
        if (std::abs(active_value(s.params, active) - p) <= tol &&
            (s.v - v).norm() <= vtol)
            return true;
    }
    for (std::size_t i = 0; i + 1 < br.samples.size(); ++i) {
        const BranchSample& a = br.samples[i];
        const BranchSample& b = br.samples[i + 1];
        if (fixed_gap(a.params) > 1e-9) continue;
        const double pa = active_value(a.params, active);
        const double pb = active_value(b.params, active);
        if ((p - pa) * (p - pb) > 0.0) continue;
        const double span = pb - pa;
        const double f = span == 0.0 ? 0.5 : (p - pa) / span;
        const Eigen::VectorXd guess = (1.0 - f) * a.v + f * b.v;
        Homotopy hp = a.params;
        set_active(hp, active, p);
        const NewtonResult nr = newton(model.at(hp), guess);
        if (nr.converged && (nr.v - v).norm() < vtol) return true;
    }
    return false;
}

/// Sweep protocol: a lambda phase at the base parameters with branch
/// switching, then homotopy rounds that carry every branch to the target
/// parameter value, re-trace in lambda there, and return, re-tracing any
/// arrival that lands off the known family. Branches left geometrically
/// apart from the trivial-rooted component of their parameter slice are
/// flagged disconnected.
struct SweepConfig {
    std::array<double, 2> lambda_range{0.0, 8.0};
    double mu_target = 1.0;
    double eps_target = 1.0;
    double seed_spacing = 0.5; // lambda spacing of homotopy leg seeds
    TraceConfig trace{};
    double dedupe_tol = 1e-6;  // same-solution distance
    double connect_tol = 0.05; // component-gluing distance
    int max_branches = 64;
    int switch_depth = 2;
    double switch_delta = 0.01;
    double switch_nudge = 1e-3;
};

struct SweepResult {
    std::vector<Branch> branches;
    std::vector<std::string> notes; // leg failures and refusals, in order
};

namespace detail {

inline std::string slice_key(const Homotopy& h) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f,%.9f", h.mu, h.eps);
    return std::string(buf);
}

inline std::vector<std::size_t> grid_seed_indices(const Branch& br, double spacing) {
    std::vector<std::size_t> idx;
    if (br.samples.empty()) return idx;
    idx.push_back(0);
    double last = br.samples[0].params.lambda;
    for (std::size_t i = 1; i < br.samples.size(); ++i) {
        const double l = br.samples[i].params.lambda;
        if (std::floor(l / spacing) != std::floor(last / spacing) &&
            idx.size() < 60)
            idx.push_back(i);
        last = l;
    }
    return idx;
}

// Distance from the point (h, v) to the sample polyline of a branch in
// the product space (state, lambda, mu, eps).
inline double polyline_distance(const Branch& br, const Homotopy& h,
                                const Eigen::VectorXd& v) {
    const Eigen::Index n = v.size();
    auto embed = [&](const Homotopy& q, const Eigen::VectorXd& w) {
        Eigen::VectorXd x(n + 3);
        x.head(n) = w;
        x[n] = q.lambda;
        x[n + 1] = q.mu;
        x[n + 2] = q.eps;
        return x;
    };
    const Eigen::VectorXd x = embed(h, v);
    double best = std::numeric_limits<double>::infinity();
    if (br.samples.empty()) return best;
    Eigen::VectorXd a = embed(br.samples[0].params, br.samples[0].v);
    best = (x - a).norm();
    for (std::size_t i = 1; i < br.samples.size(); ++i) {
        const Eigen::VectorXd b = embed(br.samples[i].params, br.samples[i].v);
        const Eigen::VectorXd ab = b - a;
        const double len2 = ab.squaredNorm();
        const double f =
            len2 == 0.0 ? 0.0 : std::clamp((x - a).dot(ab) / len2, 0.0, 1.0);
        best = std::min(best, (x - (a + f * ab)).norm());
        a = b;
    }
    return best;
}

// Geometric chain proximity; interior samples only, since twin chains of
// one curve can differ at their endpoints by a step. The tolerance is
// relative to the state norm, so densely wound large-norm branches still
// collapse while nearby distinct legs stay apart.
inline bool duplicate_branch(const Branch& cand, const Branch& existing, double tol) {
    if (cand.active != existing.active) return false;
    if (cand.samples.empty()) return true;
    const std::size_t k = std::min<std::size_t>(cand.samples.size(), 7);
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t i = (j + 1) * (cand.samples.size() - 1) / (k + 1);
        const BranchSample& s = cand.samples[i];
        if (polyline_distance(existing, s.params, s.v) >
            tol * (1.0 + s.v.norm()))
            return false;
    }
    return true;
}

} // namespace detail

inline SweepResult multiparameter_sweep(const FieldModel& model, const SweepConfig& cfg = {}) {
    if (!(cfg.lambda_range[0] < cfg.lambda_range[1]))
        throw std::invalid_argument("sweep: empty lambda range");
    if (!(cfg.seed_spacing > 0.0))
        throw std::invalid_argument("sweep: seed_spacing must be positive");
    SweepResult out;
    std::vector<Branch>& all = out.branches;
    // Indices of lambda-branches, their slice keys, and trivial-side marks.
    std::vector<std::size_t> lam_idx;
    std::vector<bool> trivial_side;

    auto note = [&](std::string s) { out.notes.push_back(std::move(s)); };
    const double ctol = std::max(cfg.connect_tol, 10.0 * cfg.dedupe_tol);

    auto trace_both = [&](const Homotopy& h0, const Eigen::VectorXd& v0,
                          const std::array<double, 2>& range,
                          const std::string& prov) -> std::optional<Branch> {
        try {
            TraceConfig tc = cfg.trace;
            tc.direction = 1;
            Branch plus = trace(model, h0, v0, ActiveParam::Lambda, range, tc, prov);
            tc.direction = -1;
            Branch minus = trace(model, h0, v0, ActiveParam::Lambda, range, tc, prov);
            Branch full;
            full.active = ActiveParam::Lambda;
            full.provenance = prov;
            // Reversed samples keep chain-order tangents, else the seam
            // would read as a spurious turning point.
            for (auto it = minus.samples.rbegin(); it != minus.samples.rend(); ++it) {
                BranchSample s = *it;
                s.tangent = -s.tangent;
                full.samples.push_back(std::move(s));
            }
            if (!full.samples.empty()) full.samples.pop_back();
            full.samples.insert(full.samples.end(), plus.samples.begin(),
                                plus.samples.end());
            if (minus.status == BranchStatus::Stalled ||
                plus.status == BranchStatus::Stalled)
                full.status = BranchStatus::Stalled;
            else if (minus.status == BranchStatus::StepCap ||
                     plus.status == BranchStatus::StepCap)
                full.status = BranchStatus::StepCap;
            else
                full.status = BranchStatus::RangeExit;
            return full;
        } catch (const std::exception& ex) {
            note(prov + ": " + ex.what());
            return std::nullopt;
        }
    };

    // Twin-chain sag scales with the square of the step, so the duplicate
    // tolerance tracks the step cap.
    const double dup_tol = std::max(10.0 * cfg.dedupe_tol, 0.02 * cfg.trace.ds_max);
    auto push_lambda_branch = [&](Branch&& br, bool from_trivial) -> bool {
        for (std::size_t i : lam_idx)
            if (detail::duplicate_branch(br, all[i], dup_tol))
                return false;
        all.push_back(std::move(br));
        lam_idx.push_back(all.size() - 1);
        trivial_side.push_back(from_trivial);
        return true;
    };

    // Lambda phase at base parameters.
    const Homotopy base{cfg.lambda_range[0], 0.0, 0.0};
    {
        TraceConfig tc = cfg.trace;
        tc.direction = 1;
        Branch triv = trace(model, base, model.at(base).trivial_coords(),
                            ActiveParam::Lambda, cfg.lambda_range, tc, "trivial");
        push_lambda_branch(std::move(triv), true);
    }
    {
        std::vector<int> depth{0};
        for (std::size_t q = 0; q < lam_idx.size(); ++q) {
            if (depth[q] >= cfg.switch_depth) continue;
            if (static_cast<int>(lam_idx.size()) >= cfg.max_branches) break;
            const Branch scan = all[lam_idx[q]];
            std::vector<SpecialPoint> specials;
            try {
                specials = detect_special(model, scan, 1e-8, cfg.trace);
            } catch (const std::exception& ex) {
                note(scan.provenance + ": detect_special: " + ex.what());
                continue;
            }
            for (const SpecialPoint& sp : specials) {
                if (sp.kind != SpecialPoint::Kind::Branch) continue;
                std::vector<BranchSeed> seeds;
                try {
                    seeds = switch_branch(model, sp, cfg.switch_delta, cfg.switch_nudge,
                                          cfg.trace.corrector_tol);
                } catch (const std::exception& ex) {
                    char buf[64];
                    std::snprintf(buf, sizeof buf, "%.6g", sp.params.lambda);
                    note("switch at lambda=" + std::string(buf) + ": " + ex.what());
                    continue;
                }
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.6g", sp.params.lambda);
                const std::string prov = "bifurcation lambda=" + std::string(buf);
                for (const BranchSeed& seed : seeds) {
                    if (static_cast<int>(lam_idx.size()) >= cfg.max_branches) break;
                    auto tb = trace_both(seed.params, seed.v, cfg.lambda_range, prov);
                    if (tb && push_lambda_branch(std::move(*tb), true))
                        depth.push_back(depth[q] + 1);
                }
            }
        }
    }

    // One homotopy round: carry every lambda-branch to the target value of
    // the round parameter, re-trace in lambda there, return, and re-trace
    // arrivals that land off the known family.
    struct Arrival {
        Homotopy params;
        Eigen::VectorXd v;
        bool from_trivial = false;
    };
    auto homotopy_round = [&](ActiveParam hp, double target, const char* tag) {
        if (target == 0.0) return;
        const std::size_t base_count = lam_idx.size();
        // Twin chains share stretches, so their grid seeds repeat; leg each
        // distinct seed once.
        std::vector<std::pair<Homotopy, Eigen::VectorXd>> legged;
        auto fresh_seed = [&](const Homotopy& sh, const Eigen::VectorXd& sv) {
            for (const auto& [ph, pv] : legged) {
                const double d = std::abs(ph.lambda - sh.lambda) +
                                 std::abs(ph.mu - sh.mu) + std::abs(ph.eps - sh.eps) +
                                 (pv - sv).norm();
                if (d < 10.0 * cfg.dedupe_tol * (1.0 + sv.norm())) return false;
            }
            legged.emplace_back(sh, sv);
            return true;
        };
        std::vector<Arrival> fwd;
        for (std::size_t q = 0; q < base_count; ++q) {
            const Branch src = all[lam_idx[q]];
            if (src.active != ActiveParam::Lambda) continue;
            const double from = src.samples.empty()
                                    ? 0.0
                                    : active_value(src.samples[0].params, hp);
            if (std::abs(from - target) < 1e-12) continue;
            const std::array<double, 2> hr{std::min(from, target), std::max(from, target)};
            for (std::size_t si : detail::grid_seed_indices(src, cfg.seed_spacing)) {
                const BranchSample& s = src.samples[si];
                if (s.params.lambda < cfg.lambda_range[0] ||
                    s.params.lambda > cfg.lambda_range[1])
                    continue; // a kept range-exiting sample
                if (!fresh_seed(s.params, s.v)) continue;
                TraceConfig tc = cfg.trace;
                tc.direction = target > from ? 1 : -1;
                char buf[96];
                std::snprintf(buf, sizeof buf, "%s-leg lambda=%.6g", tag,
                              s.params.lambda);
                try {
                    Branch leg = trace(model, s.params, s.v, hp, hr, tc, buf);
                    const BranchSample& last = leg.samples.back();
                    const bool arrived =
                        std::abs(active_value(last.params, hp) - target) <=
                        2.0 * cfg.trace.ds_max;
                    if (arrived) {
                        Homotopy ha = last.params;
                        set_active(ha, hp, target);
                        const NewtonResult nr = newton(model.at(ha), last.v,
                                                       cfg.trace.corrector_tol);
                        if (nr.converged)
                            fwd.push_back({ha, nr.v, trivial_side[q]});
                    }
                    all.push_back(std::move(leg));
                } catch (const std::exception& ex) {
                    note(std::string(buf) + ": " + ex.what());
                }
            }
        }
        std::vector<std::size_t> slice_idx;
        std::vector<std::size_t> slice_pos; // positions in lam_idx order
        for (const Arrival& a : fwd) {
            if (static_cast<int>(lam_idx.size()) >= cfg.max_branches) break;
            bool known = false;
            for (std::size_t i : slice_idx)
                if (branch_contains(model, all[i], a.params, a.v,
                                    10.0 * cfg.dedupe_tol))
                    known = true;
            if (known) continue;
            char buf[96];
            std::snprintf(buf, sizeof buf, "%s=%g slice", tag, target);
            auto tb = trace_both(a.params, a.v, cfg.lambda_range, buf);
            if (tb && push_lambda_branch(std::move(*tb), false)) {
                slice_idx.push_back(all.size() - 1);
                slice_pos.push_back(lam_idx.size() - 1);
            }
        }
        // A slice branch holding any arrival carried from the trivial side
        // is the deformed trivial component there.
        for (const Arrival& a : fwd) {
            if (!a.from_trivial) continue;
            for (std::size_t k = 0; k < slice_idx.size(); ++k)
                if (!trivial_side[slice_pos[k]] &&
                    branch_contains(model, all[slice_idx[k]], a.params, a.v,
                                    10.0 * cfg.dedupe_tol))
                    trivial_side[slice_pos[k]] = true;
        }
        // Return legs from the target slice back to each source value.
        std::vector<Arrival> back;
        for (std::size_t i : slice_idx) {
            const Branch src = all[i];
            const double from = target;
            const double to = active_value(base, hp);
            if (std::abs(from - to) < 1e-12) continue;
            const std::array<double, 2> hr{std::min(from, to), std::max(from, to)};
            for (std::size_t si : detail::grid_seed_indices(src, cfg.seed_spacing)) {
                const BranchSample& s = src.samples[si];
                if (s.params.lambda < cfg.lambda_range[0] ||
                    s.params.lambda > cfg.lambda_range[1])
                    continue;
                if (!fresh_seed(s.params, s.v)) continue;
                TraceConfig tc = cfg.trace;
                tc.direction = to > from ? 1 : -1;
                char buf[96];
                std::snprintf(buf, sizeof buf, "%s-return lambda=%.6g", tag,
                              s.params.lambda);
                try {
                    Branch leg = trace(model, s.params, s.v, hp, hr, tc, buf);
                    const BranchSample& last = leg.samples.back();
                    if (std::abs(active_value(last.params, hp) - to) <=
                        2.0 * cfg.trace.ds_max) {
                        Homotopy ha = last.params;
                        set_active(ha, hp, to);
                        const NewtonResult nr = newton(model.at(ha), last.v,
                                                       cfg.trace.corrector_tol);
                        if (nr.converged) back.push_back({ha, nr.v, false, 0.0});
                    }
                    all.push_back(std::move(leg));
                } catch (const std::exception& ex) {
                    note(std::string(buf) + ": " + ex.what());
                }
            }
        }
        for (const Arrival& a : back) {
            if (static_cast<int>(lam_idx.size()) >= cfg.max_branches) break;
            bool known = false;
            for (std::size_t i : lam_idx) {
                const Branch& b = all[i];
                if (b.samples.empty()) continue;
                if (std::abs(b.samples[0].params.mu - a.params.mu) > 1e-9 ||
                    std::abs(b.samples[0].params.eps - a.params.eps) > 1e-9)
                    continue;
                if (branch_contains(model, b, a.params, a.v, 10.0 * cfg.dedupe_tol))
                    known = true;
                if (known) break;
            }
            if (known) continue;
            char buf[96];
            std::snprintf(buf, sizeof buf, "recovered-%s", tag);
            auto tb = trace_both(a.params, a.v, cfg.lambda_range, buf);
            if (tb) push_lambda_branch(std::move(*tb), false);
        }
    };

    homotopy_round(ActiveParam::Mu, cfg.mu_target, "mu");
    if (model.input().norm() > 0.0)
        homotopy_round(ActiveParam::Eps, cfg.eps_target, "eps");
    else if (cfg.eps_target != 0.0)
        note("eps round skipped: model input is zero");

    // Component flagging per (mu, eps) slice: root = the trivial branch in
    // the base slice or the slice branch marked as carrying the deformed
    // trivial solution; closure by sample proximity in the product metric.
    {
        std::vector<std::string> keys(lam_idx.size());
        for (std::size_t q = 0; q < lam_idx.size(); ++q) {
            const Branch& b = all[lam_idx[q]];
            keys[q] = b.samples.empty() ? std::string("?")
                                        : detail::slice_key(b.samples[0].params);
        }
        auto close_pair = [&](const Branch& x, const Branch& y) {
            const std::size_t nx = x.samples.size(), ny = y.samples.size();
            const std::size_t sx = std::max<std::size_t>(1, nx / 64);
            const std::size_t sy = std::max<std::size_t>(1, ny / 64);
            for (std::size_t i = 0; i < nx; i += sx)
                for (std::size_t j = 0; j < ny; j += sy) {
                    const BranchSample& p = x.samples[i];
                    const BranchSample& r = y.samples[j];
                    const double d = (p.v - r.v).norm() +
                                     std::abs(p.params.lambda - r.params.lambda);
                    if (d < ctol) return true;
                }
            return false;
        };
        std::vector<bool> rooted(lam_idx.size(), false);
        for (std::size_t q = 0; q < lam_idx.size(); ++q)
            rooted[q] = trivial_side[q];
        bool grew = true;
        while (grew) {
            grew = false;
            for (std::size_t q = 0; q < lam_idx.size(); ++q) {
                if (rooted[q]) continue;
                for (std::size_t r = 0; r < lam_idx.size(); ++r) {
                    if (!rooted[r] || keys[q] != keys[r]) continue;
                    if (close_pair(all[lam_idx[q]], all[lam_idx[r]])) {
                        rooted[q] = true;
                        grew = true;
                        break;
                    }
                }
            }
        }
        for (std::size_t q = 0; q < lam_idx.size(); ++q)
            all[lam_idx[q]].disconnected = !rooted[q];
    }
    return out;
}

} // namespace nfcont
