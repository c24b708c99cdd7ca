#pragma once
// Newton solving, quasi-random multi-start enumeration over the confinement
// ball, deduplication, stability indices, and the degree-parity audit.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <thread>
#include <vector>

#include "nfcont/model.hpp"

namespace nfcont {

struct NewtonResult {
    Eigen::VectorXd v;
    bool converged = false;
    int iterations = 0;
    double residual_norm = 0.0;
};

/// One deduplicated stationary solution with its linear stability data.
struct Equilibrium {
    Eigen::VectorXd v;
    int n_unstable = 0;    // dynamics-Jacobian eigenvalues with positive real part
    bool marginal = false; // an eigenvalue real part within 1e-8 of zero
};

struct SolutionSet {
    std::vector<Equilibrium> solutions;
    double dedupe_tol = 1e-6;
    int starts = 0;
    int unconverged = 0;
};

struct ParityReport {
    std::vector<int> signs;  // det sign per audited solution
    int sum = 0;
    int excluded = 0;   // near-singular solutions left out
    bool conclusive = false;
    bool pass = false;  // conclusive and sum == +1
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& s) {
    s += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::vector<int> first_primes(int count) {
    std::vector<int> primes;
    for (int c = 2; static_cast<int>(primes.size()) < count; ++c) {
        bool ok = true;
        for (int p : primes) {
            if (p * p > c) break;
            if (c % p == 0) { ok = false; break; }
        }
        if (ok) primes.push_back(c);
    }
    return primes;
}

/// Halton radical inverse in the given base with a seeded digit permutation;
/// the permutation fixes 0 so the sequence stays in (0,1).
class ScrambledHalton {
public:
    ScrambledHalton(int dims, std::uint64_t seed) : primes_(first_primes(dims)) {
        perms_.resize(dims);
        for (int d = 0; d < dims; ++d) {
            const int b = primes_[d];
            std::vector<int> perm(b);
            for (int i = 0; i < b; ++i) perm[i] = i;
            std::uint64_t state = seed * 0x5851f42d4c957f2dULL + d + 1;
            for (int i = b - 1; i >= 2; --i) {
                const int j = 1 + static_cast<int>(splitmix64(state) % i);
                std::swap(perm[i], perm[j]);
            }
            perms_[d] = std::move(perm);
        }
    }

    double value(std::uint64_t index, int dim) const {
        const int b = primes_[dim];
        const auto& perm = perms_[dim];
        double f = 1.0, r = 0.0;
        std::uint64_t i = index + 1;  // skip the all-zero point
        while (i > 0) {
            f /= b;
            r += f * perm[i % b];
            i /= b;
        }
        return r;
    }

private:
    std::vector<int> primes_;
    std::vector<std::vector<int>> perms_;
};

inline bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) return true;
        if (a[i] > b[i]) return false;
    }
    return false;
}

// Lexicographic order that ignores sub-resolution coordinate noise, so the
// reported ordering of well-separated solutions is stable across seeds.
inline bool snapped_lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                             double snap) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a[i] < b[i] - snap) return true;
        if (a[i] > b[i] + snap) return false;
    }
    return false;
}

inline bool bit_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a.array() == b.array()).all();
}

/// Iterate full Newton steps from an already-converged point until the
/// double-precision state reaches a fixed point or a short cycle; pick the
/// lexicographic minimum of the cycle. This makes the reported coordinates
/// independent of the path that found the solution.
inline Eigen::VectorXd polish(const FieldModel& m, Eigen::VectorXd v) {
    Eigen::VectorXd prev2, prev1 = v;
    for (int it = 0; it < 8; ++it) {
        const Eigen::VectorXd r = m.residual(prev1);
        const Eigen::VectorXd step =
            m.jacobian(prev1).colPivHouseholderQr().solve(r);
        if (!step.allFinite() || step.cwiseAbs().maxCoeff() > 1e-6) return prev1;
        Eigen::VectorXd next = prev1 - step;
        if (bit_equal(next, prev1)) return next;
        if (it > 0 && bit_equal(next, prev2))
            return lex_less(next, prev1) ? next : prev1;
        prev2 = prev1;
        prev1 = next;
    }
    return prev1;
}

}  // namespace detail

/// Damped Newton on the reduced residual; quadratic near regular solutions.
inline NewtonResult newton(const FieldModel& m, const Eigen::VectorXd& v0,
                           double tol = 1e-10, int max_iter = 50) {
    if (!(tol > 0.0)) throw std::invalid_argument("newton: tol must be positive");
    NewtonResult out;
    out.v = v0;
    if (!v0.allFinite() || v0.size() != m.dim()) return out;

    Eigen::VectorXd r = m.residual(out.v);
    double rn = r.cwiseAbs().maxCoeff();
    for (out.iterations = 0; out.iterations < max_iter; ++out.iterations) {
        if (rn < tol) {
            out.converged = true;
            out.residual_norm = rn;
            return out;
        }
        const Eigen::VectorXd step =
            m.jacobian(out.v).colPivHouseholderQr().solve(r);
        if (!step.allFinite()) break;

        // backtracking: accept the first damped step that reduces the residual
        double t = 1.0;
        bool accepted = false;
        for (int half = 0; half < 10; ++half, t *= 0.5) {
            const Eigen::VectorXd trial = out.v - t * step;
            if (!trial.allFinite()) continue;
            Eigen::VectorXd rt;
            try {
                rt = m.residual(trial);
            } catch (const std::exception&) {
                continue;
            }
            const double rtn = rt.cwiseAbs().maxCoeff();
            if (rtn < rn) {
                out.v = trial;
                r = std::move(rt);
                rn = rtn;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;  // no damping progress
    }
    out.converged = rn < tol;
    out.residual_norm = rn;
    return out;
}

/// Stability data from the dynamics linearization -Id + lambda J DS, which in
/// reduced coordinates is minus the residual Jacobian.
inline Equilibrium classify_equilibrium(const FieldModel& m,
                                        const Eigen::VectorXd& v,
                                        double margin = 1e-8) {
    Equilibrium e;
    e.v = v;
    // dynamics Jacobian: row k of the residual Jacobian scaled by -1/tau_k
    const Eigen::VectorXd tau = m.coordinate_decay();
    const Eigen::MatrixXd A =
        (-tau.cwiseInverse()).asDiagonal() * m.jacobian(v);
    Eigen::EigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("classify_equilibrium: eigensolver failed");
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        const double re = es.eigenvalues()[i].real();
        if (re > margin) ++e.n_unstable;
        if (std::abs(re) <= margin) e.marginal = true;
    }
    return e;
}

/// Multi-start enumeration: Newton from quasi-random seeds inside the ball
/// ||V - V_triv|| <= B2 that confines every solution, plus the ball center.
/// Results are merged in start order and deduplicated, so the output depends
/// only on the seed, not on thread scheduling.
inline SolutionSet enumerate_solutions(const FieldModel& m, int n_starts = 0,
                                       std::uint64_t seed = 0, int threads = 1,
                                       double tol = 1e-10,
                                       double dedupe_tol = 1e-6) {
    const int n = m.dim();
    if (n_starts <= 0) n_starts = 512 * n;
    if (threads < 1) threads = 1;

    const Eigen::VectorXd center = m.trivial_coords();
    const double radius = m.bounds().B2;
    const detail::ScrambledHalton seq(n + 1, seed);

    std::vector<Eigen::VectorXd> found(static_cast<std::size_t>(n_starts) + 1);
    std::vector<char> ok(static_cast<std::size_t>(n_starts) + 1, 0);

    auto run_start = [&](int idx) {
        Eigen::VectorXd v0;
        if (idx == 0) {
            v0 = center;
        } else {
            const std::uint64_t q = static_cast<std::uint64_t>(idx) - 1;
            Eigen::VectorXd z(n);
            for (int d = 0; d < n; ++d) z[d] = 2.0 * seq.value(q, d + 1) - 1.0;
            const double den = m.kernel().field_norm(m.kernel().reconstruct(z));
            if (den < 1e-14) return;
            const double frac =
                std::pow(seq.value(q, 0), 1.0 / static_cast<double>(n));
            v0 = center + z * (radius * frac / den);
        }
        const NewtonResult r = newton(m, v0, tol);
        if (r.converged) {
            found[idx] = r.v;
            ok[idx] = 1;
        }
    };

    if (threads == 1) {
        for (int i = 0; i <= n_starts; ++i) run_start(i);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (int i = next.fetch_add(1); i <= n_starts;
                     i = next.fetch_add(1))
                    run_start(i);
            });
        for (auto& t : pool) t.join();
    }

    SolutionSet set;
    set.dedupe_tol = dedupe_tol;
    set.starts = n_starts;
    std::vector<Eigen::VectorXd> reps;
    for (int i = 0; i <= n_starts; ++i) {
        if (!ok[i]) {
            if (i > 0) ++set.unconverged;
            continue;
        }
        bool dup = false;
        for (const auto& r : reps)
            if ((found[i] - r).cwiseAbs().maxCoeff() < dedupe_tol) {
                dup = true;
                break;
            }
        if (!dup) reps.push_back(found[i]);
    }

    for (auto& r : reps) r = detail::polish(m, r);
    const double snap = std::min(1e-7, 0.1 * dedupe_tol);
    std::sort(reps.begin(), reps.end(),
              [snap](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
                  return detail::snapped_lex_less(a, b, snap);
              });
    for (const auto& r : reps) set.solutions.push_back(classify_equilibrium(m, r));
    return set;
}

/// Leray-Schauder style degree audit: the determinant signs of the residual
/// Jacobian over a complete regular solution set must sum to +1.
inline ParityReport parity_audit(const SolutionSet& set, const FieldModel& m,
                                 double singular_tol = 1e-8) {
    ParityReport rep;
    for (const auto& s : set.solutions) {
        const Eigen::MatrixXd J = m.jacobian(s.v);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
        const double det = lu.determinant();
        if (!std::isfinite(det) || std::abs(det) < singular_tol) {
            ++rep.excluded;
            continue;
        }
        rep.signs.push_back(det > 0.0 ? 1 : -1);
        rep.sum += rep.signs.back();
    }
    rep.conclusive = rep.excluded == 0;
    rep.pass = rep.conclusive && rep.sum == 1;
    return rep;
}

}  // namespace nfcont
