#pragma once
// Gauss-Legendre quadrature on an interval or a 2-D box, with a measure
// normalization constant. Every inner product in the reduction pipeline
// bottoms out here.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace nfcont {

/// Nodes and weights for integrating over Omega with measure c * dx.
/// Weights already include the normalization, so sum(w) = c * |Omega|.
struct QuadratureGrid {
    int dim = 1;                 // 1 or 2
    int n_per_axis = 0;
    std::vector<double> px, py;  // node coordinates; py all zero when dim == 1
    std::vector<double> w;       // normalized weights, one per node
    std::array<double, 2> xbounds{0.0, 0.0};
    std::array<double, 2> ybounds{0.0, 0.0};
    double normalization = 1.0;

    std::size_t size() const { return w.size(); }

    double volume() const {
        double v = xbounds[1] - xbounds[0];
        if (dim == 2) v *= ybounds[1] - ybounds[0];
        return v;
    }
};

namespace detail {

/// Gauss-Legendre rule on [-1,1]: Newton iteration on P_n from the
/// three-term recurrence; accurate to machine precision for moderate n.
inline void gauss_legendre_reference(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int k = 0; k < (n + 1) / 2; ++k) {
        double t = std::cos(std::numbers::pi * (k + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = t;
            for (int j = 2; j <= n; ++j) {
                const double p2 = ((2.0 * j - 1.0) * t * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (t * p1 - p0) / (t * t - 1.0);
            const double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-15) break;
        }
        x[k] = -t;
        x[n - 1 - k] = t;
        w[k] = w[n - 1 - k] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
}

}  // namespace detail

/// Build a d-dimensional rule; the same per-axis node count is tensorized
/// when d == 2 (index = ix * n + iy). Exact for per-axis polynomial degree
/// <= 2n-1.
inline QuadratureGrid build_grid(int dim, int n, std::array<double, 2> xb,
                                 std::array<double, 2> yb = {0.0, 0.0},
                                 double normalization = 1.0) {
    if (dim != 1 && dim != 2) throw std::invalid_argument("build_grid: dim must be 1 or 2");
    if (n < 2) throw std::invalid_argument("build_grid: need at least 2 nodes per axis");
    if (xb[1] <= xb[0] || (dim == 2 && yb[1] <= yb[0]))
        throw std::invalid_argument("build_grid: empty axis interval");

    std::vector<double> xr, wr;
    detail::gauss_legendre_reference(n, xr, wr);

    QuadratureGrid g;
    g.dim = dim;
    g.n_per_axis = n;
    g.xbounds = xb;
    g.ybounds = yb;
    g.normalization = normalization;

    const double xm = 0.5 * (xb[0] + xb[1]), xh = 0.5 * (xb[1] - xb[0]);
    if (dim == 1) {
        g.px.resize(n);
        g.py.assign(n, 0.0);
        g.w.resize(n);
        for (int i = 0; i < n; ++i) {
            g.px[i] = xm + xh * xr[i];
            g.w[i] = normalization * xh * wr[i];
        }
    } else {
        const double ym = 0.5 * (yb[0] + yb[1]), yh = 0.5 * (yb[1] - yb[0]);
        g.px.resize(static_cast<std::size_t>(n) * n);
        g.py.resize(g.px.size());
        g.w.resize(g.px.size());
        for (int ix = 0; ix < n; ++ix)
            for (int iy = 0; iy < n; ++iy) {
                const std::size_t id = static_cast<std::size_t>(ix) * n + iy;
                g.px[id] = xm + xh * xr[ix];
                g.py[id] = ym + yh * xr[iy];
                g.w[id] = normalization * xh * yh * wr[ix] * wr[iy];
            }
    }
    return g;
}

/// Inner product of two node-sampled scalar functions.
inline double inner(const std::vector<double>& f, const std::vector<double>& g,
                    const QuadratureGrid& grid) {
    if (f.size() != grid.size() || g.size() != grid.size())
        throw std::invalid_argument("inner: sample length does not match grid");
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) acc += grid.w[i] * f[i] * g[i];
    return acc;
}

/// Weighted sum of one sampled function (inner product against 1).
inline double integrate(const std::vector<double>& f, const QuadratureGrid& grid) {
    if (f.size() != grid.size())
        throw std::invalid_argument("integrate: sample length does not match grid");
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) acc += grid.w[i] * f[i];
    return acc;
}

}  // namespace nfcont
