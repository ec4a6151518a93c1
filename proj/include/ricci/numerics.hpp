#pragma once

/// Shared numerical kernels: finite-difference weights on arbitrary grids,
/// symmetry-aware derivatives for pole-anchored profiles, adaptive and fixed
/// quadrature, monotone cubic interpolation, small least-squares fits, and
/// root bracketing.  Everything here is deterministic and allocation-light;
/// the physics layers above treat these as trusted primitives.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "ricci/errors.hpp"

namespace ricci {

using Vec = std::vector<double>;

// ---------------------------------------------------------------------------
// Finite differences (Fornberg weight generation)
// ---------------------------------------------------------------------------

/// Weights for the m-th derivative at evaluation point z from samples at
/// grid[0..nw).  Classic recursive algorithm; exact for polynomials of degree
/// nw-1, so a 5-point stencil gives 4th-order first derivatives on smooth
/// grids.
inline void fdWeights(double z, const double* grid, int nw, int m, double* w) {
    // c[j][k] = weight of sample j for the k-th derivative.
    constexpr int MAXW = 8, MAXM = 4;
    double c[MAXW][MAXM + 1] = {};
    double c1 = 1.0;
    double c4 = grid[0] - z;
    c[0][0] = 1.0;
    for (int i = 1; i < nw; ++i) {
        const int mn = std::min(i, m);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = grid[i] - z;
        for (int j = 0; j < i; ++j) {
            const double c3 = grid[i] - grid[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k)
                c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    for (int j = 0; j < nw; ++j) w[j] = c[j][m];
}

/// First derivative of f sampled on a strictly increasing grid.  5-point
/// stencils: centered in the interior, one-sided (still 5-point, so at least
/// 2nd order as required at boundaries) at the first/last two nodes.
inline Vec deriv1(const Vec& x, const Vec& f) {
    const int n = static_cast<int>(x.size());
    Vec out(n);
    if (n < 5) throw OutOfRange("deriv1: need at least 5 grid points");
    double w[5];
    for (int i = 0; i < n; ++i) {
        int lo = std::clamp(i - 2, 0, n - 5);
        fdWeights(x[i], &x[lo], 5, 1, w);
        double acc = 0.0;
        for (int j = 0; j < 5; ++j) acc += w[j] * f[lo + j];
        out[i] = acc;
    }
    return out;
}

/// Parity of a profile quantity about the poles (grid endpoints).
enum class Parity { Even, Odd };

/// First derivative of f on [x0..xN] where f extends across both endpoints
/// with the given parity (ghost points x -> 2*x_end - x, f -> +/- f).  All
/// nodes, endpoints included, then see a full centered 5-point stencil, which
/// preserves discrete parity exactly: the derivative of an Odd array is Even
/// and vice versa.
inline Vec derivSym(const Vec& x, const Vec& f, Parity parity, int order) {
    const int n = static_cast<int>(x.size());
    if (n < 5) throw OutOfRange("derivSym: need at least 5 grid points");
    if (order < 1 || order > 2) throw OutOfRange("derivSym: order must be 1 or 2");
    const double sign = (parity == Parity::Odd) ? -1.0 : 1.0;
    // Ghost-extended values: two ghosts per side.
    Vec gf(n + 4);
    for (int i = 0; i < n; ++i) gf[i + 2] = f[i];
    gf[1] = sign * f[1];
    gf[0] = sign * f[2];
    gf[n + 2] = sign * f[n - 2];
    gf[n + 3] = sign * f[n - 3];
    Vec out(n);

    // Uniform grids (the common case: the flow gauge keeps its grid uniform)
    // take the closed-form centered weights instead of per-node Fornberg
    // solves; every node is centered thanks to the ghost extension.
    const double h = x[1] - x[0];
    bool uniform = h > 0.0;
    for (int i = 2; i < n && uniform; ++i)
        uniform = std::abs((x[i] - x[i - 1]) - h) <= 1e-12 * h;
    if (uniform) {
        if (order == 1) {
            const double c = 1.0 / (12.0 * h);
            for (int i = 0; i < n; ++i)
                out[i] = c * (gf[i] - 8.0 * gf[i + 1] + 8.0 * gf[i + 3] -
                              gf[i + 4]);
        } else {
            const double c = 1.0 / (12.0 * h * h);
            for (int i = 0; i < n; ++i)
                out[i] = c * (-gf[i] + 16.0 * gf[i + 1] - 30.0 * gf[i + 2] +
                              16.0 * gf[i + 3] - gf[i + 4]);
        }
        return out;
    }

    Vec gx(n + 4);
    for (int i = 0; i < n; ++i) gx[i + 2] = x[i];
    gx[1] = 2.0 * x[0] - x[1];
    gx[0] = 2.0 * x[0] - x[2];
    gx[n + 2] = 2.0 * x[n - 1] - x[n - 2];
    gx[n + 3] = 2.0 * x[n - 1] - x[n - 3];
    double w[5];
    for (int i = 0; i < n; ++i) {
        const int lo = i; // ghost offset: stencil [i, i+4] centered at i+2
        fdWeights(x[i], &gx[lo], 5, order, w);
        double acc = 0.0;
        for (int j = 0; j < 5; ++j) acc += w[j] * gf[lo + j];
        out[i] = acc;
    }
    return out;
}

inline Vec deriv1Sym(const Vec& x, const Vec& f, Parity parity) {
    return derivSym(x, f, parity, 1);
}

/// Direct 5-point second derivative with parity ghosts.  For time stepping
/// this matters: composing two first-derivative stencils leaves the Nyquist
/// sawtooth undamped (central first-difference operators annihilate it),
/// whereas the direct stencil damps it at the full diffusive rate.
inline Vec deriv2Sym(const Vec& x, const Vec& f, Parity parity) {
    return derivSym(x, f, parity, 2);
}

/// Even-symmetric extrapolation of an interior sequence to the pole at s = 0:
/// given samples v1 = v(s1), v2 = v(s2) of a function even about the pole,
/// returns the O(s^4)-accurate limit v(0) = (v1*s2^2 - v2*s1^2)/(s2^2 - s1^2).
inline double evenLimitAtPole(double s1, double v1, double s2, double v2) {
    const double d = s2 * s2 - s1 * s1;
    if (d == 0.0) return 0.5 * (v1 + v2);
    return (v1 * s2 * s2 - v2 * s1 * s1) / d;
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Cumulative trapezoid of f against grid x; out[0] = 0.
inline Vec cumTrapezoid(const Vec& x, const Vec& f) {
    Vec out(x.size(), 0.0);
    for (size_t i = 1; i < x.size(); ++i)
        out[i] = out[i - 1] + 0.5 * (f[i] + f[i - 1]) * (x[i] - x[i - 1]);
    return out;
}

inline double trapezoid(const Vec& x, const Vec& f) {
    double acc = 0.0;
    for (size_t i = 1; i < x.size(); ++i)
        acc += 0.5 * (f[i] + f[i - 1]) * (x[i] - x[i - 1]);
    return acc;
}

namespace detail {
inline double adaptiveSimpsonRec(const std::function<double(double)>& f,
                                 double a, double b, double fa, double fm, double fb,
                                 double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0) throw NotConverged("adaptiveSimpson: max recursion depth");
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptiveSimpsonRec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptiveSimpsonRec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
} // namespace detail

/// Adaptive Simpson quadrature with absolute tolerance tol.
inline double adaptiveSimpson(const std::function<double(double)>& f,
                              double a, double b, double tol = 1e-10,
                              int maxDepth = 48) {
    if (a == b) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::adaptiveSimpsonRec(f, a, b, fa, fm, fb, whole, tol, maxDepth);
}

/// Composite fixed-order Gauss-Legendre quadrature (12-point rule per panel).
/// Used as the second, structurally independent scheme when an integral must
/// be certified by two methods.
inline double gaussLegendre(const std::function<double(double)>& f,
                            double a, double b, int panels = 64) {
    // 12-point nodes/weights on [-1, 1].
    static const std::array<double, 6> xi = {
        0.1252334085114689, 0.3678314989981802, 0.5873179542866175,
        0.7699026741943047, 0.9041172563704749, 0.9815606342467192};
    static const std::array<double, 6> wi = {
        0.2491470458134028, 0.2334925365383548, 0.2031674267230659,
        0.1600783285433462, 0.1069393259953184, 0.0471753363865118};
    double acc = 0.0;
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double c = a + (p + 0.5) * h, r = 0.5 * h;
        for (int k = 0; k < 6; ++k)
            acc += wi[k] * r * (f(c + r * xi[k]) + f(c - r * xi[k]));
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Interpolation
// ---------------------------------------------------------------------------

/// Piecewise linear interpolation with constant extrapolation.
inline double interpLinear(const Vec& x, const Vec& y, double xq) {
    if (xq <= x.front()) return y.front();
    if (xq >= x.back()) return y.back();
    const auto it = std::upper_bound(x.begin(), x.end(), xq);
    const size_t i = static_cast<size_t>(it - x.begin());
    const double t = (xq - x[i - 1]) / (x[i] - x[i - 1]);
    return (1.0 - t) * y[i - 1] + t * y[i];
}

/// Monotone cubic Hermite interpolant (Fritsch-Carlson slope limiting).
/// Preserves monotone runs of the data, so re-meshed warp factors cannot
/// overshoot below zero near a thin neck.
class MonotoneCubic {
public:
    MonotoneCubic() = default;
    MonotoneCubic(const Vec& x, const Vec& y) : x_(x), y_(y) {
        const size_t n = x.size();
        if (n < 2 || y.size() != n)
            throw OutOfRange("MonotoneCubic: need matching arrays, size >= 2");
        Vec d(n - 1);
        for (size_t i = 0; i + 1 < n; ++i) {
            const double h = x[i + 1] - x[i];
            if (h <= 0.0) throw OutOfRange("MonotoneCubic: grid not increasing");
            d[i] = (y[i + 1] - y[i]) / h;
        }
        m_.assign(n, 0.0);
        m_[0] = d[0];
        m_[n - 1] = d[n - 2];
        for (size_t i = 1; i + 1 < n; ++i) {
            if (d[i - 1] * d[i] <= 0.0) {
                m_[i] = 0.0;
            } else {
                const double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
                // Weighted harmonic mean keeps the interpolant monotone.
                const double w1 = 2.0 * h1 + h0, w2 = h1 + 2.0 * h0;
                m_[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        // Endpoint limiting (three-point estimate would be sharper; the flat
        // one-sided slope is safe and our profiles pin endpoint values anyway).
        for (size_t i : {size_t{0}, n - 1}) {
            const double di = (i == 0) ? d[0] : d[n - 2];
            if (di == 0.0) m_[i] = 0.0;
            else if (m_[i] / di > 3.0) m_[i] = 3.0 * di;
        }
    }

    double operator()(double xq) const {
        if (xq <= x_.front()) return y_.front();
        if (xq >= x_.back()) return y_.back();
        const auto it = std::upper_bound(x_.begin(), x_.end(), xq);
        const size_t i = static_cast<size_t>(it - x_.begin()) - 1;
        const double h = x_[i + 1] - x_[i];
        const double t = (xq - x_[i]) / h;
        const double t2 = t * t, t3 = t2 * t;
        const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
        const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
        return h00 * y_[i] + h10 * h * m_[i] + h01 * y_[i + 1] + h11 * h * m_[i + 1];
    }

private:
    Vec x_, y_, m_;
};

// ---------------------------------------------------------------------------
// Small fits and root finding
// ---------------------------------------------------------------------------

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rmsResidual = 0.0; ///< RMS of residuals in the dependent variable.
};

/// Ordinary least squares for y = slope*x + intercept.
inline LineFit fitLine(const Vec& x, const Vec& y) {
    const size_t n = x.size();
    if (n < 2 || y.size() != n) throw OutOfRange("fitLine: need >= 2 samples");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        sx += x[i]; sy += y[i]; sxx += x[i] * x[i]; sxy += x[i] * y[i];
    }
    const double den = n * sxx - sx * sx;
    if (den == 0.0) throw NotConverged("fitLine: degenerate abscissae");
    LineFit fit;
    fit.slope = (n * sxy - sx * sy) / den;
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double r = y[i] - (fit.slope * x[i] + fit.intercept);
        ss += r * r;
    }
    fit.rmsResidual = std::sqrt(ss / n);
    return fit;
}

/// Monotone root bracketing + bisection/secant hybrid for f(x) = 0 on [a, b].
inline double solveBracketed(const std::function<double(double)>& f,
                             double a, double b, double tol = 1e-12,
                             int maxIter = 200) {
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if (fa * fb > 0.0) throw OutOfRange("solveBracketed: no sign change");
    for (int i = 0; i < maxIter; ++i) {
        // Secant proposal, clipped to the bracket; fall back to bisection.
        double m = (std::abs(fb - fa) > 0.0) ? b - fb * (b - a) / (fb - fa)
                                             : 0.5 * (a + b);
        if (!(m > std::min(a, b) && m < std::max(a, b))) m = 0.5 * (a + b);
        const double fm = f(m);
        if (std::abs(fm) == 0.0 || std::abs(b - a) < tol * (1.0 + std::abs(m)))
            return m;
        if (fa * fm < 0.0) { b = m; fb = fm; } else { a = m; fa = fm; }
    }
    throw NotConverged("solveBracketed: iteration limit");
}

// ---------------------------------------------------------------------------
// Sphere volume constants
// ---------------------------------------------------------------------------

/// Volume ("surface measure") of the unit round sphere S^k in R^{k+1}:
/// 2 pi^{(k+1)/2} / Gamma((k+1)/2).  sphereVolume(2) = 4 pi, sphereVolume(3)
/// = 2 pi^2.
inline double sphereVolume(int k) {
    if (k < 0) throw OutOfRange("sphereVolume: negative dimension");
    const double half = 0.5 * (k + 1);
    return 2.0 * std::pow(M_PI, half) / std::tgamma(half);
}

/// Volume of the unit ball in R^n: pi^{n/2} / Gamma(n/2 + 1).
inline double ballVolume(int n) {
    if (n < 0) throw OutOfRange("ballVolume: negative dimension");
    return std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

} // namespace ricci
