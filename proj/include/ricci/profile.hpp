#pragma once

/// Rotationally symmetric metrics on the n-sphere, reduced to a warp profile.
///
/// A closed cohomogeneity-one metric on S^n is written as
///
///     g = ds^2 + phi(s)^2 * g_round,
///
/// where s is arclength along a meridian from pole to pole and g_round is the
/// unit round metric on the S^{n-1} cross-section.  We sample everything on a
/// fixed computational grid x in [0, 1] and carry the coordinate-to-arclength
/// factor psi = ds/dx alongside the warp factor phi, so the pair (psi, phi)
/// on the grid determines the geometry completely.
///
/// Admissibility (smoothness at the poles) demands phi = 0 with d phi/ds = +1
/// at the left pole and -1 at the right pole, phi > 0 in the interior, and
/// psi > 0 everywhere.

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ricci/errors.hpp"
#include "ricci/numerics.hpp"

namespace ricci {

struct WarpProfile {
    int n = 3;  ///< manifold dimension (n >= 3)
    Vec x;      ///< strictly increasing grid on [0, 1]
    Vec psi;    ///< ds/dx > 0
    Vec phi;    ///< warp factor; 0 exactly at the poles, > 0 inside

    size_t size() const { return x.size(); }
};

/// Options for validateProfile.  The pole slope tolerance is generous by
/// default because long evolutions accumulate truncation-level drift.
struct ProfileTolerances {
    double poleSlope = 0.05;   ///< allowed |d phi/ds -+ 1| at the poles
    double endpointPhi = 0.0;  ///< phi at poles must equal 0 exactly
};

/// Arclength s(x_i) = integral of psi up to x_i (trapezoid rule); s[0] = 0.
inline Vec arclength(const WarpProfile& p) { return cumTrapezoid(p.x, p.psi); }

inline double totalLength(const WarpProfile& p) {
    return arclength(p).back();
}

/// d phi/ds on the grid, using the pole-parity ghost extension (phi is odd
/// about each pole).  The result is even about the poles.
inline Vec warpSlope(const WarpProfile& p) {
    Vec dphi = deriv1Sym(p.x, p.phi, Parity::Odd);
    for (size_t i = 0; i < dphi.size(); ++i) dphi[i] /= p.psi[i];
    return dphi;
}

/// Throws InvalidProfile with a descriptive message if p is not an admissible
/// closed rotationally symmetric profile.
inline void validateProfile(const WarpProfile& p,
                            const ProfileTolerances& tol = {}) {
    const size_t N = p.x.size();
    if (p.n < 3) throw InvalidProfile("dimension n must be >= 3");
    if (N < 9) throw InvalidProfile("grid must have at least 9 points");
    if (p.psi.size() != N || p.phi.size() != N)
        throw InvalidProfile("x/psi/phi arrays must have equal length");
    if (std::abs(p.x.front()) > 1e-12 || std::abs(p.x.back() - 1.0) > 1e-12)
        throw InvalidProfile("grid must span [0, 1]");
    for (size_t i = 1; i < N; ++i)
        if (!(p.x[i] > p.x[i - 1]))
            throw InvalidProfile("grid must be strictly increasing at index " +
                                 std::to_string(i));
    for (size_t i = 0; i < N; ++i) {
        if (!(p.psi[i] > 0.0) || !std::isfinite(p.psi[i]))
            throw InvalidProfile("psi must be positive at index " +
                                 std::to_string(i));
        if (!std::isfinite(p.phi[i]))
            throw InvalidProfile("phi must be finite at index " +
                                 std::to_string(i));
    }
    if (p.phi.front() != tol.endpointPhi || p.phi.back() != tol.endpointPhi)
        throw InvalidProfile("phi must vanish exactly at both poles");
    for (size_t i = 1; i + 1 < N; ++i)
        if (!(p.phi[i] > 0.0))
            throw InvalidProfile("phi must be positive in the interior; "
                                 "violated at index " + std::to_string(i));
    const Vec slope = warpSlope(p);
    if (std::abs(slope.front() - 1.0) > tol.poleSlope)
        throw InvalidProfile("left pole slope " + std::to_string(slope.front()) +
                             " deviates from +1 beyond tolerance");
    if (std::abs(slope.back() + 1.0) > tol.poleSlope)
        throw InvalidProfile("right pole slope " + std::to_string(slope.back()) +
                             " deviates from -1 beyond tolerance");
}

/// Integral over the manifold of a radial scalar sampled on the grid:
///   integral f dmu = vol(S^{n-1}) * integral_0^1 f phi^{n-1} psi dx
/// by the trapezoid rule on the stored grid.
inline double integrateScalar(const WarpProfile& p, const Vec& f) {
    if (f.size() != p.size())
        throw OutOfRange("integrateScalar: sample count mismatch");
    const double omega = sphereVolume(p.n - 1);
    Vec g(p.size());
    for (size_t i = 0; i < p.size(); ++i)
        g[i] = f[i] * std::pow(p.phi[i], p.n - 1) * p.psi[i];
    return omega * trapezoid(p.x, g);
}

/// Total Riemannian volume.
inline double volume(const WarpProfile& p) {
    return integrateScalar(p, Vec(p.size(), 1.0));
}

/// Metric scaling g -> c^2 g, i.e. (psi, phi) -> (c psi, c phi).  Curvatures
/// scale by 1/c^2 and volume by c^n.
inline WarpProfile scaledProfile(const WarpProfile& p, double c) {
    if (!(c > 0.0)) throw OutOfRange("scaledProfile: factor must be positive");
    WarpProfile q = p;
    for (auto& v : q.psi) v *= c;
    for (auto& v : q.phi) v *= c;
    return q;
}

} // namespace ricci
