#pragma once

/// Curvature of warped-product metrics g = ds^2 + phi(s)^2 g_round on S^n.
///
/// Two independent evaluation paths are provided:
///
///  * curvature()        - the production path, using the closed-form
///                         expressions for the two distinct sectional
///                         curvatures in terms of arclength derivatives of
///                         phi, with parity-aware stencils at the poles;
///  * oracleCurvatureFD() - a deliberately different discretization that
///                         differentiates the metric coefficients g11 = psi^2
///                         and g22 = phi^2 with generic (symmetry-blind)
///                         stencils, assembles coordinate Christoffel symbols
///                         of the reduced 2d metric, and extracts the same
///                         curvatures via the Riemann tensor and the Gauss
///                         equation for the cross-section spheres.
///
/// Both paths converge at 4th order for smooth profiles, so pointwise
/// agreement far beyond either one's truncation error would indicate a shared
/// bug; the test suite pins agreement near the analytic value instead.
///
/// Conventions (K = sectional curvature):
///   kRad = -phi''/phi                 planes containing the meridian
///   kSph = (1 - phi'^2)/phi^2         planes tangent to the cross-section
///   Ricci eigenvalues: lamRad = (n-1) kRad (meridian direction),
///                      lamSph = kRad + (n-2) kSph (cross-section directions)
///   scalar = 2(n-1) kRad + (n-1)(n-2) kSph
///   |Ric|^2 = lamRad^2 + (n-1) lamSph^2
///   |Rm|^2  = 4(n-1) kRad^2 + 2(n-1)(n-2) kSph^2
/// At the poles both sectional curvatures coincide (umbilic limit); kRad is
/// evaluated there by the one-sided limit -phi'''/phi' and kSph := kRad.

#include <algorithm>
#include <cmath>
#include <vector>

#include "ricci/errors.hpp"
#include "ricci/numerics.hpp"
#include "ricci/profile.hpp"

namespace ricci {

struct CurvatureField {
    Vec s;         ///< arclength at the grid nodes
    Vec kRad;      ///< radial (meridian) sectional curvature
    Vec kSph;      ///< cross-section sectional curvature
    Vec lamRad;    ///< Ricci eigenvalue, meridian direction
    Vec lamSph;    ///< Ricci eigenvalue, cross-section directions
    Vec scalar;    ///< scalar curvature
    Vec normRic;   ///< |Ric| pointwise
    Vec normRm;    ///< |Rm| pointwise
    Vec lambdaNeg; ///< max(0, -smallest Ricci eigenvalue)

    double supRm = 0.0;   ///< max of normRm
    double supRic = 0.0;  ///< max of normRic
    int argmaxRm = 0;     ///< node index of the normRm maximum
    double argmaxS = 0.0; ///< arclength of that node
};

namespace detail {

/// Assemble eigenvalues, scalar curvature, tensor norms, and maxima from the
/// two sectional curvatures.  Shared by both evaluation paths (this is the
/// algebraic structure of the warped product, not a discretization choice).
inline CurvatureField assembleCurvature(const WarpProfile& p, Vec s,
                                        Vec kRad, Vec kSph) {
    const int n = p.n;
    const size_t N = p.size();
    CurvatureField f;
    f.s = std::move(s);
    f.kRad = std::move(kRad);
    f.kSph = std::move(kSph);
    f.lamRad.resize(N);
    f.lamSph.resize(N);
    f.scalar.resize(N);
    f.normRic.resize(N);
    f.normRm.resize(N);
    f.lambdaNeg.resize(N);
    for (size_t i = 0; i < N; ++i) {
        const double kr = f.kRad[i], ks = f.kSph[i];
        f.lamRad[i] = (n - 1) * kr;
        f.lamSph[i] = kr + (n - 2) * ks;
        f.scalar[i] = 2.0 * (n - 1) * kr + double(n - 1) * (n - 2) * ks;
        f.normRic[i] = std::sqrt(f.lamRad[i] * f.lamRad[i] +
                                 (n - 1) * f.lamSph[i] * f.lamSph[i]);
        f.normRm[i] = std::sqrt(4.0 * (n - 1) * kr * kr +
                                2.0 * (n - 1) * (n - 2) * ks * ks);
        f.lambdaNeg[i] = std::max(0.0, -std::min(f.lamRad[i], f.lamSph[i]));
        if (f.normRm[i] > f.supRm) {
            f.supRm = f.normRm[i];
            f.argmaxRm = static_cast<int>(i);
        }
        f.supRic = std::max(f.supRic, f.normRic[i]);
    }
    f.argmaxS = f.s[f.argmaxRm];
    return f;
}

} // namespace detail

/// Production curvature evaluation (see file comment for conventions).
inline CurvatureField curvature(const WarpProfile& p) {
    const size_t N = p.size();
    if (N < 9) throw InvalidProfile("curvature: grid must have >= 9 points");
    Vec s = arclength(p);

    // Arclength derivatives with pole-parity ghosts: phi odd, phi' even,
    // phi'' odd again.
    Vec phi_s = deriv1Sym(p.x, p.phi, Parity::Odd);
    for (size_t i = 0; i < N; ++i) phi_s[i] /= p.psi[i];
    Vec phi_ss = deriv1Sym(p.x, phi_s, Parity::Even);
    for (size_t i = 0; i < N; ++i) phi_ss[i] /= p.psi[i];

    Vec kRad(N), kSph(N);
    for (size_t i = 1; i + 1 < N; ++i) {
        if (!(p.phi[i] > 0.0))
            throw InvalidProfile("curvature: interior phi not positive");
        kRad[i] = -phi_ss[i] / p.phi[i];
        kSph[i] = (1.0 - phi_s[i] * phi_s[i]) / (p.phi[i] * p.phi[i]);
    }

    // Poles: kRad = -phi'''/phi' (one-sided limit via parity stencils; phi''
    // is odd about each pole so its ghost extension is exact), kSph := kRad.
    Vec phi_sss = deriv1Sym(p.x, phi_ss, Parity::Odd);
    for (size_t i = 0; i < N; ++i) phi_sss[i] /= p.psi[i];
    kRad.front() = -phi_sss.front() / phi_s.front();
    kRad.back() = -phi_sss.back() / phi_s.back();
    kSph.front() = kRad.front();
    kSph.back() = kRad.back();

    return detail::assembleCurvature(p, std::move(s), std::move(kRad),
                                     std::move(kSph));
}

/// Independent finite-difference oracle (see file comment).  Interior nodes
/// only see generic stencils of the metric coefficients; pole values are
/// filled by even extrapolation of the interior curvature towards s = 0 / L,
/// which is the discrete form of the same umbilic limit.
inline CurvatureField oracleCurvatureFD(const WarpProfile& p) {
    const size_t N = p.size();
    if (N < 9) throw InvalidProfile("oracleCurvatureFD: grid too small");
    Vec s = arclength(p);
    const double L = s.back();

    Vec g11(N), g22(N);
    for (size_t i = 0; i < N; ++i) {
        g11[i] = p.psi[i] * p.psi[i];
        g22[i] = p.phi[i] * p.phi[i];
    }
    const Vec dg11 = deriv1(p.x, g11);
    const Vec dg22 = deriv1(p.x, g22);

    // Christoffel symbols of the reduced 2d metric g11 dx^2 + g22 dtheta^2:
    //   G^x_xx = g11'/(2 g11), G^x_tt = -g22'/(2 g11), G^t_xt = g22'/(2 g22).
    Vec gammaXtt(N);
    for (size_t i = 0; i < N; ++i) gammaXtt[i] = -dg22[i] / (2.0 * g11[i]);
    const Vec dGammaXtt = deriv1(p.x, gammaXtt);

    Vec kRad(N, 0.0), kSph(N, 0.0);
    for (size_t i = 1; i + 1 < N; ++i) {
        const double gammaXxx = dg11[i] / (2.0 * g11[i]);
        const double gammaTxt = dg22[i] / (2.0 * g22[i]);
        // R^x_txt = d_x G^x_tt + G^x_xx G^x_tt - G^x_tt G^t_xt, and the
        // radial sectional curvature is R^x_txt / g22.
        const double riem = dGammaXtt[i] + gammaXxx * gammaXtt[i] -
                            gammaXtt[i] * gammaTxt;
        kRad[i] = riem / g22[i];
        // Gauss equation for the cross-section sphere {x = const}: intrinsic
        // curvature 1/g22 minus the square of the principal curvature
        // g22'/(2 psi g22).
        const double shape = dg22[i] / (2.0 * std::sqrt(g11[i]) * g22[i]);
        kSph[i] = 1.0 / g22[i] - shape * shape;
    }

    // Pole values by even extrapolation from interior samples a few nodes in
    // (the nearest nodes are avoided: the Gauss-equation form loses precision
    // to cancellation as phi -> 0).
    const size_t a = std::min<size_t>(3, N / 2), b = std::min<size_t>(6, N - 1);
    kRad.front() = evenLimitAtPole(s[a], kRad[a], s[b], kRad[b]);
    kSph.front() = evenLimitAtPole(s[a], kSph[a], s[b], kSph[b]);
    const size_t ra = N - 1 - a, rb = N - 1 - b;
    kRad.back() = evenLimitAtPole(L - s[ra], kRad[ra], L - s[rb], kRad[rb]);
    kSph.back() = evenLimitAtPole(L - s[ra], kSph[ra], L - s[rb], kSph[rb]);

    return detail::assembleCurvature(p, std::move(s), std::move(kRad),
                                     std::move(kSph));
}

} // namespace ricci
