#pragma once
// Sharp Sobolev constants and Sobolev-quotient machinery on the flowing
// manifold.
//
//   * talentiK(n, q): the best constant K in || u ||_{q*} <= K || grad u ||_q
//     on R^n (q* = nq/(n-q)), with the closed q = 2 form as a cross-check;
//   * bubbleQuotient: independent verification of K(n,2)^2 by quadrature of
//     the extremal profile u = (eps + r^2)^{-(n-2)/2};
//   * sobolevTerms: the three integrals of the inequality on the warped
//     manifold for a radial test function;
//   * aubinBLowerBound: the largest value of the constant-term lower bound
//     [||u||_{2*}^2 - (K^2 + eps) ||grad u||_2^2] / ||u||_2^2 over a fixed
//     deterministic family of radial test functions, never below the
//     volume bound realised by u = 1.
//
// The three terms scale under g -> Q g as Q^{(n-2)/2}, Q^{(n-2)/2}, Q^{n/2},
// so the lower bound scales as Q^{-1}; on a shrinking round sphere it grows
// like (T - t)^{-1}.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "ricci/errors.hpp"
#include "ricci/flow.hpp"
#include "ricci/functionals.hpp"
#include "ricci/numerics.hpp"
#include "ricci/profile.hpp"

namespace ricci {

// ---------------------------------------------------------------------------
// Sharp constants
// ---------------------------------------------------------------------------

/// Best constant in the Euclidean Sobolev inequality on R^n for exponent
/// q in [1, n):
///   K(n,q) = pi^{-1/2} n^{-1/q} ((q-1)/(n-q))^{1-1/q}
///            * [Gamma(1 + n/2) Gamma(n) / (Gamma(n/q) Gamma(1 + n - n/q))]^{1/n}
/// (the q -> 1 limit of the middle factor is 1).
inline double talentiK(int n, double q) {
    if (n < 2) throw ConfigError("talentiK: n must be >= 2");
    if (!(q >= 1.0) || !(q < n - 1e-6))
        throw ConfigError("talentiK: exponent must satisfy 1 <= q < n");
    double middle = 1.0;
    if (q > 1.0)
        middle = std::pow((q - 1.0) / (n - q), 1.0 - 1.0 / q);
    const double lg = std::lgamma(1.0 + 0.5 * n) + std::lgamma(double(n)) -
                      std::lgamma(double(n) / q) -
                      std::lgamma(1.0 + double(n) - double(n) / q);
    return std::pow(M_PI, -0.5) * std::pow(double(n), -1.0 / q) * middle *
           std::exp(lg / double(n));
}

/// Closed form of the q = 2 constant: K(n,2) = 2 / (sqrt(n(n-2)) omega_n^{1/n})
/// with omega_n the volume of the unit n-sphere.
inline double talentiK2(int n) {
    if (n < 3) throw ConfigError("talentiK2: n must be >= 3");
    return 2.0 / (std::sqrt(double(n) * (n - 2)) *
                  std::pow(sphereVolume(n), 1.0 / n));
}

/// Sobolev quotient ||u||_{2*}^2 / ||grad u||_2^2 of the extremal bubble
/// u(x) = (eps + |x|^2)^{-(n-2)/2} on R^n, by radial quadrature on [0, R]
/// plus two-term analytic tails. Equals K(n,2)^2 for every eps > 0.
/// NotConverged if doubling the quadrature resolution still moves the result.
inline double bubbleQuotient(int n, double eps = 1.0) {
    if (n < 3) throw ConfigError("bubbleQuotient: n must be >= 3");
    if (!(eps > 0.0)) throw ConfigError("bubbleQuotient: eps must be positive");
    const double R = 100.0 * std::sqrt(eps);

    // grad integrand: (n-2)^2 r^2 (eps + r^2)^{-n} * r^{n-1}
    auto gradInt = [&](double r) {
        return (n - 2.0) * (n - 2.0) * std::pow(r, n + 1) *
               std::pow(eps + r * r, -double(n));
    };
    // u^{2*} integrand: (eps + r^2)^{-n} * r^{n-1}
    auto massInt = [&](double r) {
        return std::pow(r, n - 1) * std::pow(eps + r * r, -double(n));
    };

    auto integrate = [&](const std::function<double(double)>& f, int panels) {
        return gaussLegendre(f, 0.0, R, panels);
    };
    const double g1 = integrate(gradInt, 128), g2 = integrate(gradInt, 256);
    const double m1 = integrate(massInt, 128), m2 = integrate(massInt, 256);
    if (std::abs(g2 - g1) > 1e-9 * std::abs(g2) ||
        std::abs(m2 - m1) > 1e-9 * std::abs(m2))
        throw NotConverged("bubbleQuotient: radial quadrature not converged");

    // Tails over [R, inf): (eps + r^2)^{-n} ~ r^{-2n} (1 - n eps / r^2).
    const double gradTail =
        (n - 2.0) * (n - 2.0) *
        (std::pow(R, 2 - n) / (n - 2.0) -
         double(n) * eps * std::pow(R, -double(n)) / double(n));
    const double massTail = std::pow(R, -double(n)) / double(n) -
                            double(n) * eps * std::pow(R, -double(n) - 2.0) /
                                (double(n) + 2.0);

    const double omega = sphereVolume(n - 1);
    const double grad = omega * (g2 + gradTail);
    const double mass = omega * (m2 + massTail);
    // ||u||_{2*}^2 = mass^{(n-2)/n}; quotient = mass^{(n-2)/n} / grad.
    return std::pow(mass, double(n - 2) / double(n)) / grad;
}

// ---------------------------------------------------------------------------
// Quotient terms on the manifold
// ---------------------------------------------------------------------------

struct SobolevTerms {
    double lhs = 0.0;  ///< (integral of |u|^{2n/(n-2)} dmu)^{(n-2)/n}
    double grad = 0.0; ///< integral of |grad u|^2 dmu
    double mass = 0.0; ///< integral of u^2 dmu
};

/// The three integrals of the Sobolev inequality for a radial function u
/// given on the profile's grid nodes.
inline SobolevTerms sobolevTerms(const WarpProfile& p, const Vec& u) {
    const size_t N = p.size();
    if (u.size() != N)
        throw OutOfRange("sobolevTerms: u must be sampled on the grid");
    const int n = p.n;
    const double pStar = 2.0 * n / double(n - 2);

    const Vec ux = deriv1(p.x, u);
    Vec fLhs(N), fGrad(N), fMass(N);
    for (size_t i = 0; i < N; ++i) {
        const double us = ux[i] / p.psi[i];
        fLhs[i] = std::pow(std::abs(u[i]), pStar);
        fGrad[i] = us * us;
        fMass[i] = u[i] * u[i];
    }
    SobolevTerms t;
    t.lhs = std::pow(integrateScalar(p, fLhs), double(n - 2) / double(n));
    t.grad = integrateScalar(p, fGrad);
    t.mass = integrateScalar(p, fMass);
    return t;
}

/// Deterministic radial test family: the constant 1 plus Gaussian bumps
/// centred at each pole and at mid-arclength, at three widths each.
inline std::vector<Vec> sobolevTestFamily(const WarpProfile& p) {
    const Vec s = arclength(p);
    const double L = s.back();
    std::vector<Vec> fam;
    fam.emplace_back(p.size(), 1.0);
    for (double c : {0.0, 0.5 * L, L}) {
        for (double w : {L / 16.0, L / 8.0, L / 4.0}) {
            Vec u(p.size());
            for (size_t i = 0; i < p.size(); ++i) {
                const double z = (s[i] - c) / w;
                u[i] = std::exp(-0.5 * z * z);
            }
            fam.push_back(std::move(u));
        }
    }
    return fam;
}

struct AubinBound {
    double B = 0.0;       ///< best lower bound found (clamped at >= 0)
    size_t argmax = 0;    ///< index into the family realising it
    SobolevTerms terms;   ///< terms of the maximising function
};

/// Largest lower bound for the additive constant B in
///   ||u||_{2*}^2 <= (K^2 + eps) ||grad u||_2^2 + B ||u||_2^2
/// over the test family (default: sobolevTestFamily of the snapshot profile).
/// The constant function is always a member, so the result is never below
/// Vol^{-2/n}.
inline AubinBound aubinBLowerBound(const FlowTrajectory& traj, double t,
                                   double eps,
                                   const std::vector<Vec>* family = nullptr) {
    if (!(eps >= 0.0))
        throw ConfigError("aubinBLowerBound: eps must be nonnegative");
    const Snapshot& snap = snapshotAt(traj, t);
    const double K2 = talentiK(traj.n, 2.0) * talentiK(traj.n, 2.0);

    std::vector<Vec> own;
    if (!family) {
        own = sobolevTestFamily(snap.profile);
        family = &own;
    }
    AubinBound out;
    bool first = true;
    for (size_t k = 0; k < family->size(); ++k) {
        const SobolevTerms tm = sobolevTerms(snap.profile, (*family)[k]);
        if (!(tm.mass > 0.0)) continue;
        const double b = (tm.lhs - (K2 + eps) * tm.grad) / tm.mass;
        if (first || b > out.B) {
            out.B = b;
            out.argmax = k;
            out.terms = tm;
            first = false;
        }
    }
    if (first) throw OutOfRange("aubinBLowerBound: empty test family");
    out.B = std::max(out.B, 0.0);
    return out;
}

} // namespace ricci
