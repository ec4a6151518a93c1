#pragma once

/// Exact self-similar comparison solutions of the flow dg/dt = -2 Ric.
///
/// * Round sphere S^n of initial radius r0:  r(t)^2 = r0^2 - 2(n-1) t,
///   vanishing at T = r0^2 / (2(n-1)).  All sectional curvatures equal
///   1/r(t)^2, so |Ric| = sqrt(n) (n-1)/r^2 and |Rm| = sqrt(2n(n-1))/r^2.
/// * Round cylinder R x S^{n-1} of cross-section radius r0:
///   r(t)^2 = r0^2 - 2(n-2) t, vanishing at T = r0^2 / (2(n-2)).
///
/// The sphere's curvature-based extension criteria integrate in closed form;
/// these expressions are the oracles against which the numerical flow and the
/// trajectory functionals are validated.  Time integrals are expressed where
/// possible through xi(t) = ln(r0^2 / r(t)^2) = ln(1/(1 - t/T)), the natural
/// blow-up variable.

#include <cmath>
#include <functional>

#include "ricci/errors.hpp"
#include "ricci/numerics.hpp"
#include "ricci/profile.hpp"

namespace ricci {

/// Shape of a criterion's growth as t -> T, in the variable
/// xi = ln(1/(T - t)).
enum class GrowthLaw { Bounded, Log, LogLog, Power };

inline const char* growthLawName(GrowthLaw g) {
    switch (g) {
        case GrowthLaw::Bounded: return "bounded";
        case GrowthLaw::Log: return "log";
        case GrowthLaw::LogLog: return "loglog";
        case GrowthLaw::Power: return "power";
    }
    return "?";
}

/// A fitted or exact growth law: value(t) ~ rate * basis(xi) + offset with
/// basis = 1 (Bounded), xi (Log), ln(xi) (LogLog) or e^{rate*xi} (Power,
/// where rate is the exponent of 1/(T-t)).
struct CriterionLaw {
    GrowthLaw law = GrowthLaw::Bounded;
    double rate = 0.0;
    double offset = 0.0;
};

/// Criteria with closed-form sphere values.
enum class CriterionKind {
    IntSupRic,   ///< integral of sup |Ric| dt
    SpaceTimeLp, ///< space-time integral of |Rm|^p dmu dt
    LogWeighted  ///< space-time integral of |Rm|^{n/2+1}/log(1+|Rm|)
};

struct SphereModel {
    int n = 3;
    double r0 = 1.0;

    double singularTime() const { return r0 * r0 / (2.0 * (n - 1)); }
    double radius(double t) const {
        const double r2 = r0 * r0 - 2.0 * (n - 1) * t;
        if (r2 <= 0.0) throw OutOfRange("SphereModel: t at or past the singular time");
        return std::sqrt(r2);
    }
    double supRm(double t) const {
        const double r = radius(t);
        return std::sqrt(2.0 * n * (n - 1.0)) / (r * r);
    }
    double supRic(double t) const {
        const double r = radius(t);
        return std::sqrt(double(n)) * (n - 1.0) / (r * r);
    }
    double volume(double t) const {
        return sphereVolume(n) * std::pow(radius(t), n);
    }
    /// Blow-up variable xi(t) = ln(r0^2/r(t)^2).
    double xi(double t) const { return std::log(r0 * r0 / (radius(t) * radius(t))); }
};

struct CylinderModel {
    int n = 3; ///< total dimension; cross-section is S^{n-1}
    double r0 = 1.0;

    double singularTime() const {
        if (n < 3) throw OutOfRange("CylinderModel: needs n >= 3");
        return r0 * r0 / (2.0 * (n - 2));
    }
    double radius(double t) const {
        const double r2 = r0 * r0 - 2.0 * (n - 2) * t;
        if (r2 <= 0.0) throw OutOfRange("CylinderModel: t at or past the singular time");
        return std::sqrt(r2);
    }
};

inline double cylinderRadiusAt(const CylinderModel& m, double t) {
    return m.radius(t);
}

/// Grid realization of the round sphere at time t: phi = r sin(pi x),
/// psi = pi r on a uniform grid.
inline WarpProfile sphereProfileAt(const SphereModel& m, double t, size_t N) {
    if (N < 9) throw OutOfRange("sphereProfileAt: need N >= 9");
    const double r = m.radius(t);
    WarpProfile p;
    p.n = m.n;
    p.x.resize(N);
    p.psi.assign(N, M_PI * r);
    p.phi.resize(N);
    for (size_t i = 0; i < N; ++i) {
        p.x[i] = double(i) / double(N - 1);
        p.phi[i] = r * std::sin(M_PI * p.x[i]);
    }
    p.phi.front() = 0.0;
    p.phi.back() = 0.0;
    return p;
}

namespace detail {
/// Space-time |Rm|^p prefactor and radius exponent for the sphere:
/// integrand(t) = C * r(t)^{n - 2p} with C = (2n(n-1))^{p/2} vol(S^n).
inline double lpPrefactor(const SphereModel& m, double p) {
    return std::pow(2.0 * m.n * (m.n - 1.0), 0.5 * p) * sphereVolume(m.n);
}
} // namespace detail

/// Closed-form partial integral of a criterion on the shrinking sphere, from
/// 0 to t < T.  For LogWeighted the 1d time integral has no elementary form
/// and is evaluated by adaptive quadrature of the exact integrand (tolerance
/// far below the consumers' needs).
inline double sphereCriterionClosedForm(const SphereModel& m, CriterionKind k,
                                        double t, double p = 2.0) {
    if (!(t >= 0.0)) throw OutOfRange("sphereCriterionClosedForm: t < 0");
    if (t >= m.singularTime())
        throw OutOfRange("sphereCriterionClosedForm: t at or past the singular time");
    const int n = m.n;
    const double a = 2.0 * (n - 1); // d(r^2)/dt = -a
    switch (k) {
        case CriterionKind::IntSupRic:
            // integral sqrt(n)(n-1)/r^2 = (sqrt(n)/2) xi(t)
            return 0.5 * std::sqrt(double(n)) * m.xi(t);
        case CriterionKind::SpaceTimeLp: {
            if (p < 1.0) throw ConfigError("SpaceTimeLp: exponent p must be >= 1");
            const double C = detail::lpPrefactor(m, p);
            const double mExp = 0.5 * (n - 2.0 * p); // integrand = C r^{2 mExp}
            if (std::abs(mExp + 1.0) < 1e-14)        // p = n/2 + 1: critical
                return C / a * m.xi(t);
            const double e = mExp + 1.0;
            const double r2 = m.radius(t) * m.radius(t);
            return C * (std::pow(m.r0 * m.r0, e) - std::pow(r2, e)) / (a * e);
        }
        case CriterionKind::LogWeighted: {
            const double q = 0.5 * n + 1.0;
            const double C = detail::lpPrefactor(m, q);
            const double B = std::sqrt(2.0 * n * (n - 1.0));
            auto f = [&](double tau) {
                const double r2 = m.r0 * m.r0 - a * tau;
                return C / r2 / std::log1p(B / r2);
            };
            return adaptiveSimpson(f, 0.0, t, 1e-12 * (1.0 + t));
        }
    }
    throw OutOfRange("sphereCriterionClosedForm: unknown criterion");
}

/// Exact growth law of a criterion on the sphere as t -> T (rate in the
/// conventions of CriterionLaw).
inline CriterionLaw sphereCriterionLaw(const SphereModel& m, CriterionKind k,
                                       double p = 2.0) {
    const int n = m.n;
    const double a = 2.0 * (n - 1);
    CriterionLaw law;
    switch (k) {
        case CriterionKind::IntSupRic:
            law.law = GrowthLaw::Log;
            law.rate = 0.5 * std::sqrt(double(n));
            return law;
        case CriterionKind::SpaceTimeLp: {
            const double C = detail::lpPrefactor(m, p);
            const double mExp = 0.5 * (n - 2.0 * p);
            if (std::abs(mExp + 1.0) < 1e-14) {
                law.law = GrowthLaw::Log;
                law.rate = C / a;
            } else if (mExp + 1.0 > 0.0) {
                law.law = GrowthLaw::Bounded;
                law.rate = C * std::pow(m.r0 * m.r0, mExp + 1.0) / (a * (mExp + 1.0));
            } else {
                law.law = GrowthLaw::Power;
                law.rate = -(mExp + 1.0); // exponent of 1/(T-t)
            }
            return law;
        }
        case CriterionKind::LogWeighted:
            law.law = GrowthLaw::LogLog;
            law.rate = detail::lpPrefactor(m, 0.5 * n + 1.0) / a;
            return law;
    }
    throw OutOfRange("sphereCriterionLaw: unknown criterion");
}

} // namespace ricci
