#pragma once
// Curvature diagnostics evaluated along a flow trajectory.
//
// Everything here consumes the snapshot record of a FlowTrajectory and
// produces the quantities used to decide whether a flow is extendible past
// its final time:
//
//   * running time integrals of the spatial sup of |Ric|,
//   * space-time L^p norms of |Rm| (p >= 1),
//   * the log-weighted critical integral of |Rm|^{n/2+1} / log(1 + |Rm|),
//   * the Lagrangian accumulator F(x, t) = integral of |Ric|(x, .) along the
//     world line of a material point, with its modulus of continuity,
//   * finite-difference checks of the standard evolution identities for
//     gradients and the volume element under the flow,
//   * a local noncollapsing ratio vol(B(x, r)) / r^n on geodesic balls,
//   * least-squares growth-law fits in the logarithmic blow-up variable
//     xi = log(1 / (T - t)).
//
// Sup-norm data is read from the snapshot diagnostics recorded by the flow
// engine (which evaluates curvature quotients through the axis-window
// pipeline); pointwise fields are recomputed from the stored profiles, where
// the phi^{n-1} volume weight suppresses the pole-adjacent quotient noise
// that sup norms would amplify.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "ricci/curvature.hpp"
#include "ricci/distance.hpp"
#include "ricci/errors.hpp"
#include "ricci/exact_models.hpp"
#include "ricci/flow.hpp"
#include "ricci/numerics.hpp"
#include "ricci/profile.hpp"

namespace ricci {

// ---------------------------------------------------------------------------
// Curvature on flowing snapshots
// ---------------------------------------------------------------------------

/// Curvature field for a profile produced by the flow: raw quotients away
/// from the poles, the axis-window fit across the nodes nearest each pole.
///
/// Flowing profiles carry a second-order boundary-layer deficit in phi at
/// the few nodes nearest each pole (the pole itself and the interior stay
/// accurate). Dividing by phi^2 there turns that harmless sag into O(1/phi^2)
/// garbage in the sectional curvatures, which would dominate sup norms and,
/// near blow-up, even the volume-weighted integrals. The window replaces the
/// affected nodes by the even quadratic fitted just outside them — the same
/// treatment the flow engine applies to its own diagnostics. On analytic
/// profiles the window is a no-op up to the fit's own high-order error, so
/// this field agrees with curvature() wherever curvature() is trustworthy.
inline CurvatureField windowedCurvature(const WarpProfile& p) {
    CurvatureField raw = curvature(p);
    const size_t K = detail::axisWindow(p.size());
    Vec kRad = raw.kRad, kSph = raw.kSph;
    detail::windowAxisRatio(p.x, kRad, K);
    detail::windowAxisRatio(p.x, kSph, K);
    return detail::assembleCurvature(p, std::move(raw.s), std::move(kRad),
                             std::move(kSph));
}

// ---------------------------------------------------------------------------
// Snapshot lookup
// ---------------------------------------------------------------------------

/// Snapshot whose time matches t to within tol; OutOfRange otherwise.
inline const Snapshot& snapshotAt(const FlowTrajectory& traj, double t,
                                  double tol = 1e-7) {
    if (traj.snaps.empty()) throw OutOfRange("snapshotAt: empty trajectory");
    const size_t k = traj.nearestSnapshot(t);
    const double dt = std::abs(traj.snaps[k].t - t);
    if (dt > tol * std::max(1.0, std::abs(t)))
        throw OutOfRange("snapshotAt: no snapshot near requested time");
    return traj.snaps[k];
}

struct SupNorms {
    double t = 0.0;
    double supRm = 0.0;
    double supRic = 0.0;
    double argmaxS = 0.0; ///< arclength of the sup|Rm| node
};

/// Spatial sup norms at a recorded snapshot time.
inline SupNorms supNorms(const FlowTrajectory& traj, double t,
                         double tol = 1e-7) {
    const Snapshot& s = snapshotAt(traj, t, tol);
    return {s.t, s.supRm, s.supRic, s.argmaxS};
}

// ---------------------------------------------------------------------------
// Criterion series
// ---------------------------------------------------------------------------

/// Growth-law fit of a cumulative series in xi = log(1 / (T - t)).
struct GrowthFit {
    GrowthLaw law = GrowthLaw::Bounded;
    double rate = 0.0;    ///< slope in the selected law's fitting variable
    double offset = 0.0;  ///< intercept in the selected law's fitting variable
    /// Normalised RMS residual per candidate law, indexed by GrowthLaw.
    std::array<double, 4> residual{};
    size_t points = 0;    ///< snapshots inside the blow-up window
    double xiMin = 0.0, xiMax = 0.0;
};

/// One extension criterion sampled along a trajectory.
struct CriterionSeries {
    std::string id;
    CriterionKind kind = CriterionKind::IntSupRic;
    double p = 0.0;      ///< exponent, when the criterion has one
    Vec times;           ///< snapshot times
    Vec values;          ///< instantaneous integrand value at each time
    Vec cumulative;      ///< running trapezoid time integral of `values`
    GrowthFit divergenceDiagnostic; ///< filled by divergenceDiagnostic()
};

namespace detail {

/// Integral over M of f dmu for a pointwise field on the profile grid.
inline double spatialIntegral(const WarpProfile& p, const Vec& f) {
    return integrateScalar(p, f);
}

inline Vec cumulativeTrapezoid(const Vec& t, const Vec& v) {
    Vec c(t.size(), 0.0);
    for (size_t k = 1; k < t.size(); ++k)
        c[k] = c[k - 1] + 0.5 * (v[k] + v[k - 1]) * (t[k] - t[k - 1]);
    return c;
}

} // namespace detail

/// Sample one criterion's instantaneous value at every snapshot up to tMax.
///
/// IntSupRic ignores p. SpaceTimeLp requires p >= 1. LogWeighted uses the
/// critical exponent n/2 + 1 regardless of p.
inline CriterionSeries criterionSeries(
    const FlowTrajectory& traj, CriterionKind kind, double p = 0.0,
    double tMax = std::numeric_limits<double>::infinity()) {
    if (traj.snaps.empty())
        throw OutOfRange("criterionSeries: empty trajectory");
    if (kind == CriterionKind::SpaceTimeLp && !(p >= 1.0))
        throw ConfigError("criterionSeries: space-time L^p needs p >= 1");
    if (!(tMax >= traj.snaps.front().t))
        throw OutOfRange("criterionSeries: tMax precedes the first snapshot");

    CriterionSeries out;
    out.kind = kind;
    const int n = traj.n;
    const double pc = 0.5 * n + 1.0; // critical exponent for the log weight
    switch (kind) {
    case CriterionKind::IntSupRic:
        out.id = "intSupRic";
        out.p = 0.0;
        break;
    case CriterionKind::SpaceTimeLp: {
        char buf[48];
        std::snprintf(buf, sizeof buf, "spaceTimeLp(p=%g)", p);
        out.id = buf;
        out.p = p;
        break;
    }
    case CriterionKind::LogWeighted:
        out.id = "logWeighted";
        out.p = pc;
        break;
    }

    for (const Snapshot& s : traj.snaps) {
        if (s.t > tMax * (1.0 + 1e-12) && s.t > tMax + 1e-15) break;
        out.times.push_back(s.t);
        double v = 0.0;
        if (kind == CriterionKind::IntSupRic) {
            v = s.supRic;
        } else {
            const CurvatureField c = windowedCurvature(s.profile);
            Vec f(c.normRm.size());
            for (size_t i = 0; i < f.size(); ++i) {
                const double rm = c.normRm[i];
                if (kind == CriterionKind::SpaceTimeLp) {
                    f[i] = std::pow(rm, p);
                } else {
                    f[i] = rm > 0.0 ? std::pow(rm, pc) / std::log1p(rm) : 0.0;
                }
            }
            v = detail::spatialIntegral(s.profile, f);
        }
        out.values.push_back(v);
    }
    if (out.times.empty())
        throw OutOfRange("criterionSeries: no snapshot at or before tMax");
    out.cumulative = detail::cumulativeTrapezoid(out.times, out.values);
    return out;
}

/// Cumulative value of a series at time t (linear on the partial segment).
inline double cumulativeAt(const CriterionSeries& s, double t) {
    if (s.times.empty()) throw OutOfRange("cumulativeAt: empty series");
    if (t < s.times.front() - 1e-12 || t > s.times.back() + 1e-7)
        throw OutOfRange("cumulativeAt: time outside the sampled range");
    t = std::clamp(t, s.times.front(), s.times.back());
    const size_t k = std::upper_bound(s.times.begin(), s.times.end(), t) -
                     s.times.begin();
    if (k == 0) return 0.0;
    if (k >= s.times.size()) return s.cumulative.back();
    const double t0 = s.times[k - 1], t1 = s.times[k];
    const double w = (t - t0) / (t1 - t0);
    const double vMid = (1.0 - w) * s.values[k - 1] + w * s.values[k];
    return s.cumulative[k - 1] + 0.5 * (s.values[k - 1] + vMid) * (t - t0);
}

/// integral over [0, t] of sup_M |Ric(., tau)| dtau from snapshot data.
inline double intSupRic(const FlowTrajectory& traj, double t) {
    return cumulativeAt(criterionSeries(traj, CriterionKind::IntSupRic), t);
}

inline CriterionSeries intSupRicSeries(const FlowTrajectory& traj) {
    return criterionSeries(traj, CriterionKind::IntSupRic);
}

/// Space-time L^p series: values are integral over M of |Rm|^p dmu.
inline CriterionSeries spaceTimeLp(
    const FlowTrajectory& traj, double p,
    double tMax = std::numeric_limits<double>::infinity()) {
    return criterionSeries(traj, CriterionKind::SpaceTimeLp, p, tMax);
}

/// Log-weighted critical series: values G(t) = integral of
/// |Rm|^{n/2+1} / log(1 + |Rm|) dmu, the weight used by the Gronwall layer.
inline CriterionSeries logWeightedIntegral(
    const FlowTrajectory& traj,
    double tMax = std::numeric_limits<double>::infinity()) {
    return criterionSeries(traj, CriterionKind::LogWeighted, 0.0, tMax);
}

// ---------------------------------------------------------------------------
// Growth-law fitting
// ---------------------------------------------------------------------------

/// Fit the cumulative series against four growth laws in
/// xi = log(1 / (T - t)) over the blow-up window (snapshots whose sup|Rm|
/// exceeds growthFactor times the initial one) and select by least residual.
///
/// Laws and their fitted "rate":
///   Bounded:  y = c              (rate 0)
///   Log:      y = a xi + b       (rate a)
///   LogLog:   y = a log(xi) + b  (rate a)
///   Power:    log y = k xi + b   (rate k)
inline GrowthFit divergenceDiagnostic(const FlowTrajectory& traj,
                                      const CriterionSeries& series, double T,
                                      double growthFactor = 10.0) {
    if (traj.snaps.empty() || series.times.empty())
        throw OutOfRange("divergenceDiagnostic: empty input");
    if (!(growthFactor >= 1.0))
        throw ConfigError("divergenceDiagnostic: growthFactor must be >= 1");
    const double rm0 = traj.snaps.front().supRm;

    Vec xi, y;
    for (size_t k = 0; k < series.times.size(); ++k) {
        const double t = series.times[k];
        if (!(T - t > 0.0)) continue;
        const size_t j = traj.nearestSnapshot(t);
        if (traj.snaps[j].supRm < growthFactor * rm0) continue;
        xi.push_back(std::log(1.0 / (T - t)));
        y.push_back(series.cumulative[k]);
    }
    if (xi.size() < 4)
        throw NotConverged(
            "divergenceDiagnostic: fewer than 4 snapshots in the blow-up "
            "window; run closer to the singular time or lower growthFactor");

    GrowthFit out;
    out.points = xi.size();
    out.xiMin = *std::min_element(xi.begin(), xi.end());
    out.xiMax = *std::max_element(xi.begin(), xi.end());

    const double scale = std::max(
        1e-300, *std::max_element(y.begin(), y.end(),
                                  [](double a, double b) {
                                      return std::abs(a) < std::abs(b);
                                  }));
    auto rms = [&](const Vec& a, const Vec& b, double s) {
        double q = 0.0;
        for (size_t i = 0; i < a.size(); ++i) q += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(q / double(a.size())) / std::abs(s);
    };

    // Bounded: constant fit.
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= double(y.size());
    {
        Vec fit(y.size(), mean);
        out.residual[size_t(GrowthLaw::Bounded)] = rms(y, fit, scale);
    }
    // Log: y vs xi.
    const LineFit logFit = fitLine(xi, y);
    {
        Vec fit(y.size());
        for (size_t i = 0; i < y.size(); ++i)
            fit[i] = logFit.slope * xi[i] + logFit.intercept;
        out.residual[size_t(GrowthLaw::Log)] = rms(y, fit, scale);
    }
    // LogLog: y vs log(xi); needs xi > 0 throughout.
    LineFit loglogFit{};
    bool loglogOk = true;
    for (double v : xi) loglogOk = loglogOk && v > 1e-12;
    if (loglogOk) {
        Vec lx(xi.size());
        for (size_t i = 0; i < xi.size(); ++i) lx[i] = std::log(xi[i]);
        loglogFit = fitLine(lx, y);
        Vec fit(y.size());
        for (size_t i = 0; i < y.size(); ++i)
            fit[i] = loglogFit.slope * lx[i] + loglogFit.intercept;
        out.residual[size_t(GrowthLaw::LogLog)] = rms(y, fit, scale);
    } else {
        out.residual[size_t(GrowthLaw::LogLog)] =
            std::numeric_limits<double>::infinity();
    }
    // Power: log y vs xi; needs y > 0 throughout.
    LineFit powFit{};
    bool powOk = true;
    for (double v : y) powOk = powOk && v > 0.0;
    if (powOk) {
        Vec ly(y.size());
        for (size_t i = 0; i < y.size(); ++i) ly[i] = std::log(y[i]);
        powFit = fitLine(xi, ly);
        Vec fit(y.size());
        for (size_t i = 0; i < y.size(); ++i)
            fit[i] = std::exp(powFit.slope * xi[i] + powFit.intercept);
        out.residual[size_t(GrowthLaw::Power)] = rms(y, fit, scale);
    } else {
        out.residual[size_t(GrowthLaw::Power)] =
            std::numeric_limits<double>::infinity();
    }

    // Select the least residual; on near ties prefer the simpler law
    // (Bounded < Log < LogLog < Power).
    size_t best = 0;
    for (size_t m = 1; m < 4; ++m)
        if (out.residual[m] < out.residual[best] * (1.0 - 1e-9)) best = m;
    out.law = GrowthLaw(best);
    switch (out.law) {
    case GrowthLaw::Bounded: out.rate = 0.0; out.offset = mean; break;
    case GrowthLaw::Log: out.rate = logFit.slope; out.offset = logFit.intercept; break;
    case GrowthLaw::LogLog: out.rate = loglogFit.slope; out.offset = loglogFit.intercept; break;
    case GrowthLaw::Power: out.rate = powFit.slope; out.offset = powFit.intercept; break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Lagrangian accumulator F(x, t) and its modulus of continuity
// ---------------------------------------------------------------------------

/// F sampled on material points: label[j] is the point's initial coordinate,
/// s[j] its arclength position at time t, F[j] the accumulated |Ric| integral.
struct MaterialF {
    double t = 0.0;
    Vec label;
    Vec s;
    Vec F;
};

/// Per-material-point accumulator F(x, t) = integral over [0, t] of
/// |Ric|(x(tau), tau) dtau, transported exactly by the flow's material
/// bookkeeping. NotConverged if accumulated re-meshing transport error
/// exceeds 1%.
inline MaterialF pointwiseF(const FlowTrajectory& traj, double t,
                            double tol = 1e-7) {
    if (traj.transportError > 0.01)
        throw NotConverged("pointwiseF: re-mesh transport error exceeds 1%");
    const Snapshot& s = snapshotAt(traj, t, tol);
    MaterialF out;
    out.t = s.t;
    out.label = traj.snaps.front().profile.x;
    const double L = arclength(s.profile).back();
    out.s.resize(s.matSigma.size());
    for (size_t j = 0; j < s.matSigma.size(); ++j) out.s[j] = L * s.matSigma[j];
    out.F = s.matF;
    return out;
}

struct ContinuityModulus {
    double value = 0.0; ///< sup of |F(a) - F(b)| over admissible pairs
    double sA = 0.0, sB = 0.0; ///< arclengths realising the sup
};

/// Modulus of continuity of a rotationally symmetric function: the sup of
/// |F(a) - F(b)| over pairs of points with geodesic distance at most delta.
/// For equal-angle pairs the meridian is the minimizing geodesic of the
/// reduced metric ds^2 + phi^2 dalpha^2, so arclength separation is the exact
/// geodesic distance and pairs at different angles are dominated by the
/// meridian pair with the same arclength gap.
inline ContinuityModulus continuityModulus(const Vec& s, const Vec& F,
                                           double delta) {
    if (s.size() != F.size() || s.size() < 2)
        throw OutOfRange("continuityModulus: need matching arrays, size >= 2");
    if (!(delta > 0.0))
        throw OutOfRange("continuityModulus: delta must be positive");
    ContinuityModulus out;
    size_t hi = 0;
    for (size_t i = 0; i < s.size(); ++i) {
        if (hi < i + 1) hi = i + 1;
        while (hi < s.size() && s[hi] - s[i] <= delta) ++hi;
        for (size_t j = i + 1; j < hi; ++j) {
            const double d = std::abs(F[i] - F[j]);
            if (d > out.value) { out.value = d; out.sA = s[i]; out.sB = s[j]; }
        }
    }
    return out;
}

inline ContinuityModulus continuityModulus(const MaterialF& f, double delta) {
    return continuityModulus(f.s, f.F, delta);
}

// ---------------------------------------------------------------------------
// Evolution identity checks
// ---------------------------------------------------------------------------

struct IdentityCheck {
    std::string name;
    bool pass = false;
    double worst = 0.0; ///< worst relative discrepancy (or bound violation)
    double where = 0.0; ///< arclength of the worst material point at t0
};

struct IdentityReport {
    std::vector<IdentityCheck> checks;
    bool allPass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

namespace detail {

/// Fields interpolated onto material points at one snapshot.
struct MaterialFields {
    double t = 0.0;
    Vec s;        ///< arclength position per material label
    Vec gradU2;   ///< |grad u|^2 at the material point
    Vec mu;       ///< volume element relative to the label coordinate
    Vec R;        ///< scalar curvature
    Vec lamRadV;  ///< meridian Ricci eigenvalue
    Vec lamMax;   ///< largest Ricci eigenvalue
};

inline MaterialFields materialFields(const Snapshot& snap, const Vec& labels,
                                     const Vec& u0, int n) {
    MaterialFields f;
    f.t = snap.t;
    const double L = arclength(snap.profile).back();
    const size_t M = snap.matSigma.size();
    f.s.resize(M);
    for (size_t j = 0; j < M; ++j) f.s[j] = L * snap.matSigma[j];

    // u is fixed on material points; differentiate along the (non-uniform)
    // material positions to get its spatial gradient at this time.
    const Vec du = deriv1(f.s, u0);
    f.gradU2.resize(M);
    for (size_t j = 0; j < M; ++j) f.gradU2[j] = du[j] * du[j];

    // Volume element carried by a material point: phi^{n-1} ds/dm per unit
    // label (the angular factor is common to both times and cancels).
    // Fields are sampled at positions that drift across grid cells between
    // snapshots, so use C^1 interpolation: the kinked error field of a
    // piecewise-linear interpolant would dominate finite-difference rates.
    const Vec dsdm = deriv1(labels, f.s);
    f.mu.resize(M);
    const Vec sGrid = arclength(snap.profile);
    const MonotoneCubic phiOfS(sGrid, snap.profile.phi);
    for (size_t j = 0; j < M; ++j) {
        const double phi = phiOfS(f.s[j]);
        f.mu[j] = std::pow(std::max(phi, 0.0), n - 1) * dsdm[j];
    }

    const CurvatureField c = windowedCurvature(snap.profile);
    const MonotoneCubic rOfS(c.s, c.scalar);
    const MonotoneCubic lamRadOfS(c.s, c.lamRad);
    const MonotoneCubic lamSphOfS(c.s, c.lamSph);
    f.R.resize(M);
    f.lamRadV.resize(M);
    f.lamMax.resize(M);
    for (size_t j = 0; j < M; ++j) {
        f.R[j] = rOfS(f.s[j]);
        const double lr = lamRadOfS(f.s[j]);
        const double ls = lamSphOfS(f.s[j]);
        f.lamRadV[j] = lr;
        f.lamMax[j] = std::max(lr, ls);
    }
    return f;
}

} // namespace detail

/// Finite-difference verification of four evolution identities between two
/// snapshot times, for a fixed function u given on material labels
/// (the initial grid coordinates):
///
///   gradRate:  d/dt |grad u|^2 = 2 Ric(grad u, grad u)
///   volRate:   d/dt dmu = -R dmu
///   sandwich:  exp(-int R^+) <= dmu(t1)/dmu(t0) <= exp(+int R^-)
///   gradBound: |grad u|^2(t1) <= |grad u|^2(t0) exp(2 int lambda_max)
///
/// Rates are centered differences over [t0, t1] compared against the
/// time-averaged right-hand side; integrals use every snapshot in between.
/// Violations are reported, never thrown.
inline IdentityReport checkEvolutionIdentities(const FlowTrajectory& traj,
                                               double t0, double t1,
                                               const Vec& u0,
                                               double tol = 0.01) {
    const size_t k0 = traj.nearestSnapshot(t0);
    const size_t k1 = traj.nearestSnapshot(t1);
    if (k0 >= k1)
        throw OutOfRange("checkEvolutionIdentities: need t0 < t1 at distinct "
                         "snapshots");
    const Vec& labels = traj.snaps.front().profile.x;
    if (u0.size() != labels.size())
        throw OutOfRange("checkEvolutionIdentities: u must be sampled on the "
                         "initial grid");
    const int n = traj.n;

    std::vector<detail::MaterialFields> f;
    f.reserve(k1 - k0 + 1);
    for (size_t k = k0; k <= k1; ++k)
        f.push_back(detail::materialFields(traj.snaps[k], labels, u0, n));
    const detail::MaterialFields& a = f.front();
    const detail::MaterialFields& b = f.back();
    const double dt = b.t - a.t;
    const size_t M = labels.size();

    // Time integrals of R^+, R^-, lambda_max along each material world line.
    Vec intRp(M, 0.0), intRn(M, 0.0), intLam(M, 0.0);
    for (size_t k = 1; k < f.size(); ++k) {
        const double h = f[k].t - f[k - 1].t;
        for (size_t j = 0; j < M; ++j) {
            const double rp0 = std::max(f[k - 1].R[j], 0.0);
            const double rp1 = std::max(f[k].R[j], 0.0);
            const double rn0 = std::max(-f[k - 1].R[j], 0.0);
            const double rn1 = std::max(-f[k].R[j], 0.0);
            intRp[j] += 0.5 * h * (rp0 + rp1);
            intRn[j] += 0.5 * h * (rn0 + rn1);
            intLam[j] += 0.5 * h * (f[k - 1].lamMax[j] + f[k].lamMax[j]);
        }
    }

    IdentityReport rep;
    auto record = [&rep](const std::string& name, double worst, double where,
                         double tolerance) {
        rep.checks.push_back({name, worst <= tolerance, worst, where});
    };

    // gradRate: centered difference vs time-averaged 2 lamRad |grad u|^2
    // (grad u is radial, so Ric(grad u, grad u) = lamRad |grad u|^2).
    {
        double worst = 0.0, where = 0.0, scale = 0.0;
        for (size_t j = 0; j < M; ++j)
            scale = std::max(scale, std::abs(a.gradU2[j] * a.lamRadV[j]));
        scale = std::max(scale, 1e-300);
        for (size_t j = 0; j < M; ++j) {
            const double lhs = (b.gradU2[j] - a.gradU2[j]) / dt;
            const double rhs = a.lamRadV[j] * a.gradU2[j] +
                               b.lamRadV[j] * b.gradU2[j]; // 2 * average
            const double rel =
                std::abs(lhs - rhs) / std::max(std::abs(rhs), 0.05 * scale);
            if (rel > worst) { worst = rel; where = a.s[j]; }
        }
        record("gradRate", worst, where, tol);
    }

    // volRate: d log(mu)/dt vs -R (time-averaged).
    {
        double worst = 0.0, where = 0.0, scale = 0.0;
        for (size_t j = 0; j < M; ++j)
            scale = std::max(scale, std::abs(a.R[j]));
        scale = std::max(scale, 1e-300);
        for (size_t j = 0; j < M; ++j) {
            if (!(a.mu[j] > 0.0 && b.mu[j] > 0.0)) continue;
            const double lhs = std::log(b.mu[j] / a.mu[j]) / dt;
            const double rhs = -0.5 * (a.R[j] + b.R[j]);
            const double rel =
                std::abs(lhs - rhs) / std::max(std::abs(rhs), 0.05 * scale);
            if (rel > worst) { worst = rel; where = a.s[j]; }
        }
        record("volRate", worst, where, tol);
    }

    // sandwich: exp(-int R^+) <= mu1/mu0 <= exp(+int R^-), with tol slack.
    {
        double worst = 0.0, where = 0.0;
        for (size_t j = 0; j < M; ++j) {
            if (!(a.mu[j] > 0.0 && b.mu[j] > 0.0)) continue;
            const double ratio = b.mu[j] / a.mu[j];
            const double lo = std::exp(-intRp[j]);
            const double hi = std::exp(intRn[j]);
            const double violation =
                std::max({lo / ratio - 1.0, ratio / hi - 1.0, 0.0});
            if (violation > worst) { worst = violation; where = a.s[j]; }
        }
        record("sandwich", worst, where, tol);
    }

    // gradBound: |grad u|^2(t1) <= |grad u|^2(t0) exp(2 int lamMax), from
    // d/dt |grad u|^2 = 2 Ric(grad u, grad u) <= 2 lamMax |grad u|^2.
    {
        double worst = 0.0, where = 0.0, scale = 0.0;
        for (size_t j = 0; j < M; ++j) scale = std::max(scale, b.gradU2[j]);
        scale = std::max(scale, 1e-300);
        for (size_t j = 0; j < M; ++j) {
            const double rhs = a.gradU2[j] * std::exp(2.0 * intLam[j]);
            const double violation =
                (b.gradU2[j] - rhs) / std::max(rhs, 0.05 * scale);
            if (violation > worst) { worst = violation; where = a.s[j]; }
        }
        record("gradBound", worst, where, tol);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Noncollapsing ratio
// ---------------------------------------------------------------------------

struct NoncollapseResult {
    double ratio = 0.0;    ///< vol(B(x, r)) / r^n
    double volume = 0.0;   ///< vol(B(x, r))
    double r = 0.0;
    double supRmBall = 0.0; ///< sup of |Rm| over the ball
    bool scaleOk = false;  ///< sup|Rm| <= 1/r^2 held on the ball
};

/// Volume ratio vol(B(x, r)) / r^n of the geodesic ball about an axis point
/// at arclength sCenter, computed on the (s, alpha) half-strip with measure
/// omega_{n-2} phi^{n-1} sin^{n-2}(alpha) ds dalpha and a fast-marching
/// distance field. Cell boundaries are handled by a linear ramp one local
/// mesh width wide. With enforceScale set, OutOfRange if the curvature-scale
/// precondition sup_B |Rm| <= 1/r^2 fails.
inline NoncollapseResult noncollapsingRatio(const WarpProfile& p,
                                            double sCenter, double r,
                                            bool enforceScale = true,
                                            size_t nAlpha = 193) {
    if (!(r > 0.0)) throw OutOfRange("noncollapsingRatio: r must be positive");
    const int n = p.n;
    const DistanceField df(p, sCenter, nAlpha);
    const Vec& s = df.rows();
    const Vec& alpha = df.cols();
    const size_t ns = s.size(), na = alpha.size();
    const double dal = alpha[1] - alpha[0];

    const CurvatureField c = windowedCurvature(p);

    NoncollapseResult out;
    out.r = r;

    // Curvature-scale precondition over the ball.
    for (size_t i = 0; i < ns; ++i) {
        bool touched = false;
        for (size_t j = 0; j < na; ++j)
            if (df.at(i, j) <= r) { touched = true; break; }
        if (touched) out.supRmBall = std::max(out.supRmBall, c.normRm[i]);
    }
    out.scaleOk = out.supRmBall <= (1.0 + 1e-9) / (r * r);
    if (enforceScale && !out.scaleOk)
        throw OutOfRange("noncollapsingRatio: sup|Rm| exceeds 1/r^2 on the "
                         "ball; shrink r to the curvature scale");

    // Integrand with a smoothed ball indicator.
    Vec rowInt(ns, 0.0);
    for (size_t i = 0; i < ns; ++i) {
        const double dsLoc = std::max(i > 0 ? s[i] - s[i - 1] : 0.0,
                                      i + 1 < ns ? s[i + 1] - s[i] : 0.0);
        const double phi = p.phi[i];
        const double w = std::max({dsLoc, phi * dal, 1e-14});
        Vec g(na);
        for (size_t j = 0; j < na; ++j) {
            const double chi =
                std::clamp((r - df.at(i, j)) / w + 0.5, 0.0, 1.0);
            g[j] = chi * std::pow(std::max(phi, 0.0), n - 1) *
                   std::pow(std::sin(alpha[j]), n - 2);
        }
        rowInt[i] = trapezoid(alpha, g);
    }
    out.volume = sphereVolume(n - 2) * trapezoid(s, rowInt);
    out.ratio = out.volume / std::pow(r, n);
    return out;
}

/// Fill each snapshot's kappa with the noncollapsing ratio at the curvature
/// scale r = scale / sqrt(sup|Rm|), centered at the sup|Rm| location.
inline void annotateNoncollapsing(FlowTrajectory& traj, double scale = 1.0,
                                  size_t nAlpha = 97) {
    for (Snapshot& s : traj.snaps) {
        if (!(s.supRm > 0.0)) continue;
        const double r = scale / std::sqrt(s.supRm);
        try {
            s.kappa =
                noncollapsingRatio(s.profile, s.argmaxS, r, false, nAlpha)
                    .ratio;
        } catch (const Error&) {
            s.kappa = std::numeric_limits<double>::quiet_NaN();
        }
    }
}

} // namespace ricci
