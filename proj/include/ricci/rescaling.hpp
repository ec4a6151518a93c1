#pragma once
// Parabolic rescaling of a flow near its singular time and comparison of the
// rescaled geometry against the two rotationally symmetric singularity
// models (round sphere, round cylinder).
//
// A window rescaled at time t_i with factor Q = sup|Rm|(t_i) replaces the
// metric by Q g(t_i + tau / Q), i.e. multiplies both profile components by
// sqrt(Q) and maps snapshot times to tau = (t - t_i) Q in [-1, 0]. By
// construction the rescaled curvature sup at tau = 0 is exactly 1; the
// scale-invariant space-time integrals transport identically, which
// criterionTransportCheck verifies against an independent recomputation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "ricci/curvature.hpp"
#include "ricci/errors.hpp"
#include "ricci/flow.hpp"
#include "ricci/functionals.hpp"
#include "ricci/numerics.hpp"
#include "ricci/profile.hpp"

namespace ricci {

/// Multiply the metric by Q: both profile components scale by sqrt(Q).
inline WarpProfile rescaleProfile(const WarpProfile& p, double Q) {
    if (!(Q > 0.0)) throw OutOfRange("rescaleProfile: Q must be positive");
    return scaledProfile(p, std::sqrt(Q));
}

/// One rescaled snapshot: geometry at rescaled time tau.
struct RescaledState {
    double tau = 0.0;      ///< (t - tCenter) * Q
    WarpProfile profile;   ///< sqrt(Q)-scaled profile
    double supRm = 0.0;    ///< snapshot sup|Rm| / Q
    double supRic = 0.0;   ///< snapshot sup|Ric| / Q
    double argmaxS = 0.0;  ///< rescaled arclength of the sup|Rm| node
};

/// A blow-up window rescaled about one snapshot time.
struct RescaledWindow {
    double Q = 0.0;        ///< normalisation factor, sup|Rm| at the center
    double tCenter = 0.0;  ///< source time of tau = 0
    double xCenter = 0.0;  ///< rescaled arclength of the curvature maximum
    std::vector<RescaledState> states; ///< tau in [-1, 0], increasing
    std::string provenance;            ///< human-readable source description
    int n = 3;

    const RescaledState& center() const { return states.back(); }
};

/// Rescale the trajectory about the snapshot at time tCenter so that
/// sup|Rm| = 1 at tau = 0, collecting every snapshot with tau in [-1, 0].
/// OutOfRange if tCenter is not a snapshot time; SingularData if the center
/// snapshot has no positive curvature sup to normalise by.
inline RescaledWindow rescaleAt(const FlowTrajectory& traj, double tCenter,
                                double tol = 1e-7) {
    const Snapshot& c = snapshotAt(traj, tCenter, tol);
    if (!(c.supRm > 0.0))
        throw SingularData("rescaleAt: center snapshot has sup|Rm| <= 0");
    RescaledWindow w;
    w.Q = c.supRm;
    w.tCenter = c.t;
    w.n = traj.n;
    w.xCenter = c.argmaxS * std::sqrt(w.Q);

    for (const Snapshot& s : traj.snaps) {
        const double tau = (s.t - c.t) * w.Q;
        if (tau < -1.0 - 1e-12 || tau > 1e-12) continue;
        RescaledState st;
        st.tau = std::clamp(tau, -1.0, 0.0);
        st.profile = rescaleProfile(s.profile, w.Q);
        st.supRm = s.supRm / w.Q;
        st.supRic = s.supRic / w.Q;
        st.argmaxS = s.argmaxS * std::sqrt(w.Q);
        w.states.push_back(std::move(st));
    }
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "rescaled at t=%.17g with Q=%.17g (%zu states in tau window)",
                  w.tCenter, w.Q, w.states.size());
    w.provenance = buf;
    return w;
}

/// Rescaled windows at every curvature-doubling snapshot, ordered in time.
/// NotConverged if the trajectory recorded fewer than three doublings.
inline std::vector<RescaledWindow> blowupSequence(const FlowTrajectory& traj,
                                                  size_t maxWindows = 64) {
    std::vector<double> centers;
    for (const Snapshot& s : traj.snaps)
        if (s.doubling) centers.push_back(s.t);
    if (centers.size() < 3)
        throw NotConverged("blowupSequence: fewer than three curvature "
                           "doublings recorded; run closer to blow-up");
    if (centers.size() > maxWindows)
        centers.erase(centers.begin(),
                      centers.end() - std::ptrdiff_t(maxWindows));
    std::vector<RescaledWindow> out;
    out.reserve(centers.size());
    for (double t : centers) out.push_back(rescaleAt(traj, t));
    return out;
}

// ---------------------------------------------------------------------------
// Model comparison
// ---------------------------------------------------------------------------

enum class SingularityModel { RoundSphere, RoundCylinder };

inline const char* singularityModelName(SingularityModel m) {
    return m == SingularityModel::RoundSphere ? "roundSphere" : "roundCylinder";
}

/// Sectional curvature pair (kRad, kSph) of a model normalised to |Rm| = 1.
///   sphere:   kRad = kSph = 1 / sqrt(2 n (n-1))
///   cylinder: kRad = 0, kSph = 1 / sqrt(2 (n-1) (n-2))
inline std::pair<double, double> modelCurvature(SingularityModel m, int n) {
    if (m == SingularityModel::RoundSphere) {
        const double k = 1.0 / std::sqrt(2.0 * n * (n - 1));
        return {k, k};
    }
    if (n < 3)
        throw ConfigError("modelCurvature: cylinder model needs n >= 3");
    return {0.0, 1.0 / std::sqrt(2.0 * (n - 1) * (n - 2))};
}

struct ModelDistance {
    double distance = 0.0; ///< sup over the ball of |(kRad,kSph) - model|
    double radius = 0.0;   ///< rescaled-arclength ball radius requested
    bool partialBall = false; ///< ball ran into a pole before the radius
    double modelKRad = 0.0, modelKSph = 0.0;
};

/// Sup-distance of the rescaled geometry at tau = 0 from a singularity
/// model, over the meridian ball of given rescaled arclength radius about
/// the curvature maximum. Meridian arclength is the exact reduced geodesic
/// distance for points on a common meridian, and rotational symmetry makes
/// it the binding comparison for the curvature pair.
inline ModelDistance modelDistance(const RescaledWindow& w,
                                   SingularityModel model,
                                   double radius = 5.0) {
    if (w.states.empty()) throw OutOfRange("modelDistance: empty window");
    if (!(radius > 0.0))
        throw OutOfRange("modelDistance: radius must be positive");
    const RescaledState& st = w.center();
    const CurvatureField c = windowedCurvature(st.profile);

    ModelDistance out;
    out.radius = radius;
    const auto [mRad, mSph] = modelCurvature(model, w.n);
    out.modelKRad = mRad;
    out.modelKSph = mSph;

    const double L = c.s.back();
    const double s0 = std::clamp(w.xCenter, 0.0, L);
    out.partialBall = (s0 < radius) || (L - s0 < radius);

    double worst = 0.0;
    for (size_t i = 0; i < c.s.size(); ++i) {
        if (std::abs(c.s[i] - s0) > radius) continue;
        const double d = std::hypot(c.kRad[i] - mRad, c.kSph[i] - mSph);
        worst = std::max(worst, d);
    }
    out.distance = worst;
    return out;
}

// ---------------------------------------------------------------------------
// Criterion transport
// ---------------------------------------------------------------------------

struct TransportCheck {
    double rescaled = 0.0; ///< integral of rescaled sup|Ric| over tau window
    double source = 0.0;   ///< integral of sup|Ric| dt over the source window
    double relDiff = 0.0;
    double tauLo = 0.0;    ///< tau coverage actually integrated
};

/// The time integral of sup|Ric| is invariant under parabolic rescaling:
/// integral over tau of sup|Ric~| equals the source-time integral over the
/// matching interval. The rescaled side is recomputed from the stored
/// rescaled profiles (an independent curvature evaluation); the source side
/// uses the engine's snapshot diagnostics. Their agreement checks the
/// rescaling, the two curvature pipelines, and the bookkeeping at once.
inline TransportCheck criterionTransportCheck(const FlowTrajectory& traj,
                                              const RescaledWindow& w) {
    if (w.states.size() < 2)
        throw NotConverged("criterionTransportCheck: window has fewer than "
                           "two states; densify snapshots near blow-up");
    TransportCheck out;
    out.tauLo = w.states.front().tau;

    // Rescaled side: trapezoid of recomputed sup|Ric~| on the tau grid.
    double acc = 0.0;
    double prevTau = 0.0, prevVal = 0.0;
    for (size_t k = 0; k < w.states.size(); ++k) {
        const CurvatureField c = windowedCurvature(w.states[k].profile);
        const double v = c.supRic;
        if (k > 0)
            acc += 0.5 * (v + prevVal) * (w.states[k].tau - prevTau);
        prevTau = w.states[k].tau;
        prevVal = v;
    }
    out.rescaled = acc;

    // Source side: snapshot sup|Ric| over [tCenter + tauLo / Q, tCenter].
    const CriterionSeries ser = intSupRicSeries(traj);
    const double t0 = w.tCenter + out.tauLo / w.Q;
    out.source = cumulativeAt(ser, w.tCenter) - cumulativeAt(ser, t0);

    const double scale =
        std::max({std::abs(out.rescaled), std::abs(out.source), 1e-300});
    out.relDiff = std::abs(out.rescaled - out.source) / scale;
    return out;
}

} // namespace ricci
