// Rescaling tests: parabolic window extraction, model curvature constants,
// sup-distance from the singularity models, and the scale invariance of the
// integral criterion under rescaling.
#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "ricci/flow.hpp"
#include "ricci/rescaling.hpp"
#include "test_support.hpp"

using namespace ricci;
using testsup::relErr;

TEST_CASE("rescaleProfile scales the metric exactly", "[rescaling]") {
    const WarpProfile p = initialRoundSphere(3, 1.0, 129);
    const double Q = 7.5;
    const WarpProfile q = rescaleProfile(p, Q);
    for (size_t i = 0; i < p.phi.size(); ++i) {
        REQUIRE(q.phi[i] == p.phi[i] * std::sqrt(Q));
        REQUIRE(q.psi[i] == p.psi[i] * std::sqrt(Q));
    }
    // Curvature scales by 1/Q: the rescaled unit sphere has sup|Rm| 2sqrt3/Q.
    const CurvatureField c = windowedCurvature(q);
    REQUIRE(relErr(c.supRm, 2.0 * std::sqrt(3.0) / Q) < 1e-6);
    REQUIRE_THROWS_AS(rescaleProfile(p, 0.0), OutOfRange);
    REQUIRE_THROWS_AS(rescaleProfile(p, -1.0), OutOfRange);
}

TEST_CASE("rescaleAt normalises the center snapshot", "[rescaling]") {
    const FlowTrajectory& traj = testsup::sphereBlowup();
    const std::vector<RescaledWindow> wins = blowupSequence(traj);
    REQUIRE(wins.size() >= 3);

    for (const RescaledWindow& w : wins) {
        REQUIRE(w.states.size() >= 1);
        // Center state: tau = 0 and sup|Rm| = 1, exactly by construction.
        REQUIRE(w.center().tau == 0.0);
        REQUIRE(w.center().supRm == 1.0);
        REQUIRE(w.states.front().tau >= -1.0);
        for (size_t k = 1; k < w.states.size(); ++k)
            REQUIRE(w.states[k].tau > w.states[k - 1].tau);
        REQUIRE_FALSE(w.provenance.empty());
    }
    // Consecutive windows sit at curvature doublings.
    for (size_t i = 1; i < wins.size(); ++i) {
        const double ratio = wins[i].Q / wins[i - 1].Q;
        REQUIRE(ratio > 1.9);
        REQUIRE(ratio < 2.2);
    }
    // Tail windows carry several states inside tau in [-1, 0].
    REQUIRE(wins.back().states.size() >= 4);

    // Non-snapshot center times are rejected.
    const double gap = 0.5 * (traj.snaps[3].t + traj.snaps[4].t);
    REQUIRE_THROWS_AS(rescaleAt(traj, gap), OutOfRange);
}

TEST_CASE("blowupSequence needs doublings and honours maxWindows", "[rescaling]") {
    const FlowTrajectory& traj = testsup::sphereBlowup();
    const std::vector<RescaledWindow> all = blowupSequence(traj);
    const std::vector<RescaledWindow> last3 = blowupSequence(traj, 3);
    REQUIRE(last3.size() == 3);
    // maxWindows keeps the LAST (deepest) windows.
    for (size_t i = 0; i < 3; ++i)
        REQUIRE(last3[i].tCenter == all[all.size() - 3 + i].tCenter);

    // A run without curvature doublings cannot produce a sequence.
    REQUIRE_THROWS_AS(blowupSequence(testsup::sphereDense()), NotConverged);
}

TEST_CASE("model curvature constants", "[rescaling][models]") {
    {
        const auto [kr, ks] = modelCurvature(SingularityModel::RoundSphere, 3);
        REQUIRE(kr == ks);
        REQUIRE(relErr(kr, 1.0 / std::sqrt(12.0)) < 1e-15);
    }
    {
        const auto [kr, ks] = modelCurvature(SingularityModel::RoundCylinder, 3);
        REQUIRE(kr == 0.0);
        REQUIRE(ks == 0.5);
    }
    {
        const auto [kr, ks] = modelCurvature(SingularityModel::RoundSphere, 5);
        REQUIRE(relErr(kr, 1.0 / std::sqrt(40.0)) < 1e-15);
        REQUIRE(kr == ks);
    }
    {
        const auto [kr, ks] = modelCurvature(SingularityModel::RoundCylinder, 4);
        REQUIRE(kr == 0.0);
        REQUIRE(relErr(ks, 1.0 / std::sqrt(12.0)) < 1e-15);
    }
    REQUIRE_THROWS_AS(modelCurvature(SingularityModel::RoundCylinder, 2),
                      ConfigError);
    REQUIRE(std::string(singularityModelName(SingularityModel::RoundSphere)) ==
            "roundSphere");
    REQUIRE(std::string(singularityModelName(SingularityModel::RoundCylinder)) ==
            "roundCylinder");
}

TEST_CASE("sphere blow-up stays near the round-sphere model", "[rescaling][models]") {
    const FlowTrajectory& traj = testsup::sphereBlowup();
    const std::vector<RescaledWindow> wins = blowupSequence(traj, 3);
    for (const RescaledWindow& w : wins) {
        const ModelDistance dS = modelDistance(w, SingularityModel::RoundSphere);
        const ModelDistance dC = modelDistance(w, SingularityModel::RoundCylinder);
        // Tail windows: the grid resolves the shrinking sphere to a few
        // parts in a thousand at N=129 (the sup includes the extrapolated
        // pole values, the noisiest nodes); the cylinder stays at the
        // geometric separation hypot(1/sqrt12, 1/2 - 1/sqrt12) ~ 0.357.
        REQUIRE(dS.distance < 5e-3);
        REQUIRE(relErr(dC.distance, std::hypot(1.0 / std::sqrt(12.0),
                                               0.5 - 1.0 / std::sqrt(12.0))) <
                0.02);
        REQUIRE(dS.modelKRad == dS.modelKSph);
        REQUIRE(dC.modelKRad == 0.0);
    }
    // Ball-coverage bookkeeping: the rescaled sphere has diameter
    // pi sqrt(2 sqrt 3) ~ 5.85, so radius 5 about the equator spills over
    // the poles while radius 1 does not.
    const ModelDistance big =
        modelDistance(wins.back(), SingularityModel::RoundSphere, 5.0);
    REQUIRE(big.partialBall);
    const ModelDistance small =
        modelDistance(wins.back(), SingularityModel::RoundSphere, 1.0);
    REQUIRE_FALSE(small.partialBall);
    REQUIRE_THROWS_AS(
        modelDistance(wins.back(), SingularityModel::RoundSphere, 0.0),
        OutOfRange);
    RescaledWindow empty;
    REQUIRE_THROWS_AS(modelDistance(empty, SingularityModel::RoundSphere),
                      OutOfRange);
}

TEST_CASE("dumbbell blow-up approaches the cylinder model", "[rescaling][models]") {
    const FlowTrajectory& traj = testsup::dumbbellBlowup();
    const std::vector<RescaledWindow> wins = blowupSequence(traj);
    REQUIRE(wins.size() >= 3);
    double prev = 1e300;
    for (const RescaledWindow& w : wins) {
        const double dC = modelDistance(w, SingularityModel::RoundCylinder).distance;
        const double dS = modelDistance(w, SingularityModel::RoundSphere).distance;
        REQUIRE(dC < dS);   // the neck looks like a cylinder, not a sphere
        REQUIRE(dC < prev); // and the resemblance improves monotonically
        prev = dC;
    }
    REQUIRE(prev < 0.3); // still far from singular at this shallow ceiling
}

TEST_CASE("the |Ric| integral survives parabolic rescaling", "[rescaling][transport]") {
    const FlowTrajectory& traj = testsup::sphereBlowup();
    const std::vector<RescaledWindow> wins = blowupSequence(traj);
    size_t checked = 0;
    for (const RescaledWindow& w : wins) {
        if (w.states.size() < 2) continue;
        const TransportCheck tc = criterionTransportCheck(traj, w);
        CAPTURE(w.tCenter, tc.rescaled, tc.source);
        REQUIRE(tc.relDiff < 1e-2);
        REQUIRE(tc.tauLo >= -1.0);
        ++checked;
    }
    REQUIRE(checked >= 3);
    // Tail windows are sampled densely; there the two sides agree to
    // quadrature precision.
    const TransportCheck tail = criterionTransportCheck(traj, wins.back());
    REQUIRE(tail.relDiff < 1e-5);

    // A single-state window cannot be integrated.
    const RescaledWindow w0 = rescaleAt(traj, 0.0);
    REQUIRE(w0.states.size() == 1);
    REQUIRE_THROWS_AS(criterionTransportCheck(traj, w0), NotConverged);
}
