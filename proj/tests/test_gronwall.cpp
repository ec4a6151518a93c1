// Comparison-ODE layer tests: the psi weight and its remainder expansion,
// the inverse-psi integral (production vs verification decompositions and
// its log-log unboundedness), the RK4 comparison integrator, doubling-time
// and mean-value constants on the sphere, and the extension verdict.
#include <cmath>
#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "ricci/flow.hpp"
#include "ricci/gronwall.hpp"
#include "test_support.hpp"

using namespace ricci;
using testsup::relErr;

TEST_CASE("psiWeight and its remainder expansion", "[gronwall][psi]") {
    REQUIRE(psiWeight(0.0) == 0.0);
    REQUIRE(relErr(psiWeight(1.0), std::log(2.0)) < 1e-15);
    REQUIRE(relErr(psiWeight(M_E - 1.0), M_E - 1.0) < 1e-15);
    REQUIRE_THROWS_AS(psiWeight(-1e-9), OutOfRange);

    // The remainder B(s) = 1/psi - 1/s^2 - 1/(2s): series limit, the
    // closed form in the direct region, and continuity at the switch.
    REQUIRE(std::abs(detail::psiRemainder(1e-9) + 1.0 / 12.0) < 5e-11);
    REQUIRE(relErr(detail::psiRemainder(1.0),
                   1.0 / std::log(2.0) - 1.5) < 1e-14);
    const double below = detail::psiRemainder(detail::kPsiSwitch * (1.0 - 1e-12));
    const double above = detail::psiRemainder(detail::kPsiSwitch);
    REQUIRE(std::abs(below - above) < 1e-11);
}

TEST_CASE("invPsiIntegral agrees with the verification decomposition",
          "[gronwall][invpsi]") {
    // Assorted spans, including ones that straddle the series/direct
    // switch of the remainder and ones reaching exp(exp(3)).
    const std::vector<std::pair<double, double>> pairs = {
        {0.005, 100.0}, {0.001, 1e4},   {0.5, 80.0},
        {1.0, 1.0},     {2.0, 2.0e8},   {1e-3, 5e-3},
    };
    for (const auto& [a, b] : pairs) {
        const double v1 = invPsiIntegral(a, b);
        const double v2 = invPsiIntegralDirect(a, b);
        CAPTURE(a, b, v1, v2);
        REQUIRE(std::abs(v1 - v2) <= 1e-10 * std::max(1.0, std::abs(v1)));
    }
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> ua(-3.0, 1.0), ub(0.0, 8.0);
    for (int k = 0; k < 50; ++k) {
        const double a = std::pow(10.0, ua(rng));
        const double b = a * std::pow(10.0, ub(rng));
        const double v1 = invPsiIntegral(a, b);
        const double v2 = invPsiIntegralDirect(a, b);
        CAPTURE(a, b);
        REQUIRE(std::abs(v1 - v2) <= 1e-10 * std::max(1.0, std::abs(v1)));
    }

    SECTION("additivity and trivial span") {
        const double whole = invPsiIntegral(0.5, 80.0);
        const double split = invPsiIntegral(0.5, 3.0) + invPsiIntegral(3.0, 80.0);
        REQUIRE(std::abs(whole - split) < 1e-10);
        REQUIRE(invPsiIntegral(4.2, 4.2) == 0.0);
    }
    SECTION("domain guards") {
        REQUIRE_THROWS_AS(invPsiIntegral(1e-13, 1.0), OutOfRange);
        REQUIRE_THROWS_AS(invPsiIntegral(2.0, 1.0), OutOfRange);
        REQUIRE_THROWS_AS(invPsiIntegralDirect(1e-13, 1.0), OutOfRange);
        REQUIRE_THROWS_AS(invPsiIntegralDirect(2.0, 1.0), OutOfRange);
    }
    SECTION("log-log growth: one unit per e-fold of ln, without bound") {
        // integral ds/psi from exp(exp(B-1)) to exp(exp(B)) -> 1 as B grows,
        // so the antiderivative is unbounded (the crux of the comparison).
        auto increment = [](double B) {
            return invPsiIntegral(1.0, std::exp(std::exp(B))) -
                   invPsiIntegral(1.0, std::exp(std::exp(B - 1.0)));
        };
        const double i1 = increment(1.0), i2 = increment(2.0), i3 = increment(3.0);
        REQUIRE(i1 > 0.85);
        REQUIRE(i1 < 1.05);
        REQUIRE(std::abs(i2 - 1.0) < 0.03);
        REQUIRE(std::abs(i3 - 1.0) < 0.03);
        REQUIRE(i2 > i1); // increments rise toward the unit rate
        REQUIRE(i3 > i2);
    }
}

TEST_CASE("integrateH solves the comparison ODE to tolerance",
          "[gronwall][ode]") {
    SECTION("separable identity on a smooth coefficient") {
        Vec t(33), G(33);
        for (size_t i = 0; i < t.size(); ++i) {
            t[i] = double(i) / 32.0;
            G[i] = 1.0 + 0.5 * std::sin(2.0 * M_PI * t[i]);
        }
        const double C = 2.0, h0 = 1.0;
        const GrowthSolution sol = integrateH(t, G, C, h0, 1e-9);
        REQUIRE(sol.richardson <= 1e-9);
        // dh/psi(h) = C G dt integrates to invPsi(h0, h(T)) = C int G.
        const double lhs = invPsiIntegral(h0, sol.h.back());
        const double rhs = C * trapezoid(t, G);
        REQUIRE(std::abs(lhs - rhs) < 1e-8 * rhs);
    }
    SECTION("random-coefficient properties") {
        std::mt19937 rng(12345);
        std::uniform_real_distribution<double> uT(0.5, 2.0), uG(0.0, 2.0),
            uC(0.1, 1.5), uH(0.5, 5.0);
        for (int rep = 0; rep < 100; ++rep) {
            const size_t M = 17;
            const double T = uT(rng);
            Vec t(M), G(M);
            for (size_t i = 0; i < M; ++i) {
                t[i] = T * double(i) / double(M - 1);
                G[i] = uG(rng);
            }
            double C = uC(rng);
            const double h0 = uH(rng);
            // Keep C int G <= 3 so h stays far from the double ceiling
            // (the ceiling grows like exp(exp(C int G))).
            const double tot = trapezoid(t, G);
            if (C * tot > 3.0) C = 3.0 / tot;

            const GrowthSolution sol = integrateH(t, G, C, h0, 1e-8);
            for (size_t k = 1; k < M; ++k)
                REQUIRE(sol.h[k] >= sol.h[k - 1]); // G >= 0 forces growth
            const double lhs = invPsiIntegral(h0, sol.h.back());
            CAPTURE(rep, C, h0, lhs);
            REQUIRE(std::abs(lhs - C * tot) <
                    1e-5 * std::max(1.0, std::abs(C * tot)));

            // Monotonicity in each input.
            if (rep % 10 == 0) {
                Vec G2 = G;
                for (double& g : G2) g += 0.3;
                REQUIRE(integrateH(t, G, 1.2 * C, h0, 1e-8).h.back() >=
                        sol.h.back());
                REQUIRE(integrateH(t, G, C, 1.5 * h0, 1e-8).h.back() >=
                        sol.h.back());
                REQUIRE(integrateH(t, G2, C, h0, 1e-8).h.back() >=
                        sol.h.back());
            }
        }
    }
    SECTION("overflow is reported, not returned") {
        const Vec t = {0.0, 1.0};
        const Vec G = {50.0, 50.0};
        REQUIRE_THROWS_AS(integrateH(t, G, 1.0, 1.0), NotConverged);
    }
    SECTION("input guards") {
        REQUIRE_THROWS_AS(integrateH(Vec{0.0}, Vec{1.0}, 1.0, 1.0), OutOfRange);
        REQUIRE_THROWS_AS(integrateH(Vec{0.0, 1.0}, Vec{1.0}, 1.0, 1.0),
                          OutOfRange);
        REQUIRE_THROWS_AS(integrateH(Vec{0.0, 0.0}, Vec{1.0, 1.0}, 1.0, 1.0),
                          OutOfRange);
        REQUIRE_THROWS_AS(integrateH(Vec{0.0, 1.0}, Vec{1.0, 1.0}, 1.0, -1.0),
                          OutOfRange);
    }
}

TEST_CASE("doubling time on the unit sphere", "[gronwall][doubling]") {
    // sup|Rm|(t) = 2 sqrt 3 / (1 - 4t) doubles at t = 1/8, so the scale-free
    // product is (1/8) * 2 sqrt 3 = sqrt 3 / 4.
    const DoublingCheck d = doublingCheck(testsup::sphereBlowup());
    REQUIRE(relErr(d.product, std::sqrt(3.0) / 4.0) < 0.01);
    REQUIRE(relErr(d.tDouble, 0.125) < 0.01);

    // A run whose curvature never doubles cannot be measured.
    REQUIRE_THROWS_AS(doublingCheck(testsup::sphereDense()), NotConverged);
    FlowTrajectory stub;
    stub.snaps.resize(1);
    REQUIRE_THROWS_AS(doublingCheck(stub), NotConverged);
}

TEST_CASE("mean-value witness is scale invariant", "[gronwall][meanvalue]") {
    const FlowTrajectory& traj = testsup::sphereBlowup();
    const MeanValueCheck m = meanValueCheck(traj);
    REQUIRE(relErr(m.c, std::sqrt(3.0) / 4.0) < 0.01);
    const double f0 = traj.snaps.front().supRm;
    const double T = traj.snaps.back().t;
    REQUIRE(relErr(m.C1, std::max(2.0 * f0, 2.0 * T * f0 * f0 / m.c)) < 1e-12);
    REQUIRE(m.witness > 0.0);
    REQUIRE(std::isfinite(m.witness));

    // The witness is built from parabolic-scale-invariant quantities: an
    // initial sphere of a different radius must reproduce it.
    StepControl ctl;
    ctl.qMax = 1e4;
    const FlowTrajectory small =
        run(initialRoundSphere(3, 0.8, 129), ctl, StopRule::untilBlowup());
    const MeanValueCheck ms = meanValueCheck(small);
    REQUIRE(ms.witness / m.witness > 0.9);
    REQUIRE(ms.witness / m.witness < 1.1);
}

TEST_CASE("extension verdict distinguishes blow-up from extendable flows",
          "[gronwall][verdict]") {
    const FlowTrajectory& traj = testsup::sphereBlowup();

    SECTION("blow-up: the log-weighted integral diverges") {
        const ExtensionVerdict v = extensionVerdict(traj, 1.0, 0.25);
        REQUIRE(v.GTotal > 100.0);
        REQUIRE(v.fit.law == GrowthLaw::LogLog);
        REQUIRE_FALSE(v.impliedFinite);
        REQUIRE(std::isinf(v.impliedSup));
        REQUIRE(v.verdict.find("diverges") != std::string::npos);
    }
    SECTION("a small constant yields a consistent finite ceiling") {
        const double C = 1e-3;
        const ExtensionVerdict v = extensionVerdict(traj, C, 0.25);
        REQUIRE(v.impliedFinite);
        const double h0 = traj.snaps.front().supRm;
        REQUIRE(v.impliedSup > h0);
        REQUIRE(std::abs(invPsiIntegral(h0, v.impliedSup) - C * v.GTotal) <
                1e-8);
    }
    SECTION("quiet flow: finite integral, extendable") {
        StepControl ctl;
        const FlowTrajectory quiet =
            run(initialRoundSphere(3, 1.0, 129), ctl, StopRule::untilTime(0.05));
        const ExtensionVerdict v = extensionVerdict(quiet, 1e-2, 0.25);
        REQUIRE(v.impliedFinite);
        REQUIRE(v.verdict.find("extends") != std::string::npos);
        // With C = 1 the same integral implies a ceiling beyond double
        // range: reported as out of range, never silently truncated.
        const ExtensionVerdict big = extensionVerdict(quiet, 1.0, 0.25);
        REQUIRE_FALSE(big.impliedFinite);
        REQUIRE(big.verdict.find("exceeds") != std::string::npos);
    }
    SECTION("C guard") {
        REQUIRE_THROWS_AS(extensionVerdict(traj, 0.0, 0.25), ConfigError);
    }
}
