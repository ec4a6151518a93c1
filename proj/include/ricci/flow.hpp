#pragma once

/// Ricci flow dg/dt = -2 Ric for rotationally symmetric metrics on S^n,
/// reduced to the warp profile (psi, phi).  At a material point (' = d/ds):
///
///     d phi / dt = phi'' - (n-2) (1 - phi'^2)/phi
///     d psi / dt = (n-1) (phi''/phi) psi
///
/// The engine integrates this system in the normalized-arclength gauge: the
/// grid coordinate is sigma = s / L(t), so psi == L(t) is spatially uniform
/// for all time and the arclength density can never degenerate.  The change
/// of gauge is a time-dependent diffeomorphism of the interval, so the
/// geometry evolves by exactly the reduced system above; the grid equations
/// pick up the tangential terms
///
///     dL/dt  = v(L),   w(sigma) = sigma dL/dt - v(sigma L),
///     v(s)   = (n-1) * integral_0^s (phi''/phi) ds'      (material stretch)
///
/// with w = 0 at both poles (they stay material points).  Evolving psi as a
/// per-node ODE in a fixed material coordinate is numerically treacherous:
/// psi has no spatial coupling, so near-pole errors in phi''/phi integrate
/// exponentially and destroy the pole regularity.  In this gauge the only
/// psi degree of freedom is the single integral-driven scalar L.
///
/// The warp factor itself is stepped through the power variable
///
///     V = phi^(n-1),   dV/dt |_sigma = V'' - (n-1)(n-2) phi^(n-3) + w V',
///
/// an identity of the reduced flow that cancels the axis-singular gradient
/// term: linearizing the phi-form about a smooth profile produces the
/// advection coefficient 2(n-2) phi'/phi ~ 1/s near the poles, whose wide
/// centered stencils carry spurious eigenvalues with positive real part of
/// size O(1/ds^2) (measured directly on the discrete Jacobian).  In V-form
/// the only nonlinearity is the zeroth-order sink, which is damping.
///
/// The gauge pipeline v -> w is the one numerically delicate piece: the
/// integrand phi''/phi divides stencil noise by s^2 near the poles, and fed
/// through the integral into the advection speed this produces spurious
/// positive Jacobian eigenvalues of size ~1/s_K^2, where s_K is the arclength
/// below which the quotient is suppressed.  Two measures keep that threshold
/// at the harmless physical O(1) scale independently of resolution (verified
/// on the discrete Jacobian spectrum):
///
///   * the integrand near each pole -- a window covering a fixed *fraction*
///     of the interval, never fewer than 4 cells -- is replaced by its even
///     quadratic extension in s^2 fitted just outside the window;
///   * between the windows the integral telescopes through the identity
///     phi''/phi = (phi'/phi)' + (phi'/phi)^2, which keeps its discrete
///     functional derivative pointwise-bounded like the continuum one
///     instead of accumulating stencil sums.
///
/// Material bookkeeping rides along inside the same RK4 state: for each
/// initial grid node j the engine tracks its current position sigMat[j] and
/// the Lagrangian accumulator F[j] = integral_0^t |Ric| dtau along its
/// world line.  Spatial derivatives are 4th-order parity-aware stencils
/// (direct second-derivative stencils: see deriv2Sym); time stepping is
/// classical RK4 under
///
///     dt = min( cflSafety * (min ds)^2 / 2,  curvatureSafety / sup|Rm| ).
///
/// Trajectories store snapshots at a fixed step cadence plus a geometric
/// cadence (every doubling of sup|Rm|), and always the initial and final
/// accepted states.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ricci/errors.hpp"
#include "ricci/numerics.hpp"
#include "ricci/profile.hpp"

namespace ricci {

struct StepControl {
    double cflSafety = 0.8;       ///< fraction of the diffusive limit (0, 1]
    double curvatureSafety = 0.1; ///< dt <= this / sup|Rm|
    double dtMin = 1e-13;         ///< below this, StepUnderflow
    double qMax = 1e6;            ///< stop when sup|Rm| reaches this ceiling
    double remeshThreshold = 4.0; ///< grid-density ratio that forces a resample
    double phiFloor = 1e-12;      ///< interior phi below this is a pinch
    int snapshotEvery = 256;      ///< fixed snapshot cadence in steps
    double poleSlopeTol = 0.05;   ///< admissibility drift tolerance
    /// Dense tail cadence: once sup|Rm| is within a factor tailSpan of qMax,
    /// also snapshot at every factor-2^{1/tailPerDoubling} curvature growth,
    /// so the last few doublings are resolved on a geometric ladder (the
    /// rescaled time window tau in [-1, 0] spans only a handful of steps).
    double tailSpan = 64.0;
    int tailPerDoubling = 16;
};

struct StopRule {
    enum class Kind { UntilTime, UntilBlowup };
    Kind kind = Kind::UntilBlowup;
    double tEnd = 0.0;

    static StopRule untilTime(double t) { return {Kind::UntilTime, t}; }
    static StopRule untilBlowup() { return {Kind::UntilBlowup, 0.0}; }
};

enum class StopReason { ReachedTime, CurvatureCeiling, StepUnderflow, PinchDetected };

inline const char* stopReasonName(StopReason r) {
    switch (r) {
        case StopReason::ReachedTime: return "reached-time";
        case StopReason::CurvatureCeiling: return "curvature-ceiling";
        case StopReason::StepUnderflow: return "step-underflow";
        case StopReason::PinchDetected: return "pinch-detected";
    }
    return "?";
}

struct Snapshot {
    double t = 0.0;
    WarpProfile profile;
    Vec material;  ///< per grid node: initial coordinate of the point now here
    Vec ricciTime; ///< per grid node: accumulated integral of |Ric| dt
    Vec matSigma;  ///< per initial node j: its current coordinate
    Vec matF;      ///< per initial node j: its Lagrangian |Ric| integral
    double supRm = 0.0;
    double supRic = 0.0;
    double argmaxS = 0.0; ///< arclength of the sup|Rm| node
    double volume = 0.0;
    double phiMin = 0.0; ///< minimum interior warp factor
    bool doubling = false; ///< triggered by a sup|Rm| doubling
    double kappa = std::numeric_limits<double>::quiet_NaN();
};

struct FlowTrajectory {
    int n = 3;
    StepControl control;
    StopReason stopReason = StopReason::ReachedTime;
    std::vector<Snapshot> snaps;
    size_t stepsTaken = 0;
    int remeshCount = 0;
    double transportError = 0.0;  ///< resampling error estimate (see remesh)
    double poleSlopeDrift = 0.0;  ///< worst pole-slope deviation at snapshots

    const Snapshot& front() const { return snaps.front(); }
    const Snapshot& back() const { return snaps.back(); }

    /// Index of the snapshot closest to time t.
    size_t nearestSnapshot(double t) const {
        size_t best = 0;
        double d = std::numeric_limits<double>::infinity();
        for (size_t k = 0; k < snaps.size(); ++k) {
            const double dk = std::abs(snaps[k].t - t);
            if (dk < d) { d = dk; best = k; }
        }
        return best;
    }
};

// ---------------------------------------------------------------------------
// Initial data
// ---------------------------------------------------------------------------

/// Round S^n of radius r0 on a uniform N-point grid.
inline WarpProfile initialRoundSphere(int n, double r0, size_t N) {
    if (n < 3) throw ConfigError("initialRoundSphere: n must be >= 3");
    if (!(r0 > 0.0)) throw ConfigError("initialRoundSphere: r0 must be positive");
    if (N < 9) throw ConfigError("initialRoundSphere: N must be >= 9");
    WarpProfile p;
    p.n = n;
    p.x.resize(N);
    p.psi.assign(N, M_PI * r0);
    p.phi.resize(N);
    for (size_t i = 0; i < N; ++i) {
        p.x[i] = double(i) / double(N - 1);
        p.phi[i] = r0 * std::sin(M_PI * p.x[i]);
    }
    p.phi.front() = 0.0;
    p.phi.back() = 0.0;
    return p;
}

namespace detail {
/// C-infinity step: 0 for nu <= 0, 1 for nu >= 1, strictly monotone between.
inline double smoothStep(double nu) {
    if (nu <= 0.0) return 0.0;
    if (nu >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / nu);
    const double b = std::exp(-1.0 / (1.0 - nu));
    return a / (a + b);
}
} // namespace detail

/// Reflection-symmetric dumbbell: two spherical caps of radius capRadius
/// joined by a catenoid neck of waist neckRadius.
///
/// Construction (left half; the right half is the mirror image).  With
/// R = capRadius, rho = neckRadius, the cap is the exact round hemisphere
/// phi = R sin(s/R) on [0, pi R/2]; the neck is the catenoid
/// phi = rho cosh((s - S/2)/rho), which climbs back to height R after
/// arclength h = rho acosh(R/rho).  The half-length is S/2 = pi R/2 + h, so
/// cap and catenoid meet with equal value R at the cap equator, and the two
/// branches are blended there by a C-infinity step over the first
/// neckWidth * h of the descent.  Both branches decrease on the overlap and
/// the catenoid lies below the cap, so the blend is monotone: max phi = R
/// exactly (at the cap equators) and min phi = rho exactly (at the center).
/// Pole smoothness is exact because the profile is an unmodified round cap
/// near each pole.
inline WarpProfile initialDumbbell(int n, double neckRadius, double capRadius,
                                   double neckWidth, size_t N) {
    if (n < 3) throw ConfigError("initialDumbbell: n must be >= 3");
    if (!(neckRadius > 0.0) || !(capRadius > 0.0) || !(neckWidth > 0.0))
        throw ConfigError("initialDumbbell: parameters must be positive");
    if (!(neckRadius < capRadius))
        throw ConfigError("initialDumbbell: neckRadius must be < capRadius");
    if (!(neckWidth < 1.0))
        throw ConfigError("initialDumbbell: neckWidth must be < 1");
    if (N < 9) throw ConfigError("initialDumbbell: N must be >= 9");

    const double R = capRadius, rho = neckRadius;
    const double h = rho * std::acosh(R / rho);
    const double half = 0.5 * M_PI * R + h;
    const double S = 2.0 * half;
    const double sEq = 0.5 * M_PI * R;

    auto phiOf = [&](double s) {
        if (s > half) s = S - s; // mirror
        if (s <= sEq) return R * std::sin(s / R);
        const double cap = R * std::sin(s / R);
        const double neck = rho * std::cosh((s - half) / rho);
        const double chi = detail::smoothStep((s - sEq) / (neckWidth * h));
        return (1.0 - chi) * cap + chi * neck;
    };

    WarpProfile p;
    p.n = n;
    p.x.resize(N);
    p.psi.assign(N, S);
    p.phi.resize(N);
    for (size_t i = 0; i < N; ++i) {
        p.x[i] = double(i) / double(N - 1);
        p.phi[i] = phiOf(S * p.x[i]);
    }
    p.phi.front() = 0.0;
    p.phi.back() = 0.0;
    return p;
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

namespace detail {

/// Number of cells in the axis window at each pole: a fixed fraction of the
/// interval, at least 4 cells, but small enough that both windows and their
/// fit sources stay well inside the grid.
inline size_t axisWindow(size_t N) {
    size_t K = static_cast<size_t>(std::ceil(0.05 * double(N - 1)));
    K = std::max<size_t>(K, 4);
    K = std::min(K, (N - 1) / 6);
    return std::max<size_t>(K, 1);
}

/// Even quadratic p(u) = c0 + c1 u + c2 u^2 in u = (x - x_pole)^2 through
/// the nodes K, K+1, K+2 counted from the pole.
struct AxisFit {
    double c0 = 0.0, c1 = 0.0, c2 = 0.0;
    double value(double u) const { return c0 + (c1 + c2 * u) * u; }
    double slope(double u) const { return c1 + 2.0 * c2 * u; }
};

inline AxisFit axisFit(const Vec& x, const Vec& f, size_t K, bool left) {
    const size_t N = x.size();
    double u[3], r[3];
    for (size_t m = 0; m < 3; ++m) {
        const size_t idx = left ? K + m : N - 1 - K - m;
        const double dx = left ? x[idx] - x.front() : x.back() - x[idx];
        u[m] = dx * dx;
        r[m] = f[idx];
    }
    AxisFit a;
    for (size_t m = 0; m < 3; ++m) {
        const size_t p1 = (m + 1) % 3, p2 = (m + 2) % 3;
        const double den = (u[m] - u[p1]) * (u[m] - u[p2]);
        a.c0 += r[m] * u[p1] * u[p2] / den;
        a.c1 -= r[m] * (u[p1] + u[p2]) / den;
        a.c2 += r[m] / den;
    }
    return a;
}

/// Overwrite f at the K nodes nearest each pole (poles included) with the
/// even quadratic extension fitted just outside the window.  No-op on grids
/// too small to hold both windows and their fit sources.
inline void windowAxisRatio(const Vec& x, Vec& f, size_t K) {
    const size_t N = x.size();
    if (3 * K + 2 >= N) return;
    for (bool left : {true, false}) {
        const AxisFit a = axisFit(x, f, K, left);
        for (size_t j = 0; j < K; ++j) {
            const size_t idx = left ? j : N - 1 - j;
            const double dx = left ? x[idx] - x.front() : x.back() - x[idx];
            f[idx] = a.value(dx * dx);
        }
    }
}

/// Per-state derivative bundle shared by the step-size rule, the flow RHS,
/// and the |Ric| accumulator.  kRad = -ratio; near the poles, ratio and kSph
/// carry the axis-window extension (raw quotients elsewhere).
struct FlowDerivs {
    Vec phiS, phiSS;
    Vec ratio; ///< phi''/phi with windowed pole neighborhoods
    Vec kSph;  ///< (1 - phi'^2)/phi^2 with windowed pole neighborhoods
    Vec normRic;
    double supRm = 0.0;
    double supRic = 0.0;
    size_t argmaxIdx = 0; ///< node of the sup|Rm| value
};

inline FlowDerivs flowDerivs(const WarpProfile& p) {
    const size_t N = p.size();
    const int n = p.n;
    FlowDerivs d;
    // Direct second derivative (see deriv2Sym) with the metric correction:
    //   phi_s  = phi_x / psi,   phi_ss = (phi_xx - (psi_x/psi) phi_x) / psi^2.
    const Vec phiX = deriv1Sym(p.x, p.phi, Parity::Odd);
    const Vec phiXX = deriv2Sym(p.x, p.phi, Parity::Odd);
    const Vec psiX = deriv1Sym(p.x, p.psi, Parity::Even);
    d.phiS.resize(N);
    d.phiSS.resize(N);
    for (size_t i = 0; i < N; ++i) {
        d.phiS[i] = phiX[i] / p.psi[i];
        d.phiSS[i] = (phiXX[i] - psiX[i] / p.psi[i] * phiX[i]) /
                     (p.psi[i] * p.psi[i]);
    }

    d.ratio.resize(N);
    d.kSph.resize(N);
    for (size_t i = 1; i + 1 < N; ++i) {
        if (!(p.phi[i] > 0.0) || !std::isfinite(p.phi[i]))
            throw SingularData("flow state: interior phi collapsed at index " +
                               std::to_string(i));
        d.ratio[i] = d.phiSS[i] / p.phi[i];
        d.kSph[i] = (1.0 - d.phiS[i] * d.phiS[i]) / (p.phi[i] * p.phi[i]);
    }
    const double xl1 = p.x[1] - p.x[0], xl2 = p.x[2] - p.x[0];
    d.ratio.front() = evenLimitAtPole(xl1, d.ratio[1], xl2, d.ratio[2]);
    const size_t M = N - 1;
    const double xr1 = p.x[M] - p.x[M - 1], xr2 = p.x[M] - p.x[M - 2];
    d.ratio.back() = evenLimitAtPole(xr1, d.ratio[M - 1], xr2, d.ratio[M - 2]);
    d.kSph.front() = -d.ratio.front();
    d.kSph.back() = -d.ratio.back();
    // Replace the hypersensitive quotients near the poles by their even
    // quadratic extensions (see the header comment); on grids too small to
    // window, the L'Hopital pole limits above remain in force.
    const size_t K = axisWindow(N);
    windowAxisRatio(p.x, d.ratio, K);
    windowAxisRatio(p.x, d.kSph, K);

    d.normRic.resize(N);
    for (size_t i = 0; i < N; ++i) {
        const double kr = -d.ratio[i], ks = d.kSph[i];
        const double lamRad = (n - 1) * kr;
        const double lamSph = kr + (n - 2) * ks;
        d.normRic[i] = std::sqrt(lamRad * lamRad + (n - 1) * lamSph * lamSph);
        const double rm2 =
            4.0 * (n - 1) * kr * kr + 2.0 * (n - 1) * (n - 2) * ks * ks;
        if (std::sqrt(rm2) > d.supRm) {
            d.supRm = std::sqrt(rm2);
            d.argmaxIdx = i;
        }
        d.supRic = std::max(d.supRic, d.normRic[i]);
        if (!std::isfinite(d.normRic[i]))
            throw SingularData("flow state: curvature not finite at index " +
                               std::to_string(i));
    }
    return d;
}

/// Material stretch v(sigma) = (n-1) integral_0^{sigma L} phi''/phi ds on
/// the grid, with the axis windows and mid-interval telescoping described in
/// the header comment.  v.back() is dL/dt.
///
/// Every segment uses the derivative-corrected trapezoid rule
///     integral ~ ds/2 (f0 + f1) - ds^2/12 (f1' - f0'),
/// which is 4th-order accurate while keeping the discrete functional
/// derivative pointwise (the corrections use only nodal identities):
///   * inside the windows, f = windowed ratio and f' comes from the fit
///     polynomial (zero at the poles by evenness);
///   * between them the ratio part telescopes exactly and the remaining
///     integrand is B^2 with B = phi'/phi, whose derivative is the identity
///     (B^2)' = 2B(ratio - B^2).
inline Vec stretchIntegral(const Vec& x, const Vec& phi, const FlowDerivs& d,
                           int n, double L) {
    const size_t N = x.size();
    const size_t K = axisWindow(N);
    const bool windowed = 3 * K + 2 < N;
    const size_t k0 = windowed ? K : 1;
    const size_t k1 = N - 1 - k0;

    // d.ratio already carries the window values; refit (idempotent on the
    // source nodes) to recover the polynomial for the derivative correction.
    AxisFit fitL, fitR;
    if (windowed) {
        fitL = axisFit(x, d.ratio, K, true);
        fitR = axisFit(x, d.ratio, K, false);
    }
    // d(ratio)/ds at a window node: u = dx^2 in grid coordinates, and both
    // chain-rule factors convert through the uniform metric ds = L dx.
    auto slopeWin = [&](size_t i, bool left) {
        if (!windowed) return 0.0;
        const double dx = left ? x[i] - x.front() : x.back() - x[i];
        const double sgn = left ? 1.0 : -1.0;
        const AxisFit& a = left ? fitL : fitR;
        return sgn * 2.0 * dx * a.slope(dx * dx) / L;
    };

    Vec v(N, 0.0);
    auto windowSeg = [&](size_t i, bool left) {
        const double ds = L * (x[i] - x[i - 1]);
        v[i] = v[i - 1] + 0.5 * ds * (d.ratio[i] + d.ratio[i - 1]) -
               ds * ds / 12.0 * (slopeWin(i, left) - slopeWin(i - 1, left));
    };
    for (size_t i = 1; i <= k0; ++i) windowSeg(i, true);
    double b0 = d.phiS[k0] / phi[k0];
    double gp0 = 2.0 * b0 * (d.ratio[k0] - b0 * b0);
    for (size_t i = k0 + 1; i <= k1; ++i) {
        const double b1 = d.phiS[i] / phi[i];
        const double gp1 = 2.0 * b1 * (d.ratio[i] - b1 * b1);
        const double ds = L * (x[i] - x[i - 1]);
        v[i] = v[i - 1] + (b1 - b0) + 0.5 * ds * (b1 * b1 + b0 * b0) -
               ds * ds / 12.0 * (gp1 - gp0);
        b0 = b1;
        gp0 = gp1;
    }
    for (size_t i = k1 + 1; i < N; ++i) windowSeg(i, false);
    for (size_t i = 0; i < N; ++i) v[i] *= double(n - 1);
    return v;
}

} // namespace detail

/// One-step integrator with cached state derivatives.  step() advances by a
/// single RK4 step under the control rule and returns the dt taken.
class FlowEngine {
public:
    FlowEngine(WarpProfile p0, StepControl ctl = {})
        : ctl_(ctl) {
        validateProfile(p0, {ctl_.poleSlopeTol});
        n_ = p0.n;
        // Exact reparametrization to the normalized-arclength gauge: node i
        // moves to coordinate s_i / L, keeping its phi value.  No resampling
        // error is introduced; a strongly non-uniform input grid stays
        // non-uniform until remesh() resamples it.
        const Vec s = arclength(p0);
        L_ = s.back();
        x_.resize(p0.size());
        for (size_t i = 0; i < p0.size(); ++i) x_[i] = s[i] / L_;
        x_.front() = 0.0;
        x_.back() = 1.0;
        phi_ = p0.phi;
        V_.resize(phi_.size());
        for (size_t i = 0; i < phi_.size(); ++i)
            V_[i] = std::pow(phi_[i], double(n_ - 1));
        sigMat_ = x_;
        mat0_ = x_;
        fMat_.assign(p0.size(), 0.0);
        cur_ = detail::flowDerivs(profile());
        if (gridDensityRatio() > ctl_.remeshThreshold) remesh();
    }

    WarpProfile profile() const {
        WarpProfile p;
        p.n = n_;
        p.x = x_;
        p.psi.assign(x_.size(), L_);
        p.phi = phi_;
        return p;
    }
    double time() const { return t_; }
    double length() const { return L_; }
    double supRmEstimate() const { return cur_.supRm; }
    double supRicEstimate() const { return cur_.supRic; }
    double argmaxArclength() const { return L_ * x_[cur_.argmaxIdx]; }
    const Vec& materialSigma() const { return sigMat_; }
    const Vec& materialLabels() const { return mat0_; }
    const Vec& materialF() const { return fMat_; }
    int remeshCount() const { return remeshCount_; }
    double transportError() const { return transportError_; }

    /// Ratio of the widest to the narrowest grid cell.
    double gridDensityRatio() const {
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (size_t i = 0; i + 1 < x_.size(); ++i) {
            const double dx = x_[i + 1] - x_[i];
            lo = std::min(lo, dx);
            hi = std::max(hi, dx);
        }
        return hi / lo;
    }

    /// Step-size rule for the current state.
    double nextDt() const {
        double minDx = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i + 1 < x_.size(); ++i)
            minDx = std::min(minDx, x_[i + 1] - x_[i]);
        const double minDs = L_ * minDx;
        const double diffusive = ctl_.cflSafety * minDs * minDs / 2.0;
        const double reactive =
            cur_.supRm > 0.0 ? ctl_.curvatureSafety / cur_.supRm
                             : std::numeric_limits<double>::infinity();
        return std::min(diffusive, reactive);
    }

    /// Advance by one RK4 step of size dt (default: the control rule).
    /// Throws StepUnderflow / SingularData; on throw the state is unchanged.
    double step(double dtOverride = -1.0) {
        const double dt = dtOverride > 0.0 ? dtOverride : nextDt();
        if (!(dt > 0.0)) throw StepUnderflow("flow step: nonpositive dt");
        if (dtOverride <= 0.0 && dt < ctl_.dtMin)
            throw StepUnderflow("flow step: dt " + std::to_string(dt) +
                                " fell below dtMin");

        const State y0{V_, L_, sigMat_, fMat_};
        const Rates k1 = rates(y0, &cur_);
        const Rates k2 = rates(advanced(y0, k1, 0.5 * dt), nullptr);
        const Rates k3 = rates(advanced(y0, k2, 0.5 * dt), nullptr);
        const Rates k4 = rates(advanced(y0, k3, dt), nullptr);

        State y = y0;
        const size_t N = x_.size();
        for (size_t i = 0; i < N; ++i) {
            y.V[i] += dt / 6.0 * (k1.dV[i] + 2.0 * k2.dV[i] +
                                  2.0 * k3.dV[i] + k4.dV[i]);
            y.sig[i] += dt / 6.0 * (k1.dsig[i] + 2.0 * k2.dsig[i] +
                                    2.0 * k3.dsig[i] + k4.dsig[i]);
            y.f[i] += dt / 6.0 * (k1.df[i] + 2.0 * k2.df[i] +
                                  2.0 * k3.df[i] + k4.df[i]);
        }
        y.L += dt / 6.0 * (k1.dL + 2.0 * k2.dL + 2.0 * k3.dL + k4.dL);

        y.V.front() = 0.0; // poles are fixed points of the reduced flow
        y.V.back() = 0.0;
        y.sig.front() = 0.0;
        y.sig.back() = 1.0;
        if (!(y.L > 0.0) || !std::isfinite(y.L))
            throw SingularData("flow step: total length degenerated");
        const double vFloor = std::pow(ctl_.phiFloor, double(n_ - 1));
        for (size_t i = 1; i + 1 < N; ++i) {
            if (!std::isfinite(y.V[i]))
                throw SingularData("flow step: state not finite after step");
            if (y.V[i] < vFloor)
                throw SingularData("flow step: neck pinch at node " +
                                   std::to_string(i));
        }

        Vec phiNew = recoverPhi(y.V);
        detail::FlowDerivs next = detail::flowDerivs(
            assembledPhi(phiNew, y.L)); // throws if degenerate
        V_ = std::move(y.V);
        phi_ = std::move(phiNew);
        L_ = y.L;
        sigMat_ = std::move(y.sig);
        fMat_ = std::move(y.f);
        cur_ = std::move(next);
        t_ += dt;
        return dt;
    }

    /// Resample to a uniform grid with monotone cubics if the cell-size
    /// ratio exceeds the threshold.  Returns true if a resample happened.
    /// (In this gauge psi is uniform by construction, so arclength density
    /// can only degenerate through an initially clustered grid.)
    bool maybeRemesh() {
        if (gridDensityRatio() <= ctl_.remeshThreshold) return false;
        remesh();
        return true;
    }

private:
    struct State {
        Vec V; ///< phi^(n-1) at grid nodes
        double L;
        Vec sig; ///< material node positions
        Vec f;   ///< material |Ric| accumulators
    };
    struct Rates {
        Vec dV;
        double dL;
        Vec dsig, df;
    };

    WarpProfile assembledPhi(const Vec& phi, double L) const {
        WarpProfile p;
        p.n = n_;
        p.x = x_;
        p.psi.assign(x_.size(), L);
        p.phi = phi;
        return p;
    }

    /// phi = V^(1/(n-1)); throws SingularData on a nonpositive interior V.
    Vec recoverPhi(const Vec& V) const {
        const size_t N = V.size();
        Vec phi(N);
        phi.front() = 0.0;
        phi.back() = 0.0;
        const double inv = 1.0 / double(n_ - 1);
        for (size_t i = 1; i + 1 < N; ++i) {
            if (!(V[i] > 0.0) || !std::isfinite(V[i]))
                throw SingularData(
                    "flow state: interior warp power collapsed at index " +
                    std::to_string(i));
            phi[i] = n_ == 3 ? std::sqrt(V[i]) : std::pow(V[i], inv);
        }
        return phi;
    }

    /// Parity of V = phi^(n-1) about the poles.
    Parity parityV() const {
        return (n_ - 1) % 2 == 0 ? Parity::Even : Parity::Odd;
    }

    static State advanced(const State& y, const Rates& r, double h) {
        State out = y;
        const size_t N = y.V.size();
        for (size_t i = 0; i < N; ++i) {
            out.V[i] += h * r.dV[i];
            out.sig[i] += h * r.dsig[i];
            out.f[i] += h * r.df[i];
        }
        out.L += h * r.dL;
        return out;
    }

    /// Gauge-corrected rates in the V variable.  If reuse is non-null it is
    /// taken as the derivative bundle of the input state (the cached bundle
    /// of the accepted state).
    Rates rates(const State& y, const detail::FlowDerivs* reuse) const {
        const Vec phi = recoverPhi(y.V);
        const detail::FlowDerivs d =
            reuse ? *reuse : detail::flowDerivs(assembledPhi(phi, y.L));
        const size_t N = x_.size();
        const int n = n_;
        // Material stretch integral v(s) and tangential grid speed w.
        const Vec v = detail::stretchIntegral(x_, phi, d, n, y.L);
        const double Ldot = v.back();
        Vec w(N);
        for (size_t i = 0; i < N; ++i) w[i] = x_[i] * Ldot - v[i];
        w.front() = 0.0;
        w.back() = 0.0;

        const Vec vX = derivSym(x_, y.V, parityV(), 1);
        const Vec vXX = derivSym(x_, y.V, parityV(), 2);
        const double L2 = y.L * y.L;

        Rates r;
        r.dV.resize(N);
        r.dsig.resize(N);
        r.df.resize(N);
        // The material positions y.sig are monotone, so locate each query
        // segment with a marching index instead of a per-node binary search.
        size_t seg = 0;
        for (size_t i = 0; i < N; ++i) {
            const double sink =
                n == 3 ? 1.0 : std::pow(phi[i], double(n - 3));
            r.dV[i] = vXX[i] / L2 - double((n - 1) * (n - 2)) * sink +
                      w[i] * vX[i] / y.L;
            const double q = y.sig[i];
            if (q <= x_.front()) {
                r.dsig[i] = -w.front() / y.L;
                r.df[i] = d.normRic.front();
            } else if (q >= x_.back()) {
                r.dsig[i] = -w.back() / y.L;
                r.df[i] = d.normRic.back();
            } else {
                while (seg + 2 < N && x_[seg + 1] <= q) ++seg;
                while (seg > 0 && x_[seg] > q) --seg;
                const double u = (q - x_[seg]) / (x_[seg + 1] - x_[seg]);
                r.dsig[i] = -((1.0 - u) * w[seg] + u * w[seg + 1]) / y.L;
                r.df[i] = (1.0 - u) * d.normRic[seg] + u * d.normRic[seg + 1];
            }
        }
        r.dV.front() = 0.0;
        r.dV.back() = 0.0;
        r.dsig.front() = 0.0;
        r.dsig.back() = 0.0;
        r.dL = Ldot;
        return r;
    }

    void remesh() {
        const size_t N = x_.size();
        const MonotoneCubic phiOfX(x_, phi_);
        Vec xNew(N), phiNew(N), phiLin(N);
        for (size_t i = 0; i < N; ++i) {
            xNew[i] = double(i) / double(N - 1);
            phiNew[i] = phiOfX(xNew[i]);
            phiLin[i] = interpLinear(x_, phi_, xNew[i]);
        }
        phiNew.front() = 0.0;
        phiNew.back() = 0.0;

        // Transport error proxy: cubic vs linear resampling, relative scale.
        double scale = 1e-300;
        for (double p : phi_) scale = std::max(scale, std::abs(p));
        for (size_t i = 0; i < N; ++i)
            transportError_ = std::max(
                transportError_, std::abs(phiNew[i] - phiLin[i]) / scale);

        x_ = std::move(xNew);
        phi_ = std::move(phiNew);
        V_.resize(phi_.size());
        for (size_t i = 0; i < phi_.size(); ++i)
            V_[i] = std::pow(phi_[i], double(n_ - 1));
        cur_ = detail::flowDerivs(profile());
        ++remeshCount_;
    }

    int n_ = 3;
    StepControl ctl_;
    Vec x_;   ///< grid coordinates in [0, 1] (arclength fractions)
    Vec phi_; ///< warp factor at grid nodes
    Vec V_;   ///< phi^(n-1) at grid nodes (the stepped variable)
    double L_ = 0.0;
    double t_ = 0.0;
    Vec sigMat_; ///< current coordinate of each initial node
    Vec mat0_;   ///< material labels: coordinates at construction time
    Vec fMat_;   ///< Lagrangian |Ric| integral of each initial node
    detail::FlowDerivs cur_;
    int remeshCount_ = 0;
    double transportError_ = 0.0;
};

// ---------------------------------------------------------------------------
// Trajectory driver
// ---------------------------------------------------------------------------

namespace detail {
inline Snapshot makeSnapshot(const FlowEngine& eng, bool doubling) {
    Snapshot s;
    s.t = eng.time();
    s.profile = eng.profile();
    s.matSigma = eng.materialSigma();
    s.matF = eng.materialF();
    // Grid-sampled views of the material data: invert the (monotone)
    // material map at the grid nodes.
    const size_t N = s.profile.size();
    const Vec& x = s.profile.x;
    const Vec& m0 = eng.materialLabels();
    s.material.resize(N);
    s.ricciTime.resize(N);
    for (size_t i = 0; i < N; ++i) {
        s.material[i] = interpLinear(s.matSigma, m0, x[i]);
        s.ricciTime[i] = interpLinear(s.matSigma, s.matF, x[i]);
    }
    // Engine diagnostics, not the raw-quotient curvature pipeline: near the
    // poles the latter amplifies harmless nodal noise on flowing data.
    s.supRm = eng.supRmEstimate();
    s.supRic = eng.supRicEstimate();
    s.argmaxS = eng.argmaxArclength();
    s.volume = volume(s.profile);
    double pm = std::numeric_limits<double>::infinity();
    for (size_t i = 1; i + 1 < N; ++i)
        pm = std::min(pm, s.profile.phi[i]);
    s.phiMin = pm;
    s.doubling = doubling;
    return s;
}
} // namespace detail

/// Run the flow until the stop rule fires.  Step-level failures become stop
/// reasons, never escapes: the trajectory always ends with the last accepted
/// state.
inline FlowTrajectory run(WarpProfile p0, StepControl ctl, StopRule stop) {
    FlowEngine eng(std::move(p0), ctl);
    FlowTrajectory traj;
    traj.n = eng.profile().n;
    traj.control = ctl;

    auto recordDrift = [&](const Snapshot& s) {
        const Vec slope = warpSlope(s.profile);
        traj.poleSlopeDrift =
            std::max({traj.poleSlopeDrift, std::abs(slope.front() - 1.0),
                      std::abs(slope.back() + 1.0)});
    };

    traj.remeshCount = eng.remeshCount();
    traj.snaps.push_back(detail::makeSnapshot(eng, false));
    recordDrift(traj.snaps.back());
    double doublingRef = traj.snaps.front().supRm;
    double tailMark = 0.0;
    int sinceSnapshot = 0;
    bool snapshotIsCurrent = true;

    const double tiny = 1e-15;
    while (true) {
        if (stop.kind == StopRule::Kind::UntilTime &&
            eng.time() >= stop.tEnd * (1.0 - tiny) - tiny) {
            traj.stopReason = StopReason::ReachedTime;
            break;
        }
        if (eng.supRmEstimate() >= ctl.qMax) {
            traj.stopReason = StopReason::CurvatureCeiling;
            break;
        }
        double dtOverride = -1.0;
        if (stop.kind == StopRule::Kind::UntilTime) {
            const double remain = stop.tEnd - eng.time();
            if (eng.nextDt() >= remain) dtOverride = remain;
        }
        try {
            eng.step(dtOverride);
        } catch (const SingularData&) {
            traj.stopReason = StopReason::PinchDetected;
            break;
        } catch (const StepUnderflow&) {
            traj.stopReason = StopReason::StepUnderflow;
            break;
        }
        ++traj.stepsTaken;
        ++sinceSnapshot;
        snapshotIsCurrent = false;

        const double q = eng.supRmEstimate();
        const bool doubled = q >= 2.0 * doublingRef;
        bool tail = false;
        if (ctl.tailPerDoubling > 0 && q * ctl.tailSpan >= ctl.qMax &&
            q >= tailMark) {
            tail = true;
            tailMark = q * std::pow(2.0, 1.0 / double(ctl.tailPerDoubling));
        }
        if (doubled || tail || sinceSnapshot >= ctl.snapshotEvery) {
            traj.snaps.push_back(detail::makeSnapshot(eng, doubled));
            recordDrift(traj.snaps.back());
            if (doubled) doublingRef = traj.snaps.back().supRm;
            sinceSnapshot = 0;
            snapshotIsCurrent = true;
        }
    }
    if (!snapshotIsCurrent) {
        traj.snaps.push_back(detail::makeSnapshot(eng, false));
        recordDrift(traj.snaps.back());
    }
    traj.remeshCount = eng.remeshCount();
    traj.transportError = eng.transportError();
    return traj;
}

// ---------------------------------------------------------------------------
// Singular-time estimation
// ---------------------------------------------------------------------------

/// Least-squares fit of 1/sup|Rm| ~ slope * (T - t) over the final window of
/// curvature growth (snapshots with sup|Rm| >= max/windowFactor).
struct Type1Fit {
    double T = 0.0;         ///< estimated singular time
    double slope = 0.0;     ///< d(1/sup|Rm|)/d(T-t)
    double residual = 0.0;  ///< RMS fit residual / mean(1/sup|Rm|)
    bool converged = false; ///< residual below tolerance (Type-I consistent)
};

inline Type1Fit estimateSingularTime(const FlowTrajectory& traj,
                                     double windowFactor = 10.0,
                                     double residualTol = 0.05) {
    if (traj.stopReason != StopReason::CurvatureCeiling &&
        traj.stopReason != StopReason::PinchDetected)
        throw NotConverged(
            "estimateSingularTime: trajectory stopped before blow-up (" +
            std::string(stopReasonName(traj.stopReason)) + ")");
    const double qEnd = traj.back().supRm;
    Vec t, y;
    for (const auto& s : traj.snaps) {
        if (s.supRm >= qEnd / windowFactor && s.supRm > 0.0) {
            t.push_back(s.t);
            y.push_back(1.0 / s.supRm);
        }
    }
    if (t.size() < 4)
        throw NotConverged("estimateSingularTime: too few snapshots in the "
                           "blow-up window");
    const LineFit fit = fitLine(t, y); // y = -slope_t * t + slope_t * T
    if (!(fit.slope < 0.0))
        throw NotConverged("estimateSingularTime: 1/sup|Rm| not decreasing");
    Type1Fit out;
    out.slope = -fit.slope;
    out.T = fit.intercept / out.slope;
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= y.size();
    out.residual = fit.rmsResidual / mean;
    out.converged = out.residual <= residualTol;
    return out;
}

} // namespace ricci
