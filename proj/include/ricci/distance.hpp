#pragma once

/// Geodesic distance on a rotationally symmetric S^n, reduced to two
/// dimensions.
///
/// Any two points of (S^n, ds^2 + phi^2 g_round) lie in a totally geodesic
/// 2-sphere of revolution (span the meridian through both cross-section
/// directions), so distances depend only on the two arclength coordinates and
/// the great-circle angle alpha in [0, pi] between the directions.  We solve
/// the eikonal equation |grad u| = 1 for the 2d metric
///
///     ds^2 + phi(s)^2 dalpha^2     on [0, L] x [0, pi]
///
/// with a first-order fast-marching method.  The alpha = 0 and alpha = pi
/// edges are reflecting (the even extension reproduces the full surface of
/// revolution when the source sits on the axis, which is how all public
/// entry points place it), and each pole row collapses to a single node
/// connected radially to every direction of the neighboring row.

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "ricci/errors.hpp"
#include "ricci/numerics.hpp"
#include "ricci/profile.hpp"

namespace ricci {

/// Distance field u(s, alpha) from a source on the axis at arclength sSource.
class DistanceField {
public:
    DistanceField(const WarpProfile& p, double sSource, size_t nAlpha = 193)
        : s_(arclength(p)), phi_(p.phi), nAlpha_(nAlpha) {
        const double L = s_.back();
        if (!(sSource >= 0.0 && sSource <= L))
            throw OutOfRange("DistanceField: source arclength outside [0, L]");
        if (nAlpha_ < 9) throw OutOfRange("DistanceField: nAlpha too small");
        alpha_.resize(nAlpha_);
        for (size_t j = 0; j < nAlpha_; ++j)
            alpha_[j] = M_PI * double(j) / double(nAlpha_ - 1);
        march(sSource);
    }

    double length() const { return s_.back(); }
    const Vec& rows() const { return s_; }
    const Vec& cols() const { return alpha_; }

    /// Node value (pole rows hold one value replicated across columns).
    double at(size_t i, size_t j) const { return u_[i * nAlpha_ + j]; }

    /// Bilinear interpolation at (s, alpha).
    double eval(double s, double alpha) const {
        const double L = s_.back();
        if (!(s >= -1e-12 && s <= L + 1e-12))
            throw OutOfRange("DistanceField::eval: s outside [0, L]");
        if (!(alpha >= -1e-12 && alpha <= M_PI + 1e-12))
            throw OutOfRange("DistanceField::eval: alpha outside [0, pi]");
        s = std::clamp(s, 0.0, L);
        alpha = std::clamp(alpha, 0.0, M_PI);
        size_t i = std::upper_bound(s_.begin(), s_.end(), s) - s_.begin();
        i = std::clamp<size_t>(i, 1, s_.size() - 1);
        const double ts = (s - s_[i - 1]) / (s_[i] - s_[i - 1]);
        const double dal = alpha_[1] - alpha_[0];
        size_t j = std::min<size_t>(nAlpha_ - 2, size_t(alpha / dal));
        const double ta = (alpha - alpha_[j]) / dal;
        const double v0 = (1 - ta) * at(i - 1, j) + ta * at(i - 1, j + 1);
        const double v1 = (1 - ta) * at(i, j) + ta * at(i, j + 1);
        return (1 - ts) * v0 + ts * v1;
    }

private:
    static constexpr double kFar = std::numeric_limits<double>::infinity();

    size_t idx(size_t i, size_t j) const { return i * nAlpha_ + j; }
    bool isPole(size_t i) const { return i == 0 || i + 1 == s_.size(); }

    void march(double sSource) {
        const size_t ns = s_.size(), na = nAlpha_;
        u_.assign(ns * na, kFar);
        std::vector<char> accepted(ns * na, 0);
        // Min-heap ordered by (value, node) for deterministic tie-breaking.
        using QE = std::pair<double, size_t>;
        std::priority_queue<QE, std::vector<QE>, std::greater<QE>> heap;

        auto push = [&](size_t k, double v) {
            if (v < u_[k]) {
                u_[k] = v;
                heap.emplace(v, k);
            }
        };

        // Seed: near-exact local distances in a small neighborhood of the
        // source (removes the O(h) point-source error of fast marching).
        const double dal = alpha_[1] - alpha_[0];
        const double phiSrc = interpLinear(s_, phi_, sSource);
        for (size_t i = 0; i < ns; ++i) {
            const double dsAx = std::abs(s_[i] - sSource);
            const double phiMid = 0.5 * (phi_[i] + phiSrc);
            const double dsLoc = std::max(
                i > 0 ? s_[i] - s_[i - 1] : 0.0,
                i + 1 < ns ? s_[i + 1] - s_[i] : 0.0);
            const double seedRadius = 4.0 * std::max(dsLoc, phi_[i] * dal);
            for (size_t j = 0; j < na; ++j) {
                const double flat = std::hypot(dsAx, phiMid * alpha_[j]);
                if (flat <= seedRadius) push(idx(i, j), flat);
                if (isPole(i)) break; // single node per pole row
            }
        }

        while (!heap.empty()) {
            const auto [v, k] = heap.top();
            heap.pop();
            if (accepted[k] || v > u_[k]) continue;
            accepted[k] = 1;
            const size_t i = k / na, j = k % na;
            if (isPole(i)) {
                // Replicate across the (virtual) pole row and update the
                // neighbor row radially.
                for (size_t jj = 0; jj < na; ++jj) u_[idx(i, jj)] = v;
                const size_t in = (i == 0) ? 1 : ns - 2;
                for (size_t jj = 0; jj < na; ++jj)
                    if (!accepted[idx(in, jj)]) update(in, jj, push);
                continue;
            }
            if (i > 0 && !isPole(i - 1) && !accepted[idx(i - 1, j)])
                update(i - 1, j, push);
            if (i + 1 < ns && !isPole(i + 1) && !accepted[idx(i + 1, j)])
                update(i + 1, j, push);
            if (i > 0 && isPole(i - 1) && !accepted[idx(i - 1, 0)])
                updatePole(i - 1, push);
            if (i + 1 < ns && isPole(i + 1) && !accepted[idx(i + 1, 0)])
                updatePole(i + 1, push);
            if (j > 0 && !accepted[idx(i, j - 1)]) update(i, j - 1, push);
            if (j + 1 < na && !accepted[idx(i, j + 1)]) update(i, j + 1, push);
        }
    }

    template <class Push>
    void updatePole(size_t i, Push&& push) {
        const size_t ns = s_.size();
        const size_t in = (i == 0) ? 1 : ns - 2;
        const double h = std::abs(s_[in] - s_[i]);
        double best = kFar;
        for (size_t j = 0; j < nAlpha_; ++j)
            best = std::min(best, u_[idx(in, j)] + h);
        if (best < kFar) push(idx(i, 0), best);
    }

    /// Upwind eikonal update at interior node (i, j).
    template <class Push>
    void update(size_t i, size_t j, Push&& push) {
        const size_t ns = s_.size();
        const double dal = alpha_[1] - alpha_[0];

        // Axis direction: nearest valid neighbor value with its spacing
        // (pole rows participate through their single stored value).
        double va = kFar, ha = 1.0;
        if (i > 0 && u_[idx(i - 1, isPole(i - 1) ? 0 : j)] < va) {
            va = u_[idx(i - 1, isPole(i - 1) ? 0 : j)];
            ha = s_[i] - s_[i - 1];
        }
        if (i + 1 < ns && u_[idx(i + 1, isPole(i + 1) ? 0 : j)] < va) {
            va = u_[idx(i + 1, isPole(i + 1) ? 0 : j)];
            ha = s_[i + 1] - s_[i];
        }
        // Angular direction.
        double vb = kFar;
        const double hb = std::max(phi_[i] * dal, 1e-300);
        if (j > 0) vb = std::min(vb, u_[idx(i, j - 1)]);
        if (j + 1 < nAlpha_) vb = std::min(vb, u_[idx(i, j + 1)]);

        double cand = kFar;
        if (va < kFar && vb < kFar) {
            const double ia = 1.0 / (ha * ha), ib = 1.0 / (hb * hb);
            const double bterm = va * ia + vb * ib;
            const double a = ia + ib;
            const double c = va * va * ia + vb * vb * ib - 1.0;
            const double disc = bterm * bterm - a * c;
            if (disc >= 0.0) {
                const double root = (bterm + std::sqrt(disc)) / a;
                if (root >= std::max(va, vb)) cand = root;
            }
        }
        if (cand == kFar) {
            if (va < kFar) cand = std::min(cand, va + ha);
            if (vb < kFar) cand = std::min(cand, vb + hb);
        }
        if (cand < kFar) push(idx(i, j), cand);
    }

    Vec s_, phi_, alpha_;
    size_t nAlpha_;
    Vec u_;
};

/// Reduced-coordinate point: arclength s and direction angle alpha in [0, pi].
struct ReducedPoint {
    double s = 0.0;
    double alpha = 0.0;
};

/// Geodesic distance between two points given in reduced coordinates.  Only
/// the angle between the two directions matters, so the field is marched from
/// (a.s, 0) and read at (b.s, |a.alpha - b.alpha|); symmetry in (a, b) holds
/// to grid accuracy.
inline double geodesicDistanceReduced(const WarpProfile& p, ReducedPoint a,
                                      ReducedPoint b, size_t nAlpha = 193) {
    for (const auto& q : {a, b}) {
        if (!(q.alpha >= 0.0 && q.alpha <= M_PI))
            throw OutOfRange("geodesicDistanceReduced: alpha outside [0, pi]");
    }
    const DistanceField field(p, a.s, nAlpha);
    return field.eval(b.s, std::abs(a.alpha - b.alpha));
}

} // namespace ricci
