#pragma once

// f(s) = a + b*s + c*exp(lambda*s): the shape of every quantity (output voltage,
// amplifier drive, threshold distance) along one closed-form piece. f' is
// monotone, so f has at most one stationary point and at most two roots.

#include "stmeta/integrator.hpp"

#include <cmath>
#include <optional>

namespace stmeta::detail {

template <class Real>
struct ExpLinear {
    Real a = 0;
    Real b = 0;
    Real c = 0;
    Real lambda = 0;

    Real operator()(Real s) const {
        if (c == 0) return a + b * s;
        return a + b * s + c * std::exp(lambda * s);
    }

    Real derivative(Real s) const {
        if (c == 0) return b;
        return b + c * lambda * std::exp(lambda * s);
    }

    /// alpha * f + beta
    ExpLinear affine(Real alpha, Real beta) const {
        return {alpha * a + beta, alpha * b, alpha * c, lambda};
    }

    std::optional<Real> stationary_point() const {
        if (c == 0 || lambda == 0 || b == 0) return std::nullopt;
        const Real ratio = -b / (c * lambda);
        if (!(ratio > 0)) return std::nullopt;
        return std::log(ratio) / lambda;
    }
};

/// Splits [0, s_end] into at most two intervals on which f is monotone.
template <class Real>
int monotone_breakpoints(const ExpLinear<Real>& f, Real s_end, Real (&pts)[3]) {
    pts[0] = 0;
    if (auto s = f.stationary_point(); s && *s > 0 && *s < s_end) {
        pts[1] = *s;
        pts[2] = s_end;
        return 3;
    }
    pts[1] = s_end;
    return 2;
}

/// Smallest s in [0, s_end] at which g leaves its interior ({g >= 0} when closed,
/// {g > 0} otherwise), refined by bisection to s_tol and reported on the exterior
/// side. A start marginally outside but heading inward is treated as inside.
template <class Real>
std::optional<Real> first_exit(const ExpLinear<Real>& g, Real s_end, bool closed, Real s_tol) {
    auto exterior = [closed](Real x) { return closed ? x < 0 : x <= 0; };
    Real pts[3];
    const int n = monotone_breakpoints(g, s_end, pts);
    int first = 0;
    if (exterior(g(Real(0)))) {
        if (g.derivative(Real(0)) > 0 && !exterior(g(pts[1]))) {
            first = 1;
        } else {
            return Real(0);
        }
    }
    for (int i = first; i + 1 < n; ++i) {
        Real lo = pts[i];
        Real hi = pts[i + 1];
        if (!exterior(g(hi))) continue;
        if (exterior(g(lo))) return lo;
        while (hi - lo > s_tol) {
            const Real mid = lo + (hi - lo) / 2;
            if (!(mid > lo && mid < hi)) break;
            (exterior(g(mid)) ? hi : lo) = mid;
        }
        return hi;
    }
    return std::nullopt;
}

/// Calls cb(s, direction) for each strict sign change of f in (0, s_end].
template <class Real, class Callback>
void for_each_crossing(const ExpLinear<Real>& f, Real s_end, Real s_tol, Callback&& cb) {
    Real pts[3];
    const int n = monotone_breakpoints(f, s_end, pts);
    for (int i = 0; i + 1 < n; ++i) {
        const Real f0 = f(pts[i]);
        const Real f1 = f(pts[i + 1]);
        const bool rising = f0 < 0 && f1 >= 0;
        const bool falling = f0 > 0 && f1 <= 0;
        if (!rising && !falling) continue;
        auto crossed = [&](Real x) { return rising ? x >= 0 : x <= 0; };
        Real lo = pts[i];
        Real hi = pts[i + 1];
        while (hi - lo > s_tol) {
            const Real mid = lo + (hi - lo) / 2;
            if (!(mid > lo && mid < hi)) break;
            (crossed(f(mid)) ? hi : lo) = mid;
        }
        cb(hi, rising ? Direction::Rising : Direction::Falling);
    }
}

}  // namespace stmeta::detail
