#pragma once

// Dormand-Prince 5(4) embedded pair for a scalar ODE v' = f(t, v), with
// per-step local error control, steps that land on every output time, and
// region/threshold event location by bisection on the step length.

#include "stmeta/detail/recorder.hpp"
#include "stmeta/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

namespace stmeta::detail {

template <class Real>
struct AdaptiveProblem {
    std::function<Real(Real, Real)> field;     ///< (t, v) -> dv/dt
    std::function<Region(Real, Real)> region;  ///< (t, v) -> operating region
    Real abs_tol = 1e-9;                       ///< local error bound per step
    Real t_tol = 1e-18;                        ///< event location resolution [s]
    Real h_init = 1e-12;
    Real h_max = std::numeric_limits<Real>::infinity();
    bool compensated = false;
    std::size_t max_steps = 20'000'000;
};

template <class Real>
struct AdaptiveState {
    Real h = 0;
    std::size_t steps = 0;
};

template <class Real>
struct StepResult {
    Real increment = 0;
    Real error = 0;
};

template <class Real>
StepResult<Real> dopri5_step(const std::function<Real(Real, Real)>& f, Real t, Real v, Real h) {
    constexpr Real c2 = Real(1) / 5, c3 = Real(3) / 10, c4 = Real(4) / 5, c5 = Real(8) / 9;
    constexpr Real a21 = Real(1) / 5;
    constexpr Real a31 = Real(3) / 40, a32 = Real(9) / 40;
    constexpr Real a41 = Real(44) / 45, a42 = Real(-56) / 15, a43 = Real(32) / 9;
    constexpr Real a51 = Real(19372) / 6561, a52 = Real(-25360) / 2187, a53 = Real(64448) / 6561,
                   a54 = Real(-212) / 729;
    constexpr Real a61 = Real(9017) / 3168, a62 = Real(-355) / 33, a63 = Real(46732) / 5247,
                   a64 = Real(49) / 176, a65 = Real(-5103) / 18656;
    constexpr Real b1 = Real(35) / 384, b3 = Real(500) / 1113, b4 = Real(125) / 192,
                   b5 = Real(-2187) / 6784, b6 = Real(11) / 84;
    constexpr Real e1 = Real(71) / 57600, e3 = Real(-71) / 16695, e4 = Real(71) / 1920,
                   e5 = Real(-17253) / 339200, e6 = Real(22) / 525, e7 = Real(-1) / 40;

    const Real k1 = f(t, v);
    const Real k2 = f(t + c2 * h, v + h * (a21 * k1));
    const Real k3 = f(t + c3 * h, v + h * (a31 * k1 + a32 * k2));
    const Real k4 = f(t + c4 * h, v + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Real k5 = f(t + c5 * h, v + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Real k6 = f(t + h, v + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Real incr = h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Real k7 = f(t + h, v + incr);
    const Real err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    return {incr, std::abs(err)};
}

/// Kahan-compensated accumulator; plain addition when disabled.
template <class Real>
struct Accumulator {
    Real value = 0;
    Real comp = 0;
    bool compensated = false;

    void add(Real x) {
        if (!compensated) {
            value += x;
            return;
        }
        const Real y = x - comp;
        const Real t = value + y;
        comp = (t - value) - y;
        value = t;
    }
    void reset(Real v) {
        value = v;
        comp = 0;
    }
};

template <class Real>
Real run_adaptive(const AdaptiveProblem<Real>& p, Real t_a, Real v_a, Real t_b,
                  const std::vector<double>& thresholds, std::optional<Region> stop_on_enter,
                  std::optional<Real>* t_stop, AdaptiveState<Real>& st, Recorder& rec) {
    Accumulator<Real> t{t_a, 0, p.compensated};
    Accumulator<Real> v{v_a, 0, p.compensated};
    if (!(st.h > 0)) st.h = p.h_init;
    Region region = p.region(t.value, v.value);

    auto sub_step = [&](Real h) { return v.value + dopri5_step(p.field, t.value, v.value, h).increment; };

    while (t.value < t_b) {
        long double grid = rec.next_output_after(t.value);
        while (Real(grid) <= t.value && grid < rec.t_end()) grid = rec.next_output_after(grid);
        const Real target = std::min<Real>(t_b, Real(grid));
        const Real room = target - t.value;
        Real h = std::min({st.h, room, p.h_max});
        const Real h_min = std::max(p.t_tol * Real(1e-3),
                                    Real(64) * std::numeric_limits<Real>::epsilon() * std::abs(t.value));
        StepResult<Real> step;
        while (true) {
            if (++st.steps > p.max_steps) {
                throw NumericError("tolerance not achievable within the step budget");
            }
            step = dopri5_step(p.field, t.value, v.value, h);
            if (std::isfinite(step.error) && step.error <= p.abs_tol) break;
            if (h <= h_min) throw NumericError("step size underflow: tolerance not achievable");
            const Real ratio = std::isfinite(step.error) ? p.abs_tol / step.error : Real(0);
            h = std::max(h_min, h * std::max(Real(0.1), Real(0.9) * std::pow(ratio, Real(0.2))));
        }
        const bool truncated = h >= room;
        const Real grow = step.error > 0 ? Real(0.9) * std::pow(p.abs_tol / step.error, Real(0.2)) : Real(5);
        const Real proposal = h * std::clamp(grow, Real(0.2), Real(5));
        st.h = truncated ? std::max(st.h, proposal) : proposal;

        Real h_acc = h;
        Real v_new = v.value + step.increment;
        Real t_new = truncated ? target : t.value + h;
        std::optional<Region> crossed;
        if (Region r_new = p.region(t_new, v_new); r_new != region) {
            Real lo = 0, hi = h;
            while (hi - lo > p.t_tol) {
                const Real mid = lo + (hi - lo) / 2;
                if (!(mid > lo && mid < hi)) break;
                (p.region(t.value + mid, sub_step(mid)) != region ? hi : lo) = mid;
            }
            if (hi < h) {
                h_acc = hi;
                v_new = sub_step(hi);
                t_new = t.value + hi;
            }
            crossed = p.region(t_new, v_new);
        }
        for (const double th : thresholds) {
            const Real s0 = v.value - Real(th);
            const Real s1 = v_new - Real(th);
            const bool rising = s0 < 0 && s1 >= 0;
            const bool falling = s0 > 0 && s1 <= 0;
            if (!rising && !falling) continue;
            Real lo = 0, hi = h_acc;
            while (hi - lo > p.t_tol) {
                const Real mid = lo + (hi - lo) / 2;
                if (!(mid > lo && mid < hi)) break;
                const Real s = sub_step(mid) - Real(th);
                ((rising ? s >= 0 : s <= 0) ? hi : lo) = mid;
            }
            const Real tc = hi == h_acc ? t_new : t.value + hi;
            const Real vc = hi == h_acc ? v_new : sub_step(hi);
            Event e;
            e.t = static_cast<double>(tc);
            e.kind = EventKind::ThresholdCross;
            e.v_th = th;
            e.direction = rising ? Direction::Rising : Direction::Falling;
            rec.event(e);
            rec.sample(tc, vc);
        }
        if (h_acc == h) {
            v.add(step.increment);
        } else {
            v.reset(v_new);
        }
        if (truncated && h_acc == h) {
            t.reset(target);
        } else {
            t.add(h_acc);
        }
        if (crossed) {
            Event e;
            e.t = static_cast<double>(t.value);
            e.kind = EventKind::RegionCross;
            e.from = region;
            e.to = *crossed;
            rec.event(e);
            rec.sample(t.value, v.value);
            region = *crossed;
            if (stop_on_enter && *stop_on_enter == region) {
                if (t_stop) *t_stop = t.value;
                return v.value;
            }
        } else if (t.value == target) {
            rec.sample(t.value, v.value);
        }
    }
    return v.value;
}

}  // namespace stmeta::detail
