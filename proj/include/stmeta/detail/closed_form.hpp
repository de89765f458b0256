#pragma once

// Exact solution of the clipped-linear model for an input that is linear in time
// (Constant or Ramp segments). Inside each region the ODE is linear with constant
// coefficients, so the output is an ExpLinear in the local time s = t - t_anchor;
// region changes are located on the drive function and the solution restarts
// from the crossing point in the destination region.

#include "stmeta/detail/exp_linear.hpp"
#include "stmeta/errors.hpp"
#include "stmeta/model.hpp"

#include <cstddef>
#include <optional>

namespace stmeta::detail {

/// v_in(t) = v0 + slope * (t - t_start)
template <class Real>
struct LinearInput {
    Real t_start = 0;
    Real v0 = 0;
    Real slope = 0;

    Real at(Real t) const { return v0 + slope * (t - t_start); }
};

template <class Real>
struct Piece {
    Region region = Region::Linear;
    ExpLinear<Real> v;      ///< output voltage
    ExpLinear<Real> drive;  ///< un-clipped amplifier output
};

template <class Real>
Piece<Real> make_piece(const StModel& m, Region r, Real t_a, Real v_a, const LinearInput<Real>& in) {
    const Real sat = Real(m.saturation_m);
    const Real p = in.at(t_a);
    const Real q = in.slope;
    Piece<Real> pc;
    pc.region = r;
    switch (r) {
        case Region::SaturationPos:
            pc.v = {sat, 0, v_a - sat, Real(-1) / Real(m.tau0)};
            break;
        case Region::SaturationNeg:
            pc.v = {-sat, 0, v_a + sat, Real(-1) / Real(m.tau0)};
            break;
        case Region::Linear: {
            const Real tau2 = Real(m.tau0) / (Real(m.feedback_k) * Real(m.gain_a) - 1);
            const Real g0 = gamma2_unchecked(m, p);
            const Real g1 = q / Real(m.effective_k());
            const Real particular = g0 + tau2 * g1;
            pc.v = {particular, g1, v_a - particular, 1 / tau2};
            break;
        }
    }
    const Real gain = Real(m.gain_a);
    const Real k = Real(m.feedback_k);
    const Real center = Real(m.threshold_center());
    pc.drive = {gain * (center + k * pc.v.a - p), gain * (k * pc.v.b - q), gain * k * pc.v.c,
                pc.v.lambda};
    return pc;
}

/// Advances from (t_a, v_a) to t_b under a linear input. on_piece(piece, t_begin,
/// t_end, destination) is called for every region piece in order; destination is
/// set when the piece ends on a region crossing. Returns the output at the end
/// time, which is t_b unless the run stopped on entering `stop_on_enter`
/// (then *t_stop is set).
template <class Real, class OnPiece>
Real run_closed_form(const StModel& m, const LinearInput<Real>& in, Real t_a, Real v_a, Real t_b,
                     Real s_tol, std::optional<Region> stop_on_enter, std::optional<Real>* t_stop,
                     std::size_t& budget, OnPiece&& on_piece) {
    Region r = classify_region(m, in.at(t_a), v_a);
    const Real sat = Real(m.saturation_m);
    int stalls = 0;
    while (true) {
        const Piece<Real> pc = make_piece(m, r, t_a, v_a, in);
        const Real span = t_b - t_a;
        std::optional<Real> s_exit;
        Region dest = r;
        if (r == Region::SaturationPos) {
            s_exit = first_exit(pc.drive.affine(1, -sat), span, true, s_tol);
            dest = Region::Linear;
        } else if (r == Region::SaturationNeg) {
            s_exit = first_exit(pc.drive.affine(-1, -sat), span, true, s_tol);
            dest = Region::Linear;
        } else {
            const auto up = first_exit(pc.drive.affine(-1, sat), span, false, s_tol);
            const auto down = first_exit(pc.drive.affine(1, sat), span, false, s_tol);
            if (up && (!down || *up <= *down)) {
                s_exit = up;
                dest = Region::SaturationPos;
            } else if (down) {
                s_exit = down;
                dest = Region::SaturationNeg;
            }
        }
        if (!s_exit) {
            on_piece(pc, t_a, t_b, std::optional<Region>{});
            return pc.v(span);
        }
        const Real t_e = t_a + *s_exit;
        const Real v_e = pc.v(*s_exit);
        on_piece(pc, t_a, t_e, std::optional<Region>{dest});
        stalls = (t_e > t_a) ? 0 : stalls + 1;
        if (stalls > 8) throw NumericError("closed-form stepping stalled on a region boundary");
        if (budget == 0) throw NumericError("region-crossing budget exhausted");
        --budget;
        r = dest;
        t_a = t_e;
        v_a = v_e;
        if (stop_on_enter && *stop_on_enter == dest) {
            if (t_stop) *t_stop = t_e;
            return v_e;
        }
    }
}

}  // namespace stmeta::detail
