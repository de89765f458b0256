#pragma once

// Inverse input synthesis for the clipped-linear model. Inside the linear region
// the output obeys tau2 * v' = v - gamma2(v_in), which is unstable, so an input
// computed from the desired output alone lets any error grow like exp(t/tau2).
// The synthesizer therefore splits the span into short windows. Each window gets
// the feedforward ramp slope (secant of the exact inverse) and an offset solved
// from the closed-form window solution so that the predicted output lands on the
// desired value at the next window start. Prediction and re-integration share the
// same stepping code, so the synthesized input reproduces the predicted knots.

#include "stmeta/errors.hpp"
#include "stmeta/integrator.hpp"
#include "stmeta/model.hpp"
#include "stmeta/waveform.hpp"

#include <optional>
#include <vector>

namespace stmeta {

/// Input that gives output slope w_prime at output level w:
/// (1-k)V_R + k*w - (w + tau0*w_prime)/A. Throws InfeasibleError unless
/// |w + tau0*w_prime| < M.
[[nodiscard]] double inverse_input(const StModel& m, double w, double w_prime);
[[nodiscard]] ext inverse_input_ext(const StModel& m, ext w, ext w_prime);

/// Largest horizontal distance from gamma2 that an input limited to |v_in'| <= cap
/// can still catch up with: tau2 * cap.
[[nodiscard]] double corridor_halfwidth(const StModel& m, double vin_rate_cap);

struct SegmentFeasibility {
    double t_begin = 0.0;
    double t_end = 0.0;
    double amp_margin = 0.0;       ///< min of M - |W + tau0*W'| over the segment
    double required_rate = 0.0;    ///< max |d/dt inverse_input(W, W')|
    bool ok = true;
};

struct FeasibilityReport {
    std::vector<SegmentFeasibility> segments;
    std::vector<TimeInterval> violations;

    [[nodiscard]] bool feasible() const { return violations.empty(); }
};

/// Checks the linear-range condition and, when a cap is given, the required input
/// slope on a dense scan of every desired segment inside the span.
[[nodiscard]] FeasibilityReport assess_feasibility(const StModel& m, const Waveform& desired, TimeSpan span,
                                                   std::optional<double> vin_rate_cap = std::nullopt);

struct ControlOptions {
    double window = 0.0;  ///< re-anchoring window length; <= 0 selects tau2
    double tol = 1e-10;
    Precision precision = Precision::High;
    std::size_t sample_count = 2000;
    std::optional<double> vin_rate_cap;
};

struct ControlPlan {
    Waveform desired_output;
    Waveform synthesized_input;
    FeasibilityReport feasibility;
    std::optional<double> vin_rate_cap;
    TimeSpan span;
    double v_out0 = 0.0;
    double max_input_rate = 0.0;  ///< largest ramp slope in the synthesized input

    Trajectory trajectory;  ///< closed-loop re-integration of the synthesized input
    double max_tracking_error = 0.0;
    double rms_tracking_error = 0.0;
};

/// Synthesizes an input that drives v_out along `desired` over `span`, starting
/// from v_out = desired(span.t0), and re-integrates it as a closed-loop check.
/// Throws InfeasibleError listing the violating intervals.
[[nodiscard]] ControlPlan synthesize(const StModel& m, const Waveform& desired, TimeSpan span,
                                     const ControlOptions& opts = {});

struct PinOptions {
    double level = 0.0;
    double hold = 0.0;              ///< <= 0 selects 30 * tau2
    double release_delta = 1e-7;    ///< signed input offset applied after the hold
    double settle_windows = 8;      ///< re-anchoring windows spent at the level before the hold
    double tol = 1e-10;
    std::size_t sample_count = 4000;
};

struct PinResult {
    Trajectory trajectory;
    Waveform input;
    double t_hold = 0.0;     ///< start of the constant input gamma2_inverse(level)
    double t_release = 0.0;
    double t_end = 0.0;
    Region resolved = Region::Linear;           ///< saturation region reached after release
    std::optional<double> resolution_time;      ///< first saturation entry after release, minus t_release
};

/// Starts on gamma1, walks the output down to `level` along the linear region,
/// holds the input at gamma2_inverse(level), then offsets it by release_delta.
/// A positive offset resolves to gamma3, a negative one to gamma1.
[[nodiscard]] PinResult pin_and_release(const StModel& m, const PinOptions& opts);

}  // namespace stmeta
