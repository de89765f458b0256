#pragma once

#include "stmeta/integrator.hpp"
#include "stmeta/model.hpp"
#include "stmeta/phase_map.hpp"

#include <optional>
#include <span>
#include <vector>

namespace stmeta {

/// Downstream threshold placed a fraction sigma of the swing above the final value:
/// v_th = gamma3 + sigma * (gamma1 - gamma3).
struct DelaySpec {
    double sigma = 0.5;

    void validate() const;
    [[nodiscard]] double v_th(const StModel& m) const;
};

struct DelayPrediction {
    double d2 = 0.0;     ///< time spent in the linear region
    double d3 = 0.0;     ///< decay from the start of the swing to v_th
    double total = 0.0;
};

/// d2 = tau2 * ln(2M / (A*eps)) (zero once eps >= 2M/A), d3 = tau0 * ln(1/sigma).
[[nodiscard]] DelayPrediction predict_delay(const StModel& m, const DelaySpec& spec, double epsilon);

/// First crossing of v_th after t_stimulus, linearly interpolated between samples,
/// minus t_stimulus. Throws MeasurementError when the output never crosses.
[[nodiscard]] double measure_delay(const Trajectory& traj, double v_th, double t_stimulus);
[[nodiscard]] double measure_delay(const Trajectory& traj, const StModel& m, const DelaySpec& spec,
                                   double t_stimulus);

struct SweepRow {
    double epsilon = 0.0;
    double d2_pred = 0.0;
    double d3_pred = 0.0;
    double total_pred = 0.0;
    double measured = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
};

struct SweepOptions {
    double tol = 1e-10;
    Precision precision = Precision::Standard;
    std::size_t sample_count = 1000;
};

/// Simulated step response of the resting-HI trigger to V_H + eps for every eps.
/// Each run starts at v_out = gamma1 and steps the input at t = tau0.
[[nodiscard]] Trajectory step_response(const StModel& m, const DelaySpec& spec, double epsilon,
                                       const SweepOptions& opts = {});
[[nodiscard]] double step_delay(const StModel& m, const DelaySpec& spec, double epsilon,
                                const SweepOptions& opts = {});

/// Epsilons must be positive and sorted ascending.
[[nodiscard]] SweepResult delay_sweep(const StModel& m, const DelaySpec& spec,
                                      std::span<const double> epsilons, const SweepOptions& opts = {});

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// Ordinary least squares y = slope*x + intercept. Throws NumericError when degenerate.
[[nodiscard]] LineFit fit_line(std::span<const double> x, std::span<const double> y);

enum class Monotonicity { StrictlyMonotone, MonotoneWithPlateaus, NonMonotone };

struct MonotonicityVerdict {
    Monotonicity kind = Monotonicity::StrictlyMonotone;
    std::optional<double> witness_t;  ///< first sample contradicting the trend
};

/// Verdict from sample-to-sample differences of v_out; differences within
/// 1e-12 * scale (normally M) count as plateaus.
[[nodiscard]] MonotonicityVerdict monotonicity_verdict(const Trajectory& traj, double scale);

struct ResolutionFitOptions {
    double level = 0.0;  ///< pinned output level c
    double tol = 1e-10;
    Precision precision = Precision::High;
};

struct ResolutionPoint {
    double delta = 0.0;
    double exit_time = 0.0;
};

struct ResolutionFit {
    double tau_fit = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::vector<ResolutionPoint> points;
};

/// Time for a trajectory starting at (gamma2_inverse(level) + delta, level) to leave
/// the linear region; zero when the start already lies in a saturation region.
[[nodiscard]] double pinned_exit_time(const StModel& m, double delta, const ResolutionFitOptions& opts = {});

/// Least-squares fit of exit time against ln(1/delta); the slope estimates tau2.
/// Deltas must be positive and span at least three decades.
[[nodiscard]] ResolutionFit fit_resolution_constant(const StModel& m, std::span<const double> deltas,
                                                    const ResolutionFitOptions& opts = {});

/// Derivative field of the clipped-linear model on a grid plus its gamma2 line.
[[nodiscard]] PhaseMap opamp_phase_map(const StModel& m, const GridSpec& grid);

}  // namespace stmeta
