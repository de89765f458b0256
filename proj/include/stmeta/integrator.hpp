#pragma once

#include "stmeta/model.hpp"
#include "stmeta/waveform.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace stmeta {

struct Sample {
    double t = 0.0;
    double v_in = 0.0;
    double v_out = 0.0;
    Region region = Region::Linear;
};

enum class EventKind { RegionCross, ThresholdCross };
enum class Direction { Rising, Falling };

struct Event {
    double t = 0.0;
    EventKind kind = EventKind::RegionCross;
    Region from = Region::Linear;  ///< RegionCross only
    Region to = Region::Linear;    ///< RegionCross only
    double v_th = 0.0;             ///< ThresholdCross only
    Direction direction = Direction::Falling;
};

struct Trajectory {
    std::vector<Sample> samples;
    std::vector<Event> events;
    /// Final output in the working precision of the run (samples hold doubles).
    long double final_v_out = 0;

    [[nodiscard]] std::optional<Event> first_region_cross() const;
};

struct TimeSpan {
    double t0 = 0.0;
    double t1 = 0.0;
};

enum class Precision {
    Standard,  ///< double arithmetic
    High,      ///< extended-precision scalars with compensated accumulation
};

enum class StepMethod {
    Auto,      ///< closed-form stepping for Constant/Ramp inputs, adaptive otherwise
    Adaptive,  ///< embedded Runge-Kutta 5(4) everywhere (used as an oracle)
};

struct IntegrateOptions {
    double tol = 1e-9;                  ///< relative tolerance, in (0, 1e-3]
    std::size_t sample_count = 1000;    ///< output cadence = span / sample_count
    double sample_dt = 0.0;             ///< overrides sample_count when > 0
    Precision precision = Precision::Standard;
    StepMethod method = StepMethod::Auto;
    std::vector<double> thresholds;     ///< emit ThresholdCross events and samples
    std::optional<Region> stop_on_enter;  ///< end the run on entering this region
    std::size_t max_steps = 20'000'000;
};

/// Simulates V_out(t) for the given input starting from v_out0 at span.t0.
/// Samples are emitted on the fixed cadence plus every event and every input
/// segment joint.
[[nodiscard]] Trajectory integrate(const StModel& model, const Waveform& input, double v_out0,
                                   TimeSpan span, const IntegrateOptions& opts = {});

/// Time until a constant-input trajectory leaves its region, or nullopt if it never
/// does. A start on (or within rounding of) a linear-region border counts as being
/// inside the closed linear band.
[[nodiscard]] std::optional<double> region_exit_time(const StModel& model, double v_in_const,
                                                     double v_out0);

}  // namespace stmeta
