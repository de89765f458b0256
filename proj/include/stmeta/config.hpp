#pragma once

// Run configuration: one JSON document with sections
//   model    { kind: "opamp" | "cmos", ... }
//   scenario { waveform | waveform_csv, v_out0, desired }
//   run      { t0, t1, tol, sample_count, sample_dt, precision, method }
//   delay, control, pin, fit, grid   per-subcommand parameters
//   output   { dir, formats }
// Missing keys take the defaults of default_config().

#include "stmeta/analysis.hpp"
#include "stmeta/cmos.hpp"
#include "stmeta/controller.hpp"
#include "stmeta/integrator.hpp"
#include "stmeta/io.hpp"
#include "stmeta/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace stmeta {

[[nodiscard]] Json default_config();

/// Applies "a.b.c=value". The value is parsed as JSON when possible, otherwise
/// taken as a string. Unknown keys are rejected so typos do not pass silently.
void apply_override(Json& config, const std::string& assignment);

/// Defaults, merged with the file (if any), then the overrides; validated.
[[nodiscard]] Json load_config(const std::optional<std::string>& path, const std::vector<std::string>& overrides);

/// Throws ConfigError for a malformed document.
void validate_config(const Json& config);

[[nodiscard]] std::string model_kind(const Json& config);
[[nodiscard]] StModel opamp_model_from(const Json& config);
[[nodiscard]] CmosStModel cmos_model_from(const Json& config);

[[nodiscard]] Waveform scenario_input(const Json& config);
[[nodiscard]] Waveform scenario_desired(const Json& config);
[[nodiscard]] double scenario_v_out0(const Json& config);
[[nodiscard]] TimeSpan run_span(const Json& config);
[[nodiscard]] IntegrateOptions run_options(const Json& config);

[[nodiscard]] DelaySpec delay_spec_from(const Json& config);
/// Explicit "delay.epsilons", or decades of 2M/A from "delay.decades_from" to
/// "delay.decades_to" with "delay.per_decade" points each.
[[nodiscard]] std::vector<double> delay_epsilons(const Json& config, const StModel& m);
[[nodiscard]] SweepOptions sweep_options_from(const Json& config);
[[nodiscard]] ControlOptions control_options_from(const Json& config);
[[nodiscard]] PinOptions pin_options_from(const Json& config);
[[nodiscard]] ResolutionFitOptions fit_options_from(const Json& config);
/// "fit.deltas" as given, multiplied by M.
[[nodiscard]] std::vector<double> fit_deltas(const Json& config, const StModel& m);
[[nodiscard]] GridSpec grid_from(const Json& config);

}  // namespace stmeta
