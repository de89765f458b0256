#pragma once

#include "stmeta/analysis.hpp"
#include "stmeta/controller.hpp"
#include "stmeta/integrator.hpp"
#include "stmeta/phase_map.hpp"
#include "stmeta/waveform.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>

namespace stmeta {

using Json = nlohmann::json;

/// printf("%.17g"), so doubles round-trip exactly.
[[nodiscard]] std::string format_number(double v);

/// RFC-4180 field quoting: fields with commas, quotes or line breaks are quoted.
[[nodiscard]] std::string csv_field(std::string_view s);

/// t,v_in,v_out,region
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
/// t,kind,from,to,v_th,direction
void write_events_csv(std::ostream& os, const Trajectory& traj);
/// epsilon,d2_pred,d3_pred,total_pred,measured
void write_sweep_csv(std::ostream& os, const SweepResult& sweep);
/// v_in,v_out,dvout_dt
void write_phase_map_csv(std::ostream& os, const PhaseMap& pm);
/// v_in,v_out
void write_contour_csv(std::ostream& os, std::span<const Point> contour);

/// Segments as [{"t_start": ..., "kind": "constant|ramp|sine|exp", ...}] plus "t_end"
/// when finite.
[[nodiscard]] Json waveform_to_json(const Waveform& w);
/// Inverse of waveform_to_json; throws ConfigError on malformed input.
[[nodiscard]] Waveform waveform_from_json(const Json& j);

[[nodiscard]] Json events_to_json(const Trajectory& traj);
[[nodiscard]] Json plan_to_json(const ControlPlan& plan);

/// Polyline plots; axes are labelled with their numeric ranges only.
[[nodiscard]] std::string trajectory_svg(const Trajectory& traj, std::string_view title);
[[nodiscard]] std::string sweep_svg(const SweepResult& sweep, std::string_view title);
/// Field sign as coloured cells (gray positive, black negative) with gamma2 on top.
[[nodiscard]] std::string phase_map_svg(const PhaseMap& pm, std::string_view title);

}  // namespace stmeta
