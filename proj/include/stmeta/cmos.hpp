#pragma once

// Square-law model of the six-transistor inverting CMOS Schmitt-Trigger.
//
//   NMOS stack: M1 (gate v_in) from x_n to gnd, M2 (gate v_in) from v_out to x_n,
//               M3 (gate v_out) from vdd to x_n (feedback)
//   PMOS stack: M4 (gate v_in) from vdd to x_p, M5 (gate v_in) from x_p to v_out,
//               M6 (gate v_out) from x_p to gnd (feedback)
//
// The output node carries c_load; the internal nodes are solved quasi-statically.

#include "stmeta/integrator.hpp"
#include "stmeta/phase_map.hpp"
#include "stmeta/waveform.hpp"

#include <array>
#include <span>
#include <vector>

namespace stmeta {

enum class Polarity { N, P };

struct MosfetParams {
    Polarity polarity = Polarity::N;
    double v_th = 0.3;    ///< threshold magnitude [V]
    double beta = 2e-5;   ///< transconductance factor [A/V^2]
    double lambda = 0.0;  ///< channel-length modulation [1/V]

    void validate() const;
};

struct CmosStModel {
    std::array<MosfetParams, 6> m;  ///< M1..M6
    double vdd = 1.2;
    double c_load = 2e-15;
    double gmin = 1e-12;  ///< drain-source leakage conductance per device [S]

    void validate() const;
    /// Rough output-node time constant c_load / (beta_max * vdd).
    [[nodiscard]] double time_scale() const;
};

/// vdd 1.2 V, |v_th| 0.3 V, beta_n = 2e-5, beta_p = 1e-5, 2 fF load.
[[nodiscard]] CmosStModel default_cmos_model();
/// Same as the default but with beta_p = beta_n, so the circuit is point-symmetric
/// about (vdd/2, vdd/2).
[[nodiscard]] CmosStModel symmetric_cmos_model();

/// Current flowing from terminal a to terminal b; source and drain are assigned by
/// potential, so the result is odd under swapping a and b.
[[nodiscard]] double device_current(const MosfetParams& p, double v_g, double v_a, double v_b, double gmin);

struct InternalNodes {
    double v_xn = 0.0;
    double v_xp = 0.0;
    double residual_n = 0.0;  ///< KCL residual at x_n [A]
    double residual_p = 0.0;
};

[[nodiscard]] InternalNodes solve_internal_nodes(const CmosStModel& m, double v_in, double v_out);

/// Net current into the output node divided by c_load.
[[nodiscard]] double cmos_field(const CmosStModel& m, double v_in, double v_out);
/// Central-difference d(field)/d(v_out).
[[nodiscard]] double cmos_field_slope(const CmosStModel& m, double v_in, double v_out);

/// Linear where the field grows with v_out (the unstable band around gamma2);
/// otherwise the saturation region on the same side of vdd/2.
[[nodiscard]] Region cmos_region(const CmosStModel& m, double v_in, double v_out);

/// Equilibrium v_in for each v_out row (first + to - sign change of the field in
/// v_in). Throws NumericError naming the row when there is no sign change.
[[nodiscard]] std::vector<Point> trace_gamma2(const CmosStModel& m, std::span<const double> v_out_grid);

/// Smallest end slope of the contour divided by its slope at the middle row.
[[nodiscard]] double contour_curvature_ratio(std::span<const Point> contour);

/// Adaptive integration of the CMOS output node; same contract as integrate().
/// opts.method is ignored and tolerances are relative to vdd.
[[nodiscard]] Trajectory cmos_integrate(const CmosStModel& m, const Waveform& input, double v_out0,
                                        TimeSpan span, const IntegrateOptions& opts = {});

/// Field on the grid; gamma2 traced on rows strictly between the rails, rows
/// without a sign change are skipped.
[[nodiscard]] PhaseMap cmos_phase_map(const CmosStModel& m, const GridSpec& grid);

}  // namespace stmeta
