#pragma once

// Clipped-linear dynamic model of an inverting Schmitt-Trigger: an amplifier of
// gain A with positive feedback fraction k and reference V_R, saturating at +-M,
// followed by a single-pole low-pass with time constant tau0.
//
//   V_A    = clip(A * ((1 - k) V_R + k V_out - V_in), -M, +M)
//   V_out' = (V_A - V_out) / tau0
//
// The three operating regions are where the un-clipped drive is >= M (Region 1,
// positive saturation), <= -M (Region 3) or strictly in between (Region 2).
// Divider loading on the output node is neglected, so the saturation rest
// points are exactly +M and -M.

#include <algorithm>
#include <concepts>
#include <string_view>

namespace stmeta {

enum class Region : int {
    SaturationPos = 1,
    Linear = 2,
    SaturationNeg = 3,
};

[[nodiscard]] std::string_view to_string(Region r);

struct StModel {
    double gain_a = 1000.0;      ///< amplifier gain A
    double feedback_k = 0.5;     ///< feedback fraction k = R_B / (R_A + R_B)
    double saturation_m = 1.0;   ///< symmetric saturation magnitude M [V]
    double ref_v = 0.0;          ///< reference voltage V_R [V]
    double tau0 = 1e-9;          ///< output low-pass R0*C0 [s]

    /// Throws ModelError unless 0 < k < 1, A > 0, M > 0, tau0 > 0 and k*A > 1.
    void validate() const;

    /// Horizontal shift of the hysteresis window, (1 - k) V_R.
    [[nodiscard]] double threshold_center() const { return (1.0 - feedback_k) * ref_v; }
    /// k - 1/A, the loop gain left over after the finite amplifier gain.
    [[nodiscard]] double effective_k() const { return feedback_k - 1.0 / gain_a; }
    /// Growth time constant of the linear region, tau0 / (kA - 1).
    [[nodiscard]] double tau2() const { return tau0 / (feedback_k * gain_a - 1.0); }
};

struct Geometry {
    double gamma1 = 0.0;
    double gamma3 = 0.0;
    double tau1 = 0.0;
    double tau2 = 0.0;
    double tau3 = 0.0;
    double v_h = 0.0;
    double v_l = 0.0;
    double hysteresis = 0.0;
    double gamma2_slope_alpha = 0.0;  ///< dV_out/dV_in along gamma2, 1/(k - 1/A)
};

[[nodiscard]] Geometry derive_geometry(const StModel& model);

/// Un-clipped amplifier output A*((1-k)V_R + k*v_out - v_in).
template <std::floating_point Real>
[[nodiscard]] Real amp_drive(const StModel& m, Real v_in, Real v_out) {
    const Real center = Real(m.threshold_center());
    return Real(m.gain_a) * (center + Real(m.feedback_k) * v_out - v_in);
}

template <std::floating_point Real>
[[nodiscard]] Real amp_output(const StModel& m, Real v_in, Real v_out) {
    const Real sat = Real(m.saturation_m);
    return std::clamp(amp_drive(m, v_in, v_out), -sat, sat);
}

/// dV_out/dt of the model; continuous in both arguments.
template <std::floating_point Real>
[[nodiscard]] Real derivative_field(const StModel& m, Real v_in, Real v_out) {
    return (amp_output(m, v_in, v_out) - v_out) / Real(m.tau0);
}

/// Points on a dashed boundary line belong to the adjacent saturation region.
template <std::floating_point Real>
[[nodiscard]] Region classify_region(const StModel& m, Real v_in, Real v_out) {
    const Real drive = amp_drive(m, v_in, v_out);
    const Real sat = Real(m.saturation_m);
    if (drive >= sat) return Region::SaturationPos;
    if (drive <= -sat) return Region::SaturationNeg;
    return Region::Linear;
}

/// Metastable rest point of Region 2 for a given input; no range check.
template <std::floating_point Real>
[[nodiscard]] Real gamma2_unchecked(const StModel& m, Real v_in) {
    return (v_in - Real(m.threshold_center())) / Real(m.effective_k());
}

/// Metastable rest point on gamma2. Throws ModelError when it lies outside [-M, M].
[[nodiscard]] double gamma2(const StModel& m, double v_in);

/// Input voltage that makes v_out a metastable rest point: (1-k)V_R + v_out*(k - 1/A).
template <std::floating_point Real>
[[nodiscard]] Real gamma2_inverse(const StModel& m, Real v_out) {
    return Real(m.threshold_center()) + v_out * Real(m.effective_k());
}

/// Input voltage on the dashed line where the amplifier just reaches +M
/// (Region 1/2 border) or -M (Region 2/3 border) for the given output.
[[nodiscard]] double boundary_v_in(const StModel& m, double v_out, Region saturation_side);

/// Rest point of the region's own linear ODE (gamma1, gamma2(v_in) or gamma3).
[[nodiscard]] double rest_point(const StModel& m, Region r, double v_in);

}  // namespace stmeta
