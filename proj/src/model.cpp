#include "stmeta/model.hpp"

#include "stmeta/errors.hpp"

#include <cmath>
#include <sstream>

namespace stmeta {

std::string_view to_string(Region r) {
    switch (r) {
        case Region::SaturationPos: return "Saturation_Pos";
        case Region::Linear: return "Linear";
        case Region::SaturationNeg: return "Saturation_Neg";
    }
    return "?";
}

void StModel::validate() const {
    auto bad = [](const std::string& msg) { throw ModelError("invalid model: " + msg); };
    if (!std::isfinite(gain_a) || gain_a <= 0.0) bad("gain_a must be > 0");
    if (!std::isfinite(feedback_k) || feedback_k <= 0.0 || feedback_k >= 1.0)
        bad("feedback_k must lie in (0, 1)");
    if (!std::isfinite(saturation_m) || saturation_m <= 0.0) bad("saturation_m must be > 0");
    if (!std::isfinite(tau0) || tau0 <= 0.0) bad("tau0 must be > 0");
    if (!std::isfinite(ref_v)) bad("ref_v must be finite");
    if (feedback_k * gain_a <= 1.0) {
        std::ostringstream os;
        os << "discriminator regime: k*A = " << feedback_k * gain_a
           << " <= 1, no hysteresis";
        bad(os.str());
    }
}

Geometry derive_geometry(const StModel& model) {
    model.validate();
    const double m = model.saturation_m;
    Geometry g;
    g.gamma1 = m;
    g.gamma3 = -m;
    g.tau1 = model.tau0;
    g.tau3 = model.tau0;
    g.tau2 = model.tau2();
    // Positive saturation stays self-consistent while A*((1-k)V_R + k*M - v_in) >= M.
    g.v_h = gamma2_inverse(model, m);
    g.v_l = gamma2_inverse(model, -m);
    g.hysteresis = g.v_h - g.v_l;
    g.gamma2_slope_alpha = 1.0 / model.effective_k();
    return g;
}

double gamma2(const StModel& m, double v_in) {
    const double v = gamma2_unchecked(m, v_in);
    if (!(std::abs(v) <= m.saturation_m)) {
        std::ostringstream os;
        os << "gamma2 out of range: v_in = " << v_in << " gives rest point " << v
           << " outside [-M, M]";
        throw ModelError(os.str());
    }
    return v;
}

double boundary_v_in(const StModel& m, double v_out, Region saturation_side) {
    const double base = m.threshold_center() + m.feedback_k * v_out;
    const double offset = m.saturation_m / m.gain_a;
    switch (saturation_side) {
        case Region::SaturationPos: return base - offset;
        case Region::SaturationNeg: return base + offset;
        case Region::Linear: break;
    }
    throw ModelError("boundary_v_in: side must be a saturation region");
}

double rest_point(const StModel& m, Region r, double v_in) {
    switch (r) {
        case Region::SaturationPos: return m.saturation_m;
        case Region::SaturationNeg: return -m.saturation_m;
        case Region::Linear: return gamma2_unchecked(m, v_in);
    }
    return 0.0;
}

}  // namespace stmeta
