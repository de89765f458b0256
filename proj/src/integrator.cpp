#include "stmeta/integrator.hpp"

#include "stmeta/detail/adaptive.hpp"
#include "stmeta/detail/closed_form.hpp"
#include "stmeta/detail/recorder.hpp"
#include "stmeta/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <variant>

namespace stmeta {

std::optional<Event> Trajectory::first_region_cross() const {
    for (const auto& e : events) {
        if (e.kind == EventKind::RegionCross) return e;
    }
    return std::nullopt;
}

namespace {

void check_request(const StModel& model, const Waveform& input, double v_out0, TimeSpan span,
                   const IntegrateOptions& opts) {
    model.validate();
    if (!(opts.tol > 0.0 && opts.tol <= 1e-3)) {
        throw ConfigError("integrate: tol must lie in (0, 1e-3]");
    }
    if (!(span.t1 > span.t0) || !std::isfinite(span.t0) || !std::isfinite(span.t1)) {
        throw ConfigError("integrate: malformed span, need finite t0 < t1");
    }
    if (input.empty()) throw ConfigError("integrate: empty input waveform");
    if (span.t0 < input.t_begin() || span.t1 > input.t_end()) {
        throw ConfigError("integrate: span not covered by the input waveform");
    }
    const double margin = 0.5 * model.saturation_m;
    if (!(std::abs(v_out0) <= model.saturation_m + margin)) {
        std::ostringstream os;
        os << "integrate: v_out0 = " << v_out0 << " outside [-M - margin, M + margin]";
        throw ConfigError(os.str());
    }
    if (opts.sample_count == 0 && !(opts.sample_dt > 0.0)) {
        throw ConfigError("integrate: need sample_count > 0 or sample_dt > 0");
    }
}

std::optional<detail::LinearInput<ext>> linear_shape(const Segment& s) {
    if (const auto* c = std::get_if<seg::Constant>(&s.shape)) {
        return detail::LinearInput<ext>{s.t_start, c->level, 0};
    }
    if (const auto* r = std::get_if<seg::Ramp>(&s.shape)) {
        return detail::LinearInput<ext>{s.t_start, r->v0, r->slope};
    }
    return std::nullopt;
}

template <class Real>
Trajectory integrate_impl(const StModel& model, const Waveform& input, double v_out0, TimeSpan span,
                          const IntegrateOptions& opts) {
    const Real t0 = Real(span.t0);
    const Real t1 = Real(span.t1);
    const Real dt = opts.sample_dt > 0.0 ? Real(opts.sample_dt)
                                         : (t1 - t0) / Real(opts.sample_count);
    const Real tau2 = Real(model.tau2());
    const Real s_tol = Real(opts.tol) * tau2;

    detail::Recorder rec(
        t0, t1, dt, [&input](long double t) { return input.eval(t); },
        [&model](long double v_in, long double v_out) {
            return classify_region<Real>(model, Real(v_in), Real(v_out));
        });

    detail::AdaptiveProblem<Real> problem;
    problem.field = [&](Real t, Real v) { return derivative_field<Real>(model, Real(input.eval(t)), v); };
    problem.region = [&](Real t, Real v) { return classify_region<Real>(model, Real(input.eval(t)), v); };
    problem.abs_tol = Real(opts.tol) * Real(model.saturation_m);
    problem.t_tol = s_tol;
    problem.h_init = tau2;
    problem.compensated = opts.precision == Precision::High;
    problem.max_steps = opts.max_steps;
    detail::AdaptiveState<Real> adaptive_state;

    std::size_t crossing_budget = opts.max_steps;
    Real t = t0;
    Real v = Real(v_out0);
    rec.sample(t, v);
    std::optional<Real> t_stop;

    auto on_piece = [&](const detail::Piece<Real>& pc, Real ta, Real te, std::optional<Region> dest) {
        const Real s_end = te - ta;
        for (const double th : opts.thresholds) {
            detail::for_each_crossing(pc.v.affine(1, -Real(th)), s_end, s_tol, [&](Real s, Direction d) {
                Event e;
                e.t = static_cast<double>(ta + s);
                e.kind = EventKind::ThresholdCross;
                e.v_th = th;
                e.direction = d;
                rec.event(e);
                rec.sample(ta + s, pc.v(s));
            });
        }
        // iterate the grid in long double; a rounded Real grid time could repeat
        for (long double g = rec.next_output_after(ta); Real(g) <= te && Real(g) < t1;
             g = rec.next_output_after(g)) {
            rec.sample(g, pc.v(Real(g) - ta));
        }
        if (dest) {
            Event e;
            e.t = static_cast<double>(te);
            e.kind = EventKind::RegionCross;
            e.from = pc.region;
            e.to = *dest;
            rec.event(e);
            rec.sample(te, pc.v(s_end));
        }
    };

    while (t < t1 && !t_stop) {
        std::size_t idx = input.segment_index(t);
        // a joint that is not representable in Real may round down onto t
        while (idx + 1 < input.segments().size() && !(Real(input.segment_end(idx)) > t)) ++idx;
        const Segment& segment = input.segments()[idx];
        const Real seg_end = std::min<Real>(t1, Real(input.segment_end(idx)));
        const auto lin = opts.method == StepMethod::Auto ? linear_shape(segment) : std::nullopt;
        if (lin) {
            const detail::LinearInput<Real> in{Real(lin->t_start), Real(lin->v0), Real(lin->slope)};
            v = detail::run_closed_form<Real>(model, in, t, v, seg_end, s_tol, opts.stop_on_enter,
                                              &t_stop, crossing_budget, on_piece);
        } else {
            v = detail::run_adaptive<Real>(problem, t, v, seg_end, opts.thresholds, opts.stop_on_enter,
                                           &t_stop, adaptive_state, rec);
        }
        if (!std::isfinite(static_cast<double>(v))) throw NumericError("integrate: non-finite output");
        t = t_stop ? *t_stop : seg_end;
        rec.sample(t, v);
    }
    return rec.finish(v);
}

}  // namespace

Trajectory integrate(const StModel& model, const Waveform& input, double v_out0, TimeSpan span,
                     const IntegrateOptions& opts) {
    check_request(model, input, v_out0, span, opts);
    if (opts.precision == Precision::High) {
        return integrate_impl<long double>(model, input, v_out0, span, opts);
    }
    return integrate_impl<double>(model, input, v_out0, span, opts);
}

std::optional<double> region_exit_time(const StModel& model, double v_in_const, double v_out0) {
    model.validate();
    const double m = model.saturation_m;
    const double k = model.feedback_k;
    const double drive = amp_drive(model, v_in_const, v_out0);
    // Output levels where the drive reaches +M and -M for this input.
    const double v_upper = (v_in_const - model.threshold_center() + m / model.gain_a) / k;
    const double v_lower = (v_in_const - model.threshold_center() - m / model.gain_a) / k;
    const double slack = 8.0 * std::numeric_limits<double>::epsilon() * m;

    if (std::abs(drive) <= m + slack * model.gain_a) {
        const double g2 = gamma2_unchecked(model, v_in_const);
        const double tau2 = model.tau2();
        if (v_out0 == g2) return std::nullopt;
        const double target = v_out0 < g2 ? v_lower : v_upper;
        const double ratio = (g2 - target) / (g2 - v_out0);
        return ratio <= 1.0 ? 0.0 : tau2 * std::log(ratio);
    }
    // Saturated: v_out relaxes exponentially towards +-M with time constant tau0 and
    // leaves when it reaches the linear-region border, if that border lies between.
    const double rest = drive > 0 ? m : -m;
    const double border = drive > 0 ? v_upper : v_lower;
    const bool between = (v_out0 < border && border < rest) || (rest < border && border < v_out0);
    if (!between) return std::nullopt;
    return model.tau0 * std::log((v_out0 - rest) / (border - rest));
}

}  // namespace stmeta
