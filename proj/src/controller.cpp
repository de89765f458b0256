#include "stmeta/controller.hpp"

#include "stmeta/detail/closed_form.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace stmeta {

namespace {

template <class Real>
Real inverse_unchecked(const StModel& m, Real w, Real w_prime) {
    return Real(m.threshold_center()) + Real(m.feedback_k) * w -
           (w + Real(m.tau0) * w_prime) / Real(m.gain_a);
}

void check_feasible_point(const StModel& m, long double w, long double w_prime) {
    const long double u = w + static_cast<long double>(m.tau0) * w_prime;
    if (!(std::abs(u) < static_cast<long double>(m.saturation_m))) {
        std::ostringstream os;
        os << "inverse_input: |w + tau0*w'| = " << static_cast<double>(std::abs(u))
           << " is not below M = " << m.saturation_m << ", the amplifier would saturate";
        throw InfeasibleError(os.str());
    }
}

struct Window {
    const SegmentShape* shape = nullptr;
    ext seg_start = 0;
    ext t_a = 0;
    ext t_b = 0;
};

std::vector<Window> make_windows(const Waveform& desired, TimeSpan span, ext h) {
    std::vector<Window> out;
    const auto& segs = desired.segments();
    for (std::size_t j = 0; j < segs.size(); ++j) {
        const ext a = std::max<ext>(segs[j].t_start, ext(span.t0));
        const ext b = std::min<ext>(desired.segment_end(j), ext(span.t1));
        if (!(b > a)) continue;
        const auto n = static_cast<std::size_t>(std::max<ext>(1, std::ceil((b - a) / h)));
        ext prev = a;
        for (std::size_t i = 1; i <= n; ++i) {
            const ext next = i == n ? b : ext(static_cast<double>(a + (b - a) * ext(i) / ext(n)));
            out.push_back({&segs[j].shape, segs[j].t_start, prev, next});
            prev = next;
        }
    }
    return out;
}

struct Synthesis {
    Waveform input;
    long double v_end = 0;
    double max_rate = 0.0;
};

/// Builds the re-anchored ramp input window by window. Every window is advanced
/// with the same closed-form runner (same arguments, same working precision) that
/// integrate() uses on the resulting Ramp segment.
template <class Real>
Synthesis synthesize_input(const StModel& m, const Waveform& desired, TimeSpan span, double v_out0,
                           double window, double tol) {
    const ext h = window > 0.0 ? ext(window) : ext(m.tau2());
    const Real tau2 = Real(m.tau2());
    const Real keff = Real(m.effective_k());
    const Real center = Real(m.threshold_center());
    const Real s_tol = Real(tol) * tau2;

    Synthesis out;
    std::size_t budget = 20'000'000;
    Real v = Real(v_out0);
    auto ignore = [](const auto&, Real, Real, std::optional<Region>) {};
    for (const Window& w : make_windows(desired, span, h)) {
        const Real ta = Real(w.t_a);
        const Real tb = Real(w.t_b);
        const Real len = tb - ta;
        const Real w_a = Real(eval_shape(*w.shape, w.t_a - w.seg_start));
        const Real wp_a = Real(derivative_shape(*w.shape, w.t_a - w.seg_start, 1));
        const Real w_b = Real(eval_shape(*w.shape, w.t_b - w.seg_start));
        const Real wp_b = Real(derivative_shape(*w.shape, w.t_b - w.seg_start, 1));
        const Real slope = (inverse_unchecked(m, w_b, wp_b) - inverse_unchecked(m, w_a, wp_a)) / len;

        // Closed-form linear-region solution over the window in gamma2 coordinates,
        // solved for the offset g0 that makes v(len) = w_b.
        const Real g1 = slope / keff;
        const Real e = std::exp(len / tau2);
        const Real g0 = (w_b - g1 * (len + tau2) - (v - tau2 * g1) * e) / (1 - e);
        const ext v0_in = ext(center + g0 * keff);
        const ext slope_in = ext(slope);
        out.input.append(w.t_a, seg::Ramp{v0_in, slope_in});
        out.max_rate = std::max(out.max_rate, std::abs(static_cast<double>(slope_in)));

        const detail::LinearInput<Real> in{Real(w.t_a), Real(v0_in), Real(slope_in)};
        v = detail::run_closed_form<Real>(m, in, ta, v, tb, s_tol, std::nullopt, nullptr, budget, ignore);
    }
    if (out.input.empty()) throw ConfigError("synthesize: span does not overlap the desired waveform");
    out.input.set_t_end(ext(span.t1));
    out.v_end = v;
    return out;
}

Synthesis dispatch_synthesis(const StModel& m, const Waveform& desired, TimeSpan span, double v_out0,
                             double window, double tol, Precision precision) {
    if (precision == Precision::High) {
        return synthesize_input<long double>(m, desired, span, v_out0, window, tol);
    }
    return synthesize_input<double>(m, desired, span, v_out0, window, tol);
}

void check_span(const Waveform& desired, TimeSpan span) {
    if (!(span.t1 > span.t0) || !std::isfinite(span.t0) || !std::isfinite(span.t1)) {
        throw ConfigError("synthesize: malformed span, need finite t0 < t1");
    }
    if (desired.empty() || ext(span.t0) < desired.t_begin() || ext(span.t1) > desired.t_end()) {
        throw ConfigError("synthesize: span not covered by the desired waveform");
    }
}

}  // namespace

double inverse_input(const StModel& m, double w, double w_prime) {
    m.validate();
    check_feasible_point(m, w, w_prime);
    return inverse_unchecked<double>(m, w, w_prime);
}

ext inverse_input_ext(const StModel& m, ext w, ext w_prime) {
    m.validate();
    check_feasible_point(m, w, w_prime);
    return inverse_unchecked<ext>(m, w, w_prime);
}

double corridor_halfwidth(const StModel& m, double vin_rate_cap) {
    m.validate();
    if (!(vin_rate_cap > 0.0)) throw ConfigError("corridor_halfwidth: rate cap must be positive");
    return m.tau2() * vin_rate_cap;
}

FeasibilityReport assess_feasibility(const StModel& m, const Waveform& desired, TimeSpan span,
                                     std::optional<double> vin_rate_cap) {
    m.validate();
    check_span(desired, span);
    if (vin_rate_cap && !(*vin_rate_cap > 0.0)) throw ConfigError("rate cap must be positive");
    const ext sat = m.saturation_m;
    const ext tau0 = m.tau0;
    const ext keff = m.effective_k();
    const ext gain = m.gain_a;
    const ext spacing = ext(m.tau2()) / 4;

    FeasibilityReport rep;
    std::optional<TimeInterval> amp_run, rate_run;
    auto close_run = [&](std::optional<TimeInterval>& run) {
        if (run) rep.violations.push_back(*run);
        run.reset();
    };
    auto extend = [](std::optional<TimeInterval>& run, double t, const char* reason) {
        if (!run) run = TimeInterval{t, t, reason};
        run->t_end = t;
    };

    const auto& segs = desired.segments();
    for (std::size_t j = 0; j < segs.size(); ++j) {
        const ext a = std::max<ext>(segs[j].t_start, ext(span.t0));
        const ext b = std::min<ext>(desired.segment_end(j), ext(span.t1));
        if (!(b > a)) continue;
        const auto n = static_cast<std::size_t>(std::clamp<ext>(std::ceil((b - a) / spacing), 64, 400000));
        SegmentFeasibility sf;
        sf.t_begin = static_cast<double>(a);
        sf.t_end = static_cast<double>(b);
        sf.amp_margin = static_cast<double>(sat);
        for (std::size_t i = 0; i <= n; ++i) {
            const ext t = a + (b - a) * ext(i) / ext(n);
            const ext s = t - segs[j].t_start;
            const ext w = eval_shape(segs[j].shape, s);
            const ext wp = derivative_shape(segs[j].shape, s, 1);
            const ext wpp = derivative_shape(segs[j].shape, s, 2);
            const ext margin = sat - std::abs(w + tau0 * wp);
            const ext rate = std::abs(keff * wp - tau0 * wpp / gain);
            sf.amp_margin = std::min(sf.amp_margin, static_cast<double>(margin));
            sf.required_rate = std::max(sf.required_rate, static_cast<double>(rate));
            const double td = static_cast<double>(t);
            if (!(margin > 0)) {
                extend(amp_run, td, "amplifier leaves its linear range: |W + tau0*W'| >= M");
            } else {
                close_run(amp_run);
            }
            if (vin_rate_cap && rate > ext(*vin_rate_cap)) {
                extend(rate_run, td, "required input slope exceeds the rate cap");
            } else {
                close_run(rate_run);
            }
        }
        close_run(amp_run);
        close_run(rate_run);
        sf.ok = sf.amp_margin > 0.0 && (!vin_rate_cap || sf.required_rate <= *vin_rate_cap);
        rep.segments.push_back(sf);
    }
    std::stable_sort(rep.violations.begin(), rep.violations.end(),
                     [](const TimeInterval& x, const TimeInterval& y) { return x.t_begin < y.t_begin; });
    return rep;
}

ControlPlan synthesize(const StModel& m, const Waveform& desired, TimeSpan span, const ControlOptions& opts) {
    ControlPlan plan;
    plan.feasibility = assess_feasibility(m, desired, span, opts.vin_rate_cap);
    if (!plan.feasibility.feasible()) {
        const auto& first = plan.feasibility.violations.front();
        std::ostringstream os;
        os << "requested output is infeasible on " << plan.feasibility.violations.size()
           << " interval(s), first [" << first.t_begin << ", " << first.t_end << "]: " << first.reason;
        throw InfeasibleError(os.str(), plan.feasibility.violations);
    }
    plan.desired_output = desired;
    plan.vin_rate_cap = opts.vin_rate_cap;
    plan.span = span;
    plan.v_out0 = static_cast<double>(desired.eval(ext(span.t0)));

    Synthesis syn = dispatch_synthesis(m, desired, span, plan.v_out0, opts.window, opts.tol, opts.precision);
    plan.synthesized_input = std::move(syn.input);
    plan.max_input_rate = syn.max_rate;

    IntegrateOptions io;
    io.tol = opts.tol;
    io.precision = opts.precision;
    io.sample_count = opts.sample_count;
    plan.trajectory = integrate(m, plan.synthesized_input, plan.v_out0, span, io);

    double sq = 0.0;
    for (const auto& s : plan.trajectory.samples) {
        const double err = s.v_out - static_cast<double>(desired.eval(ext(s.t)));
        plan.max_tracking_error = std::max(plan.max_tracking_error, std::abs(err));
        sq += err * err;
    }
    plan.rms_tracking_error = std::sqrt(sq / static_cast<double>(plan.trajectory.samples.size()));
    return plan;
}

PinResult pin_and_release(const StModel& m, const PinOptions& opts) {
    m.validate();
    const double sat = m.saturation_m;
    if (!(std::abs(opts.level) < sat)) {
        std::ostringstream os;
        os << "pin level " << opts.level << " is not strictly between gamma3 and gamma1";
        throw InfeasibleError(os.str(), {TimeInterval{0.0, 0.0, "level outside the linear band"}});
    }
    if (!(opts.settle_windows >= 0.0)) throw ConfigError("pin: settle_windows must be >= 0");
    const double tau2 = m.tau2();

    // Approach from gamma1 at a rate that keeps |W + tau0*W'| at or below
    // (M + |level|)/2 < M along the whole ramp.
    const double rate = 0.5 * (opts.level + sat) / m.tau0;
    const double t_ramp = (sat - opts.level) / rate;
    const double t_hold = t_ramp + std::max(1.0, opts.settle_windows) * tau2;
    Waveform desired({Segment{0, seg::Ramp{ext(sat), ext(-rate)}}, Segment{ext(t_ramp), seg::Constant{ext(opts.level)}}});

    Synthesis syn = synthesize_input<long double>(m, desired, {0.0, t_hold}, sat, tau2, opts.tol);

    PinResult res;
    res.t_hold = t_hold;
    res.t_release = t_hold + (opts.hold > 0.0 ? opts.hold : 30.0 * tau2);
    const double tail = opts.release_delta != 0.0
                            ? std::log(std::max(sat / std::abs(opts.release_delta), 1.0)) + 12.0
                            : 30.0;
    res.t_end = res.t_release + tail * tau2;

    // Among the inputs within a few ulps of gamma2_inverse(level), hold the one whose
    // rest point is closest to the state actually reached. An exact match keeps the
    // closed-form hold on the rest point for as long as the input is held.
    ext pinned = gamma2_inverse<ext>(m, ext(syn.v_end));
    {
        ext best = pinned;
        ext best_err = std::abs(gamma2_unchecked<ext>(m, best) - syn.v_end);
        ext up = pinned, down = pinned;
        for (int i = 0; i < 16 && best_err > 0; ++i) {
            up = std::nextafter(up, std::numeric_limits<ext>::infinity());
            down = std::nextafter(down, -std::numeric_limits<ext>::infinity());
            for (const ext cand : {up, down}) {
                const ext err = std::abs(gamma2_unchecked<ext>(m, cand) - syn.v_end);
                if (err < best_err) {
                    best = cand;
                    best_err = err;
                }
            }
        }
        pinned = best;
    }
    res.input = std::move(syn.input);
    res.input.set_t_end(std::numeric_limits<ext>::infinity());
    res.input.append(ext(t_hold), seg::Constant{pinned});
    res.input.append(ext(res.t_release), seg::Constant{pinned + ext(opts.release_delta)});
    res.input.set_t_end(ext(res.t_end));

    IntegrateOptions io;
    io.tol = opts.tol;
    io.precision = Precision::High;
    io.sample_count = opts.sample_count;
    res.trajectory = integrate(m, res.input, sat, {0.0, res.t_end}, io);

    res.resolved = res.trajectory.samples.back().region;
    for (const auto& e : res.trajectory.events) {
        if (e.kind == EventKind::RegionCross && e.t >= res.t_release && e.to != Region::Linear) {
            res.resolution_time = e.t - res.t_release;
            break;
        }
    }
    return res;
}

}  // namespace stmeta
