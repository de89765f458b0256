#include "stmeta/analysis.hpp"

#include "stmeta/errors.hpp"
#include "stmeta/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stmeta {

std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> out(n);
    if (n == 1) {
        out[0] = a;
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return out;
}

void DelaySpec::validate() const {
    if (!(sigma > 0.0 && sigma < 1.0)) throw ConfigError("delay spec: sigma must lie in (0, 1)");
}

double DelaySpec::v_th(const StModel& m) const {
    validate();
    const double g1 = m.saturation_m;
    const double g3 = -m.saturation_m;
    return g3 + sigma * (g1 - g3);
}

DelayPrediction predict_delay(const StModel& m, const DelaySpec& spec, double epsilon) {
    m.validate();
    spec.validate();
    if (!(epsilon > 0.0)) throw ConfigError("predict_delay: epsilon must be positive");
    DelayPrediction p;
    const double band = 2.0 * m.saturation_m / m.gain_a;
    p.d2 = epsilon >= band ? 0.0 : m.tau2() * std::log(band / epsilon);
    p.d3 = derive_geometry(m).tau3 * std::log(1.0 / spec.sigma);
    p.total = p.d2 + p.d3;
    return p;
}

double measure_delay(const Trajectory& traj, double v_th, double t_stimulus) {
    const auto& s = traj.samples;
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (s[i].t < t_stimulus) continue;
        const double a = s[i - 1].v_out - v_th;
        const double b = s[i].v_out - v_th;
        if (a == 0.0 && s[i - 1].t >= t_stimulus) return s[i - 1].t - t_stimulus;
        if ((a > 0.0 && b <= 0.0) || (a < 0.0 && b >= 0.0)) {
            const double frac = a / (a - b);
            const double t = s[i - 1].t + frac * (s[i].t - s[i - 1].t);
            return std::max(t, t_stimulus) - t_stimulus;
        }
    }
    std::ostringstream os;
    os << "measure_delay: no crossing of v_th = " << v_th << " in span";
    throw MeasurementError(os.str());
}

double measure_delay(const Trajectory& traj, const StModel& m, const DelaySpec& spec, double t_stimulus) {
    return measure_delay(traj, spec.v_th(m), t_stimulus);
}

namespace {

double stimulus_time(const StModel& m) { return m.tau0; }

}  // namespace

Trajectory step_response(const StModel& m, const DelaySpec& spec, double epsilon, const SweepOptions& opts) {
    const Geometry g = derive_geometry(m);
    const double t_step = stimulus_time(m);
    const double pred = epsilon > 0.0 ? predict_delay(m, spec, epsilon).total
                                      : derive_geometry(m).tau3 * std::log(1.0 / spec.sigma);
    const Waveform in = step_to(g.v_l, ext(g.v_h) + ext(epsilon), t_step);
    IntegrateOptions io;
    io.tol = opts.tol;
    io.precision = opts.precision;
    io.sample_count = opts.sample_count;
    io.thresholds = {spec.v_th(m)};
    const double t_end = t_step + 2.0 * pred + 10.0 * m.tau0;
    return integrate(m, in, g.gamma1, {0.0, t_end}, io);
}

double step_delay(const StModel& m, const DelaySpec& spec, double epsilon, const SweepOptions& opts) {
    return measure_delay(step_response(m, spec, epsilon, opts), m, spec, stimulus_time(m));
}

SweepResult delay_sweep(const StModel& m, const DelaySpec& spec, std::span<const double> epsilons,
                        const SweepOptions& opts) {
    m.validate();
    spec.validate();
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (!(epsilons[i] > 0.0)) throw ConfigError("delay_sweep: epsilons must be positive");
        if (i > 0 && !(epsilons[i] > epsilons[i - 1])) {
            throw ConfigError("delay_sweep: epsilons must be sorted ascending");
        }
    }
    SweepResult result;
    result.rows = parallel_map<SweepRow>(epsilons.size(), [&](std::size_t i) {
        const DelayPrediction p = predict_delay(m, spec, epsilons[i]);
        SweepRow row;
        row.epsilon = epsilons[i];
        row.d2_pred = p.d2;
        row.d3_pred = p.d3;
        row.total_pred = p.total;
        row.measured = step_delay(m, spec, epsilons[i], opts);
        return row;
    });
    return result;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw NumericError("fit_line: need at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw NumericError("fit_line: degenerate fit, all x equal");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

MonotonicityVerdict monotonicity_verdict(const Trajectory& traj, double scale) {
    const double tol = 1e-12 * std::abs(scale);
    MonotonicityVerdict v;
    int trend = 0;
    bool plateau = false;
    const auto& s = traj.samples;
    for (std::size_t i = 1; i < s.size(); ++i) {
        const double d = s[i].v_out - s[i - 1].v_out;
        if (std::abs(d) <= tol) {
            plateau = true;
            continue;
        }
        const int sign = d > 0 ? 1 : -1;
        if (trend == 0) {
            trend = sign;
        } else if (sign != trend) {
            v.kind = Monotonicity::NonMonotone;
            v.witness_t = s[i].t;
            return v;
        }
    }
    v.kind = plateau ? Monotonicity::MonotoneWithPlateaus : Monotonicity::StrictlyMonotone;
    return v;
}

double pinned_exit_time(const StModel& m, double delta, const ResolutionFitOptions& opts) {
    m.validate();
    const double sat = m.saturation_m;
    if (!(std::abs(opts.level) < sat)) throw ConfigError("pinned level must lie strictly inside (-M, M)");
    if (!(delta > 0.0)) throw ConfigError("resolution offset delta must be positive");
    const ext v_in = gamma2_inverse<ext>(m, ext(opts.level)) + ext(delta);
    if (classify_region<ext>(m, v_in, ext(opts.level)) != Region::Linear) return 0.0;

    IntegrateOptions io;
    io.tol = opts.tol;
    io.precision = opts.precision;
    io.sample_count = 200;
    io.stop_on_enter = Region::SaturationNeg;
    const double t_end = m.tau2() * (std::log(std::max(sat / delta, 1.0)) + 10.0);
    const Trajectory traj = integrate(m, Waveform::constant(v_in), opts.level, {0.0, t_end}, io);
    const auto exit = traj.first_region_cross();
    if (!exit) throw NumericError("pinned trajectory did not leave the linear region");
    return exit->t;
}

ResolutionFit fit_resolution_constant(const StModel& m, std::span<const double> deltas,
                                      const ResolutionFitOptions& opts) {
    if (deltas.size() < 3) throw NumericError("fit_resolution_constant: need at least three deltas");
    const auto [lo, hi] = std::minmax_element(deltas.begin(), deltas.end());
    if (!(*lo > 0.0)) throw ConfigError("fit_resolution_constant: deltas must be positive");
    if (*hi / *lo < 1e3 * (1.0 - 1e-9)) {
        throw ConfigError("fit_resolution_constant: deltas span less than three decades");
    }
    ResolutionFit fit;
    fit.points = parallel_map<ResolutionPoint>(deltas.size(), [&](std::size_t i) {
        return ResolutionPoint{deltas[i], pinned_exit_time(m, deltas[i], opts)};
    });
    std::vector<double> x, y;
    for (const auto& p : fit.points) {
        x.push_back(std::log(1.0 / p.delta));
        y.push_back(p.exit_time);
    }
    const LineFit lf = fit_line(x, y);
    fit.tau_fit = lf.slope;
    fit.intercept = lf.intercept;
    fit.r_squared = lf.r_squared;
    return fit;
}

PhaseMap opamp_phase_map(const StModel& m, const GridSpec& grid) {
    m.validate();
    if (grid.n_in < 2 || grid.n_out < 2) throw ConfigError("phase map: grid needs at least 2x2 points");
    if (!(grid.v_in_max > grid.v_in_min) || !(grid.v_out_max > grid.v_out_min)) {
        throw ConfigError("phase map: empty grid range");
    }
    PhaseMap pm;
    pm.v_in = linspace(grid.v_in_min, grid.v_in_max, grid.n_in);
    pm.v_out = linspace(grid.v_out_min, grid.v_out_max, grid.n_out);
    pm.field.reserve(grid.n_in * grid.n_out);
    for (const double vo : pm.v_out) {
        for (const double vi : pm.v_in) pm.field.push_back(derivative_field(m, vi, vo));
    }
    const double lo = std::max(grid.v_out_min, -m.saturation_m);
    const double hi = std::min(grid.v_out_max, m.saturation_m);
    if (hi > lo) {
        for (const double vo : linspace(lo, hi, grid.n_out)) {
            pm.gamma2.push_back({gamma2_inverse(m, vo), vo});
        }
    }
    return pm;
}

}  // namespace stmeta
