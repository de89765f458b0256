#include "stmeta/cmos.hpp"

#include "stmeta/detail/adaptive.hpp"
#include "stmeta/detail/recorder.hpp"
#include "stmeta/errors.hpp"
#include "stmeta/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace stmeta {

void MosfetParams::validate() const {
    if (!(v_th > 0.0)) throw ModelError("mosfet: v_th must be positive");
    if (!(beta > 0.0)) throw ModelError("mosfet: beta must be positive");
    if (!(lambda >= 0.0)) throw ModelError("mosfet: lambda must be >= 0");
}

void CmosStModel::validate() const {
    if (!(vdd > 0.0)) throw ModelError("cmos: vdd must be positive");
    if (!(c_load > 0.0)) throw ModelError("cmos: c_load must be positive");
    if (!(gmin >= 0.0)) throw ModelError("cmos: gmin must be >= 0");
    for (std::size_t i = 0; i < m.size(); ++i) {
        m[i].validate();
        const Polarity want = i < 3 ? Polarity::N : Polarity::P;
        if (m[i].polarity != want) {
            std::ostringstream os;
            os << "cmos: M" << i + 1 << " has the wrong polarity";
            throw ModelError(os.str());
        }
    }
}

double CmosStModel::time_scale() const {
    double beta = 0.0;
    for (const auto& p : m) beta = std::max(beta, p.beta);
    return c_load / (beta * vdd);
}

CmosStModel default_cmos_model() {
    CmosStModel c;
    for (std::size_t i = 0; i < 6; ++i) {
        c.m[i].polarity = i < 3 ? Polarity::N : Polarity::P;
        c.m[i].v_th = 0.3;
        c.m[i].beta = i < 3 ? 2e-5 : 1e-5;
    }
    return c;
}

CmosStModel symmetric_cmos_model() {
    CmosStModel c = default_cmos_model();
    for (std::size_t i = 3; i < 6; ++i) c.m[i].beta = c.m[i - 3].beta;
    return c;
}

namespace {

// Level-1 drain current for gate overdrive v_ov and drain-source voltage v_ds >= 0.
double square_law(const MosfetParams& p, double v_ov, double v_ds) {
    if (v_ov <= 0.0) return 0.0;
    const double clm = 1.0 + p.lambda * v_ds;
    if (v_ds < v_ov) return p.beta * (v_ov * v_ds - 0.5 * v_ds * v_ds) * clm;
    return 0.5 * p.beta * v_ov * v_ov * clm;
}

// Bisection for the root of a decreasing function on [lo, hi]; stops when the
// bracket cannot shrink further.
template <class Fn>
double bisect_decreasing(Fn&& f, double lo, double hi) {
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi)) break;
        (f(mid) > 0.0 ? lo : hi) = mid;
    }
    return std::abs(f(lo)) <= std::abs(f(hi)) ? lo : hi;
}

void check_voltages(const CmosStModel& m, double v_in, double v_out) {
    const double slack = 0.1 * m.vdd;
    if (!(v_in >= -slack && v_in <= m.vdd + slack && v_out >= -slack && v_out <= m.vdd + slack)) {
        std::ostringstream os;
        os << "cmos: (v_in, v_out) = (" << v_in << ", " << v_out << ") outside the rails";
        throw ModelError(os.str());
    }
}

struct Currents {
    InternalNodes nodes;
    double into_out = 0.0;
};

Currents solve(const CmosStModel& m, double v_in, double v_out) {
    const double vdd = m.vdd;
    const double g = m.gmin;
    const auto& d = m.m;
    auto kcl_n = [&](double x) {
        return device_current(d[1], v_in, v_out, x, g) + device_current(d[2], v_out, vdd, x, g) -
               device_current(d[0], v_in, x, 0.0, g);
    };
    auto kcl_p = [&](double x) {
        return device_current(d[3], v_in, vdd, x, g) - device_current(d[4], v_in, x, v_out, g) -
               device_current(d[5], v_out, x, 0.0, g);
    };
    const double lo = std::min(0.0, v_out);
    const double hi = std::max(vdd, v_out);
    Currents c;
    c.nodes.v_xn = bisect_decreasing(kcl_n, lo, hi);
    c.nodes.v_xp = bisect_decreasing(kcl_p, lo, hi);
    c.nodes.residual_n = kcl_n(c.nodes.v_xn);
    c.nodes.residual_p = kcl_p(c.nodes.v_xp);
    c.into_out = device_current(d[4], v_in, c.nodes.v_xp, v_out, g) -
                 device_current(d[1], v_in, v_out, c.nodes.v_xn, g);
    return c;
}

}  // namespace

double device_current(const MosfetParams& p, double v_g, double v_a, double v_b, double gmin) {
    const double leak = gmin * (v_a - v_b);
    const bool a_high = v_a >= v_b;
    const double hi = a_high ? v_a : v_b;
    const double lo = a_high ? v_b : v_a;
    double i = 0.0;
    if (p.polarity == Polarity::N) {
        i = square_law(p, v_g - lo - p.v_th, hi - lo);  // source is the lower terminal
    } else {
        i = square_law(p, hi - v_g - p.v_th, hi - lo);  // source is the higher terminal
    }
    return (a_high ? i : -i) + leak;
}

InternalNodes solve_internal_nodes(const CmosStModel& m, double v_in, double v_out) {
    m.validate();
    check_voltages(m, v_in, v_out);
    return solve(m, v_in, v_out).nodes;
}

double cmos_field(const CmosStModel& m, double v_in, double v_out) {
    check_voltages(m, v_in, v_out);
    return solve(m, v_in, v_out).into_out / m.c_load;
}

double cmos_field_slope(const CmosStModel& m, double v_in, double v_out) {
    const double h = 1e-6 * m.vdd;
    return (cmos_field(m, v_in, v_out + h) - cmos_field(m, v_in, v_out - h)) / (2.0 * h);
}

Region cmos_region(const CmosStModel& m, double v_in, double v_out) {
    if (cmos_field_slope(m, v_in, v_out) > 0.0) return Region::Linear;
    return v_out >= 0.5 * m.vdd ? Region::SaturationPos : Region::SaturationNeg;
}

std::vector<Point> trace_gamma2(const CmosStModel& m, std::span<const double> v_out_grid) {
    m.validate();
    return parallel_map<Point>(v_out_grid.size(), [&](std::size_t r) {
        const double v_out = v_out_grid[r];
        if (!(v_out >= 0.0 && v_out <= m.vdd)) throw ConfigError("trace_gamma2: row outside the rails");
        constexpr int scan = 64;
        double prev_v = 0.0;
        double prev_f = cmos_field(m, prev_v, v_out);
        for (int i = 1; i <= scan; ++i) {
            const double v = m.vdd * i / scan;
            const double f = cmos_field(m, v, v_out);
            if (prev_f > 0.0 && f < 0.0) {
                const double v_in = bisect_decreasing([&](double x) { return cmos_field(m, x, v_out); }, prev_v, v);
                return Point{v_in, v_out};
            }
            prev_v = v;
            prev_f = f;
        }
        std::ostringstream os;
        os << "trace_gamma2: no sign change of the field in row v_out = " << v_out;
        throw NumericError(os.str());
    });
}

double contour_curvature_ratio(std::span<const Point> c) {
    if (c.size() < 5) throw NumericError("contour_curvature_ratio: need at least five points");
    auto slope = [&](std::size_t i, std::size_t j) {
        const double dx = c[j].v_in - c[i].v_in;
        if (dx == 0.0) return std::numeric_limits<double>::infinity();
        return std::abs((c[j].v_out - c[i].v_out) / dx);
    };
    const std::size_t n = c.size();
    const std::size_t mid = n / 2;
    const double s_mid = slope(mid - 1, mid + 1);
    const double s_end = std::min(slope(0, 1), slope(n - 2, n - 1));
    if (!(s_mid > 0.0)) throw NumericError("contour_curvature_ratio: flat contour middle");
    return s_end / s_mid;
}

Trajectory cmos_integrate(const CmosStModel& m, const Waveform& input, double v_out0, TimeSpan span,
                          const IntegrateOptions& opts) {
    m.validate();
    if (!(opts.tol > 0.0 && opts.tol <= 1e-3)) throw ConfigError("cmos_integrate: tol must lie in (0, 1e-3]");
    if (!(span.t1 > span.t0) || !std::isfinite(span.t0) || !std::isfinite(span.t1)) {
        throw ConfigError("cmos_integrate: malformed span, need finite t0 < t1");
    }
    if (input.empty() || span.t0 < input.t_begin() || span.t1 > input.t_end()) {
        throw ConfigError("cmos_integrate: span not covered by the input waveform");
    }
    check_voltages(m, static_cast<double>(input.eval(span.t0)), v_out0);
    if (opts.sample_count == 0 && !(opts.sample_dt > 0.0)) {
        throw ConfigError("cmos_integrate: need sample_count > 0 or sample_dt > 0");
    }

    const double ts = m.time_scale();
    const double dt = opts.sample_dt > 0.0 ? opts.sample_dt : (span.t1 - span.t0) / double(opts.sample_count);
    detail::Recorder rec(
        span.t0, span.t1, dt, [&input](long double t) { return input.eval(t); },
        [&m](long double v_in, long double v_out) {
            return cmos_region(m, static_cast<double>(v_in), static_cast<double>(v_out));
        });
    detail::AdaptiveProblem<double> p;
    p.field = [&](double t, double v) { return cmos_field(m, static_cast<double>(input.eval(t)), v); };
    p.region = [&](double t, double v) { return cmos_region(m, static_cast<double>(input.eval(t)), v); };
    p.abs_tol = opts.tol * m.vdd;
    p.t_tol = opts.tol * ts;
    p.h_init = 1e-2 * ts;
    p.compensated = opts.precision == Precision::High;
    p.max_steps = opts.max_steps;
    detail::AdaptiveState<double> st;

    double t = span.t0;
    double v = v_out0;
    rec.sample(t, v);
    std::optional<double> t_stop;
    while (t < span.t1 && !t_stop) {
        std::size_t idx = input.segment_index(t);
        while (idx + 1 < input.segments().size() && !(double(input.segment_end(idx)) > t)) ++idx;
        const double seg_end = std::min<double>(span.t1, static_cast<double>(input.segment_end(idx)));
        v = detail::run_adaptive<double>(p, t, v, seg_end, opts.thresholds, opts.stop_on_enter, &t_stop, st, rec);
        if (!std::isfinite(v)) throw NumericError("cmos_integrate: non-finite output");
        t = t_stop ? *t_stop : seg_end;
        rec.sample(t, v);
    }
    return rec.finish(v);
}

PhaseMap cmos_phase_map(const CmosStModel& m, const GridSpec& grid) {
    m.validate();
    if (grid.n_in < 2 || grid.n_out < 2) throw ConfigError("phase map: grid needs at least 2x2 points");
    if (!(grid.v_in_max > grid.v_in_min) || !(grid.v_out_max > grid.v_out_min)) {
        throw ConfigError("phase map: empty grid range");
    }
    PhaseMap pm;
    pm.v_in = linspace(grid.v_in_min, grid.v_in_max, grid.n_in);
    pm.v_out = linspace(grid.v_out_min, grid.v_out_max, grid.n_out);
    const auto rows = parallel_map<std::vector<double>>(pm.v_out.size(), [&](std::size_t r) {
        std::vector<double> row;
        row.reserve(pm.v_in.size());
        for (const double vi : pm.v_in) row.push_back(cmos_field(m, vi, pm.v_out[r]));
        return row;
    });
    for (const auto& row : rows) pm.field.insert(pm.field.end(), row.begin(), row.end());

    for (const double vo : pm.v_out) {
        if (!(vo > 0.0 && vo < m.vdd)) continue;
        try {
            const double one[] = {vo};
            pm.gamma2.push_back(trace_gamma2(m, one).front());
        } catch (const NumericError&) {
        }
    }
    return pm;
}

}  // namespace stmeta
