#include "catch_amalgamated.hpp"

#include "stmeta/errors.hpp"
#include "stmeta/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace stmeta;
using Catch::Approx;

namespace {

StModel default_trigger() { return StModel{1000.0, 0.5, 1.0, 0.0, 1e-9}; }

// Fixed-step classical RK4 on the clipped field, written independently of the
// library. Only used for smooth-enough comparisons.
double rk4_oracle(const StModel& m, double (*vin)(double), double v, double t0, double t1, double h) {
    auto f = [&](double t, double y) {
        double va = m.gain_a * ((1 - m.feedback_k) * m.ref_v + m.feedback_k * y - vin(t));
        va = std::clamp(va, -m.saturation_m, m.saturation_m);
        return (va - y) / m.tau0;
    };
    const auto n = static_cast<long>(std::ceil((t1 - t0) / h));
    const double dt = (t1 - t0) / double(n);
    double t = t0;
    for (long i = 0; i < n; ++i) {
        const double k1 = f(t, v);
        const double k2 = f(t + dt / 2, v + dt / 2 * k1);
        const double k3 = f(t + dt / 2, v + dt / 2 * k2);
        const double k4 = f(t + dt, v + dt * k3);
        v += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        t = t0 + double(i + 1) * dt;
    }
    return v;
}

double slow_sine(double t) { return 0.7 * std::sin(2 * std::numbers::pi * 2e8 * t); }

}  // namespace

TEST_CASE("region 3 decay follows the exponential", "[integrator]") {
    const StModel m = default_trigger();
    IntegrateOptions o;
    o.thresholds = {0.0};
    for (const auto method : {StepMethod::Auto, StepMethod::Adaptive}) {
        o.method = method;
        const Trajectory tr = integrate(m, Waveform::constant(0.6L), 1.0, {0.0, 5e-9}, o);
        for (const auto& s : tr.samples) {
            CHECK(s.region == Region::SaturationNeg);
            CHECK(s.v_out == Approx(-1.0 + 2.0 * std::exp(-s.t / 1e-9)).margin(1e-9));
        }
        REQUIRE(tr.events.size() == 1);
        CHECK(tr.events[0].kind == EventKind::ThresholdCross);
        CHECK(tr.events[0].direction == Direction::Falling);
        CHECK(tr.events[0].t == Approx(1e-9 * std::numbers::ln2).epsilon(1e-8));
    }
}

TEST_CASE("linear region grows with tau2 away from gamma2", "[integrator]") {
    const StModel m = default_trigger();
    const double g2 = 0.1 / 0.499;
    const double x0 = 1e-6;
    const double tau2 = 1e-9 / 499.0;
    const double t_exit = tau2 * std::log((0.202 - g2) / x0);

    const auto exit = region_exit_time(m, 0.1, g2 + x0);
    REQUIRE(exit);
    CHECK(*exit == Approx(t_exit).epsilon(1e-6));

    IntegrateOptions o;
    o.sample_count = 400;
    const Trajectory tr = integrate(m, Waveform::constant(0.1L), g2 + x0, {0.0, 0.9 * t_exit}, o);
    for (const auto& s : tr.samples) {
        CHECK(s.region == Region::Linear);
        CHECK(s.v_out - g2 == Approx(x0 * std::exp(s.t / tau2)).epsilon(1e-7));
    }
}

TEST_CASE("region crossings are reported in order", "[integrator]") {
    const StModel m = default_trigger();
    const double g2 = 0.1 / 0.499;
    const Trajectory tr = integrate(m, Waveform::constant(0.1L), g2 - 1e-6, {0.0, 5e-9});
    const auto cross = tr.first_region_cross();
    REQUIRE(cross);
    CHECK(cross->from == Region::Linear);
    CHECK(cross->to == Region::SaturationNeg);
    CHECK(tr.samples.back().v_out == Approx(-1.0).margin(1e-2));

    IntegrateOptions stop;
    stop.stop_on_enter = Region::SaturationNeg;
    const Trajectory cut = integrate(m, Waveform::constant(0.1L), g2 - 1e-6, {0.0, 5e-9}, stop);
    CHECK(cut.samples.back().t == Approx(cross->t).epsilon(1e-9));
    CHECK(cut.samples.back().t < 5e-9);
}

TEST_CASE("constant inputs never leave a saturation region they settle in", "[integrator]") {
    const StModel m = default_trigger();
    CHECK_FALSE(region_exit_time(m, 0.0, 1.0));
    CHECK_FALSE(region_exit_time(m, 0.0, -1.0));
    // exactly on gamma2: the rest point of the linear region
    CHECK_FALSE(region_exit_time(m, 0.1, 0.1 / 0.499));
}

TEST_CASE("closed-form and adaptive stepping agree on a stepped input", "[integrator]") {
    const StModel m = default_trigger();
    Waveform w = Waveform::constant(-0.6L);
    w.append(2e-9L, seg::Ramp{-0.6L, 1e8L});
    w.append(14e-9L, seg::Constant{0.6L});
    IntegrateOptions a;
    a.sample_count = 200;
    a.tol = 1e-10;
    IntegrateOptions b = a;
    b.method = StepMethod::Adaptive;
    const Trajectory ta = integrate(m, w, -1.0, {0.0, 2e-8}, a);
    const Trajectory tb = integrate(m, w, -1.0, {0.0, 2e-8}, b);
    // compare on the shared cadence
    std::size_t matched = 0;
    for (const auto& s : ta.samples) {
        const auto it = std::find_if(tb.samples.begin(), tb.samples.end(),
                                     [&](const Sample& q) { return q.t == s.t; });
        if (it == tb.samples.end()) continue;
        ++matched;
        CHECK(s.v_out == Approx(it->v_out).margin(1e-7));
    }
    CHECK(matched >= 200);
    // the joint at 2 ns must be sampled
    CHECK(std::any_of(ta.samples.begin(), ta.samples.end(), [](const Sample& s) { return s.t == 2e-9; }));
}

TEST_CASE("sine input matches an independent RK4 reference", "[integrator]") {
    const StModel m = default_trigger();
    const Waveform w({Segment{0.0L, seg::Sine{0.0L, 0.7L, 2e8L, 0.0L}}});
    IntegrateOptions o;
    o.tol = 1e-10;
    o.sample_count = 10;
    const Trajectory tr = integrate(m, w, 0.5, {0.0, 1e-8}, o);
    double t_prev = 0.0, v_ref = 0.5;
    for (const auto& s : tr.samples) {
        if (s.t == 0.0) continue;
        v_ref = rk4_oracle(m, slow_sine, v_ref, t_prev, s.t, 2e-14);
        t_prev = s.t;
        CHECK(s.v_out == Approx(v_ref).margin(2e-6));
    }
}

TEST_CASE("high precision agrees with standard precision", "[integrator]") {
    const StModel m = default_trigger();
    IntegrateOptions o;
    const Trajectory a = integrate(m, step_to(-0.6L, 0.6L, 1e-9L), -1.0, {0.0, 6e-9}, o);
    o.precision = Precision::High;
    const Trajectory b = integrate(m, step_to(-0.6L, 0.6L, 1e-9L), -1.0, {0.0, 6e-9}, o);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(a.samples[i].t == Approx(b.samples[i].t).margin(1e-20));
        CHECK(a.samples[i].v_out == Approx(b.samples[i].v_out).margin(1e-12));
    }
}

TEST_CASE("cadence and determinism", "[integrator]") {
    const StModel m = default_trigger();
    IntegrateOptions o;
    o.sample_count = 100;
    const Trajectory a = integrate(m, Waveform::constant(0.0L), 1.0, {0.0, 1e-8}, o);
    const Trajectory b = integrate(m, Waveform::constant(0.0L), 1.0, {0.0, 1e-8}, o);
    CHECK(a.samples.size() == 101);
    CHECK(a.samples.front().t == 0.0);
    CHECK(a.samples.back().t == 1e-8);
    for (std::size_t i = 1; i < a.samples.size(); ++i) CHECK(a.samples[i].t > a.samples[i - 1].t);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i].v_out == b.samples[i].v_out);
    // flat input in Region 1 stays exactly at the rail
    for (const auto& s : a.samples) CHECK(s.v_out == 1.0);
}

TEST_CASE("integrate rejects malformed requests", "[integrator]") {
    const StModel m = default_trigger();
    IntegrateOptions o;
    o.tol = 0.1;
    CHECK_THROWS_AS(integrate(m, Waveform::constant(0.0L), 0.0, {0.0, 1e-9}, o), ConfigError);
    CHECK_THROWS_AS(integrate(m, Waveform::constant(0.0L), 0.0, {1e-9, 1e-9}), ConfigError);
    CHECK_THROWS_AS(integrate(m, Waveform::constant(0.0L, 1e-9L), 0.0, {0.0, 2e-9}), ConfigError);
    CHECK_THROWS_AS(integrate(m, Waveform::constant(0.0L), 3.0, {0.0, 1e-9}), ConfigError);
    CHECK_THROWS_AS(integrate(m, Waveform{}, 0.0, {0.0, 1e-9}), ConfigError);
}
