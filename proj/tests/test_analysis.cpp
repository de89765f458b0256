#include "catch_amalgamated.hpp"

#include "stmeta/analysis.hpp"
#include "stmeta/errors.hpp"

#include <cmath>
#include <numbers>
#include <vector>

using namespace stmeta;
using Catch::Approx;

namespace {

StModel default_trigger() { return StModel{1000.0, 0.5, 1.0, 0.0, 1e-9}; }

constexpr double kTau0 = 1e-9;
constexpr double kTau2 = 1e-9 / 499.0;

// Step delay of the default trigger from gamma1 for an input V_H + eps with
// eps < 1e-3, assembled region by region: linear growth away from gamma2, then a
// Region 3 decay to v = 0.
double analytic_step_delay(double eps) {
    const double v_in = 0.499 + eps;
    const double g2 = v_in / 0.499;
    const double x0 = 1.0 - g2;
    const double v_exit = 2.0 * (v_in - 0.001);  // drive = -M
    const double x_exit = v_exit - g2;
    return kTau2 * std::log(x_exit / x0) + kTau0 * std::log(1.0 + v_exit);
}

// Exit time of (delta, 0) from the linear band at level 0.
double analytic_exit(double delta) {
    const double g2 = delta / 0.499;
    const double v_exit = 2.0 * delta - 0.002;
    return kTau2 * std::log((v_exit - g2) / (0.0 - g2));
}

Trajectory synthetic(const std::vector<double>& t, const std::vector<double>& v) {
    Trajectory tr;
    for (std::size_t i = 0; i < t.size(); ++i) tr.samples.push_back({t[i], 0.0, v[i], Region::Linear});
    return tr;
}

}  // namespace

TEST_CASE("delay prediction formula", "[analysis][delay]") {
    const StModel m = default_trigger();
    const DelaySpec spec;
    CHECK(spec.v_th(m) == 0.0);
    const auto p = predict_delay(m, spec, 1e-6);
    CHECK(p.d2 == Approx(kTau2 * std::log(0.002 / 1e-6)).epsilon(1e-12));
    CHECK(p.d3 == Approx(kTau0 * std::numbers::ln2).epsilon(1e-12));
    CHECK(p.total == Approx(p.d2 + p.d3));
    CHECK(predict_delay(m, spec, 0.002).d2 == 0.0);
    CHECK(predict_delay(m, spec, 0.5).d2 == 0.0);
    CHECK_THROWS_AS(predict_delay(m, spec, 0.0), ConfigError);

    DelaySpec quarter{0.25};
    CHECK(quarter.v_th(m) == Approx(-0.5));
    CHECK(predict_delay(m, quarter, 1.0).d3 == Approx(kTau0 * std::log(4.0)));
    CHECK_THROWS_AS(DelaySpec{1.0}.validate(), ConfigError);
    CHECK_THROWS_AS(DelaySpec{0.0}.validate(), ConfigError);
}

TEST_CASE("measure_delay interpolates the first crossing", "[analysis][delay]") {
    const Trajectory tr = synthetic({0, 1, 2, 3}, {1.0, 0.6, 0.2, -0.2});
    CHECK(measure_delay(tr, 0.5, 0.0) == Approx(1.25));
    CHECK(measure_delay(tr, 0.0, 0.5) == Approx(2.0));
    CHECK_THROWS_AS(measure_delay(tr, -0.5, 0.0), MeasurementError);
    CHECK_THROWS_AS(measure_delay(tr, 0.5, 2.5), MeasurementError);
}

TEST_CASE("simulated step delay matches the region-by-region solution", "[analysis][delay]") {
    const StModel m = default_trigger();
    for (const double eps : {1e-9, 1e-7, 1e-5, 3e-4}) {
        CAPTURE(eps);
        CHECK(step_delay(m, DelaySpec{}, eps) == Approx(analytic_step_delay(eps)).epsilon(1e-6));
    }
    // beyond the band the linear region is skipped
    CHECK(step_delay(m, DelaySpec{}, 0.01) == Approx(kTau0 * std::numbers::ln2).epsilon(1e-6));
}

TEST_CASE("delay sweep validates and preserves order", "[analysis][delay]") {
    const StModel m = default_trigger();
    const std::vector<double> eps{1e-8, 1e-6, 1e-4};
    const SweepResult r = delay_sweep(m, DelaySpec{}, eps);
    REQUIRE(r.rows.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(r.rows[i].epsilon == eps[i]);
        CHECK(r.rows[i].measured == Approx(analytic_step_delay(eps[i])).epsilon(1e-6));
        if (i > 0) CHECK(r.rows[i].measured < r.rows[i - 1].measured);
    }
    const std::vector<double> unsorted{1e-6, 1e-8};
    CHECK_THROWS_AS(delay_sweep(m, DelaySpec{}, unsorted), ConfigError);
    const std::vector<double> negative{-1e-6};
    CHECK_THROWS_AS(delay_sweep(m, DelaySpec{}, negative), ConfigError);
}

TEST_CASE("least squares line fit", "[analysis][fit]") {
    const std::vector<double> x{0, 1, 2, 3, 4};
    std::vector<double> y;
    for (const double xi : x) y.push_back(2.0 * xi + 1.0);
    const LineFit f = fit_line(x, y);
    CHECK(f.slope == Approx(2.0));
    CHECK(f.intercept == Approx(1.0));
    CHECK(f.r_squared == Approx(1.0));

    const std::vector<double> noisy{1.1, 2.9, 5.2, 6.8, 9.0};
    const LineFit g = fit_line(x, noisy);
    // closed-form OLS: sxy / sxx with x mean 2, y mean 5
    const double sxy = (-2) * (1.1 - 5) + (-1) * (2.9 - 5) + 0 + 1 * (6.8 - 5) + 2 * (9.0 - 5);
    CHECK(g.slope == Approx(sxy / 10.0));
    CHECK(g.r_squared < 1.0);
    CHECK(g.r_squared > 0.99);

    const std::vector<double> same{1, 1, 1};
    const std::vector<double> three{1, 2, 3};
    CHECK_THROWS_AS(fit_line(same, three), NumericError);
    CHECK_THROWS_AS(fit_line(std::vector<double>{1.0}, std::vector<double>{1.0}), NumericError);
}

TEST_CASE("monotonicity verdicts", "[analysis][monotone]") {
    CHECK(monotonicity_verdict(synthetic({0, 1, 2}, {0, 0.5, 1}), 1.0).kind == Monotonicity::StrictlyMonotone);
    CHECK(monotonicity_verdict(synthetic({0, 1, 2}, {1, 0.5, -1}), 1.0).kind == Monotonicity::StrictlyMonotone);
    CHECK(monotonicity_verdict(synthetic({0, 1, 2, 3}, {0, 0.5, 0.5, 1}), 1.0).kind ==
          Monotonicity::MonotoneWithPlateaus);
    const auto v = monotonicity_verdict(synthetic({0, 1, 2, 3}, {0, 0.5, 0.4, 1}), 1.0);
    CHECK(v.kind == Monotonicity::NonMonotone);
    REQUIRE(v.witness_t);
    CHECK(*v.witness_t == 2.0);
}

TEST_CASE("pinned exit time follows tau2 * ln(band / delta)", "[analysis][resolution]") {
    const StModel m = default_trigger();
    for (const double d : {1e-12, 1e-10, 1e-8, 1e-6}) {
        CAPTURE(d);
        CHECK(pinned_exit_time(m, d) == Approx(analytic_exit(d)).epsilon(1e-6));
    }
    // starting beyond the band: already saturated
    CHECK(pinned_exit_time(m, 0.01) == 0.0);

    const std::vector<double> deltas{1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};
    const ResolutionFit f = fit_resolution_constant(m, deltas);
    CHECK(f.tau_fit == Approx(kTau2).epsilon(1e-4));
    CHECK(f.r_squared > 0.999999);
    CHECK(f.points.size() == deltas.size());

    const std::vector<double> narrow{1e-8, 1e-7, 1e-6};
    CHECK_THROWS_AS(fit_resolution_constant(m, narrow), ConfigError);
}

TEST_CASE("op-amp phase map", "[analysis][phase]") {
    const StModel m = default_trigger();
    GridSpec g{-0.7, 0.7, -1.2, 1.2, 15, 11};
    const PhaseMap pm = opamp_phase_map(m, g);
    REQUIRE(pm.v_in.size() == 15);
    REQUIRE(pm.v_out.size() == 11);
    REQUIRE(pm.field.size() == 165);
    CHECK(pm.v_in.front() == -0.7);
    CHECK(pm.v_in.back() == 0.7);
    for (std::size_t r = 0; r < pm.v_out.size(); ++r) {
        for (std::size_t c = 0; c < pm.v_in.size(); ++c) {
            const double vi = pm.v_in[c], vo = pm.v_out[r];
            double va = 1000.0 * (0.5 * vo - vi);
            va = std::max(-1.0, std::min(1.0, va));
            CHECK(pm.at(r, c) == Approx((va - vo) / kTau0).margin(1e-3));
        }
    }
    REQUIRE_FALSE(pm.gamma2.empty());
    for (const auto& p : pm.gamma2) {
        CHECK(std::abs(p.v_out) <= 1.0);
        CHECK(p.v_out == Approx(p.v_in / 0.499).margin(1e-12));
    }
    g.n_in = 1;
    CHECK_THROWS_AS(opamp_phase_map(m, g), ConfigError);
}
