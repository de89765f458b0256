#include "catch_amalgamated.hpp"

#include "stmeta/config.hpp"
#include "stmeta/errors.hpp"
#include "stmeta/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace stmeta;
using Catch::Approx;

namespace {

std::vector<std::string> lines_crlf(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start < s.size()) {
        const auto end = s.find("\r\n", start);
        REQUIRE(end != std::string::npos);
        out.push_back(s.substr(start, end - start));
        start = end + 2;
    }
    return out;
}

}  // namespace

TEST_CASE("numbers round-trip through text", "[io]") {
    for (const double v : {0.1, 1.0 / 3.0, -2.004008016032064e-12, 6.02e23, 0.0}) {
        CHECK(std::stod(format_number(v)) == v);
    }
    CHECK(format_number(1.0) == "1");
}

TEST_CASE("CSV quoting", "[io][csv]") {
    CHECK(csv_field("Linear") == "Linear");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(csv_field("two\nlines") == "\"two\nlines\"");
}

TEST_CASE("trajectory and events CSV", "[io][csv]") {
    Trajectory tr;
    tr.samples = {{0.0, 0.1, 1.0, Region::SaturationPos}, {1e-9, 0.1, 0.25, Region::Linear}};
    Event e;
    e.t = 5e-10;
    e.kind = EventKind::RegionCross;
    e.from = Region::SaturationPos;
    e.to = Region::Linear;
    tr.events.push_back(e);

    std::ostringstream os;
    write_trajectory_csv(os, tr);
    const auto rows = lines_crlf(os.str());
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == "t,v_in,v_out,region");
    CHECK(rows[1] == "0,0.10000000000000001,1,Saturation_Pos");
    CHECK(rows[2] == "1.0000000000000001e-09,0.10000000000000001,0.25,Linear");

    std::ostringstream ev;
    write_events_csv(ev, tr);
    const auto erows = lines_crlf(ev.str());
    REQUIRE(erows.size() == 2);
    CHECK(erows[0] == "t,kind,from,to,v_th,direction");
    CHECK(erows[1].rfind("5.0000000000000003e-10,", 0) == 0);
}

TEST_CASE("sweep and phase map CSV headers", "[io][csv]") {
    SweepResult s;
    s.rows.push_back({1e-6, 1e-11, 6.9e-10, 7e-10, 7.01e-10});
    std::ostringstream os;
    write_sweep_csv(os, s);
    CHECK(lines_crlf(os.str()).at(0) == "epsilon,d2_pred,d3_pred,total_pred,measured");

    PhaseMap pm;
    pm.v_in = {0.0, 1.0};
    pm.v_out = {0.0};
    pm.field = {1.0, -1.0};
    std::ostringstream p;
    write_phase_map_csv(p, pm);
    const auto rows = lines_crlf(p.str());
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == "v_in,v_out,dvout_dt");
    CHECK(rows[2] == "1,0,-1");
    std::ostringstream c;
    const std::vector<Point> pts{{0.5, 0.25}};
    write_contour_csv(c, pts);
    CHECK(c.str() == "v_in,v_out\r\n0.5,0.25\r\n");
}

TEST_CASE("waveform JSON round trip", "[io][json]") {
    Waveform w = Waveform::constant(0.1L);
    w.append(1e-9L, seg::Ramp{0.1L, 1e8L});
    w.append(2e-9L, seg::Sine{0.2L, 0.05L, 1e9L, 0.3L});
    w.append(4e-9L, seg::Exp{1.0L, 0.2L, 1e-9L, seg::ExpSense::Growing});
    w.set_t_end(6e-9L);
    const Waveform back = waveform_from_json(waveform_to_json(w));
    REQUIRE(back.segments().size() == 4);
    CHECK(back.t_end() == Approx(6e-9));
    for (const double t : {0.5e-9, 1.5e-9, 3e-9, 5e-9}) {
        CHECK(double(back.eval(t)) == Approx(double(w.eval(t))).epsilon(1e-15));
    }

    // numbers given as strings keep extended precision
    const Json j = Json::parse(R"({"segments":[{"t_start":0,"kind":"constant","level":"0.1"}]})");
    CHECK(waveform_from_json(j).eval(0.0L) == 0.1L);

    CHECK_THROWS_AS(waveform_from_json(Json::parse(R"({"segments":[]})")), ConfigError);
    CHECK_THROWS_AS(waveform_from_json(Json::parse(R"({"segments":[{"kind":"square"}]})")), ConfigError);
    CHECK_THROWS_AS(waveform_from_json(Json::parse(R"({"segments":[{"kind":"ramp","v0":0}]})")), ConfigError);
    CHECK_THROWS_AS(
        waveform_from_json(Json::parse(
            R"({"segments":[{"t_start":1,"kind":"constant","level":0},{"t_start":0,"kind":"constant","level":0}]})")),
        ConfigError);
}

TEST_CASE("svg output is well formed", "[io][svg]") {
    Trajectory tr;
    tr.samples = {{0.0, 0.0, 1.0, Region::SaturationPos}, {1e-9, 0.0, 0.5, Region::SaturationPos}};
    const std::string svg = trajectory_svg(tr, "a<b");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("a<b") == std::string::npos);  // title escaped
}

TEST_CASE("defaults and typed accessors", "[config]") {
    const Json c = load_config(std::nullopt, {});
    CHECK(model_kind(c) == "opamp");
    const StModel m = opamp_model_from(c);
    CHECK(m.gain_a == 1000.0);
    CHECK(m.tau0 == 1e-9);
    CHECK(run_span(c).t1 == 2e-8);
    CHECK(run_options(c).sample_count == 1000);
    CHECK(scenario_v_out0(c) == 1.0);
    CHECK(scenario_input(c).eval(0.0L) == 0.0L);

    const auto eps = delay_epsilons(c, m);
    REQUIRE(eps.size() == 7);
    CHECK(eps.front() == Approx(0.002 * 1e-7));
    CHECK(eps.back() == Approx(0.002 * 1e-1));

    const auto deltas = fit_deltas(c, m);
    CHECK(deltas.front() == Approx(1e-12));
    CHECK(deltas.back() == Approx(1e-6));

    const GridSpec g = grid_from(c);
    CHECK(g.n_in == 50);
    CHECK(g.v_in_min < -0.499);
    CHECK(g.v_in_max > 0.499);
    CHECK(g.v_out_max > 1.0);
}

TEST_CASE("overrides", "[config]") {
    Json c = default_config();
    apply_override(c, "model.gain_a=500");
    CHECK(c["model"]["gain_a"] == 500);
    apply_override(c, "run.precision=high");
    CHECK(c["run"]["precision"] == "high");
    apply_override(c, "fit.deltas.0=1e-13");
    CHECK(c["fit"]["deltas"][0] == 1e-13);
    apply_override(c, "control.vin_rate_cap=1e8");
    CHECK(control_options_from(c).vin_rate_cap == 1e8);
    apply_override(c, R"(scenario.waveform={"segments":[{"kind":"constant","level":0.3}]})");
    CHECK(scenario_input(c).eval(0.0L) == Approx(0.3));

    CHECK_THROWS_AS(apply_override(c, "model.gain=5"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "model.gain_a"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "fit.deltas.99=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "model.gain_a.x=1"), ConfigError);

    CHECK_THROWS_AS(load_config(std::nullopt, {"model.kind=bjt"}), ConfigError);
    CHECK_THROWS_AS(load_config(std::nullopt, {"model.feedback_k=0.001"}), ConfigError);
    CHECK_THROWS_AS(load_config(std::nullopt, {"run.precision=quad"}), ConfigError);
    CHECK_THROWS_AS(load_config(std::nullopt, {"output.formats=[\"pdf\"]"}), ConfigError);
}

TEST_CASE("config file merge and effective config round trip", "[config]") {
    const auto dir = std::filesystem::temp_directory_path() / "stmeta_cfg_test";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "run.json").string();
    {
        std::ofstream f(path);
        f << R"({"model":{"tau0":2e-9},"scenario":{"waveform":{"segments":[{"kind":"ramp","v0":0,"slope":1e6}]}}})";
    }
    const Json c = load_config(path, {"run.t1=1e-8"});
    CHECK(opamp_model_from(c).tau0 == 2e-9);
    CHECK(opamp_model_from(c).gain_a == 1000.0);  // untouched default
    CHECK(run_span(c).t1 == 1e-8);
    CHECK(c["scenario"]["waveform"]["segments"].size() == 1);

    // the effective config reloads to the same document
    const auto eff = (dir / "effective.json").string();
    {
        std::ofstream f(eff);
        f << c.dump(2);
    }
    CHECK(load_config(eff, {}) == c);

    {
        std::ofstream f(path);
        f << "[1,2]";
    }
    CHECK_THROWS_AS(load_config(path, {}), ConfigError);
    CHECK_THROWS_AS(load_config((dir / "missing.json").string(), {}), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("cmos model from config", "[config]") {
    const Json c = load_config(std::nullopt, {"model.kind=cmos", "model.devices.m4.beta=2e-5"});
    const CmosStModel m = cmos_model_from(c);
    CHECK(m.vdd == 1.2);
    CHECK(m.m[3].beta == 2e-5);
    CHECK(m.m[4].beta == 1e-5);
    const GridSpec g = grid_from(c);
    CHECK(g.v_in_min == 0.0);
    CHECK(g.v_out_max == 1.2);
}
