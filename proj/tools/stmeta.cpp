// stmeta: command-line front end for the Schmitt-Trigger metastability toolkit.
//
// Exit codes: 0 ok, 1 configuration or model error, 2 infeasible scenario,
// 3 numeric or measurement failure. Errors are also written to stderr as JSON.

#include "stmeta/analysis.hpp"
#include "stmeta/cmos.hpp"
#include "stmeta/config.hpp"
#include "stmeta/controller.hpp"
#include "stmeta/errors.hpp"
#include "stmeta/integrator.hpp"
#include "stmeta/io.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace stmeta;

namespace {

struct Options {
    std::optional<std::string> config_path;
    std::vector<std::string> overrides;
    std::optional<std::string> out_dir;
    std::vector<std::string> formats;
};

class Output {
public:
    explicit Output(const Json& config) : dir_(config.at("output").at("dir").get<std::string>()) {
        for (const auto& f : config.at("output").at("formats")) formats_.insert(f.get<std::string>());
        fs::create_directories(dir_);
    }

    [[nodiscard]] bool wants(const std::string& f) const { return formats_.count(f) > 0; }

    std::ofstream open(const std::string& name) const {
        const fs::path p = dir_ / name;
        std::ofstream os(p, std::ios::binary);
        if (!os) throw ConfigError("cannot write '" + p.string() + "'");
        return os;
    }

    void json(const std::string& name, const Json& j) const { open(name) << j.dump(2) << '\n'; }

private:
    fs::path dir_;
    std::set<std::string> formats_;
};

Json resolve_config(const Options& o) {
    std::vector<std::string> overrides = o.overrides;
    if (o.out_dir) overrides.push_back("output.dir=" + Json(*o.out_dir).dump());
    if (!o.formats.empty()) overrides.push_back("output.formats=" + Json(o.formats).dump());
    return load_config(o.config_path, overrides);
}

StModel require_opamp(const Json& c, const char* cmd) {
    if (model_kind(c) != "opamp") throw ConfigError(std::string(cmd) + " needs model.kind = opamp");
    return opamp_model_from(c);
}

void emit_trajectory(const Output& out, const std::string& stem, const Trajectory& traj) {
    if (out.wants("csv")) {
        auto os = out.open(stem + ".csv");
        write_trajectory_csv(os, traj);
        auto ev = out.open(stem + "_events.csv");
        write_events_csv(ev, traj);
    }
    if (out.wants("json")) out.json(stem + "_events.json", events_to_json(traj));
    if (out.wants("svg")) out.open(stem + ".svg") << trajectory_svg(traj, stem);
}

void run_simulate(const Json& c, const Output& out) {
    const Waveform input = scenario_input(c);
    const TimeSpan span = run_span(c);
    const IntegrateOptions io = run_options(c);
    const double v0 = scenario_v_out0(c);
    const Trajectory traj = model_kind(c) == "opamp" ? integrate(opamp_model_from(c), input, v0, span, io)
                                                     : cmos_integrate(cmos_model_from(c), input, v0, span, io);
    emit_trajectory(out, "trajectory", traj);
}

void run_phase_map(const Json& c, const Output& out) {
    const GridSpec grid = grid_from(c);
    const PhaseMap pm = model_kind(c) == "opamp" ? opamp_phase_map(opamp_model_from(c), grid)
                                                 : cmos_phase_map(cmos_model_from(c), grid);
    if (out.wants("csv")) {
        auto os = out.open("phase_map.csv");
        write_phase_map_csv(os, pm);
        auto g = out.open("gamma2.csv");
        write_contour_csv(g, pm.gamma2);
    }
    if (out.wants("json")) {
        Json j;
        j["n_in"] = pm.v_in.size();
        j["n_out"] = pm.v_out.size();
        j["gamma2_points"] = pm.gamma2.size();
        if (model_kind(c) == "cmos" && pm.gamma2.size() >= 5) {
            j["curvature_ratio"] = contour_curvature_ratio(pm.gamma2);
        }
        out.json("phase_map.json", j);
    }
    if (out.wants("svg")) out.open("phase_map.svg") << phase_map_svg(pm, "dV_out/dt sign");
}

void run_delay_sweep(const Json& c, const Output& out) {
    const StModel m = require_opamp(c, "delay-sweep");
    const std::vector<double> eps = delay_epsilons(c, m);
    const SweepResult sweep = delay_sweep(m, delay_spec_from(c), eps, sweep_options_from(c));
    if (out.wants("csv")) {
        auto os = out.open("sweep.csv");
        write_sweep_csv(os, sweep);
    }
    if (out.wants("json")) {
        Json rows = Json::array();
        std::vector<double> x, y;
        const double band = 2.0 * m.saturation_m / m.gain_a;
        for (const auto& r : sweep.rows) {
            rows.push_back({{"epsilon", r.epsilon},
                            {"d2_pred", r.d2_pred},
                            {"d3_pred", r.d3_pred},
                            {"total_pred", r.total_pred},
                            {"measured", r.measured}});
            if (r.epsilon < band) {
                x.push_back(std::log(1.0 / r.epsilon));
                y.push_back(r.measured);
            }
        }
        Json j{{"rows", rows}, {"tau2", m.tau2()}};
        if (x.size() >= 2) {
            const LineFit f = fit_line(x, y);
            j["log_fit"] = {{"slope", f.slope}, {"intercept", f.intercept}, {"r_squared", f.r_squared}};
        }
        out.json("sweep.json", j);
    }
    if (out.wants("svg")) out.open("sweep.svg") << sweep_svg(sweep, "delay vs ln(1/epsilon)");
}

void run_control(const Json& c, const Output& out) {
    const StModel m = require_opamp(c, "control");
    const ControlPlan plan = synthesize(m, scenario_desired(c), run_span(c), control_options_from(c));
    out.json("plan.json", plan_to_json(plan));
    if (out.wants("csv")) {
        auto os = out.open("control.csv");
        os << "t,v_in,v_out,desired,region\r\n";
        for (const auto& s : plan.trajectory.samples) {
            os << format_number(s.t) << ',' << format_number(s.v_in) << ',' << format_number(s.v_out) << ','
               << format_number(static_cast<double>(plan.desired_output.eval(s.t))) << ',' << to_string(s.region)
               << "\r\n";
        }
    }
    if (out.wants("svg")) out.open("control.svg") << trajectory_svg(plan.trajectory, "closed-loop check");
}

void run_pin(const Json& c, const Output& out) {
    const StModel m = require_opamp(c, "pin");
    const PinResult r = pin_and_release(m, pin_options_from(c));
    emit_trajectory(out, "pin", r.trajectory);
    Json j{{"level", c.at("pin").at("level")},
           {"release_delta", c.at("pin").at("release_delta")},
           {"t_hold", r.t_hold},
           {"t_release", r.t_release},
           {"t_end", r.t_end},
           {"resolved", std::string(to_string(r.resolved))},
           {"resolution_time", r.resolution_time ? Json(*r.resolution_time) : Json(nullptr)}};
    out.json("pin.json", j);
}

void run_fit_tau(const Json& c, const Output& out) {
    const StModel m = require_opamp(c, "fit-tau");
    const ResolutionFit f = fit_resolution_constant(m, fit_deltas(c, m), fit_options_from(c));
    Json pts = Json::array();
    for (const auto& p : f.points) pts.push_back({{"delta", p.delta}, {"exit_time", p.exit_time}});
    out.json("fit.json", {{"tau_fit", f.tau_fit},
                          {"tau2", m.tau2()},
                          {"intercept", f.intercept},
                          {"r_squared", f.r_squared},
                          {"points", pts}});
    if (out.wants("csv")) {
        auto os = out.open("fit.csv");
        os << "delta,exit_time\r\n";
        for (const auto& p : f.points) os << format_number(p.delta) << ',' << format_number(p.exit_time) << "\r\n";
    }
}

int report(const char* kind, const std::string& message, int code, const std::vector<TimeInterval>& iv = {}) {
    Json j{{"error", kind}, {"message", message}, {"exit_code", code}};
    if (!iv.empty()) {
        Json a = Json::array();
        for (const auto& i : iv) a.push_back({{"t_begin", i.t_begin}, {"t_end", i.t_end}, {"reason", i.reason}});
        j["intervals"] = a;
    }
    std::cerr << j.dump() << std::endl;
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Schmitt-Trigger metastability simulator"};
    app.require_subcommand(1);
    Options opts;

    using Runner = void (*)(const Json&, const Output&);
    const std::vector<std::tuple<const char*, const char*, Runner>> commands = {
        {"simulate", "integrate the configured scenario", run_simulate},
        {"phase-map", "derivative field on a grid plus the gamma2 curve", run_phase_map},
        {"delay-sweep", "step delay against the overdrive epsilon", run_delay_sweep},
        {"control", "synthesize an input for the desired output and re-simulate it", run_control},
        {"pin", "pin the output at a metastable level, then release it", run_pin},
        {"fit-tau", "fit the resolution time constant from pinned releases", run_fit_tau},
    };
    Runner selected = nullptr;
    for (const auto& [name, help, fn] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", opts.config_path, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--set", opts.overrides, "override KEY=VALUE (dotted key, repeatable)");
        sub->add_option("--out", opts.out_dir, "output directory");
        sub->add_option("--format", opts.formats, "csv, json or svg (repeatable)")
            ->check(CLI::IsMember({"csv", "json", "svg"}));
        sub->callback([&selected, f = fn] { selected = f; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report("config", e.what(), 1);
    }

    try {
        const Json config = resolve_config(opts);
        const Output out(config);
        out.json("effective_config.json", config);
        selected(config, out);
    } catch (const InfeasibleError& e) {
        return report("infeasible", e.what(), 2, e.intervals());
    } catch (const ConfigError& e) {
        return report("config", e.what(), 1);
    } catch (const ModelError& e) {
        return report("model", e.what(), 1);
    } catch (const MeasurementError& e) {
        return report("measurement", e.what(), 3);
    } catch (const NumericError& e) {
        return report("numeric", e.what(), 3);
    } catch (const Json::exception& e) {
        return report("config", e.what(), 1);
    } catch (const fs::filesystem_error& e) {
        return report("config", e.what(), 1);
    }
    return 0;
}
