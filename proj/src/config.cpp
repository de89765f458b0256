#include "stmeta/config.hpp"

#include "stmeta/errors.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

namespace stmeta {

Json default_config() {
    Json mos = Json::object();
    for (int i = 1; i <= 6; ++i) {
        mos["m" + std::to_string(i)] = {{"v_th", 0.3}, {"beta", i <= 3 ? 2e-5 : 1e-5}, {"lambda", 0.0}};
    }
    Json model = {{"kind", "opamp"}, {"gain_a", 1000.0}, {"feedback_k", 0.5}, {"saturation_m", 1.0},
                  {"ref_v", 0.0},    {"tau0", 1e-9},     {"vdd", 1.2},        {"c_load", 2e-15},
                  {"gmin", 1e-12}};
    model["devices"] = mos;
    return {
        {"model", model},
        {"scenario",
         {{"waveform", {{"segments", Json::array({{{"t_start", 0.0}, {"kind", "constant"}, {"level", 0.0}}})}}},
          {"waveform_csv", nullptr},
          {"v_out0", 1.0},
          {"desired",
           {{"segments", Json::array({{{"t_start", 0.0},
                                       {"kind", "sine"},
                                       {"offset", 0.0},
                                       {"amplitude", 0.25},
                                       {"frequency_hz", 1e8},
                                       {"phase", 0.0}}})}}}}},
        {"run",
         {{"t0", 0.0},
          {"t1", 2e-8},
          {"tol", 1e-9},
          {"sample_count", 1000},
          {"sample_dt", 0.0},
          {"precision", "standard"},
          {"method", "auto"}}},
        {"delay",
         {{"sigma", 0.5},
          {"epsilons", nullptr},
          {"decades_from", -7},
          {"decades_to", -1},
          {"per_decade", 1},
          {"tol", 1e-10},
          {"precision", "standard"}}},
        {"control", {{"window", 0.0}, {"vin_rate_cap", nullptr}, {"tol", 1e-10}, {"precision", "high"}}},
        {"pin", {{"level", 0.0}, {"hold", 0.0}, {"release_delta", 1e-7}, {"settle_windows", 8}, {"tol", 1e-10}}},
        {"fit",
         {{"level", 0.0},
          {"deltas", {1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6}},
          {"tol", 1e-10},
          {"precision", "high"}}},
        {"grid",
         {{"v_in_min", nullptr},
          {"v_in_max", nullptr},
          {"v_out_min", nullptr},
          {"v_out_max", nullptr},
          {"n_in", 50},
          {"n_out", 50}}},
        {"output", {{"dir", "out"}, {"formats", {"csv"}}}},
    };
}

namespace {

std::vector<std::string> split_path(const std::string& key) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        parts.push_back(key.substr(start, dot - start));
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    for (const auto& p : parts) {
        if (p.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    }
    return parts;
}

bool is_index(const std::string& s) {
    return !s.empty() && s.find_first_not_of("0123456789") == std::string::npos;
}

template <class T>
T get(const Json& c, const char* section, const char* key) {
    try {
        return c.at(section).at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("config ") + section + "." + key + ": " + e.what());
    }
}

Precision precision_from(const std::string& s) {
    if (s == "standard") return Precision::Standard;
    if (s == "high") return Precision::High;
    throw ConfigError("precision must be 'standard' or 'high', got '" + s + "'");
}

std::optional<double> optional_number(const Json& c, const char* section, const char* key) {
    const Json& sec = c.at(section);
    if (!sec.contains(key) || sec.at(key).is_null()) return std::nullopt;
    const Json& v = sec.at(key);
    if (!v.is_number()) throw ConfigError(std::string("config ") + section + "." + key + " must be a number");
    return v.get<double>();
}

// Recursive overwrite; unlike a JSON merge patch, null is kept as a value so an
// effective config reloads unchanged.
void merge_into(Json& base, const Json& patch) {
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        if (it.value().is_object() && base.contains(it.key()) && base[it.key()].is_object()) {
            merge_into(base[it.key()], it.value());
        } else {
            base[it.key()] = it.value();
        }
    }
}

}  // namespace

void apply_override(Json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' is not of the form KEY=VALUE");
    }
    const auto parts = split_path(assignment.substr(0, eq));
    const std::string text = assignment.substr(eq + 1);
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    const bool free_form = parts.front() == "scenario";
    Json* node = &config;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const std::string& p = parts[i];
        const bool leaf = i + 1 == parts.size();
        if (node->is_array() && is_index(p)) {
            const auto idx = std::stoul(p);
            if (idx >= node->size()) throw ConfigError("override index out of range in '" + assignment + "'");
            node = &(*node)[idx];
        } else if (node->is_object()) {
            if (!node->contains(p) && !free_form) {
                throw ConfigError("unknown config key '" + assignment.substr(0, eq) + "'");
            }
            node = &(*node)[p];
        } else {
            throw ConfigError("override path '" + assignment.substr(0, eq) + "' descends into a scalar");
        }
        if (leaf) *node = value;
    }
}

Json load_config(const std::optional<std::string>& path, const std::vector<std::string>& overrides) {
    Json config = default_config();
    if (path) {
        std::ifstream in(*path);
        if (!in) throw ConfigError("cannot open config file '" + *path + "'");
        Json file = Json::parse(in, nullptr, false);
        if (file.is_discarded() || !file.is_object()) throw ConfigError("config file '" + *path + "' is not a JSON object");
        merge_into(config, file);
        // The waveform sections are replaced wholesale rather than merged.
        if (file.contains("scenario") && file["scenario"].is_object()) {
            for (const char* k : {"waveform", "desired"}) {
                if (file["scenario"].contains(k)) config["scenario"][k] = file["scenario"][k];
            }
        }
    }
    for (const auto& o : overrides) apply_override(config, o);
    validate_config(config);
    return config;
}

void validate_config(const Json& c) {
    for (const char* s : {"model", "scenario", "run", "delay", "control", "pin", "fit", "grid", "output"}) {
        if (!c.contains(s) || !c.at(s).is_object()) throw ConfigError(std::string("config section '") + s + "' missing");
    }
    const std::string kind = model_kind(c);
    try {
        if (kind == "opamp") {
            opamp_model_from(c).validate();
        } else {
            cmos_model_from(c).validate();
        }
    } catch (const ModelError& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
    (void)precision_from(get<std::string>(c, "run", "precision"));
    const auto method = get<std::string>(c, "run", "method");
    if (method != "auto" && method != "adaptive") throw ConfigError("run.method must be 'auto' or 'adaptive'");
    const Json csv = c.at("scenario").value("waveform_csv", Json(nullptr));
    if (!csv.is_null()) {
        if (!csv.is_string()) throw ConfigError("scenario.waveform_csv must be a path");
        if (!std::filesystem::exists(csv.get<std::string>())) {
            throw ConfigError("scenario.waveform_csv '" + csv.get<std::string>() + "' does not exist");
        }
    }
    const Json& formats = c.at("output").at("formats");
    if (!formats.is_array()) throw ConfigError("output.formats must be an array");
    for (const auto& f : formats) {
        if (!f.is_string() || (f != "csv" && f != "json" && f != "svg")) {
            throw ConfigError("output.formats entries must be csv, json or svg");
        }
    }
}

std::string model_kind(const Json& c) {
    const Json& k = c.at("model").at("kind");
    if (!k.is_string() || (k != "opamp" && k != "cmos")) {
        throw ConfigError("model.kind must be 'opamp' or 'cmos'");
    }
    return k.get<std::string>();
}

StModel opamp_model_from(const Json& c) {
    StModel m;
    m.gain_a = get<double>(c, "model", "gain_a");
    m.feedback_k = get<double>(c, "model", "feedback_k");
    m.saturation_m = get<double>(c, "model", "saturation_m");
    m.ref_v = get<double>(c, "model", "ref_v");
    m.tau0 = get<double>(c, "model", "tau0");
    return m;
}

CmosStModel cmos_model_from(const Json& c) {
    CmosStModel m = default_cmos_model();
    m.vdd = get<double>(c, "model", "vdd");
    m.c_load = get<double>(c, "model", "c_load");
    m.gmin = get<double>(c, "model", "gmin");
    const Json& devs = c.at("model").at("devices");
    for (int i = 0; i < 6; ++i) {
        const std::string key = "m" + std::to_string(i + 1);
        if (!devs.contains(key)) continue;
        const Json& d = devs.at(key);
        try {
            m.m[i].v_th = d.value("v_th", m.m[i].v_th);
            m.m[i].beta = d.value("beta", m.m[i].beta);
            m.m[i].lambda = d.value("lambda", m.m[i].lambda);
        } catch (const Json::exception& e) {
            throw ConfigError("config model.devices." + key + ": " + e.what());
        }
    }
    return m;
}

Waveform scenario_input(const Json& c) {
    const Json csv = c.at("scenario").value("waveform_csv", Json(nullptr));
    if (!csv.is_null()) return waveform_from_csv_file(csv.get<std::string>());
    return waveform_from_json(c.at("scenario").at("waveform"));
}

Waveform scenario_desired(const Json& c) { return waveform_from_json(c.at("scenario").at("desired")); }

double scenario_v_out0(const Json& c) { return get<double>(c, "scenario", "v_out0"); }

TimeSpan run_span(const Json& c) { return {get<double>(c, "run", "t0"), get<double>(c, "run", "t1")}; }

IntegrateOptions run_options(const Json& c) {
    IntegrateOptions o;
    o.tol = get<double>(c, "run", "tol");
    o.sample_count = get<std::size_t>(c, "run", "sample_count");
    o.sample_dt = get<double>(c, "run", "sample_dt");
    o.precision = precision_from(get<std::string>(c, "run", "precision"));
    o.method = get<std::string>(c, "run", "method") == "adaptive" ? StepMethod::Adaptive : StepMethod::Auto;
    return o;
}

DelaySpec delay_spec_from(const Json& c) {
    DelaySpec s;
    s.sigma = get<double>(c, "delay", "sigma");
    s.validate();
    return s;
}

std::vector<double> delay_epsilons(const Json& c, const StModel& m) {
    const Json explicit_list = c.at("delay").value("epsilons", Json(nullptr));
    if (!explicit_list.is_null()) {
        try {
            return explicit_list.get<std::vector<double>>();
        } catch (const Json::exception& e) {
            throw ConfigError(std::string("delay.epsilons: ") + e.what());
        }
    }
    const int from = get<int>(c, "delay", "decades_from");
    const int to = get<int>(c, "delay", "decades_to");
    const int per = get<int>(c, "delay", "per_decade");
    if (to < from || per < 1) throw ConfigError("delay: need decades_from <= decades_to and per_decade >= 1");
    const double band = 2.0 * m.saturation_m / m.gain_a;
    std::vector<double> eps;
    for (int i = 0; i <= (to - from) * per; ++i) {
        eps.push_back(band * std::pow(10.0, from + static_cast<double>(i) / per));
    }
    return eps;
}

SweepOptions sweep_options_from(const Json& c) {
    SweepOptions o;
    o.tol = get<double>(c, "delay", "tol");
    o.precision = precision_from(get<std::string>(c, "delay", "precision"));
    o.sample_count = get<std::size_t>(c, "run", "sample_count");
    return o;
}

ControlOptions control_options_from(const Json& c) {
    ControlOptions o;
    o.window = get<double>(c, "control", "window");
    o.tol = get<double>(c, "control", "tol");
    o.precision = precision_from(get<std::string>(c, "control", "precision"));
    o.sample_count = get<std::size_t>(c, "run", "sample_count");
    o.vin_rate_cap = optional_number(c, "control", "vin_rate_cap");
    return o;
}

PinOptions pin_options_from(const Json& c) {
    PinOptions o;
    o.level = get<double>(c, "pin", "level");
    o.hold = get<double>(c, "pin", "hold");
    o.release_delta = get<double>(c, "pin", "release_delta");
    o.settle_windows = get<double>(c, "pin", "settle_windows");
    o.tol = get<double>(c, "pin", "tol");
    o.sample_count = get<std::size_t>(c, "run", "sample_count");
    return o;
}

ResolutionFitOptions fit_options_from(const Json& c) {
    ResolutionFitOptions o;
    o.level = get<double>(c, "fit", "level");
    o.tol = get<double>(c, "fit", "tol");
    o.precision = precision_from(get<std::string>(c, "fit", "precision"));
    return o;
}

std::vector<double> fit_deltas(const Json& c, const StModel& m) {
    auto d = get<std::vector<double>>(c, "fit", "deltas");
    for (auto& x : d) x *= m.saturation_m;
    return d;
}

GridSpec grid_from(const Json& c) {
    GridSpec g;
    if (model_kind(c) == "opamp") {
        const StModel m = opamp_model_from(c);
        const Geometry geo = derive_geometry(m);
        const double pad = 0.25 * geo.hysteresis;
        g.v_in_min = geo.v_l - pad;
        g.v_in_max = geo.v_h + pad;
        g.v_out_min = -1.2 * m.saturation_m;
        g.v_out_max = 1.2 * m.saturation_m;
    } else {
        const CmosStModel m = cmos_model_from(c);
        g.v_in_min = 0.0;
        g.v_in_max = m.vdd;
        g.v_out_min = 0.0;
        g.v_out_max = m.vdd;
    }
    if (auto v = optional_number(c, "grid", "v_in_min")) g.v_in_min = *v;
    if (auto v = optional_number(c, "grid", "v_in_max")) g.v_in_max = *v;
    if (auto v = optional_number(c, "grid", "v_out_min")) g.v_out_min = *v;
    if (auto v = optional_number(c, "grid", "v_out_max")) g.v_out_max = *v;
    g.n_in = get<std::size_t>(c, "grid", "n_in");
    g.n_out = get<std::size_t>(c, "grid", "n_out");
    return g;
}

}  // namespace stmeta
