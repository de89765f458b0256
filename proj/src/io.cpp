#include "stmeta/io.hpp"

#include "stmeta/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

namespace stmeta {

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

namespace {

const char* to_cstr(EventKind k) { return k == EventKind::RegionCross ? "region_cross" : "threshold_cross"; }
const char* to_cstr(Direction d) { return d == Direction::Rising ? "rising" : "falling"; }

// RFC-4180 wants CRLF record separators.
constexpr const char* kEol = "\r\n";

}  // namespace

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << "t,v_in,v_out,region" << kEol;
    for (const auto& s : traj.samples) {
        os << format_number(s.t) << ',' << format_number(s.v_in) << ',' << format_number(s.v_out) << ','
           << csv_field(to_string(s.region)) << kEol;
    }
}

void write_events_csv(std::ostream& os, const Trajectory& traj) {
    os << "t,kind,from,to,v_th,direction" << kEol;
    for (const auto& e : traj.events) {
        os << format_number(e.t) << ',' << to_cstr(e.kind) << ',';
        if (e.kind == EventKind::RegionCross) {
            os << to_string(e.from) << ',' << to_string(e.to) << ",,";
        } else {
            os << ",," << format_number(e.v_th) << ',' << to_cstr(e.direction);
        }
        os << kEol;
    }
}

void write_sweep_csv(std::ostream& os, const SweepResult& sweep) {
    os << "epsilon,d2_pred,d3_pred,total_pred,measured" << kEol;
    for (const auto& r : sweep.rows) {
        os << format_number(r.epsilon) << ',' << format_number(r.d2_pred) << ',' << format_number(r.d3_pred)
           << ',' << format_number(r.total_pred) << ',' << format_number(r.measured) << kEol;
    }
}

void write_phase_map_csv(std::ostream& os, const PhaseMap& pm) {
    os << "v_in,v_out,dvout_dt" << kEol;
    for (std::size_t r = 0; r < pm.v_out.size(); ++r) {
        for (std::size_t c = 0; c < pm.v_in.size(); ++c) {
            os << format_number(pm.v_in[c]) << ',' << format_number(pm.v_out[r]) << ','
               << format_number(pm.at(r, c)) << kEol;
        }
    }
}

void write_contour_csv(std::ostream& os, std::span<const Point> contour) {
    os << "v_in,v_out" << kEol;
    for (const auto& p : contour) os << format_number(p.v_in) << ',' << format_number(p.v_out) << kEol;
}

Json waveform_to_json(const Waveform& w) {
    Json segs = Json::array();
    for (const auto& s : w.segments()) {
        Json j;
        j["t_start"] = static_cast<double>(s.t_start);
        if (const auto* c = std::get_if<seg::Constant>(&s.shape)) {
            j["kind"] = "constant";
            j["level"] = static_cast<double>(c->level);
        } else if (const auto* r = std::get_if<seg::Ramp>(&s.shape)) {
            j["kind"] = "ramp";
            j["v0"] = static_cast<double>(r->v0);
            j["slope"] = static_cast<double>(r->slope);
        } else if (const auto* n = std::get_if<seg::Sine>(&s.shape)) {
            j["kind"] = "sine";
            j["offset"] = static_cast<double>(n->offset);
            j["amplitude"] = static_cast<double>(n->amplitude);
            j["frequency_hz"] = static_cast<double>(n->frequency_hz);
            j["phase"] = static_cast<double>(n->phase);
        } else if (const auto* e = std::get_if<seg::Exp>(&s.shape)) {
            j["kind"] = "exp";
            j["v_inf"] = static_cast<double>(e->v_inf);
            j["v0"] = static_cast<double>(e->v0);
            j["tau"] = static_cast<double>(e->tau);
            j["sense"] = e->sense == seg::ExpSense::Decaying ? "decaying" : "growing";
        }
        segs.push_back(std::move(j));
    }
    Json out;
    out["segments"] = std::move(segs);
    if (std::isfinite(w.t_end())) out["t_end"] = static_cast<double>(w.t_end());
    return out;
}

namespace {

ext number(const Json& j, const char* key, std::optional<ext> fallback = std::nullopt) {
    if (!j.contains(key)) {
        if (fallback) return *fallback;
        throw ConfigError(std::string("waveform segment is missing '") + key + "'");
    }
    const Json& v = j.at(key);
    if (v.is_number()) return v.get<double>();
    // strings keep extended precision, e.g. "0.12475000000000000001"
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        char* end = nullptr;
        const ext x = std::strtold(s.c_str(), &end);
        if (end != s.c_str() && *end == '\0') return x;
    }
    throw ConfigError(std::string("waveform field '") + key + "' must be a number");
}

}  // namespace

Waveform waveform_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("segments") || !j.at("segments").is_array() || j.at("segments").empty()) {
        throw ConfigError("waveform needs a non-empty 'segments' array");
    }
    std::vector<Segment> segs;
    for (const Json& s : j.at("segments")) {
        if (!s.is_object() || !s.contains("kind")) throw ConfigError("waveform segment needs a 'kind'");
        const std::string kind = s.at("kind").get<std::string>();
        Segment seg;
        seg.t_start = number(s, "t_start", ext(0));
        if (kind == "constant") {
            seg.shape = seg::Constant{number(s, "level")};
        } else if (kind == "ramp") {
            seg.shape = seg::Ramp{number(s, "v0"), number(s, "slope")};
        } else if (kind == "sine") {
            seg.shape = seg::Sine{number(s, "offset", ext(0)), number(s, "amplitude"), number(s, "frequency_hz"),
                                  number(s, "phase", ext(0))};
        } else if (kind == "exp") {
            const std::string sense = s.value("sense", std::string("decaying"));
            if (sense != "decaying" && sense != "growing") {
                throw ConfigError("exp segment sense must be 'decaying' or 'growing'");
            }
            seg.shape = seg::Exp{number(s, "v_inf"), number(s, "v0"), number(s, "tau"),
                                 sense == "decaying" ? seg::ExpSense::Decaying : seg::ExpSense::Growing};
        } else {
            throw ConfigError("unknown waveform segment kind '" + kind + "'");
        }
        segs.push_back(std::move(seg));
    }
    const ext t_end = j.contains("t_end") ? number(j, "t_end") : std::numeric_limits<ext>::infinity();
    try {
        return Waveform(std::move(segs), t_end);
    } catch (const ModelError& e) {
        throw ConfigError(std::string("waveform: ") + e.what());
    }
}

Json events_to_json(const Trajectory& traj) {
    Json out = Json::array();
    for (const auto& e : traj.events) {
        Json j;
        j["t"] = e.t;
        j["kind"] = to_cstr(e.kind);
        if (e.kind == EventKind::RegionCross) {
            j["from"] = std::string(to_string(e.from));
            j["to"] = std::string(to_string(e.to));
        } else {
            j["v_th"] = e.v_th;
            j["direction"] = to_cstr(e.direction);
        }
        out.push_back(std::move(j));
    }
    return out;
}

Json plan_to_json(const ControlPlan& plan) {
    Json j;
    j["span"] = {{"t0", plan.span.t0}, {"t1", plan.span.t1}};
    j["v_out0"] = plan.v_out0;
    j["desired"] = waveform_to_json(plan.desired_output);
    j["synthesized_segment_count"] = plan.synthesized_input.segments().size();
    j["max_input_rate"] = plan.max_input_rate;
    j["vin_rate_cap"] = plan.vin_rate_cap ? Json(*plan.vin_rate_cap) : Json(nullptr);
    Json segs = Json::array();
    for (const auto& s : plan.feasibility.segments) {
        segs.push_back({{"t_begin", s.t_begin},
                        {"t_end", s.t_end},
                        {"amp_margin", s.amp_margin},
                        {"required_rate", s.required_rate},
                        {"ok", s.ok}});
    }
    Json bad = Json::array();
    for (const auto& v : plan.feasibility.violations) {
        bad.push_back({{"t_begin", v.t_begin}, {"t_end", v.t_end}, {"reason", v.reason}});
    }
    j["feasibility"] = {{"feasible", plan.feasibility.feasible()}, {"segments", segs}, {"violations", bad}};
    j["tracking"] = {{"max_error", plan.max_tracking_error}, {"rms_error", plan.rms_tracking_error}};
    return j;
}

namespace {

constexpr double kW = 800, kH = 500, kPad = 60;

struct Frame {
    double x0, x1, y0, y1;

    [[nodiscard]] double px(double x) const { return kPad + (x - x0) / (x1 - x0) * (kW - 2 * kPad); }
    [[nodiscard]] double py(double y) const { return kH - kPad - (y - y0) / (y1 - y0) * (kH - 2 * kPad); }
};

Frame make_frame(double x0, double x1, double y0, double y1) {
    auto widen = [](double& a, double& b) {
        if (!(b > a)) {
            const double d = std::abs(a) > 0 ? 0.05 * std::abs(a) : 1.0;
            a -= d;
            b += d;
        }
    };
    widen(x0, x1);
    widen(y0, y1);
    return {x0, x1, y0, y1};
}

std::string escape(std::string_view s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

void open_svg(std::ostringstream& os, const Frame& f, std::string_view title, std::string_view xlabel,
              std::string_view ylabel) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << kW - 2 * kPad << "\" height=\""
       << kH - 2 * kPad << "\" fill=\"none\" stroke=\"black\"/>\n"
       << "<text x=\"" << kW / 2 << "\" y=\"" << kPad / 2 << "\" text-anchor=\"middle\" font-size=\"16\">"
       << escape(title) << "</text>\n"
       << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 15 << "\" text-anchor=\"middle\" font-size=\"12\">"
       << escape(xlabel) << " [" << format_number(f.x0) << ", " << format_number(f.x1) << "]</text>\n"
       << "<text x=\"15\" y=\"" << kH / 2 << "\" font-size=\"12\" transform=\"rotate(-90 15 " << kH / 2
       << ")\" text-anchor=\"middle\">" << escape(ylabel) << " [" << format_number(f.y0) << ", "
       << format_number(f.y1) << "]</text>\n";
}

template <class Xs, class Ys>
void polyline(std::ostringstream& os, const Frame& f, const Xs& xs, const Ys& ys, std::string_view colour) {
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) os << f.px(xs[i]) << ',' << f.py(ys[i]) << ' ';
    os << "\"/>\n";
}

}  // namespace

std::string trajectory_svg(const Trajectory& traj, std::string_view title) {
    std::vector<double> t, vin, vout;
    for (const auto& s : traj.samples) {
        t.push_back(s.t);
        vin.push_back(s.v_in);
        vout.push_back(s.v_out);
    }
    if (t.empty()) throw ConfigError("trajectory_svg: empty trajectory");
    const auto [tmin, tmax] = std::minmax_element(t.begin(), t.end());
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < t.size(); ++i) {
        lo = std::min({lo, vin[i], vout[i]});
        hi = std::max({hi, vin[i], vout[i]});
    }
    const Frame f = make_frame(*tmin, *tmax, lo, hi);
    std::ostringstream os;
    open_svg(os, f, title, "t [s]", "V (blue v_in, red v_out)");
    polyline(os, f, t, vin, "steelblue");
    polyline(os, f, t, vout, "firebrick");
    os << "</svg>\n";
    return os.str();
}

std::string sweep_svg(const SweepResult& sweep, std::string_view title) {
    std::vector<double> x, measured, predicted;
    for (const auto& r : sweep.rows) {
        x.push_back(std::log(1.0 / r.epsilon));
        measured.push_back(r.measured);
        predicted.push_back(r.total_pred);
    }
    if (x.empty()) throw ConfigError("sweep_svg: empty sweep");
    const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < x.size(); ++i) {
        lo = std::min({lo, measured[i], predicted[i]});
        hi = std::max({hi, measured[i], predicted[i]});
    }
    const Frame f = make_frame(*xmin, *xmax, lo, hi);
    std::ostringstream os;
    open_svg(os, f, title, "ln(1/epsilon)", "delay [s] (red measured, gray predicted)");
    polyline(os, f, x, predicted, "gray");
    polyline(os, f, x, measured, "firebrick");
    os << "</svg>\n";
    return os.str();
}

std::string phase_map_svg(const PhaseMap& pm, std::string_view title) {
    if (pm.v_in.size() < 2 || pm.v_out.size() < 2) throw ConfigError("phase_map_svg: grid too small");
    const Frame f = make_frame(pm.v_in.front(), pm.v_in.back(), pm.v_out.front(), pm.v_out.back());
    std::ostringstream os;
    open_svg(os, f, title, "v_in [V]", "v_out [V]");
    for (std::size_t r = 0; r < pm.v_out.size(); ++r) {
        for (std::size_t c = 0; c < pm.v_in.size(); ++c) {
            const double v = pm.at(r, c);
            const char* fill = v > 0 ? "#aaaaaa" : (v < 0 ? "black" : "white");
            os << "<circle cx=\"" << f.px(pm.v_in[c]) << "\" cy=\"" << f.py(pm.v_out[r]) << "\" r=\"2\" fill=\""
               << fill << "\"/>\n";
        }
    }
    std::vector<double> gx, gy;
    for (const auto& p : pm.gamma2) {
        gx.push_back(p.v_in);
        gy.push_back(p.v_out);
    }
    if (!gx.empty()) polyline(os, f, gx, gy, "firebrick");
    os << "</svg>\n";
    return os.str();
}

}  // namespace stmeta
