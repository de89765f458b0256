#include "stmeta/waveform.hpp"

#include "stmeta/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace stmeta {

namespace {

constexpr ext kPi = std::numbers::pi_v<ext>;
constexpr ext kInf = std::numeric_limits<ext>::infinity();

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

ext omega(const seg::Sine& s) { return 2 * kPi * s.frequency_hz; }

// Sign of the derivative over local interval [s0, s1]: +1 when >= 0 everywhere,
// -1 when <= 0 everywhere, 0 when it changes sign.
int derivative_sign(const SegmentShape& shape, ext s0, ext s1) {
    return std::visit(
        overloaded{
            [](const seg::Constant&) { return 2; },  // both directions
            [](const seg::Ramp& r) { return r.slope > 0 ? 1 : (r.slope < 0 ? -1 : 2); },
            [&](const seg::Sine& s) {
                const ext w = omega(s);
                if (s.amplitude == 0 || w == 0) return 2;
                if (!std::isfinite(s1)) return 0;
                const ext th0 = w * s0 + s.phase;
                const ext th1 = w * s1 + s.phase;
                if (th1 - th0 > kPi) return 0;
                // zeros of cos at pi/2 + n*pi strictly inside (th0, th1) flip the sign
                const ext n_lo = std::floor((th0 - kPi / 2) / kPi) + 1;
                const ext first_zero = kPi / 2 + n_lo * kPi;
                if (first_zero < th1 && first_zero > th0) return 0;
                const ext c = s.amplitude * std::cos((th0 + th1) / 2);
                return c >= 0 ? 1 : -1;
            },
            [](const seg::Exp& e) {
                const ext d = e.sense == seg::ExpSense::Decaying ? e.v_inf - e.v0 : e.v0 - e.v_inf;
                return d > 0 ? 1 : (d < 0 ? -1 : 2);
            },
        },
        shape);
}

ext max_abs_derivative(const SegmentShape& shape, ext s0, ext s1) {
    return std::visit(
        overloaded{
            [](const seg::Constant&) -> ext { return 0; },
            [](const seg::Ramp& r) -> ext { return std::abs(r.slope); },
            [&](const seg::Sine& s) -> ext {
                const ext w = omega(s);
                const ext peak = std::abs(s.amplitude) * w;
                if (peak == 0) return 0;
                if (!std::isfinite(s1) || w * (s1 - s0) >= 2 * kPi) return peak;
                const ext th0 = w * s0 + s.phase;
                const ext th1 = w * s1 + s.phase;
                if (std::floor(th1 / kPi) >= std::ceil(th0 / kPi)) return peak;
                return peak * std::max(std::abs(std::cos(th0)), std::abs(std::cos(th1)));
            },
            [&](const seg::Exp& e) -> ext {
                const ext scale = std::abs(e.v0 - e.v_inf) / e.tau;
                if (scale == 0) return 0;
                if (e.sense == seg::ExpSense::Decaying) return scale * std::exp(-s0 / e.tau);
                if (!std::isfinite(s1)) return kInf;
                return scale * std::exp(s1 / e.tau);
            },
        },
        shape);
}

void check_shape(const SegmentShape& shape) {
    if (const auto* e = std::get_if<seg::Exp>(&shape); e && !(e->tau > 0)) {
        throw ModelError("exponential segment needs tau > 0");
    }
    if (const auto* s = std::get_if<seg::Sine>(&shape); s && !(s->frequency_hz >= 0)) {
        throw ModelError("sine segment needs frequency_hz >= 0");
    }
}

}  // namespace

ext eval_shape(const SegmentShape& shape, ext s) {
    return std::visit(
        overloaded{
            [](const seg::Constant& c) { return c.level; },
            [&](const seg::Ramp& r) { return r.v0 + r.slope * s; },
            [&](const seg::Sine& w) { return w.offset + w.amplitude * std::sin(omega(w) * s + w.phase); },
            [&](const seg::Exp& e) {
                if (s == 0) return e.v0;  // keep joints exact
                const ext x = e.sense == seg::ExpSense::Decaying ? -s / e.tau : s / e.tau;
                return e.v_inf + (e.v0 - e.v_inf) * std::exp(x);
            },
        },
        shape);
}

ext derivative_shape(const SegmentShape& shape, ext s, int order) {
    if (order < 1 || order > 2) throw ModelError("derivative order must be 1 or 2");
    return std::visit(
        overloaded{
            [](const seg::Constant&) -> ext { return 0; },
            [&](const seg::Ramp& r) -> ext { return order == 1 ? r.slope : 0; },
            [&](const seg::Sine& w) -> ext {
                const ext om = omega(w);
                const ext th = om * s + w.phase;
                return order == 1 ? w.amplitude * om * std::cos(th)
                                  : -w.amplitude * om * om * std::sin(th);
            },
            [&](const seg::Exp& e) -> ext {
                const ext rate = e.sense == seg::ExpSense::Decaying ? -1 / e.tau : 1 / e.tau;
                const ext base = (e.v0 - e.v_inf) * std::exp(rate * s);
                return order == 1 ? base * rate : base * rate * rate;
            },
        },
        shape);
}

Waveform::Waveform(std::vector<Segment> segments, ext t_end)
    : segments_(std::move(segments)), t_end_(t_end) {
    check_order();
    for (const auto& s : segments_) check_shape(s.shape);
}

Waveform Waveform::constant(ext level, ext t_start) {
    return Waveform({Segment{t_start, seg::Constant{level}}});
}

Waveform& Waveform::append(ext t_start, SegmentShape shape) {
    check_shape(shape);
    if (!segments_.empty() && !(t_start > segments_.back().t_start)) {
        throw ModelError("waveform segments must have strictly increasing t_start");
    }
    if (!(t_start < t_end_)) throw ModelError("segment starts at or after waveform end");
    segments_.push_back(Segment{t_start, std::move(shape)});
    return *this;
}

void Waveform::check_order() const {
    for (std::size_t i = 1; i < segments_.size(); ++i) {
        if (!(segments_[i].t_start > segments_[i - 1].t_start)) {
            throw ModelError("waveform segments must have strictly increasing t_start");
        }
    }
    if (!segments_.empty() && !(t_end_ > segments_.back().t_start)) {
        throw ModelError("waveform end must follow the last segment start");
    }
}

ext Waveform::t_begin() const {
    if (segments_.empty()) throw ModelError("empty waveform");
    return segments_.front().t_start;
}

void Waveform::set_t_end(ext t_end) {
    t_end_ = t_end;
    check_order();
}

std::size_t Waveform::segment_index(ext t) const {
    if (segments_.empty()) throw ModelError("empty waveform");
    if (t < segments_.front().t_start || t > t_end_) {
        std::ostringstream os;
        os << "waveform queried at t = " << static_cast<double>(t) << " outside ["
           << static_cast<double>(segments_.front().t_start) << ", "
           << static_cast<double>(t_end_) << "]";
        throw ModelError(os.str());
    }
    auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                               [](ext v, const Segment& s) { return v < s.t_start; });
    return static_cast<std::size_t>(std::distance(segments_.begin(), it)) - 1;
}

ext Waveform::segment_end(std::size_t index) const {
    return index + 1 < segments_.size() ? segments_[index + 1].t_start : t_end_;
}

ext Waveform::eval(ext t) const {
    const auto& s = segments_[segment_index(t)];
    return eval_shape(s.shape, t - s.t_start);
}

ext Waveform::derivative(ext t, int order) const {
    const auto& s = segments_[segment_index(t)];
    return derivative_shape(s.shape, t - s.t_start, order);
}

std::vector<JointJump> Waveform::joint_jumps(ext tol) const {
    std::vector<JointJump> out;
    for (std::size_t i = 1; i < segments_.size(); ++i) {
        const auto& prev = segments_[i - 1];
        const auto& next = segments_[i];
        const ext before = eval_shape(prev.shape, next.t_start - prev.t_start);
        const ext after = eval_shape(next.shape, 0);
        if (std::abs(after - before) > tol) out.push_back({next.t_start, before, after});
    }
    return out;
}

bool Waveform::is_nondecreasing() const {
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        const ext len = segment_end(i) - segments_[i].t_start;
        const int sgn = derivative_sign(segments_[i].shape, 0, len);
        if (sgn != 1 && sgn != 2) return false;
    }
    for (const auto& j : joint_jumps()) {
        if (j.after < j.before) return false;
    }
    return true;
}

bool Waveform::is_nonincreasing() const {
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        const ext len = segment_end(i) - segments_[i].t_start;
        const int sgn = derivative_sign(segments_[i].shape, 0, len);
        if (sgn != -1 && sgn != 2) return false;
    }
    for (const auto& j : joint_jumps()) {
        if (j.after > j.before) return false;
    }
    return true;
}

ext Waveform::max_slope(std::size_t index) const {
    const ext len = segment_end(index) - segments_.at(index).t_start;
    return max_abs_derivative(segments_[index].shape, 0, len);
}

ext Waveform::max_slope() const {
    ext best = 0;
    for (std::size_t i = 0; i < segments_.size(); ++i) best = std::max(best, max_slope(i));
    return best;
}

Waveform step_to(ext level_before, ext level_after, ext t_step) {
    if (t_step < 0) throw ModelError("step time must be >= 0");
    if (t_step == 0) return Waveform::constant(level_after);
    Waveform w = Waveform::constant(level_before);
    w.append(t_step, seg::Constant{level_after});
    return w;
}

Waveform ramp_and_hold(ext v0, ext slope, ext v_stop, ext t_start) {
    if (v_stop == v0) return Waveform::constant(v0, t_start);
    if (slope == 0 || (v_stop - v0) / slope < 0) {
        throw ModelError("ramp_and_hold: slope does not lead from v0 to v_stop");
    }
    Waveform w({Segment{t_start, seg::Ramp{v0, slope}}});
    w.append(t_start + (v_stop - v0) / slope, seg::Constant{v_stop});
    return w;
}

Waveform latch_resolution_input(ext v_meta, ext v_rail, ext tau_c, ext t_onset) {
    if (!(tau_c > 0)) throw ModelError("latch_resolution_input: tau_c must be > 0");
    if (t_onset < 0) throw ModelError("latch_resolution_input: t_onset must be >= 0");
    const seg::Exp rise{v_rail, v_meta, tau_c, seg::ExpSense::Decaying};
    if (t_onset == 0) return Waveform({Segment{0, rise}});
    Waveform w = Waveform::constant(v_meta);
    w.append(t_onset, rise);
    return w;
}

Waveform waveform_from_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("waveform CSV: missing header row");
    {
        std::istringstream hs(line);
        std::string a, b;
        std::getline(hs, a, ',');
        std::getline(hs, b);
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t\r\""));
            s.erase(s.find_last_not_of(" \t\r\"") + 1);
            return s;
        };
        if (trim(a) != "t" || trim(b) != "v") {
            throw ConfigError("waveform CSV: header must be 't,v'");
        }
    }
    std::vector<std::pair<ext, ext>> pts;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw ConfigError("waveform CSV: line " + std::to_string(lineno) + " has no comma");
        }
        try {
            pts.emplace_back(std::stold(line.substr(0, comma)), std::stold(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw ConfigError("waveform CSV: line " + std::to_string(lineno) + " is not numeric");
        }
        if (pts.size() > 1 && !(pts.back().first > pts[pts.size() - 2].first)) {
            throw ConfigError("waveform CSV: time column must be strictly increasing");
        }
    }
    if (pts.empty()) throw ConfigError("waveform CSV: no data rows");
    Waveform w;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const auto [t0, v0] = pts[i];
        const auto [t1, v1] = pts[i + 1];
        w.append(t0, seg::Ramp{v0, (v1 - v0) / (t1 - t0)});
    }
    w.append(pts.back().first, seg::Constant{pts.back().second});
    return w;
}

Waveform waveform_from_csv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open waveform CSV: " + path);
    return waveform_from_csv(f);
}

}  // namespace stmeta
