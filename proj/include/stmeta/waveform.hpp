#pragma once

// Piecewise-analytic input waveforms. Parameters are stored in extended
// precision so that pinned-metastability scenarios can place the input on
// gamma2 far below double resolution.

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <string>
#include <variant>
#include <vector>

namespace stmeta {

using ext = long double;

namespace seg {

struct Constant {
    ext level = 0;
};

/// v(s) = v0 + slope * s, s = t - t_start
struct Ramp {
    ext v0 = 0;
    ext slope = 0;
};

/// v(s) = offset + amplitude * sin(2*pi*frequency_hz*s + phase)
struct Sine {
    ext offset = 0;
    ext amplitude = 0;
    ext frequency_hz = 0;
    ext phase = 0;
};

enum class ExpSense { Decaying, Growing };

/// Decaying: v(s) = v_inf + (v0 - v_inf) * exp(-s/tau)  (approaches v_inf)
/// Growing:  v(s) = v_inf + (v0 - v_inf) * exp(+s/tau)  (departs from v_inf)
struct Exp {
    ext v_inf = 0;
    ext v0 = 0;
    ext tau = 1;
    ExpSense sense = ExpSense::Decaying;
};

}  // namespace seg

using SegmentShape = std::variant<seg::Constant, seg::Ramp, seg::Sine, seg::Exp>;

struct Segment {
    ext t_start = 0;
    SegmentShape shape;
};

struct JointJump {
    ext t = 0;
    ext before = 0;
    ext after = 0;
};

class Waveform {
public:
    Waveform() = default;
    /// Segments must have strictly increasing t_start. The waveform is defined on
    /// [first t_start, t_end].
    explicit Waveform(std::vector<Segment> segments,
                      ext t_end = std::numeric_limits<ext>::infinity());

    static Waveform constant(ext level, ext t_start = 0);

    /// Appends a segment; t_start must exceed every existing start.
    Waveform& append(ext t_start, SegmentShape shape);

    [[nodiscard]] bool empty() const { return segments_.empty(); }
    [[nodiscard]] const std::vector<Segment>& segments() const { return segments_; }
    [[nodiscard]] ext t_begin() const;
    [[nodiscard]] ext t_end() const { return t_end_; }
    void set_t_end(ext t_end);

    /// Index of the segment governing time t (the last one with t_start <= t).
    [[nodiscard]] std::size_t segment_index(ext t) const;
    /// End of the segment with the given index (next start, or t_end).
    [[nodiscard]] ext segment_end(std::size_t index) const;

    /// Throws ModelError outside [t_begin, t_end].
    [[nodiscard]] ext eval(ext t) const;
    /// First or second time derivative at t (right-hand value at joints).
    [[nodiscard]] ext derivative(ext t, int order = 1) const;

    /// Value discontinuities at segment joints larger than tol.
    [[nodiscard]] std::vector<JointJump> joint_jumps(ext tol = 0) const;

    [[nodiscard]] bool is_nondecreasing() const;
    [[nodiscard]] bool is_nonincreasing() const;

    /// sup |dv/dt| over the whole span, evaluated analytically per segment.
    [[nodiscard]] ext max_slope() const;
    [[nodiscard]] ext max_slope(std::size_t index) const;

private:
    void check_order() const;

    std::vector<Segment> segments_;
    ext t_end_ = std::numeric_limits<ext>::infinity();
};

/// Value of a single segment shape at local time s.
[[nodiscard]] ext eval_shape(const SegmentShape& shape, ext s);
[[nodiscard]] ext derivative_shape(const SegmentShape& shape, ext s, int order);

/// Two Constant segments: level_before from t = 0, level_after from t_step.
/// With t_step == 0 the result is a single Constant(level_after).
[[nodiscard]] Waveform step_to(ext level_before, ext level_after, ext t_step);

/// Ramp from v0 with the given slope until v_stop is reached, then Constant(v_stop).
/// Throws ModelError when the slope points away from v_stop.
[[nodiscard]] Waveform ramp_and_hold(ext v0, ext slope, ext v_stop, ext t_start = 0);

/// Constant(v_meta) until t_onset, then a monotonic exponential approach to v_rail.
[[nodiscard]] Waveform latch_resolution_input(ext v_meta, ext v_rail, ext tau_c, ext t_onset);

/// Reads a two-column CSV with a header row ("t,v") into a piecewise-linear waveform
/// that holds the last value.
[[nodiscard]] Waveform waveform_from_csv(std::istream& in);
[[nodiscard]] Waveform waveform_from_csv_file(const std::string& path);

}  // namespace stmeta
