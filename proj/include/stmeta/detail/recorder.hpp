#pragma once

#include "stmeta/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>

namespace stmeta::detail {

/// Collects samples on a fixed output grid plus arbitrary event points.
/// Samples are sorted and de-duplicated (by their double time) on finish().
class Recorder {
public:
    using InputFn = std::function<long double(long double)>;
    using RegionFn = std::function<Region(long double, long double)>;

    Recorder(long double t0, long double t1, long double dt, InputFn v_in, RegionFn region)
        : t0_(t0), t1_(t1), dt_(dt), v_in_(std::move(v_in)), region_(std::move(region)) {}

    /// First output-grid time strictly after t (t1 when the grid is exhausted).
    long double next_output_after(long double t) const {
        if (!(dt_ > 0)) return t1_;
        long double i = std::floor((t - t0_) / dt_) + 1;
        long double g = t0_ + i * dt_;
        while (g <= t) g = t0_ + (++i) * dt_;
        return std::min(g, t1_);
    }

    [[nodiscard]] long double t_end() const { return t1_; }

    void sample(long double t, long double v_out) {
        const long double v_in = v_in_(t);
        samples_.push_back({static_cast<double>(t), static_cast<double>(v_in),
                            static_cast<double>(v_out), region_(v_in, v_out)});
    }

    void event(const Event& e) { events_.push_back(e); }

    Trajectory finish(long double final_v_out) {
        Trajectory traj;
        std::stable_sort(samples_.begin(), samples_.end(),
                         [](const Sample& a, const Sample& b) { return a.t < b.t; });
        traj.samples.reserve(samples_.size());
        for (const auto& s : samples_) {
            if (!traj.samples.empty() && !(s.t > traj.samples.back().t)) continue;
            traj.samples.push_back(s);
        }
        std::stable_sort(events_.begin(), events_.end(),
                         [](const Event& a, const Event& b) { return a.t < b.t; });
        traj.events = std::move(events_);
        traj.final_v_out = final_v_out;
        samples_.clear();
        return traj;
    }

private:
    long double t0_;
    long double t1_;
    long double dt_;
    InputFn v_in_;
    RegionFn region_;
    std::vector<Sample> samples_;
    std::vector<Event> events_;
};

}  // namespace stmeta::detail
