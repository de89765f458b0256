#pragma once

#include <cstddef>
#include <vector>

namespace stmeta {

struct Point {
    double v_in = 0.0;
    double v_out = 0.0;
};

/// dV_out/dt sampled on a rectangular (v_in, v_out) grid, row-major by v_out,
/// plus the traced metastable curve.
struct PhaseMap {
    std::vector<double> v_in;
    std::vector<double> v_out;
    std::vector<double> field;
    std::vector<Point> gamma2;

    [[nodiscard]] double at(std::size_t row, std::size_t col) const {
        return field[row * v_in.size() + col];
    }
};

struct GridSpec {
    double v_in_min = 0.0;
    double v_in_max = 1.0;
    double v_out_min = 0.0;
    double v_out_max = 1.0;
    std::size_t n_in = 50;
    std::size_t n_out = 50;
};

[[nodiscard]] std::vector<double> linspace(double a, double b, std::size_t n);

}  // namespace stmeta
