#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace nids {

// dense row-major matrix of doubles
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    void push_row(std::span<const double> values) {
        if (cols == 0) cols = values.size();
        if (values.size() != cols) throw std::invalid_argument("matrix: row width mismatch");
        data.insert(data.end(), values.begin(), values.end());
        ++rows;
    }
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace nids
