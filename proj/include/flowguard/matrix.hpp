#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace flowguard {

// Dense row-major matrix of doubles. Rows are samples everywhere in this
// library, so row(i) hands out one sample as a contiguous span.
struct Matrix {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::int64_t r, std::int64_t c) : rows(r), cols(c), data(static_cast<std::size_t>(r * c), 0.0) {}

    double& at(std::int64_t r, std::int64_t c) { return data[static_cast<std::size_t>(r * cols + c)]; }
    double at(std::int64_t r, std::int64_t c) const { return data[static_cast<std::size_t>(r * cols + c)]; }

    std::span<double> row(std::int64_t r) {
        return {data.data() + r * cols, static_cast<std::size_t>(cols)};
    }
    std::span<const double> row(std::int64_t r) const {
        return {data.data() + r * cols, static_cast<std::size_t>(cols)};
    }

    bool operator==(const Matrix&) const = default;
};

} // namespace flowguard
