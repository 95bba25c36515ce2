#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "groundwork/embed.hpp"

namespace groundwork {

/// Dense row-major matrix of doubles; row r is point r.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Stacks equal-length vectors as rows. Throws Error on ragged input.
Matrix stack_rows(std::span<const Vector> points);

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace groundwork
