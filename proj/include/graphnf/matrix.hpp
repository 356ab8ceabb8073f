#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "graphnf/errors.hpp"

namespace graphnf {

// Plain row-major matrix of doubles; the non-differentiable counterpart of a
// rank-2 tensor, used for graph node features and prediction fields.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  std::span<double> row(std::size_t i) {
    if (i >= rows) throw ContractViolation("matrix row out of range");
    return {data.data() + i * cols, cols};
  }
  std::span<const double> row(std::size_t i) const {
    if (i >= rows) throw ContractViolation("matrix row out of range");
    return {data.data() + i * cols, cols};
  }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

}  // namespace graphnf
