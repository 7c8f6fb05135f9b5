#pragma once

// Row-major dense float matrix: the interchange type for pruning inputs,
// embeddings, and the benchmark's dense baseline.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "pbp/rng.hpp"

namespace pbp {

struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;  // rows * cols, row-major

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c)
      : rows(r), cols(c), data(r * c, 0.0f) {}

  float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  bool operator==(const DenseMatrix&) const = default;
};

inline DenseMatrix random_dense(std::size_t rows, std::size_t cols, Rng& rng) {
  DenseMatrix m(rows, cols);
  for (float& v : m.data) v = rng.normal_f();
  return m;
}

/// y[i] = sum_j m[i][j] * x[j], one double accumulator per row, ascending j.
/// Products of two floats are exact in double, so the result depends only on
/// the summation order, which is fixed here.
inline void dense_matvec_into(const DenseMatrix& m, std::span<const float> x,
                              std::span<float> y) {
  if (x.size() != m.cols || y.size() != m.rows) {
    throw std::invalid_argument("dense_matvec: dimension mismatch");
  }
  for (std::size_t i = 0; i < m.rows; ++i) {
    const float* row = m.data.data() + i * m.cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) {
      acc += static_cast<double>(row[j]) * x[j];
    }
    y[i] = static_cast<float>(acc);
  }
}

inline std::vector<float> dense_matvec(const DenseMatrix& m,
                                       std::span<const float> x) {
  std::vector<float> y(m.rows);
  dense_matvec_into(m, x, y);
  return y;
}

}  // namespace pbp
