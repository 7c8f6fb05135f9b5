#pragma once

// Permutation-block-permutation matrix: M = P_row * M_block * P_col, with
// permutation matrices in the gather convention P[i][idx[i]] = 1.  Dense and
// block coordinates correspond by
//
//   M[i][j] = M_block[p_row.idx[i]][inverse(p_col).idx[j]]
//
// so block cell (row_start+r, col_start+c) lands at dense position
// i = inverse(p_row).idx[row_start+r], j = p_col.idx[col_start+c].
//
// matvec is staged exactly like the factored form: gather the input through
// p_col, run the block kernel, scatter block rows through inverse(p_row)
// (precomputed at construction).  Accumulation order is fixed: one double
// accumulator per output row per block, columns ascending; blocks that share
// rows have their partials rounded to float and added to the output in block
// storage order.  Instances are immutable after construction and matvec is
// pure, so concurrent use is safe.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pbp/blocksparse.hpp"
#include "pbp/matrix.hpp"
#include "pbp/permutation.hpp"

namespace pbp {

/// A nonzero sits outside the block pattern under the given pivots: the
/// matrix is not representable in this PBP form.
class StrayNonzeroError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PbpMatrix {
 public:
  PbpMatrix(Permutation p_row, PackedBlocks packed, Permutation p_col)
      : p_row_(std::move(p_row)),
        p_col_(std::move(p_col)),
        packed_(std::move(packed)),
        inv_row_(inverse(p_row_)) {
    if (p_row_.size() != packed_.pattern().n_rows()) {
      throw std::invalid_argument("PbpMatrix: p_row length " +
                                  std::to_string(p_row_.size()) +
                                  " != n_rows " +
                                  std::to_string(packed_.pattern().n_rows()));
    }
    if (p_col_.size() != packed_.pattern().n_cols()) {
      throw std::invalid_argument("PbpMatrix: p_col length " +
                                  std::to_string(p_col_.size()) +
                                  " != n_cols " +
                                  std::to_string(packed_.pattern().n_cols()));
    }
  }

  std::size_t n_rows() const { return packed_.pattern().n_rows(); }
  std::size_t n_cols() const { return packed_.pattern().n_cols(); }
  const Permutation& p_row() const { return p_row_; }
  const Permutation& p_col() const { return p_col_; }
  const PackedBlocks& packed() const { return packed_; }
  const BlockPattern& pattern() const { return packed_.pattern(); }
  double fill_in() const { return pattern().fill_in(); }

  /// Staged product; scratch is resized to n_cols and holds the gathered
  /// input so repeated calls do not allocate.
  void matvec_into(std::span<const float> x, std::span<float> y,
                   std::vector<float>& scratch) const {
    if (x.size() != n_cols() || y.size() != n_rows()) {
      throw std::invalid_argument("PbpMatrix::matvec: dimension mismatch");
    }
    scratch.resize(n_cols());
    const auto& col_idx = p_col_.idx();
    for (std::size_t l = 0; l < n_cols(); ++l) scratch[l] = x[col_idx[l]];

    for (std::size_t i = 0; i < n_rows(); ++i) y[i] = 0.0f;

    const float* data = packed_.data().data();
    const auto& blocks = pattern().blocks();
    const auto& out_idx = inv_row_.idx();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const Block& blk = blocks[b];
      // Offsets are affine in (r, c) for every layout; hoist the strides.
      const std::size_t base = packed_.offset(b, 0, 0);
      std::size_t rstep = 0;
      std::size_t cstep = 0;
      switch (packed_.layout()) {
        case Layout::Brc:
          rstep = blk.cols;
          cstep = 1;
          break;
        case Layout::Bcr:
          rstep = 1;
          cstep = blk.rows;
          break;
        case Layout::Cbr:
          rstep = 1;
          cstep = blocks.size() * blk.rows;
          break;
      }
      const float* xin = scratch.data() + blk.col_start;
      for (std::size_t r = 0; r < blk.rows; ++r) {
        const float* row = data + base + r * rstep;
        double acc = 0.0;
        for (std::size_t c = 0; c < blk.cols; ++c) {
          acc += static_cast<double>(row[c * cstep]) * xin[c];
        }
        y[out_idx[blk.row_start + r]] += static_cast<float>(acc);
      }
    }
  }

  std::vector<float> matvec(std::span<const float> x) const {
    std::vector<float> y(n_rows());
    std::vector<float> scratch;
    matvec_into(x, y, scratch);
    return y;
  }

  DenseMatrix to_dense() const {
    DenseMatrix out(n_rows(), n_cols());
    const auto& blocks = pattern().blocks();
    const auto& out_row = inv_row_.idx();
    const auto& out_col = p_col_.idx();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const Block& blk = blocks[b];
      for (std::size_t r = 0; r < blk.rows; ++r) {
        for (std::size_t c = 0; c < blk.cols; ++c) {
          // Block cells are pairwise disjoint, so plain assignment.
          out.at(out_row[blk.row_start + r], out_col[blk.col_start + c]) =
              packed_.data()[packed_.offset(b, r, c)];
        }
      }
    }
    return out;
  }

  bool operator==(const PbpMatrix&) const = default;

 private:
  Permutation p_row_;
  Permutation p_col_;
  PackedBlocks packed_;
  Permutation inv_row_;  // derived: scatter side of matvec
};

/// Inverse of to_dense for a known factorization: reads the coefficients the
/// pattern reaches through the pivots and rejects any nonzero left outside.
inline PbpMatrix from_masked(const DenseMatrix& dense, const Permutation& p_row,
                             const Permutation& p_col,
                             const BlockPattern& pattern, Layout layout) {
  if (dense.rows != pattern.n_rows() || dense.cols != pattern.n_cols()) {
    throw std::invalid_argument("from_masked: dense is " +
                                std::to_string(dense.rows) + "x" +
                                std::to_string(dense.cols) + ", pattern is " +
                                std::to_string(pattern.n_rows()) + "x" +
                                std::to_string(pattern.n_cols()));
  }
  if (p_row.size() != pattern.n_rows() || p_col.size() != pattern.n_cols()) {
    throw std::invalid_argument("from_masked: pivot length mismatch");
  }
  const Permutation inv_row = inverse(p_row);
  std::vector<char> covered(dense.rows * dense.cols, 0);
  std::vector<std::vector<float>> coeffs(pattern.blocks().size());
  for (std::size_t b = 0; b < pattern.blocks().size(); ++b) {
    const Block& blk = pattern.blocks()[b];
    coeffs[b].resize(blk.area());
    for (std::size_t r = 0; r < blk.rows; ++r) {
      const std::size_t i = inv_row[blk.row_start + r];
      for (std::size_t c = 0; c < blk.cols; ++c) {
        const std::size_t j = p_col[blk.col_start + c];
        coeffs[b][r * blk.cols + c] = dense.at(i, j);
        covered[i * dense.cols + j] = 1;
      }
    }
  }
  for (std::size_t i = 0; i < dense.rows; ++i) {
    for (std::size_t j = 0; j < dense.cols; ++j) {
      if (dense.at(i, j) != 0.0f && !covered[i * dense.cols + j]) {
        throw StrayNonzeroError("from_masked: nonzero at (" +
                                std::to_string(i) + ", " + std::to_string(j) +
                                ") is outside the block pattern");
      }
    }
  }
  return PbpMatrix(p_row, pack(pattern, layout, coeffs), p_col);
}

}  // namespace pbp
