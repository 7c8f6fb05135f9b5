#pragma once

// Block patterns and the three physical coefficient layouts. A pattern is a
// list of dense rectangular sub-blocks of the block matrix; PackedBlocks flattens
// their coefficients into one contiguous array ordered by the chosen layout.
//
// Offset of element (block b, row r, col c), uniform B_r x B_c blocks, nb blocks:
//   BRC: b*B_r*B_c + r*B_c + c        (block, then row-major inside)
//   BCR: b*B_r*B_c + c*B_r + r        (block, then column-major inside)
//   CBR: c*(nb*B_r) + b*B_r + r       (column slices across all blocks)
// Non-uniform patterns use per-block BRC/BCR after an area prefix sum;
// CBR interleaves blocks and is defined for uniform patterns only.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pbp {

enum class Layout : std::uint8_t { Brc = 0, Bcr = 1, Cbr = 2 };

inline const char* layout_name(Layout l) {
  switch (l) {
    case Layout::Brc: return "brc";
    case Layout::Bcr: return "bcr";
    case Layout::Cbr: return "cbr";
  }
  throw std::invalid_argument("layout_name: bad layout tag");
}

inline Layout layout_from_name(std::string_view s) {
  if (s == "brc") return Layout::Brc;
  if (s == "bcr") return Layout::Bcr;
  if (s == "cbr") return Layout::Cbr;
  throw std::invalid_argument("unknown layout '" + std::string(s) +
                              "' (expected brc, bcr, or cbr)");
}

struct Block {
  std::uint32_t row_start = 0;
  std::uint32_t col_start = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;

  std::size_t area() const {
    return static_cast<std::size_t>(rows) * cols;
  }
  bool operator==(const Block&) const = default;
};

class BlockPattern {
 public:
  BlockPattern(std::size_t n_rows, std::size_t n_cols,
               std::vector<Block> blocks)
      : n_rows_(n_rows), n_cols_(n_cols), blocks_(std::move(blocks)) {
    if (n_rows_ == 0 || n_cols_ == 0) {
      throw std::invalid_argument("block pattern: empty dimensions");
    }
    if (blocks_.empty()) {
      throw std::invalid_argument("block pattern: needs at least one block");
    }
    for (const Block& b : blocks_) {
      if (b.rows == 0 || b.cols == 0) {
        throw std::invalid_argument("block pattern: zero-sized block");
      }
      if (b.row_start + static_cast<std::size_t>(b.rows) > n_rows_ ||
          b.col_start + static_cast<std::size_t>(b.cols) > n_cols_) {
        throw std::invalid_argument(
            "block pattern: block exceeds matrix bounds");
      }
      area_ += b.area();
    }
    // Cell-disjointness keeps the dense <-> packed maps bijective. Blocks may
    // still share row coordinates (reduction path) or column coordinates.
    for (std::size_t a = 0; a < blocks_.size(); ++a) {
      for (std::size_t b = a + 1; b < blocks_.size(); ++b) {
        if (overlaps(blocks_[a], blocks_[b])) {
          throw std::invalid_argument(
              "block pattern: blocks overlap in cell space");
        }
      }
    }
    uniform_ = true;
    for (const Block& b : blocks_) {
      if (b.rows != blocks_[0].rows || b.cols != blocks_[0].cols) {
        uniform_ = false;
        break;
      }
    }
  }

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return n_cols_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  std::size_t area() const { return area_; }
  bool uniform() const { return uniform_; }

  double fill_in() const {
    return static_cast<double>(area_) /
           (static_cast<double>(n_rows_) * static_cast<double>(n_cols_));
  }

  /// True iff no two blocks share a row coordinate.
  bool rows_disjoint() const {
    for (std::size_t a = 0; a < blocks_.size(); ++a) {
      for (std::size_t b = a + 1; b < blocks_.size(); ++b) {
        if (row_ranges_intersect(blocks_[a], blocks_[b])) return false;
      }
    }
    return true;
  }

  /// True iff some block covers cell (k, l) of the block matrix.
  bool contains(std::size_t k, std::size_t l) const {
    for (const Block& b : blocks_) {
      if (k >= b.row_start && k < b.row_start + b.rows && l >= b.col_start &&
          l < b.col_start + b.cols) {
        return true;
      }
    }
    return false;
  }

  bool operator==(const BlockPattern&) const = default;

 private:
  static bool row_ranges_intersect(const Block& a, const Block& b) {
    return a.row_start < b.row_start + b.rows &&
           b.row_start < a.row_start + a.rows;
  }
  static bool overlaps(const Block& a, const Block& b) {
    const bool cols_intersect = a.col_start < b.col_start + b.cols &&
                                b.col_start < a.col_start + a.cols;
    return row_ranges_intersect(a, b) && cols_intersect;
  }

  std::size_t n_rows_;
  std::size_t n_cols_;
  std::vector<Block> blocks_;
  std::size_t area_ = 0;
  bool uniform_ = false;
};

/// nb equal diagonal blocks; n_rows and n_cols must be divisible by nb.
inline BlockPattern diagonal_pattern(std::size_t n_rows, std::size_t n_cols,
                                     std::size_t nb) {
  if (nb == 0 || n_rows % nb != 0 || n_cols % nb != 0) {
    throw std::invalid_argument(
        "diagonal pattern: dimensions not divisible by block count");
  }
  const std::uint32_t br = static_cast<std::uint32_t>(n_rows / nb);
  const std::uint32_t bc = static_cast<std::uint32_t>(n_cols / nb);
  std::vector<Block> blocks(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    blocks[b] = Block{static_cast<std::uint32_t>(b * br),
                      static_cast<std::uint32_t>(b * bc), br, bc};
  }
  return BlockPattern(n_rows, n_cols, std::move(blocks));
}

class PackedBlocks {
 public:
  PackedBlocks(BlockPattern pattern, Layout layout, std::vector<float> data)
      : pattern_(std::move(pattern)), layout_(layout), data_(std::move(data)) {
    if (layout_ == Layout::Cbr && !pattern_.uniform()) {
      throw std::invalid_argument("cbr layout requires a uniform pattern");
    }
    if (data_.size() != pattern_.area()) {
      throw std::invalid_argument("packed blocks: data size " +
                                  std::to_string(data_.size()) +
                                  " does not match pattern area " +
                                  std::to_string(pattern_.area()));
    }
    base_.resize(pattern_.blocks().size());
    std::size_t off = 0;
    for (std::size_t b = 0; b < base_.size(); ++b) {
      base_[b] = off;
      off += pattern_.blocks()[b].area();
    }
  }

  const BlockPattern& pattern() const { return pattern_; }
  Layout layout() const { return layout_; }
  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  /// Flat index of element (b, r, c) under this layout.
  std::size_t offset(std::size_t b, std::size_t r, std::size_t c) const {
    const Block& blk = pattern_.blocks()[b];
    switch (layout_) {
      case Layout::Brc:
        return base_[b] + r * blk.cols + c;
      case Layout::Bcr:
        return base_[b] + c * blk.rows + r;
      case Layout::Cbr:
        // Uniform only: column slice c holds row r of every block in order.
        return c * (pattern_.blocks().size() * blk.rows) + b * blk.rows + r;
    }
    throw std::invalid_argument("packed blocks: bad layout tag");
  }

  bool operator==(const PackedBlocks&) const = default;

 private:
  BlockPattern pattern_;
  Layout layout_;
  std::vector<float> data_;
  std::vector<std::size_t> base_;  // per-block area prefix sum
};

/// Flattens per-block row-major coefficient arrays into layout order.
inline PackedBlocks pack(const BlockPattern& pattern, Layout layout,
                         const std::vector<std::vector<float>>& block_data) {
  if (block_data.size() != pattern.blocks().size()) {
    throw std::invalid_argument("pack: block count mismatch");
  }
  for (std::size_t b = 0; b < block_data.size(); ++b) {
    if (block_data[b].size() != pattern.blocks()[b].area()) {
      throw std::invalid_argument("pack: block " + std::to_string(b) +
                                  " has wrong element count");
    }
  }
  PackedBlocks packed(pattern, layout,
                      std::vector<float>(pattern.area(), 0.0f));
  for (std::size_t b = 0; b < block_data.size(); ++b) {
    const Block& blk = pattern.blocks()[b];
    for (std::size_t r = 0; r < blk.rows; ++r) {
      for (std::size_t c = 0; c < blk.cols; ++c) {
        packed.data()[packed.offset(b, r, c)] = block_data[b][r * blk.cols + c];
      }
    }
  }
  return packed;
}

/// Inverse of pack: per-block row-major arrays.
inline std::vector<std::vector<float>> unpack(const PackedBlocks& packed) {
  const auto& blocks = packed.pattern().blocks();
  std::vector<std::vector<float>> out(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const Block& blk = blocks[b];
    out[b].resize(blk.area());
    for (std::size_t r = 0; r < blk.rows; ++r) {
      for (std::size_t c = 0; c < blk.cols; ++c) {
        out[b][r * blk.cols + c] = packed.data()[packed.offset(b, r, c)];
      }
    }
  }
  return out;
}

/// Per-block y_b = M_b * x_b. One double accumulator chain per output row,
/// columns consumed in ascending order, so results are bit-identical across
/// layouts (float*float products are exact in double).
inline std::vector<std::vector<float>> block_matvec(
    const PackedBlocks& packed, const std::vector<std::vector<float>>& x) {
  const auto& blocks = packed.pattern().blocks();
  if (x.size() != blocks.size()) {
    throw std::invalid_argument("block_matvec: slice count mismatch");
  }
  std::vector<std::vector<float>> y(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const Block& blk = blocks[b];
    if (x[b].size() != blk.cols) {
      throw std::invalid_argument("block_matvec: slice " + std::to_string(b) +
                                  " has wrong length");
    }
    y[b].resize(blk.rows);
    for (std::size_t r = 0; r < blk.rows; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < blk.cols; ++c) {
        acc += static_cast<double>(packed.data()[packed.offset(b, r, c)]) *
               x[b][c];
      }
      y[b][r] = static_cast<float>(acc);
    }
  }
  return y;
}

}  // namespace pbp
