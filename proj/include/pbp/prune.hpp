#pragma once

// Pruning dense weights into PBP form.
//
// Two routes: pick pivots and a block pattern up front and mask training to
// it (feed_forward_mask), or take a trained matrix and search for pivots that
// concentrate absolute mass in diagonal blocks (greedy_bisect), halving
// recursively so fill-in is 2^-levels (recursive_bisect).
//
// The greedy search state is the pair of half assignments (which half of the
// bisection each row/column currently occupies). Proposals draw uniformly
// from {row swap, column swap, simultaneous row+column swap}; a component
// only takes effect when its two indices lie in different halves. A move is
// accepted iff the objective strictly increases; the search stops after
// `budget` consecutive non-improving proposals. Per-row/-column mass tables
// make proposal evaluation O(1) and accepted updates O(rows+cols). All mass
// arithmetic is double.

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pbp/blocksparse.hpp"
#include "pbp/matrix.hpp"
#include "pbp/pbp_matrix.hpp"
#include "pbp/permutation.hpp"
#include "pbp/rng.hpp"

namespace pbp {

struct PruneReport {
  double objective_initial = 0.0;
  double objective_final = 0.0;
  double retained_mass_fraction = 0.0;
  std::size_t accepted_moves = 0;
};

/// Diagonal halving plan: after `level` halvings an n_rows×n_cols matrix has
/// 2^level diagonal segments of size (n_rows/2^level)×(n_cols/2^level).
class BisectionTree {
 public:
  BisectionTree(std::size_t n_rows, std::size_t n_cols, std::size_t levels)
      : n_rows_(n_rows), n_cols_(n_cols), levels_(levels) {
    if (n_rows_ == 0 || n_cols_ == 0) {
      throw std::invalid_argument("BisectionTree: empty matrix");
    }
    if (levels_ > 30) {
      throw std::invalid_argument("BisectionTree: more than 30 levels");
    }
    const std::size_t parts = std::size_t{1} << levels_;
    if (n_rows_ % parts != 0 || n_cols_ % parts != 0) {
      throw std::invalid_argument(
          "BisectionTree: " + std::to_string(n_rows_) + "x" +
          std::to_string(n_cols_) + " not divisible by 2^" +
          std::to_string(levels_));
    }
  }

  std::size_t levels() const { return levels_; }
  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return n_cols_; }

  /// The diagonal segments after `level` halvings (level 0 = whole matrix).
  std::vector<Block> segments(std::size_t level) const {
    if (level > levels_) {
      throw std::invalid_argument("BisectionTree: level out of range");
    }
    const std::size_t parts = std::size_t{1} << level;
    const std::size_t sr = n_rows_ / parts;
    const std::size_t sc = n_cols_ / parts;
    std::vector<Block> segs(parts);
    for (std::size_t s = 0; s < parts; ++s) {
      segs[s] = Block{static_cast<std::uint32_t>(s * sr),
                      static_cast<std::uint32_t>(s * sc),
                      static_cast<std::uint32_t>(sr),
                      static_cast<std::uint32_t>(sc)};
    }
    return segs;
  }

  /// Deepest-level segments as a block pattern; fill-in is exactly 2^-levels.
  BlockPattern pattern() const {
    return BlockPattern(n_rows_, n_cols_, segments(levels_));
  }

 private:
  std::size_t n_rows_;
  std::size_t n_cols_;
  std::size_t levels_;
};

struct Mask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> data;  // rows*cols, row-major, 0 or 1

  Mask(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0) {}

  std::uint8_t& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  std::uint8_t at(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (std::uint8_t b : data) n += b;
    return n;
  }
};

/// mask[i][j] = true iff (i,j) maps into a block under the pivots; masking
/// any dense matrix with it yields an input from_masked accepts.
inline Mask feed_forward_mask(std::size_t n_rows, std::size_t n_cols,
                              const BlockPattern& pattern,
                              const Permutation& p_row,
                              const Permutation& p_col) {
  if (n_rows != pattern.n_rows() || n_cols != pattern.n_cols()) {
    throw std::invalid_argument("feed_forward_mask: pattern is " +
                                std::to_string(pattern.n_rows()) + "x" +
                                std::to_string(pattern.n_cols()) +
                                ", expected " + std::to_string(n_rows) + "x" +
                                std::to_string(n_cols));
  }
  if (p_row.size() != n_rows || p_col.size() != n_cols) {
    throw std::invalid_argument("feed_forward_mask: pivot length mismatch");
  }
  const Permutation inv_row = inverse(p_row);
  Mask mask(n_rows, n_cols);
  for (const Block& blk : pattern.blocks()) {
    for (std::size_t r = 0; r < blk.rows; ++r) {
      const std::size_t i = inv_row[blk.row_start + r];
      for (std::size_t c = 0; c < blk.cols; ++c) {
        mask.at(i, p_col[blk.col_start + c]) = 1;
      }
    }
  }
  return mask;
}

inline DenseMatrix apply_mask(const DenseMatrix& w, const Mask& mask) {
  if (w.rows != mask.rows || w.cols != mask.cols) {
    throw std::invalid_argument("apply_mask: dimension mismatch");
  }
  DenseMatrix out = w;
  for (std::size_t i = 0; i < w.rows * w.cols; ++i) {
    if (!mask.data[i]) out.data[i] = 0.0f;
  }
  return out;
}

/// Sum of |w[i][j]| over positions inside blocks under the pivots.
inline double block_mass(const DenseMatrix& w, const Permutation& p_row,
                         const Permutation& p_col,
                         const BlockPattern& pattern) {
  if (w.rows != pattern.n_rows() || w.cols != pattern.n_cols() ||
      p_row.size() != w.rows || p_col.size() != w.cols) {
    throw std::invalid_argument("block_mass: dimension mismatch");
  }
  const Permutation inv_row = inverse(p_row);
  double mass = 0.0;
  for (const Block& blk : pattern.blocks()) {
    for (std::size_t r = 0; r < blk.rows; ++r) {
      const std::size_t i = inv_row[blk.row_start + r];
      for (std::size_t c = 0; c < blk.cols; ++c) {
        const float v = w.at(i, p_col[blk.col_start + c]);
        mass += v < 0.0f ? -static_cast<double>(v) : static_cast<double>(v);
      }
    }
  }
  return mass;
}

inline double total_abs_mass(const DenseMatrix& w) {
  double mass = 0.0;
  for (float v : w.data) {
    mass += v < 0.0f ? -static_cast<double>(v) : static_cast<double>(v);
  }
  return mass;
}

enum class StartPivots { Random, Identity };

struct GreedyResult {
  Permutation p_row;
  Permutation p_col;
  PruneReport report;
};

/// Hill-climbs pivots for the 2-diagonal-block pattern of w, maximizing the
/// retained absolute mass. Deterministic given (w, seed, budget, start).
inline GreedyResult greedy_bisect(const DenseMatrix& w, std::uint64_t seed,
                                  std::size_t budget = 2000,
                                  StartPivots start = StartPivots::Random) {
  const std::size_t n = w.rows;
  const std::size_t m = w.cols;
  if (n < 2 || m < 2 || n % 2 != 0 || m % 2 != 0) {
    throw std::invalid_argument("greedy_bisect: dimensions must be even, got " +
                                std::to_string(n) + "x" + std::to_string(m));
  }

  Rng rng(seed);
  // pos_row[i] = block row position of w row i; pos_col[j] = block column
  // position of w column j. Halves follow from positions.
  std::vector<std::uint32_t> pos_row(n), pos_col(m);
  for (std::size_t i = 0; i < n; ++i) pos_row[i] = static_cast<std::uint32_t>(i);
  for (std::size_t j = 0; j < m; ++j) pos_col[j] = static_cast<std::uint32_t>(j);
  if (start == StartPivots::Random) {
    rng.shuffle(pos_row);
    rng.shuffle(pos_col);
  }
  std::vector<std::uint8_t> hr(n), hc(m);
  for (std::size_t i = 0; i < n; ++i) hr[i] = pos_row[i] < n / 2 ? 0 : 1;
  for (std::size_t j = 0; j < m; ++j) hc[j] = pos_col[j] < m / 2 ? 0 : 1;

  std::vector<double> a(n * m);
  for (std::size_t i = 0; i < n * m; ++i) {
    const float v = w.data[i];
    a[i] = v < 0.0f ? -static_cast<double>(v) : static_cast<double>(v);
  }

  // rmass[2i+h] = sum of a[i][j] over columns currently in half h;
  // cmass[2j+h] = sum of a[i][j] over rows currently in half h.
  std::vector<double> rmass(2 * n, 0.0), cmass(2 * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      rmass[2 * i + hc[j]] += a[i * m + j];
      cmass[2 * j + hr[i]] += a[i * m + j];
    }
  }

  const BlockPattern pattern = diagonal_pattern(n, m, 2);
  auto pivots = [&]() -> std::pair<Permutation, Permutation> {
    return {Permutation(pos_row), inverse(Permutation(pos_col))};
  };
  PruneReport report;
  {
    auto [p_row, p_col] = pivots();
    report.objective_initial = block_mass(w, p_row, p_col, pattern);
  }

  std::size_t misses = 0;
  while (misses < budget) {
    const std::uint64_t kind = rng.index(3);
    std::size_t i1 = 0, i2 = 0, j1 = 0, j2 = 0;
    bool rows_armed = false, cols_armed = false;
    if (kind != 1) {
      i1 = rng.index(n);
      i2 = rng.index(n);
      rows_armed = i1 != i2 && hr[i1] != hr[i2];
    }
    if (kind != 0) {
      j1 = rng.index(m);
      j2 = rng.index(m);
      cols_armed = j1 != j2 && hc[j1] != hc[j2];
    }
    if (!rows_armed && !cols_armed) {
      ++misses;
      continue;
    }

    double delta = 0.0;
    if (rows_armed) {
      delta += (rmass[2 * i1 + hr[i2]] - rmass[2 * i1 + hr[i1]]) +
               (rmass[2 * i2 + hr[i1]] - rmass[2 * i2 + hr[i2]]);
    }
    if (cols_armed) {
      delta += (cmass[2 * j1 + hc[j2]] - cmass[2 * j1 + hc[j1]]) +
               (cmass[2 * j2 + hc[j1]] - cmass[2 * j2 + hc[j2]]);
    }
    if (rows_armed && cols_armed) {
      // Cells at the four row/column intersections flip row and column half
      // together; the single-axis deltas above each count them once, so
      // correct by their joint change.
      const double s = hr[i1] == hc[j1] ? 2.0 : -2.0;
      delta += s * (a[i1 * m + j1] + a[i2 * m + j2] - a[i1 * m + j2] -
                    a[i2 * m + j1]);
    }

    if (delta > 0.0) {
      if (rows_armed) {
        const std::size_t h1 = hr[i1], h2 = hr[i2];
        for (std::size_t j = 0; j < m; ++j) {
          const double diff = a[i2 * m + j] - a[i1 * m + j];
          cmass[2 * j + h1] += diff;
          cmass[2 * j + h2] -= diff;
        }
        std::swap(hr[i1], hr[i2]);
        std::swap(pos_row[i1], pos_row[i2]);
      }
      if (cols_armed) {
        const std::size_t h1 = hc[j1], h2 = hc[j2];
        for (std::size_t i = 0; i < n; ++i) {
          const double diff = a[i * m + j2] - a[i * m + j1];
          rmass[2 * i + h1] += diff;
          rmass[2 * i + h2] -= diff;
        }
        std::swap(hc[j1], hc[j2]);
        std::swap(pos_col[j1], pos_col[j2]);
      }
      ++report.accepted_moves;
      misses = 0;
    } else {
      ++misses;
    }
  }

  auto [p_row, p_col] = pivots();
  report.objective_final = block_mass(w, p_row, p_col, pattern);
  const double total = total_abs_mass(w);
  report.retained_mass_fraction =
      total > 0.0 ? report.objective_final / total : 1.0;
  return GreedyResult{std::move(p_row), std::move(p_col), report};
}

struct BisectResult {
  PbpMatrix matrix;
  PruneReport report;
};

/// Recursively halves each diagonal segment with greedy_bisect, composing the
/// per-segment pivots into global ones. Off-block coefficients are deleted.
/// The report's objectives sum the deepest level's sub-searches; accepted
/// moves sum over all levels.
inline BisectResult recursive_bisect(const DenseMatrix& w, std::size_t levels,
                                     std::uint64_t seed,
                                     std::size_t budget = 2000,
                                     Layout layout = Layout::Brc) {
  const BisectionTree tree(w.rows, w.cols, levels);
  const double total = total_abs_mass(w);

  if (levels == 0) {
    PbpMatrix matrix =
        from_masked(w, Permutation::identity(w.rows),
                    Permutation::identity(w.cols), tree.pattern(), layout);
    PruneReport report;
    report.objective_initial = total;
    report.objective_final = total;
    report.retained_mass_fraction = 1.0;
    return BisectResult{std::move(matrix), report};
  }

  // row_map[k] = w row at block row position k; col_map[l] = w column at
  // block column position l.
  std::vector<std::uint32_t> row_map(w.rows), col_map(w.cols);
  for (std::size_t i = 0; i < w.rows; ++i) {
    row_map[i] = static_cast<std::uint32_t>(i);
  }
  for (std::size_t j = 0; j < w.cols; ++j) {
    col_map[j] = static_cast<std::uint32_t>(j);
  }

  PruneReport report;
  for (std::size_t level = 0; level < levels; ++level) {
    double level_initial = 0.0;
    double level_final = 0.0;
    const auto segs = tree.segments(level);
    for (std::size_t s = 0; s < segs.size(); ++s) {
      const Block& seg = segs[s];
      DenseMatrix sub(seg.rows, seg.cols);
      for (std::size_t r = 0; r < seg.rows; ++r) {
        for (std::size_t c = 0; c < seg.cols; ++c) {
          sub.at(r, c) =
              w.at(row_map[seg.row_start + r], col_map[seg.col_start + c]);
        }
      }
      GreedyResult g = greedy_bisect(
          sub, derive_seed(derive_seed(seed, level), s), budget);

      // Block row k of sub holds sub row inverse(g.p_row)[k]; block column l
      // holds sub column g.p_col[l]. Reorder the segment's maps accordingly.
      const Permutation inv_r = inverse(g.p_row);
      std::vector<std::uint32_t> rows_new(seg.rows), cols_new(seg.cols);
      for (std::size_t k = 0; k < seg.rows; ++k) {
        rows_new[k] = row_map[seg.row_start + inv_r[k]];
      }
      for (std::size_t l = 0; l < seg.cols; ++l) {
        cols_new[l] = col_map[seg.col_start + g.p_col[l]];
      }
      std::copy(rows_new.begin(), rows_new.end(),
                row_map.begin() + seg.row_start);
      std::copy(cols_new.begin(), cols_new.end(),
                col_map.begin() + seg.col_start);

      level_initial += g.report.objective_initial;
      level_final += g.report.objective_final;
      report.accepted_moves += g.report.accepted_moves;
    }
    report.objective_initial = level_initial;
    report.objective_final = level_final;
  }

  const Permutation p_row = inverse(Permutation(row_map));
  const Permutation p_col(col_map);
  const BlockPattern pattern = tree.pattern();
  const DenseMatrix kept =
      apply_mask(w, feed_forward_mask(w.rows, w.cols, pattern, p_row, p_col));
  PbpMatrix matrix = from_masked(kept, p_row, p_col, pattern, layout);
  report.retained_mass_fraction =
      total > 0.0 ? report.objective_final / total : 1.0;
  return BisectResult{std::move(matrix), report};
}

}  // namespace pbp
