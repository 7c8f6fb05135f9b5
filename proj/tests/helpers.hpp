#pragma once

// Shared test utilities. Oracles that double-check library results live in
// the test files next to their assertions, not in the library.

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "pbp/blocksparse.hpp"
#include "pbp/pbp_matrix.hpp"
#include "pbp/permutation.hpp"
#include "pbp/rng.hpp"

namespace testutil {

inline std::vector<float> random_vector(std::size_t n, pbp::Rng& rng) {
  std::vector<float> v(n);
  for (float& x : v) x = rng.normal_f();
  return v;
}

inline std::size_t random_divisor(std::size_t n, std::size_t cap,
                                  pbp::Rng& rng) {
  std::vector<std::size_t> divs;
  for (std::size_t d = 1; d <= cap && d <= n; ++d) {
    if (n % d == 0) divs.push_back(d);
  }
  return divs[rng.index(divs.size())];
}

/// Cell-disjoint random pattern: rows and columns are cut into a grid and a
/// random non-empty subset of grid cells becomes the blocks. Equal cuts give
/// uniform blocks; random cuts exercise the non-uniform paths.
inline pbp::BlockPattern random_pattern(std::size_t n_rows, std::size_t n_cols,
                                        pbp::Rng& rng, bool require_uniform) {
  const std::size_t gr = random_divisor(n_rows, 6, rng);
  const std::size_t gc = random_divisor(n_cols, 6, rng);

  auto cuts = [&](std::size_t n, std::size_t parts,
                  bool equal) -> std::vector<std::size_t> {
    std::vector<std::size_t> sizes(parts, n / parts);
    if (!equal) {
      // Move random slack between neighbors, keeping every part >= 1.
      for (std::size_t t = 0; t < parts; ++t) {
        const std::size_t a = rng.index(parts);
        const std::size_t b = rng.index(parts);
        if (a != b && sizes[a] > 1) {
          --sizes[a];
          ++sizes[b];
        }
      }
    }
    return sizes;
  };
  const bool equal = require_uniform || rng.index(2) == 0;
  const auto row_sizes = cuts(n_rows, gr, equal);
  const auto col_sizes = cuts(n_cols, gc, equal);

  std::vector<std::size_t> row_off(gr, 0), col_off(gc, 0);
  for (std::size_t i = 1; i < gr; ++i)
    row_off[i] = row_off[i - 1] + row_sizes[i - 1];
  for (std::size_t j = 1; j < gc; ++j)
    col_off[j] = col_off[j - 1] + col_sizes[j - 1];

  std::vector<pbp::Block> blocks;
  for (std::size_t i = 0; i < gr; ++i) {
    for (std::size_t j = 0; j < gc; ++j) {
      if (rng.index(10) < 4) {
        blocks.push_back(pbp::Block{
            static_cast<std::uint32_t>(row_off[i]),
            static_cast<std::uint32_t>(col_off[j]),
            static_cast<std::uint32_t>(row_sizes[i]),
            static_cast<std::uint32_t>(col_sizes[j])});
      }
    }
  }
  if (blocks.empty()) {
    const std::size_t i = rng.index(gr), j = rng.index(gc);
    blocks.push_back(pbp::Block{static_cast<std::uint32_t>(row_off[i]),
                                static_cast<std::uint32_t>(col_off[j]),
                                static_cast<std::uint32_t>(row_sizes[i]),
                                static_cast<std::uint32_t>(col_sizes[j])});
  }
  return pbp::BlockPattern(n_rows, n_cols, std::move(blocks));
}

/// Random matrix in PBP form: random pattern (uniform when the layout needs
/// it), random pivots, standard-normal coefficients.
inline pbp::PbpMatrix make_random_pbp(std::size_t n_rows, std::size_t n_cols,
                                      pbp::Layout layout, pbp::Rng& rng) {
  const bool uniform = layout == pbp::Layout::Cbr || rng.index(2) == 0;
  auto pattern = random_pattern(n_rows, n_cols, rng, uniform);
  std::vector<std::vector<float>> coeffs(pattern.blocks().size());
  for (std::size_t b = 0; b < coeffs.size(); ++b) {
    coeffs[b].resize(pattern.blocks()[b].area());
    for (float& v : coeffs[b]) v = rng.normal_f();
  }
  auto p_row = pbp::Permutation::random(n_rows, rng);
  auto p_col = pbp::Permutation::random(n_cols, rng);
  return pbp::PbpMatrix(std::move(p_row),
                        pbp::pack(pattern, layout, coeffs), std::move(p_col));
}

/// Fresh directory under the system temp root, unique per call.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::uint64_t counter = 0;
  auto dir = std::filesystem::temp_directory_path() /
             ("pbp_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
              std::to_string(counter++));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
