#pragma once

// Analytic SIMT coalescing model. Estimates the global-memory load/store
// efficiency a block-sparse matvec kernel would see on a GPU-like machine:
// one thread per block row, one thread group per block, threads chunked into
// warps. Each cycle c every thread loads its block's coefficient at column c
// through the layout's offset formula; word addresses are packed into
// aligned transactions of transaction_bytes, counting a transaction once per
// warp per cycle (perfect intra-warp merging).
//
// efficiency = bytes requested / bytes transferred * 100. Row-major block
// storage strides warp accesses apart (one transaction per thread), while
// column-major variants make them contiguous, which is the whole argument
// for the Bcr/Cbr layouts.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pbp/blocksparse.hpp"

namespace pbp::sim {

struct WarpModel {
  std::size_t warp_size = 32;
  std::size_t transaction_bytes = 32;
  std::size_t word_bytes = 4;
};

inline void validate(const WarpModel& model) {
  if (model.warp_size < 1) {
    throw std::invalid_argument("warp model: warp_size must be >= 1");
  }
  if (model.word_bytes < 1 || model.transaction_bytes < model.word_bytes ||
      model.transaction_bytes % model.word_bytes != 0) {
    throw std::invalid_argument(
        "warp model: transaction_bytes must be a positive multiple of "
        "word_bytes");
  }
}

struct EfficiencyReport {
  double load_efficiency = 0.0;   // percent, 0 < x <= 100
  double store_efficiency = 0.0;  // percent, 0 < x <= 100
  std::uint64_t transactions = 0;  // load transactions across all cycles
};

enum class StoreKind { DenseRowStore, CsrScatter, PbpGroupStore };

/// dense_rowstore and pbp_groupstore write warp-contiguous words; csr_scatter
/// pays a whole transaction for every isolated word.
inline double store_efficiency(StoreKind kind, std::size_t width,
                               const WarpModel& model = WarpModel{}) {
  validate(model);
  if (width < 1) throw std::invalid_argument("store width must be >= 1");
  switch (kind) {
    case StoreKind::DenseRowStore:
    case StoreKind::PbpGroupStore:
      return 100.0;
    case StoreKind::CsrScatter:
      return 100.0 * static_cast<double>(model.word_bytes) /
             static_cast<double>(model.transaction_bytes);
  }
  throw std::invalid_argument("unknown store kind");
}

inline EfficiencyReport load_efficiency(Layout layout,
                                        const BlockPattern& pattern,
                                        const WarpModel& model = WarpModel{}) {
  validate(model);
  const auto& blocks = pattern.blocks();
  for (const Block& blk : blocks) {
    if (blk.rows != blocks[0].rows || blk.cols != blocks[0].cols) {
      throw std::invalid_argument(
          "load efficiency model requires a uniform pattern");
    }
  }
  const std::size_t rows = blocks[0].rows;
  const std::size_t cols = blocks[0].cols;

  std::vector<std::vector<float>> zeros(
      blocks.size(), std::vector<float>(rows * cols, 0.0f));
  const PackedBlocks packed = pack(pattern, layout, zeros);

  std::uint64_t requested_bytes = 0;
  std::uint64_t transactions = 0;
  std::vector<std::uint64_t> seen;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (std::size_t warp_begin = 0; warp_begin < rows;
         warp_begin += model.warp_size) {
      const std::size_t warp_rows =
          std::min(model.warp_size, rows - warp_begin);
      for (std::size_t c = 0; c < cols; ++c) {
        seen.clear();
        for (std::size_t r = warp_begin; r < warp_begin + warp_rows; ++r) {
          const std::uint64_t byte_addr =
              static_cast<std::uint64_t>(packed.offset(b, r, c)) *
              model.word_bytes;
          const std::uint64_t tx = byte_addr / model.transaction_bytes;
          bool hit = false;
          for (std::uint64_t s : seen) hit = hit || s == tx;
          if (!hit) seen.push_back(tx);
        }
        requested_bytes += warp_rows * model.word_bytes;
        transactions += seen.size();
      }
    }
  }
  const double load = 100.0 * static_cast<double>(requested_bytes) /
                      static_cast<double>(transactions) /
                      static_cast<double>(model.transaction_bytes);
  // The kernel's own stores are per-block contiguous partial-result groups.
  return EfficiencyReport{
      load, store_efficiency(StoreKind::PbpGroupStore, blocks.size() * rows,
                             model),
      transactions};
}

}  // namespace pbp::sim
