#pragma once

// Matvec benchmark harness sweeping a size x fill-in x layout grid. Each
// cell builds one synthetic PBP matrix (identical square diagonal blocks,
// the only shape every (size, fill-in) pair realizes exactly), a dense copy,
// and a CSR copy; verifies the three kernels agree to 1e-5 relative before
// any timing; then reports per-call mean and median latency plus exact FLOP
// counts (2 per nonzero).
//
// Latencies are informational: they rank implementations on the host CPU
// and nothing else. FLOP counts are the machine-independent quantity, and
// they are exactly linear in fill-in at fixed size. Cells run sequentially
// unless parallel_cells asks for workers; parallel timings contend for
// memory bandwidth and are not comparable across cells.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "pbp/blocksparse.hpp"
#include "pbp/io.hpp"
#include "pbp/matrix.hpp"
#include "pbp/pbp_matrix.hpp"
#include "pbp/permutation.hpp"
#include "pbp/rng.hpp"

namespace pbp::bench {

/// Row-pointer/column-index sparse baseline, the generic format a PBP
/// matrix competes against. Column indices are ascending within each row,
/// and the accumulator discipline matches the rest of the library (double,
/// ascending order), so on diagonal-block matrices it agrees bit-for-bit
/// with the dense and PBP kernels.
struct CsrMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<std::uint32_t> row_ptr;  // length n_rows + 1
  std::vector<std::uint32_t> col_idx;
  std::vector<float> values;

  static CsrMatrix from_dense(const DenseMatrix& m) {
    CsrMatrix csr;
    csr.n_rows = m.rows;
    csr.n_cols = m.cols;
    csr.row_ptr.reserve(m.rows + 1);
    csr.row_ptr.push_back(0);
    for (std::size_t i = 0; i < m.rows; ++i) {
      for (std::size_t j = 0; j < m.cols; ++j) {
        const float v = m.at(i, j);
        if (v != 0.0f) {
          csr.col_idx.push_back(static_cast<std::uint32_t>(j));
          csr.values.push_back(v);
        }
      }
      csr.row_ptr.push_back(static_cast<std::uint32_t>(csr.col_idx.size()));
    }
    return csr;
  }

  void matvec_into(std::span<const float> x, std::span<float> y) const {
    if (x.size() != n_cols || y.size() != n_rows) {
      throw std::invalid_argument("csr matvec: dimension mismatch");
    }
    for (std::size_t i = 0; i < n_rows; ++i) {
      double acc = 0.0;
      for (std::uint32_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
        acc += static_cast<double>(values[k]) * x[col_idx[k]];
      }
      y[i] = static_cast<float>(acc);
    }
  }

  std::size_t nonzeros() const { return values.size(); }
};

/// Width of the square diagonal blocks realizing (size, fill_in), or throws:
/// size * fill_in must be an integer that divides size.
inline std::size_t block_width(std::size_t size, double fill_in) {
  const double wd = static_cast<double>(size) * fill_in;
  if (!(wd >= 1.0) || wd != std::floor(wd) ||
      size % static_cast<std::size_t>(wd) != 0) {
    std::ostringstream msg;
    msg << "cell size=" << size << " fill_in=" << fill_in
        << " is not realizable: size*fill_in must be an integer block "
           "width dividing size";
    throw std::invalid_argument(msg.str());
  }
  return static_cast<std::size_t>(wd);
}

/// Identical square diagonal blocks of width size*fill_in, standard-normal
/// coefficients, seeded-random pivots.
inline PbpMatrix make_synthetic(std::size_t size, double fill_in,
                                Layout layout, std::uint64_t seed) {
  const std::size_t w = block_width(size, fill_in);
  const std::size_t nb = size / w;
  const BlockPattern pattern = diagonal_pattern(size, size, nb);
  Rng rng(seed);
  std::vector<std::vector<float>> coeffs(nb, std::vector<float>(w * w));
  for (auto& block : coeffs) {
    for (float& v : block) v = rng.normal_f();
  }
  Permutation p_row = Permutation::random(size, rng);
  Permutation p_col = Permutation::random(size, rng);
  return PbpMatrix(std::move(p_row), pack(pattern, layout, coeffs),
                   std::move(p_col));
}

struct BenchConfig {
  std::vector<std::size_t> sizes = {64, 128, 256, 512, 1024, 2048, 4096};
  std::vector<double> fill_ins = {0.03125, 0.0625, 0.125, 0.25};
  std::vector<Layout> layouts = {Layout::Brc, Layout::Bcr, Layout::Cbr};
  std::size_t repetitions = 2500;
  std::size_t warmup = 100;
  std::uint64_t seed = 0;
  std::size_t parallel_cells = 0;  // 0: sequential; N: worker thread cap
};

struct BenchResult {
  std::size_t size = 0;
  double fill_in = 0.0;
  Layout layout = Layout::Brc;
  double pbp_ns = 0.0;
  double dense_ns = 0.0;
  double sparse_ns = 0.0;
  double pbp_median_ns = 0.0;
  double dense_median_ns = 0.0;
  double sparse_median_ns = 0.0;
  double speedup_vs_dense = 0.0;
  double speedup_vs_sparse = 0.0;
  std::uint64_t flops = 0;
};

namespace detail {

inline void do_not_elide(const void* p) {
  asm volatile("" : : "g"(p) : "memory");
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename F>
std::vector<double> time_calls(std::size_t warmup, std::size_t reps, F&& fn) {
  for (std::size_t t = 0; t < warmup; ++t) fn();
  std::vector<double> ns(reps);
  for (std::size_t t = 0; t < reps; ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    ns[t] = static_cast<double>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0)
            .count());
  }
  return ns;
}

inline void check_agreement(const char* what, std::span<const float> got,
                            std::span<const float> want, std::size_t size,
                            double fill_in, Layout layout) {
  constexpr double kRelTol = 1e-5;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double a = got[i], b = want[i];
    const double scale = std::max({std::abs(a), std::abs(b), 1e-30});
    if (std::abs(a - b) / scale > kRelTol) {
      std::ostringstream msg;
      msg << "bench cell size=" << size << " fill_in=" << fill_in
          << " layout=" << layout_name(layout) << ": " << what
          << " disagrees at row " << i << " (" << a << " vs " << b << ")";
      throw std::runtime_error(msg.str());
    }
  }
}

inline BenchResult run_cell(std::size_t size, double fill_in, Layout layout,
                            std::uint64_t seed, std::size_t warmup,
                            std::size_t reps) {
  const PbpMatrix m = make_synthetic(size, fill_in, layout, seed);
  const DenseMatrix dense = m.to_dense();
  const CsrMatrix csr = CsrMatrix::from_dense(dense);

  Rng rng(derive_seed(seed, 0x9E11));
  std::vector<float> x(size);
  for (float& v : x) v = rng.normal_f();

  std::vector<float> y_pbp(size), y_dense(size), y_csr(size), scratch;
  m.matvec_into(x, y_pbp, scratch);
  dense_matvec_into(dense, x, y_dense);
  csr.matvec_into(x, y_csr);
  check_agreement("pbp vs dense", y_pbp, y_dense, size, fill_in, layout);
  check_agreement("pbp vs csr", y_pbp, y_csr, size, fill_in, layout);

  auto pbp_ns = time_calls(warmup, reps, [&] {
    m.matvec_into(x, y_pbp, scratch);
    do_not_elide(y_pbp.data());
  });
  auto dense_ns = time_calls(warmup, reps, [&] {
    dense_matvec_into(dense, x, y_dense);
    do_not_elide(y_dense.data());
  });
  auto csr_ns = time_calls(warmup, reps, [&] {
    csr.matvec_into(x, y_csr);
    do_not_elide(y_csr.data());
  });

  BenchResult r;
  r.size = size;
  r.fill_in = fill_in;
  r.layout = layout;
  r.pbp_ns = mean(pbp_ns);
  r.dense_ns = mean(dense_ns);
  r.sparse_ns = mean(csr_ns);
  r.pbp_median_ns = median(std::move(pbp_ns));
  r.dense_median_ns = median(std::move(dense_ns));
  r.sparse_median_ns = median(std::move(csr_ns));
  r.speedup_vs_dense = r.dense_ns / r.pbp_ns;
  r.speedup_vs_sparse = r.sparse_ns / r.pbp_ns;
  r.flops = 2 * static_cast<std::uint64_t>(csr.nonzeros());
  return r;
}

}  // namespace detail

inline void validate(const BenchConfig& cfg) {
  if (cfg.sizes.empty() || cfg.fill_ins.empty() || cfg.layouts.empty()) {
    throw std::invalid_argument("bench config: empty sweep axis");
  }
  if (cfg.repetitions < 1) {
    throw std::invalid_argument("bench config: repetitions must be >= 1");
  }
  for (std::size_t size : cfg.sizes) {
    for (double fill : cfg.fill_ins) block_width(size, fill);
  }
}

/// One result per (size, fill_in, layout) cell, in sweep order.
inline std::vector<BenchResult> run_sweep(const BenchConfig& cfg) {
  validate(cfg);
  struct Cell {
    std::size_t size;
    double fill_in;
    Layout layout;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (std::size_t size : cfg.sizes) {
    for (double fill : cfg.fill_ins) {
      for (Layout layout : cfg.layouts) {
        cells.push_back(Cell{size, fill, layout,
                             derive_seed(cfg.seed, cells.size())});
      }
    }
  }

  std::vector<BenchResult> results(cells.size());
  auto work = [&](std::size_t k) {
    const Cell& c = cells[k];
    results[k] = detail::run_cell(c.size, c.fill_in, c.layout, c.seed,
                                  cfg.warmup, cfg.repetitions);
  };

  if (cfg.parallel_cells == 0 || cells.size() <= 1) {
    for (std::size_t k = 0; k < cells.size(); ++k) work(k);
    return results;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t k = next.fetch_add(1); k < cells.size();
         k = next.fetch_add(1)) {
      try {
        work(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(cfg.parallel_cells, cells.size());
  std::vector<std::thread> threads;
  threads.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

inline constexpr const char* kCsvHeader =
    "size,fill_in,layout,pbp_ns,dense_ns,sparse_ns,speedup_vs_dense,"
    "speedup_vs_sparse,flops,pbp_median_ns,dense_median_ns,sparse_median_ns";

inline std::string csv_string(const std::vector<BenchResult>& results) {
  auto fixed = [](double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return std::string(buf);
  };
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const BenchResult& r : results) {
    out << r.size << ',' << r.fill_in << ',' << layout_name(r.layout) << ','
        << fixed(r.pbp_ns, 1) << ',' << fixed(r.dense_ns, 1) << ','
        << fixed(r.sparse_ns, 1) << ',' << fixed(r.speedup_vs_dense, 4) << ','
        << fixed(r.speedup_vs_sparse, 4) << ',' << r.flops << ','
        << fixed(r.pbp_median_ns, 1) << ',' << fixed(r.dense_median_ns, 1)
        << ',' << fixed(r.sparse_median_ns, 1) << '\n';
  }
  return out.str();
}

inline void write_csv(const std::filesystem::path& path,
                      const std::vector<BenchResult>& results) {
  io::write_file_atomic(path, csv_string(results));
}

}  // namespace pbp::bench
