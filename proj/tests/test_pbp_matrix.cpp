#include <catch2/catch_amalgamated.hpp>

#include <cstddef>
#include <vector>

#include "helpers.hpp"
#include "pbp/blocksparse.hpp"
#include "pbp/matrix.hpp"
#include "pbp/pbp_matrix.hpp"
#include "pbp/permutation.hpp"
#include "pbp/rng.hpp"

namespace {

using pbp::Block;
using pbp::BlockPattern;
using pbp::DenseMatrix;
using pbp::Layout;
using pbp::PbpMatrix;
using pbp::Permutation;

constexpr Layout kLayouts[] = {Layout::Brc, Layout::Bcr, Layout::Cbr};

// Literal triple product P_row * M_block * P_col with explicit 0/1
// permutation matrices (P[i][idx[i]] = 1) and double arithmetic. Independent
// of the library's coordinate correspondence; only copies coefficients, so
// comparisons against it are exact.
DenseMatrix triple_product(const Permutation& p_row,
                           const BlockPattern& pattern,
                           const std::vector<std::vector<float>>& coeffs,
                           const Permutation& p_col) {
  const std::size_t n = p_row.size();
  const std::size_t m = p_col.size();
  std::vector<std::vector<double>> mb(n, std::vector<double>(m, 0.0));
  for (std::size_t b = 0; b < pattern.blocks().size(); ++b) {
    const Block& blk = pattern.blocks()[b];
    for (std::size_t r = 0; r < blk.rows; ++r) {
      for (std::size_t c = 0; c < blk.cols; ++c) {
        mb[blk.row_start + r][blk.col_start + c] = coeffs[b][r * blk.cols + c];
      }
    }
  }
  std::vector<std::vector<double>> pr(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) pr[i][p_row[i]] = 1.0;
  std::vector<std::vector<double>> pc(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i) pc[i][p_col[i]] = 1.0;

  std::vector<std::vector<double>> t(n, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t k = 0; k < m; ++k) t[i][j] += mb[i][k] * pc[k][j];
    }
  }
  DenseMatrix out(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double v = 0.0;
      for (std::size_t k = 0; k < n; ++k) v += pr[i][k] * t[k][j];
      out.at(i, j) = static_cast<float>(v);
    }
  }
  return out;
}

// Fixed-order dense oracle: reads only the dense embedding, the pattern, and
// the pivots (never the packed offsets), and folds exactly like the kernel
// contract: per block in storage order, one double accumulator per row over
// ascending block column, partial rounded to float and added to the output.
std::vector<float> staged_dense_matvec(const DenseMatrix& dense,
                                       const BlockPattern& pattern,
                                       const Permutation& p_row,
                                       const Permutation& p_col,
                                       const std::vector<float>& x) {
  const Permutation inv_row = pbp::inverse(p_row);
  std::vector<float> y(dense.rows, 0.0f);
  for (const Block& blk : pattern.blocks()) {
    for (std::size_t r = 0; r < blk.rows; ++r) {
      const std::size_t i = inv_row[blk.row_start + r];
      double acc = 0.0;
      for (std::size_t c = 0; c < blk.cols; ++c) {
        const std::size_t j = p_col[blk.col_start + c];
        acc += static_cast<double>(dense.at(i, j)) * x[j];
      }
      y[i] += static_cast<float>(acc);
    }
  }
  return y;
}

std::vector<std::vector<float>> random_coeffs(const BlockPattern& pattern,
                                              pbp::Rng& rng) {
  std::vector<std::vector<float>> coeffs(pattern.blocks().size());
  for (std::size_t b = 0; b < coeffs.size(); ++b) {
    coeffs[b].resize(pattern.blocks()[b].area());
    for (float& v : coeffs[b]) v = rng.normal_f();
  }
  return coeffs;
}

TEST_CASE("to_dense matches the explicit permutation matrix product",
          "[pbp]") {
  pbp::Rng rng(901);
  for (int iter = 0; iter < 100; ++iter) {
    const std::size_t n = rng.index(12) + 1;
    const std::size_t m = rng.index(12) + 1;
    auto pattern = testutil::random_pattern(n, m, rng, false);
    auto coeffs = random_coeffs(pattern, rng);
    auto p_row = Permutation::random(n, rng);
    auto p_col = Permutation::random(m, rng);
    PbpMatrix mat(p_row, pbp::pack(pattern, Layout::Brc, coeffs), p_col);
    CHECK(mat.to_dense() == triple_product(p_row, pattern, coeffs, p_col));
  }
}

TEST_CASE("to_dense places a single 1x1 block through the pivots", "[pbp]") {
  BlockPattern pattern(2, 2, {Block{0, 0, 1, 1}});
  PbpMatrix m(Permutation({1, 0}),
              pbp::pack(pattern, Layout::Brc, {{3.5f}}),
              Permutation::identity(2));
  DenseMatrix d = m.to_dense();
  CHECK(d.at(0, 0) == 0.0f);
  CHECK(d.at(0, 1) == 0.0f);
  CHECK(d.at(1, 0) == 3.5f);
  CHECK(d.at(1, 1) == 0.0f);
}

TEST_CASE("identity pivots give the plain block embedding", "[pbp]") {
  pbp::Rng rng(902);
  auto pattern = testutil::random_pattern(10, 14, rng, false);
  auto coeffs = random_coeffs(pattern, rng);
  PbpMatrix m(Permutation::identity(10),
              pbp::pack(pattern, Layout::Brc, coeffs),
              Permutation::identity(14));
  DenseMatrix d = m.to_dense();
  for (std::size_t b = 0; b < pattern.blocks().size(); ++b) {
    const Block& blk = pattern.blocks()[b];
    for (std::size_t r = 0; r < blk.rows; ++r) {
      for (std::size_t c = 0; c < blk.cols; ++c) {
        CHECK(d.at(blk.row_start + r, blk.col_start + c) ==
              coeffs[b][r * blk.cols + c]);
      }
    }
  }
}

TEST_CASE("512 with 16 diagonal 32x32 blocks has 16384 slots at 6.25% fill",
          "[pbp]") {
  pbp::Rng rng(903);
  auto pattern = pbp::diagonal_pattern(512, 512, 16);
  std::vector<std::vector<float>> coeffs(16);
  for (auto& c : coeffs) {
    c.resize(32 * 32);
    // Strictly positive so the nonzero count equals the slot count.
    for (float& v : c) v = static_cast<float>(rng.real()) + 0.5f;
  }
  PbpMatrix m(Permutation::random(512, rng),
              pbp::pack(pattern, Layout::Bcr, coeffs),
              Permutation::random(512, rng));
  CHECK(m.fill_in() == 0.0625);
  DenseMatrix d = m.to_dense();
  std::size_t nonzeros = 0;
  for (float v : d.data) nonzeros += v != 0.0f;
  CHECK(nonzeros == 16384);
}

TEST_CASE("fill_in is block area over matrix area", "[pbp]") {
  pbp::Rng rng(904);
  BlockPattern full(6, 6, {Block{0, 0, 6, 6}});
  PbpMatrix whole(Permutation::random(6, rng),
                  pbp::pack(full, Layout::Brc, random_coeffs(full, rng)),
                  Permutation::random(6, rng));
  CHECK(whole.fill_in() == 1.0);

  auto eighth = pbp::diagonal_pattern(1024, 1024, 8);
  PbpMatrix m(Permutation::identity(1024),
              pbp::pack(eighth, Layout::Brc,
                        std::vector<std::vector<float>>(
                            8, std::vector<float>(128 * 128, 1.0f))),
              Permutation::identity(1024));
  CHECK(m.fill_in() == 0.125);
}

TEST_CASE("matvec equals the fixed-order dense oracle exactly", "[pbp]") {
  pbp::Rng rng(905);
  for (int iter = 0; iter < 200; ++iter) {
    const Layout layout = kLayouts[iter % 3];
    const std::size_t n = rng.index(64) + 1;
    const std::size_t m = rng.index(64) + 1;
    PbpMatrix mat = testutil::make_random_pbp(n, m, layout, rng);
    const auto x = testutil::random_vector(m, rng);
    const auto expected = staged_dense_matvec(mat.to_dense(), mat.pattern(),
                                              mat.p_row(), mat.p_col(), x);
    CHECK(mat.matvec(x) == expected);
  }
}

TEST_CASE("matvec agrees with staging through the public block kernel",
          "[pbp]") {
  pbp::Rng rng(906);
  for (int iter = 0; iter < 50; ++iter) {
    const std::size_t n = rng.index(40) + 1;
    const std::size_t m = rng.index(40) + 1;
    PbpMatrix mat = testutil::make_random_pbp(n, m, kLayouts[iter % 3], rng);
    const auto x = testutil::random_vector(m, rng);

    // P_row * (M_block * (P_col * x)) with the library primitives.
    std::vector<float> gathered(m);
    for (std::size_t l = 0; l < m; ++l) gathered[l] = x[mat.p_col()[l]];
    std::vector<std::vector<float>> slices(mat.pattern().blocks().size());
    for (std::size_t b = 0; b < slices.size(); ++b) {
      const Block& blk = mat.pattern().blocks()[b];
      slices[b].assign(gathered.begin() + blk.col_start,
                       gathered.begin() + blk.col_start + blk.cols);
    }
    const auto block_out = pbp::block_matvec(mat.packed(), slices);
    const Permutation inv_row = pbp::inverse(mat.p_row());
    std::vector<float> expected(n, 0.0f);
    for (std::size_t b = 0; b < block_out.size(); ++b) {
      const Block& blk = mat.pattern().blocks()[b];
      for (std::size_t r = 0; r < blk.rows; ++r) {
        expected[inv_row[blk.row_start + r]] += block_out[b][r];
      }
    }
    CHECK(mat.matvec(x) == expected);
  }
}

TEST_CASE("blocks sharing rows sum their contributions in storage order",
          "[pbp]") {
  // Two 2x2 blocks side by side over the same rows; rows 2..3 uncovered.
  BlockPattern pattern(4, 4, {Block{0, 0, 2, 2}, Block{0, 2, 2, 2}});
  std::vector<std::vector<float>> coeffs = {{1, 2, 3, 4}, {5, 6, 7, 8}};
  const std::vector<float> x = {1, 2, 3, 4};

  PbpMatrix plain(Permutation::identity(4),
                  pbp::pack(pattern, Layout::Brc, coeffs),
                  Permutation::identity(4));
  // Row 0: (1*1 + 2*2) + (5*3 + 6*4) = 5 + 39; row 1: 11 + 53. All integers,
  // so float arithmetic is exact.
  CHECK(plain.matvec(x) == std::vector<float>{44.0f, 64.0f, 0.0f, 0.0f});

  PbpMatrix routed(Permutation({2, 0, 1, 3}),
                   pbp::pack(pattern, Layout::Brc, coeffs),
                   Permutation::identity(4));
  // y[i] = u[p_row.idx[i]] with u = {44, 64, 0, 0}.
  CHECK(routed.matvec(x) == std::vector<float>{0.0f, 44.0f, 64.0f, 0.0f});

  pbp::Rng rng(907);
  for (const Layout layout : kLayouts) {
    PbpMatrix m(Permutation::random(4, rng),
                pbp::pack(pattern, layout, coeffs),
                Permutation::random(4, rng));
    const auto xs = testutil::random_vector(4, rng);
    CHECK(m.matvec(xs) == staged_dense_matvec(m.to_dense(), m.pattern(),
                                              m.p_row(), m.p_col(), xs));
  }
}

TEST_CASE("identity pivots and identity blocks pass covered rows through",
          "[pbp]") {
  BlockPattern pattern(4, 4, {Block{0, 0, 2, 2}});
  PbpMatrix m(Permutation::identity(4),
              pbp::pack(pattern, Layout::Brc, {{1, 0, 0, 1}}),
              Permutation::identity(4));
  CHECK(m.matvec(std::vector<float>{5, 6, 7, 8}) ==
        std::vector<float>{5.0f, 6.0f, 0.0f, 0.0f});
}

TEST_CASE("matvec is bit-identical across layouts", "[pbp]") {
  pbp::Rng rng(908);
  for (int iter = 0; iter < 100; ++iter) {
    const std::size_t n = rng.index(48) + 1;
    const std::size_t m = rng.index(48) + 1;
    auto pattern = testutil::random_pattern(n, m, rng, true);
    auto coeffs = random_coeffs(pattern, rng);
    auto p_row = Permutation::random(n, rng);
    auto p_col = Permutation::random(m, rng);
    const auto x = testutil::random_vector(m, rng);
    PbpMatrix brc(p_row, pbp::pack(pattern, Layout::Brc, coeffs), p_col);
    PbpMatrix bcr(p_row, pbp::pack(pattern, Layout::Bcr, coeffs), p_col);
    PbpMatrix cbr(p_row, pbp::pack(pattern, Layout::Cbr, coeffs), p_col);
    const auto y = brc.matvec(x);
    CHECK(bcr.matvec(x) == y);
    CHECK(cbr.matvec(x) == y);
  }
}

TEST_CASE("matvec is linear within 1e-6 relative", "[pbp]") {
  pbp::Rng rng(909);
  for (int iter = 0; iter < 50; ++iter) {
    const std::size_t n = rng.index(64) + 1;
    const std::size_t m = rng.index(64) + 1;
    PbpMatrix mat = testutil::make_random_pbp(n, m, kLayouts[iter % 3], rng);
    const auto a = testutil::random_vector(m, rng);
    const auto b = testutil::random_vector(m, rng);
    const float alpha = rng.normal_f();
    const float beta = rng.normal_f();
    std::vector<float> combo(m);
    for (std::size_t j = 0; j < m; ++j) combo[j] = alpha * a[j] + beta * b[j];
    const auto lhs = mat.matvec(combo);
    const auto ya = mat.matvec(a);
    const auto yb = mat.matvec(b);
    for (std::size_t i = 0; i < n; ++i) {
      const float rhs = alpha * ya[i] + beta * yb[i];
      CHECK_THAT(lhs[i], Catch::Matchers::WithinRel(rhs, 1e-6f) ||
                             Catch::Matchers::WithinAbs(rhs, 1e-6));
    }
  }
}

TEST_CASE("matvec_into reuses caller scratch", "[pbp]") {
  pbp::Rng rng(910);
  std::vector<float> scratch;
  for (int iter = 0; iter < 10; ++iter) {
    const std::size_t n = rng.index(32) + 1;
    const std::size_t m = rng.index(32) + 1;
    PbpMatrix mat = testutil::make_random_pbp(n, m, Layout::Brc, rng);
    const auto x = testutil::random_vector(m, rng);
    std::vector<float> y(n);
    mat.matvec_into(x, y, scratch);
    CHECK(y == mat.matvec(x));
  }
}

TEST_CASE("from_masked round-trips to_dense", "[pbp]") {
  pbp::Rng rng(911);
  for (int iter = 0; iter < 200; ++iter) {
    const Layout layout = kLayouts[iter % 3];
    const std::size_t n = rng.index(48) + 1;
    const std::size_t m = rng.index(48) + 1;
    PbpMatrix mat = testutil::make_random_pbp(n, m, layout, rng);
    PbpMatrix back = pbp::from_masked(mat.to_dense(), mat.p_row(),
                                      mat.p_col(), mat.pattern(), layout);
    CHECK(back == mat);

    // A different layout keeps the same logical coefficients.
    const Layout other = layout == Layout::Brc ? Layout::Bcr : Layout::Brc;
    PbpMatrix rehoused = pbp::from_masked(mat.to_dense(), mat.p_row(),
                                          mat.p_col(), mat.pattern(), other);
    CHECK(pbp::unpack(rehoused.packed()) == pbp::unpack(mat.packed()));
  }
}

TEST_CASE("from_masked of the zero matrix gives all-zero blocks", "[pbp]") {
  pbp::Rng rng(912);
  auto pattern = testutil::random_pattern(9, 7, rng, false);
  PbpMatrix m = pbp::from_masked(DenseMatrix(9, 7), Permutation::random(9, rng),
                                 Permutation::random(7, rng), pattern,
                                 Layout::Bcr);
  for (float v : m.packed().data()) CHECK(v == 0.0f);
}

TEST_CASE("from_masked rejects a nonzero outside the pattern", "[pbp]") {
  BlockPattern pattern(4, 4, {Block{0, 0, 2, 2}});
  DenseMatrix d(4, 4);
  d.at(0, 0) = 1.0f;
  d.at(3, 3) = 2.0f;  // outside the block under identity pivots
  CHECK_THROWS_AS(pbp::from_masked(d, Permutation::identity(4),
                                   Permutation::identity(4), pattern,
                                   Layout::Brc),
                  pbp::StrayNonzeroError);

  pbp::Rng rng(913);
  for (int iter = 0; iter < 20; ++iter) {
    PbpMatrix m = testutil::make_random_pbp(rng.index(24) + 4,
                                            rng.index(24) + 4, Layout::Brc,
                                            rng);
    if (m.fill_in() == 1.0) continue;
    DenseMatrix dense = m.to_dense();
    // Mark coverage by pushing all-ones coefficients through the same pivots.
    std::vector<std::vector<float>> ones(m.pattern().blocks().size());
    for (std::size_t b = 0; b < ones.size(); ++b) {
      ones[b].assign(m.pattern().blocks()[b].area(), 1.0f);
    }
    DenseMatrix cover = PbpMatrix(m.p_row(),
                                  pbp::pack(m.pattern(), Layout::Brc, ones),
                                  m.p_col())
                            .to_dense();
    std::size_t i = 0, j = 0;
    do {
      i = rng.index(dense.rows);
      j = rng.index(dense.cols);
    } while (cover.at(i, j) != 0.0f);
    dense.at(i, j) = 7.0f;
    CHECK_THROWS_AS(pbp::from_masked(dense, m.p_row(), m.p_col(), m.pattern(),
                                     Layout::Brc),
                    pbp::StrayNonzeroError);
  }
}

TEST_CASE("dimension mismatches are rejected", "[pbp]") {
  BlockPattern pattern(4, 4, {Block{0, 0, 2, 2}});
  auto packed = pbp::pack(pattern, Layout::Brc, {{1, 2, 3, 4}});
  CHECK_THROWS_AS(PbpMatrix(Permutation::identity(3), packed,
                            Permutation::identity(4)),
                  std::invalid_argument);
  CHECK_THROWS_AS(PbpMatrix(Permutation::identity(4), packed,
                            Permutation::identity(5)),
                  std::invalid_argument);

  PbpMatrix m(Permutation::identity(4), packed, Permutation::identity(4));
  CHECK_THROWS_AS(m.matvec(std::vector<float>(3)), std::invalid_argument);
  CHECK_THROWS_AS(pbp::from_masked(DenseMatrix(3, 4),
                                   Permutation::identity(3),
                                   Permutation::identity(4), pattern,
                                   Layout::Brc),
                  std::invalid_argument);
}

}  // namespace
