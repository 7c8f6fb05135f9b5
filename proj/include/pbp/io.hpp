#pragma once

// Binary interchange formats. All little-endian; every format is a 4-byte
// magic, one version byte, then the payload:
//
//   PBPP  permutation   n:u32, idx[n]:u32
//   PBPB  packed blocks layout:u8, n_rows:u32, n_cols:u32, block_count:u32,
//                       (row_start,col_start,rows,cols):u32 per block,
//                       data:f32[total block area]
//   PBPD  dense matrix  n_rows:u32, n_cols:u32, data:f32[rows*cols] row-major
//   PBPX  PBP matrix    embedded PBPP (p_row), PBPB, PBPP (p_col) records
//
// Serialization is bit-exact: floats travel as their IEEE-754 bit patterns.
// parse_* throws FormatError on any malformed input; standalone readers
// reject trailing bytes. File writes go through a temp file and rename, so a
// crash never leaves a partial artifact at the target path.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pbp/blocksparse.hpp"
#include "pbp/matrix.hpp"
#include "pbp/pbp_matrix.hpp"
#include "pbp/permutation.hpp"

namespace pbp::io {

constexpr std::uint8_t kFormatVersion = 1;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void append_u8(std::vector<std::uint8_t>& out, std::uint8_t v) {
  out.push_back(v);
}

inline void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

inline void append_f32(std::vector<std::uint8_t>& out, float v) {
  append_u32(out, std::bit_cast<std::uint32_t>(v));
}

inline void append_magic(std::vector<std::uint8_t>& out, const char* magic) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>(magic[i]));
  }
  append_u8(out, kFormatVersion);
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> buf) : buf_(buf) {}

  std::uint8_t u8() {
    require(1, "byte");
    return buf_[pos_++];
  }

  std::uint32_t u32() {
    require(4, "u32");
    std::uint32_t v = static_cast<std::uint32_t>(buf_[pos_]) |
                      static_cast<std::uint32_t>(buf_[pos_ + 1]) << 8 |
                      static_cast<std::uint32_t>(buf_[pos_ + 2]) << 16 |
                      static_cast<std::uint32_t>(buf_[pos_ + 3]) << 24;
    pos_ += 4;
    return v;
  }

  float f32() { return std::bit_cast<float>(u32()); }

  /// Consumes the 4-byte magic and the version byte.
  void magic(const char* expected) {
    require(5, "magic");
    for (int i = 0; i < 4; ++i) {
      if (buf_[pos_ + i] != static_cast<std::uint8_t>(expected[i])) {
        throw FormatError(std::string("bad magic, expected ") + expected);
      }
    }
    pos_ += 4;
    const std::uint8_t version = buf_[pos_++];
    if (version != kFormatVersion) {
      throw FormatError(std::string(expected) + ": unsupported version " +
                        std::to_string(version));
    }
  }

  std::size_t remaining() const { return buf_.size() - pos_; }

  void expect_end(const char* what) const {
    if (remaining() != 0) {
      throw FormatError(std::string(what) + ": " +
                        std::to_string(remaining()) + " trailing bytes");
    }
  }

 private:
  void require(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw FormatError(std::string("truncated input reading ") + what);
    }
  }

  std::span<const std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

// ---- PBPP ----

inline void serialize_permutation(const Permutation& p,
                                  std::vector<std::uint8_t>& out) {
  append_magic(out, "PBPP");
  append_u32(out, static_cast<std::uint32_t>(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i) {
    append_u32(out, static_cast<std::uint32_t>(p[i]));
  }
}

inline std::vector<std::uint8_t> serialize_permutation(const Permutation& p) {
  std::vector<std::uint8_t> out;
  serialize_permutation(p, out);
  return out;
}

inline Permutation parse_permutation(ByteReader& r) {
  r.magic("PBPP");
  const std::uint32_t n = r.u32();
  if (r.remaining() / 4 < n) {
    throw FormatError("PBPP: length " + std::to_string(n) +
                      " exceeds available data");
  }
  std::vector<std::uint32_t> idx(n);
  for (std::uint32_t i = 0; i < n; ++i) idx[i] = r.u32();
  try {
    return Permutation(std::move(idx));
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("PBPP: ") + e.what());
  }
}

inline Permutation parse_permutation(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Permutation p = parse_permutation(r);
  r.expect_end("PBPP");
  return p;
}

// ---- PBPB ----

inline void serialize_packed(const PackedBlocks& packed,
                             std::vector<std::uint8_t>& out) {
  append_magic(out, "PBPB");
  append_u8(out, static_cast<std::uint8_t>(packed.layout()));
  const BlockPattern& pattern = packed.pattern();
  append_u32(out, static_cast<std::uint32_t>(pattern.n_rows()));
  append_u32(out, static_cast<std::uint32_t>(pattern.n_cols()));
  append_u32(out, static_cast<std::uint32_t>(pattern.blocks().size()));
  for (const Block& blk : pattern.blocks()) {
    append_u32(out, blk.row_start);
    append_u32(out, blk.col_start);
    append_u32(out, blk.rows);
    append_u32(out, blk.cols);
  }
  for (float v : packed.data()) append_f32(out, v);
}

inline std::vector<std::uint8_t> serialize_packed(const PackedBlocks& packed) {
  std::vector<std::uint8_t> out;
  serialize_packed(packed, out);
  return out;
}

inline PackedBlocks parse_packed(ByteReader& r) {
  r.magic("PBPB");
  const std::uint8_t tag = r.u8();
  if (tag > 2) {
    throw FormatError("PBPB: unknown layout tag " + std::to_string(tag));
  }
  const Layout layout = static_cast<Layout>(tag);
  const std::uint32_t n_rows = r.u32();
  const std::uint32_t n_cols = r.u32();
  const std::uint32_t count = r.u32();
  if (r.remaining() / 16 < count) {
    throw FormatError("PBPB: block count " + std::to_string(count) +
                      " exceeds available data");
  }
  std::vector<Block> blocks(count);
  std::uint64_t area = 0;
  for (std::uint32_t b = 0; b < count; ++b) {
    blocks[b].row_start = r.u32();
    blocks[b].col_start = r.u32();
    blocks[b].rows = r.u32();
    blocks[b].cols = r.u32();
    area += std::uint64_t{blocks[b].rows} * blocks[b].cols;
  }
  if (r.remaining() / 4 < area) {
    throw FormatError("PBPB: data shorter than total block area");
  }
  std::vector<float> data(area);
  for (std::uint64_t i = 0; i < area; ++i) data[i] = r.f32();
  try {
    return PackedBlocks(BlockPattern(n_rows, n_cols, std::move(blocks)),
                        layout, std::move(data));
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("PBPB: ") + e.what());
  }
}

inline PackedBlocks parse_packed(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  PackedBlocks packed = parse_packed(r);
  r.expect_end("PBPB");
  return packed;
}

// ---- PBPD ----

inline void serialize_dense(const DenseMatrix& m,
                            std::vector<std::uint8_t>& out) {
  append_magic(out, "PBPD");
  append_u32(out, static_cast<std::uint32_t>(m.rows));
  append_u32(out, static_cast<std::uint32_t>(m.cols));
  for (float v : m.data) append_f32(out, v);
}

inline std::vector<std::uint8_t> serialize_dense(const DenseMatrix& m) {
  std::vector<std::uint8_t> out;
  serialize_dense(m, out);
  return out;
}

inline DenseMatrix parse_dense(ByteReader& r) {
  r.magic("PBPD");
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  const std::uint64_t total = std::uint64_t{rows} * cols;
  if (r.remaining() / 4 < total) {
    throw FormatError("PBPD: data shorter than rows*cols");
  }
  DenseMatrix m(rows, cols);
  for (std::uint64_t i = 0; i < total; ++i) m.data[i] = r.f32();
  return m;
}

inline DenseMatrix parse_dense(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  DenseMatrix m = parse_dense(r);
  r.expect_end("PBPD");
  return m;
}

// ---- PBPX ----

inline void serialize_pbp(const PbpMatrix& m, std::vector<std::uint8_t>& out) {
  append_magic(out, "PBPX");
  serialize_permutation(m.p_row(), out);
  serialize_packed(m.packed(), out);
  serialize_permutation(m.p_col(), out);
}

inline std::vector<std::uint8_t> serialize_pbp(const PbpMatrix& m) {
  std::vector<std::uint8_t> out;
  serialize_pbp(m, out);
  return out;
}

inline PbpMatrix parse_pbp(ByteReader& r) {
  r.magic("PBPX");
  Permutation p_row = parse_permutation(r);
  PackedBlocks packed = parse_packed(r);
  Permutation p_col = parse_permutation(r);
  try {
    return PbpMatrix(std::move(p_row), std::move(packed), std::move(p_col));
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("PBPX: ") + e.what());
  }
}

inline PbpMatrix parse_pbp(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  PbpMatrix m = parse_pbp(r);
  r.expect_end("PBPX");
  return m;
}

// ---- files ----

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string() +
                             " for reading");
  }
  std::vector<std::uint8_t> bytes(
      (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw std::runtime_error("read failed on " + path.string());
  }
  return bytes;
}

/// Writes to a sibling temp file, then renames over the target.
inline void write_file_atomic(const std::filesystem::path& path,
                              std::span<const std::uint8_t> bytes) {
  const std::filesystem::path tmp =
      path.string() + ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot open " + tmp.string() +
                               " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw std::runtime_error("write failed on " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

inline void write_file_atomic(const std::filesystem::path& path,
                              std::string_view text) {
  write_file_atomic(
      path, std::span<const std::uint8_t>(
                reinterpret_cast<const std::uint8_t*>(text.data()),
                text.size()));
}

inline void write_permutation(const std::filesystem::path& path,
                              const Permutation& p) {
  write_file_atomic(path, serialize_permutation(p));
}

inline Permutation read_permutation(const std::filesystem::path& path) {
  return parse_permutation(std::span<const std::uint8_t>(read_file(path)));
}

inline void write_packed(const std::filesystem::path& path,
                         const PackedBlocks& packed) {
  write_file_atomic(path, serialize_packed(packed));
}

inline PackedBlocks read_packed(const std::filesystem::path& path) {
  return parse_packed(std::span<const std::uint8_t>(read_file(path)));
}

inline void write_dense(const std::filesystem::path& path,
                        const DenseMatrix& m) {
  write_file_atomic(path, serialize_dense(m));
}

inline DenseMatrix read_dense(const std::filesystem::path& path) {
  return parse_dense(std::span<const std::uint8_t>(read_file(path)));
}

inline void write_pbp(const std::filesystem::path& path, const PbpMatrix& m) {
  write_file_atomic(path, serialize_pbp(m));
}

inline PbpMatrix read_pbp(const std::filesystem::path& path) {
  return parse_pbp(std::span<const std::uint8_t>(read_file(path)));
}

}  // namespace pbp::io
