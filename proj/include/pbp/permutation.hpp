#pragma once

// Permutations as gather index arrays: apply(p, v)[i] = v[p[i]]. Viewed as a
// matrix, P[i][p[i]] = 1 and apply(p, v) == P * v. A scatter store through an
// index array q (out[q[k]] = in[k]) is the same map as apply(inverse(q), in).

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbp/rng.hpp"

namespace pbp {

class Permutation {
 public:
  /// Validates that idx is a bijection on [0, n); n >= 1.
  explicit Permutation(std::vector<std::uint32_t> idx) : idx_(std::move(idx)) {
    if (idx_.empty()) {
      throw std::invalid_argument("permutation: length must be >= 1");
    }
    std::vector<bool> seen(idx_.size(), false);
    for (std::uint32_t v : idx_) {
      if (v >= idx_.size() || seen[v]) {
        throw std::invalid_argument(
            "permutation: index array is not a bijection on [0, " +
            std::to_string(idx_.size()) + ")");
      }
      seen[v] = true;
    }
  }

  static Permutation identity(std::size_t n) {
    if (n == 0) throw std::invalid_argument("permutation: length must be >= 1");
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    return Permutation(std::move(idx));
  }

  static Permutation random(std::size_t n, Rng& rng) {
    if (n == 0) throw std::invalid_argument("permutation: length must be >= 1");
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    rng.shuffle(idx);
    return Permutation(std::move(idx));
  }

  std::size_t size() const { return idx_.size(); }
  const std::vector<std::uint32_t>& idx() const { return idx_; }
  std::uint32_t operator[](std::size_t i) const { return idx_[i]; }

  bool is_identity() const {
    for (std::size_t i = 0; i < idx_.size(); ++i) {
      if (idx_[i] != i) return false;
    }
    return true;
  }

  bool operator==(const Permutation&) const = default;

 private:
  std::vector<std::uint32_t> idx_;
};

/// Gather: result[i] = v[p[i]].
template <class T>
std::vector<T> apply(const Permutation& p, const std::vector<T>& v) {
  if (v.size() != p.size()) {
    throw std::invalid_argument("apply: length mismatch");
  }
  std::vector<T> result(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) result[i] = v[p[i]];
  return result;
}

/// result[i] = q[p[i]], so apply(compose(p, q), v) == apply(p, apply(q, v)).
inline Permutation compose(const Permutation& p, const Permutation& q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("compose: length mismatch");
  }
  std::vector<std::uint32_t> idx(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) idx[i] = q[p[i]];
  return Permutation(std::move(idx));
}

/// result[p[i]] = i; converts between gather and scatter views.
inline Permutation inverse(const Permutation& p) {
  std::vector<std::uint32_t> idx(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    idx[p[i]] = static_cast<std::uint32_t>(i);
  }
  return Permutation(std::move(idx));
}

}  // namespace pbp
