#pragma once

// Sequential layer graphs and the permutation rewrites over them.
//
// A graph is an ordered node list: PBP layers (matvec + bias, bias indexed
// in the layer's output coordinates), pointwise activations, softmax,
// explicit permutations, and dense layers. An optional relabel permutation
// applies at the graph output: original = pbp::apply(relabel, produced).
//
// fuse_cross_layer: for PbpLayer(B) -> Pointwise -> PbpLayer(A), pointwise
// ops commute with permutations, so B's row permutation moves into A's
// column side: A.p_col becomes compose(A.p_col, B.p_row), B's row
// permutation becomes identity, and B's bias is re-indexed into block order
// (apply(inverse(B.p_row), bias)). Index maps change, but every float op and
// its operands are unchanged, so execution is bit-exact.
//
// eliminate_output_perm: the final PBP layer's row permutation (looking
// through a trailing softmax, which also commutes) only relabels output
// coordinates; it is dropped into the relabel record instead of executed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pbp/matrix.hpp"
#include "pbp/pbp_matrix.hpp"
#include "pbp/permutation.hpp"

namespace pbp {

enum class PointwiseKind { Relu };

struct PbpLayer {
  PbpMatrix matrix;
  std::vector<float> bias;  // length n_rows, output coordinates
  bool operator==(const PbpLayer&) const = default;
};

struct Pointwise {
  PointwiseKind kind = PointwiseKind::Relu;
  bool operator==(const Pointwise&) const = default;
};

struct SoftmaxNode {
  bool operator==(const SoftmaxNode&) const = default;
};

struct ExplicitPerm {
  Permutation perm;
  bool operator==(const ExplicitPerm&) const = default;
};

struct DenseLayer {
  DenseMatrix matrix;
  std::vector<float> bias;  // length rows
  bool operator==(const DenseLayer&) const = default;
};

using Node =
    std::variant<PbpLayer, Pointwise, SoftmaxNode, ExplicitPerm, DenseLayer>;

struct LayerGraph {
  std::vector<Node> nodes;
  std::optional<Permutation> relabel;  // output relabel; absent = identity
  bool operator==(const LayerGraph&) const = default;
};

/// Maps produced output coordinates to original network coordinates:
/// original = pbp::apply(perm, produced).
struct RelabelRecord {
  Permutation perm;
  bool operator==(const RelabelRecord&) const = default;
};

class NoEliminableOutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Max-subtracted exp-normalize; exponentials and the normalizing sum are
/// double internally, output rounds to float.
inline std::vector<float> softmax(std::span<const float> x) {
  if (x.empty()) return {};
  float mx = x[0];
  for (float v : x) mx = std::max(mx, v);
  std::vector<double> e(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    e[i] = std::exp(static_cast<double>(x[i]) - static_cast<double>(mx));
    sum += e[i];
  }
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = static_cast<float>(e[i] / sum);
  }
  return out;
}

struct ExecuteResult {
  std::vector<float> output;
  RelabelRecord relabel;
};

inline ExecuteResult execute(const LayerGraph& g, std::vector<float> a) {
  auto fail = [](std::size_t node, const std::string& what) -> void {
    throw std::invalid_argument("node " + std::to_string(node) + ": " + what);
  };
  std::vector<float> scratch;
  for (std::size_t k = 0; k < g.nodes.size(); ++k) {
    const Node& node = g.nodes[k];
    if (const auto* layer = std::get_if<PbpLayer>(&node)) {
      if (a.size() != layer->matrix.n_cols()) {
        fail(k, "pbp layer expects input length " +
                    std::to_string(layer->matrix.n_cols()) + ", got " +
                    std::to_string(a.size()));
      }
      if (layer->bias.size() != layer->matrix.n_rows()) {
        fail(k, "pbp layer bias length " + std::to_string(layer->bias.size()) +
                    " != output length " +
                    std::to_string(layer->matrix.n_rows()));
      }
      std::vector<float> out(layer->matrix.n_rows());
      layer->matrix.matvec_into(a, out, scratch);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += layer->bias[i];
      a = std::move(out);
    } else if (const auto* pw = std::get_if<Pointwise>(&node)) {
      switch (pw->kind) {
        case PointwiseKind::Relu:
          for (float& v : a) v = std::max(0.0f, v);
          break;
      }
    } else if (std::get_if<SoftmaxNode>(&node)) {
      a = softmax(a);
    } else if (const auto* ep = std::get_if<ExplicitPerm>(&node)) {
      if (a.size() != ep->perm.size()) {
        fail(k, "permutation of length " + std::to_string(ep->perm.size()) +
                    " applied to input of length " + std::to_string(a.size()));
      }
      a = pbp::apply(ep->perm, a);
    } else if (const auto* dense = std::get_if<DenseLayer>(&node)) {
      if (a.size() != dense->matrix.cols) {
        fail(k, "dense layer expects input length " +
                    std::to_string(dense->matrix.cols) + ", got " +
                    std::to_string(a.size()));
      }
      if (dense->bias.size() != dense->matrix.rows) {
        fail(k, "dense layer bias length mismatch");
      }
      std::vector<float> out = dense_matvec(dense->matrix, a);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += dense->bias[i];
      a = std::move(out);
    }
  }
  if (g.relabel && g.relabel->size() != a.size()) {
    throw std::invalid_argument("relabel record length " +
                                std::to_string(g.relabel->size()) +
                                " != output length " +
                                std::to_string(a.size()));
  }
  RelabelRecord record{g.relabel ? *g.relabel
                                 : Permutation::identity(
                                       std::max<std::size_t>(a.size(), 1))};
  return ExecuteResult{std::move(a), std::move(record)};
}

/// Moves row permutations forward across pointwise ops until fixpoint.
inline LayerGraph fuse_cross_layer(LayerGraph g) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t k = 0; k + 2 < g.nodes.size(); ++k) {
      auto* b = std::get_if<PbpLayer>(&g.nodes[k]);
      if (!b || !std::holds_alternative<Pointwise>(g.nodes[k + 1])) continue;
      auto* a = std::get_if<PbpLayer>(&g.nodes[k + 2]);
      if (!a || b->matrix.p_row().is_identity()) continue;

      const Permutation& b_row = b->matrix.p_row();
      PbpMatrix fused_a(a->matrix.p_row(), a->matrix.packed(),
                        compose(a->matrix.p_col(), b_row));
      std::vector<float> bias_b = pbp::apply(inverse(b_row), b->bias);
      PbpMatrix fused_b(Permutation::identity(b_row.size()),
                        b->matrix.packed(), b->matrix.p_col());
      a->matrix = std::move(fused_a);
      b->matrix = std::move(fused_b);
      b->bias = std::move(bias_b);
      changed = true;
    }
  }
  return g;
}

/// Drops the final PBP layer's row permutation (looking through a trailing
/// softmax) into the relabel record.
inline std::pair<LayerGraph, RelabelRecord> eliminate_output_perm(
    LayerGraph g) {
  std::size_t target = g.nodes.size();
  if (!g.nodes.empty()) {
    if (std::holds_alternative<PbpLayer>(g.nodes.back())) {
      target = g.nodes.size() - 1;
    } else if (std::holds_alternative<SoftmaxNode>(g.nodes.back()) &&
               g.nodes.size() >= 2 &&
               std::holds_alternative<PbpLayer>(g.nodes[g.nodes.size() - 2])) {
      target = g.nodes.size() - 2;
    }
  }
  if (target == g.nodes.size()) {
    throw NoEliminableOutputError(
        "graph does not end in a PBP layer (optionally followed by softmax)");
  }
  auto& layer = std::get<PbpLayer>(g.nodes[target]);
  const Permutation dropped = layer.matrix.p_row();
  RelabelRecord record{g.relabel ? compose(*g.relabel, dropped) : dropped};
  layer.bias = pbp::apply(inverse(dropped), layer.bias);
  layer.matrix = PbpMatrix(Permutation::identity(dropped.size()),
                           layer.matrix.packed(), layer.matrix.p_col());
  // An identity record on a record-free graph stays implicit, so dropping an
  // identity row permutation leaves the graph bitwise unchanged.
  if (g.relabel || !record.perm.is_identity()) g.relabel = record.perm;
  return {std::move(g), std::move(record)};
}

struct FusionFlag {
  std::size_t b_node = 0;  // earlier layer (its row permutation)
  std::size_t a_node = 0;  // later layer (its column permutation)
  bool is_identity = false;
  bool operator==(const FusionFlag&) const = default;
};

/// For each PbpLayer -> Pointwise -> PbpLayer pair, reports whether fusing
/// would produce an identity column permutation, i.e. compose(A.p_col,
/// B.p_row) is identity.
inline std::vector<FusionFlag> check_identity_fusion(const LayerGraph& g) {
  std::vector<FusionFlag> flags;
  for (std::size_t k = 0; k + 2 < g.nodes.size(); ++k) {
    const auto* b = std::get_if<PbpLayer>(&g.nodes[k]);
    if (!b || !std::holds_alternative<Pointwise>(g.nodes[k + 1])) continue;
    const auto* a = std::get_if<PbpLayer>(&g.nodes[k + 2]);
    if (!a) continue;
    flags.push_back(FusionFlag{
        k, k + 2,
        compose(a->matrix.p_col(), b->matrix.p_row()).is_identity()});
  }
  return flags;
}

}  // namespace pbp
