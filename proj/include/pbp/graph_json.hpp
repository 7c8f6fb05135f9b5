#pragma once

// JSON graph descriptions. A graph file is an object with a "nodes" array
// and an optional "relabel" permutation:
//
//   {"nodes": [{"kind": "pbp", "matrix": "layer0.pbpx", "bias": [0.5, ...]},
//              {"kind": "relu"},
//              {"kind": "softmax"},
//              {"kind": "perm", "idx": [2, 0, 1]},
//              {"kind": "dense", "matrix": "head.pbpd", "bias": [...]}],
//    "relabel": [1, 0, 2]}
//
// Matrix payloads live in sibling binary files; relative paths resolve
// against the JSON file's directory. save_graph writes one binary file per
// matrix node, named node_<index>.pbpx or node_<index>.pbpd.
//
// A relabel record serializes standalone as {"perm": [...]}.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pbp/graph.hpp"
#include "pbp/io.hpp"

namespace pbp::io {

namespace detail {

inline nlohmann::json parse_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw FormatError("invalid JSON in " + path.string());
  return j;
}

inline std::vector<float> parse_bias(const nlohmann::json& node) {
  if (!node.contains("bias") || !node["bias"].is_array()) {
    throw FormatError("layer node missing \"bias\" array");
  }
  std::vector<float> bias;
  bias.reserve(node["bias"].size());
  for (const auto& v : node["bias"]) {
    if (!v.is_number()) throw FormatError("bias entries must be numbers");
    bias.push_back(v.get<float>());
  }
  return bias;
}

inline Permutation parse_perm_array(const nlohmann::json& arr,
                                    const std::string& what) {
  if (!arr.is_array()) throw FormatError(what + " must be an array");
  std::vector<std::uint32_t> idx;
  idx.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number_unsigned()) {
      throw FormatError(what + " entries must be nonnegative integers");
    }
    idx.push_back(v.get<std::uint32_t>());
  }
  try {
    return Permutation(std::move(idx));
  } catch (const std::invalid_argument& e) {
    throw FormatError(what + ": " + e.what());
  }
}

inline std::filesystem::path resolve(const std::filesystem::path& base_dir,
                                     const std::string& rel) {
  std::filesystem::path p(rel);
  return p.is_absolute() ? p : base_dir / p;
}

inline std::string matrix_path(const nlohmann::json& node) {
  if (!node.contains("matrix") || !node["matrix"].is_string()) {
    throw FormatError("layer node missing \"matrix\" path");
  }
  return node["matrix"].get<std::string>();
}

}  // namespace detail

inline LayerGraph load_graph(const std::filesystem::path& json_path) {
  const nlohmann::json j = detail::parse_json_file(json_path);
  if (!j.is_object() || !j.contains("nodes") || !j["nodes"].is_array()) {
    throw FormatError("graph JSON must be an object with a \"nodes\" array");
  }
  const std::filesystem::path dir = json_path.parent_path();
  LayerGraph g;
  for (const auto& node : j["nodes"]) {
    if (!node.is_object() || !node.contains("kind") ||
        !node["kind"].is_string()) {
      throw FormatError("graph node missing \"kind\"");
    }
    const std::string kind = node["kind"].get<std::string>();
    if (kind == "pbp") {
      std::vector<float> bias = detail::parse_bias(node);
      PbpMatrix m =
          read_pbp(detail::resolve(dir, detail::matrix_path(node)).string());
      g.nodes.push_back(PbpLayer{std::move(m), std::move(bias)});
    } else if (kind == "relu") {
      g.nodes.push_back(Pointwise{PointwiseKind::Relu});
    } else if (kind == "softmax") {
      g.nodes.push_back(SoftmaxNode{});
    } else if (kind == "perm") {
      if (!node.contains("idx")) {
        throw FormatError("perm node missing \"idx\"");
      }
      g.nodes.push_back(
          ExplicitPerm{detail::parse_perm_array(node["idx"], "perm node")});
    } else if (kind == "dense") {
      std::vector<float> bias = detail::parse_bias(node);
      DenseMatrix m =
          read_dense(detail::resolve(dir, detail::matrix_path(node)).string());
      g.nodes.push_back(DenseLayer{std::move(m), std::move(bias)});
    } else {
      throw FormatError("unknown node kind \"" + kind + "\"");
    }
  }
  if (j.contains("relabel")) {
    g.relabel = detail::parse_perm_array(j["relabel"], "relabel");
  }
  return g;
}

/// Writes the JSON description plus one binary file per matrix node
/// (node_<index>.pbpx / node_<index>.pbpd) in the JSON file's directory.
inline void save_graph(const LayerGraph& g,
                       const std::filesystem::path& json_path) {
  const std::filesystem::path dir = json_path.parent_path();
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t k = 0; k < g.nodes.size(); ++k) {
    nlohmann::json node;
    if (const auto* layer = std::get_if<PbpLayer>(&g.nodes[k])) {
      const std::string name = "node_" + std::to_string(k) + ".pbpx";
      write_pbp((dir / name).string(), layer->matrix);
      node["kind"] = "pbp";
      node["matrix"] = name;
      node["bias"] = layer->bias;
    } else if (const auto* pw = std::get_if<Pointwise>(&g.nodes[k])) {
      switch (pw->kind) {
        case PointwiseKind::Relu:
          node["kind"] = "relu";
          break;
      }
    } else if (std::holds_alternative<SoftmaxNode>(g.nodes[k])) {
      node["kind"] = "softmax";
    } else if (const auto* ep = std::get_if<ExplicitPerm>(&g.nodes[k])) {
      node["kind"] = "perm";
      node["idx"] = ep->perm.idx();
    } else if (const auto* dense = std::get_if<DenseLayer>(&g.nodes[k])) {
      const std::string name = "node_" + std::to_string(k) + ".pbpd";
      write_dense((dir / name).string(), dense->matrix);
      node["kind"] = "dense";
      node["matrix"] = name;
      node["bias"] = dense->bias;
    }
    nodes.push_back(std::move(node));
  }
  nlohmann::json j;
  j["nodes"] = std::move(nodes);
  if (g.relabel) j["relabel"] = g.relabel->idx();
  write_file_atomic(json_path.string(), j.dump(2) + "\n");
}

inline void save_relabel(const std::filesystem::path& path,
                         const RelabelRecord& record) {
  nlohmann::json j;
  j["perm"] = record.perm.idx();
  write_file_atomic(path.string(), j.dump(2) + "\n");
}

inline RelabelRecord load_relabel(const std::filesystem::path& path) {
  const nlohmann::json j = detail::parse_json_file(path);
  if (!j.is_object() || !j.contains("perm")) {
    throw FormatError("relabel JSON must be an object with \"perm\"");
  }
  return RelabelRecord{detail::parse_perm_array(j["perm"], "relabel")};
}

}  // namespace pbp::io
