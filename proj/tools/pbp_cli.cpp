// Command-line front end: generate, prune, repack, execute, rewrite,
// model, and benchmark PBP artifacts. Every command validates its inputs
// before writing anything; all file writes are atomic.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pbp/bench.hpp"
#include "pbp/blocksparse.hpp"
#include "pbp/coalescing.hpp"
#include "pbp/graph.hpp"
#include "pbp/graph_json.hpp"
#include "pbp/io.hpp"
#include "pbp/matrix.hpp"
#include "pbp/pbp_matrix.hpp"
#include "pbp/permutation.hpp"
#include "pbp/prune.hpp"
#include "pbp/rng.hpp"

namespace {

pbp::Layout layout_of(const std::string& name) {
  return pbp::layout_from_name(name);
}

std::vector<float> load_vector_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_array()) {
    throw std::runtime_error("input vector file " + path.string() +
                             " must be a JSON array of numbers");
  }
  std::vector<float> v;
  v.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_number()) {
      throw std::runtime_error("input vector entries must be numbers");
    }
    v.push_back(e.get<float>());
  }
  return v;
}

void emit_json(const nlohmann::json& j, const std::string& out_path) {
  const std::string text = j.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    pbp::io::write_file_atomic(out_path, text);
  }
}

std::size_t env_threads() {
  const char* raw = std::getenv("PBP_THREADS");
  if (raw == nullptr || *raw == '\0') return 0;
  char* end = nullptr;
  const unsigned long v = std::strtoul(raw, &end, 10);
  if (end == raw || *end != '\0') {
    throw std::runtime_error("PBP_THREADS must be a nonnegative integer");
  }
  return static_cast<std::size_t>(v);
}

int do_gen(std::size_t rows, std::size_t cols, std::uint64_t seed,
           const std::string& out) {
  pbp::Rng rng(seed);
  pbp::io::write_dense(out, pbp::random_dense(rows, cols, rng));
  return 0;
}

int do_prune(const std::string& in, std::size_t levels, std::uint64_t seed,
             const std::string& mode, const std::string& layout_name,
             std::size_t budget, bool identity_pivots, bool allow_identity,
             const std::string& out, const std::string& report_path) {
  const pbp::Layout layout = layout_of(layout_name);
  const pbp::DenseMatrix w = pbp::io::read_dense(in);

  pbp::PruneReport report;
  std::optional<pbp::PbpMatrix> matrix;
  if (mode == "feedback") {
    if (identity_pivots) {
      throw std::runtime_error(
          "--identity-pivots only applies to --mode feedforward");
    }
    pbp::BisectResult result =
        pbp::recursive_bisect(w, levels, seed, budget, layout);
    report = result.report;
    matrix.emplace(std::move(result.matrix));
  } else {
    // Feed-forward: pattern and pivots are fixed up front, no search. Random
    // pivots spread the surviving cells; identity pivots degenerate to plain
    // diagonal-band pruning and need an explicit override.
    if (identity_pivots && !allow_identity) {
      throw std::runtime_error(
          "identity pivots defeat the point of permuted block pruning; pass "
          "--allow-identity to force them");
    }
    pbp::BisectionTree tree(w.rows, w.cols, levels);
    pbp::Rng rng(pbp::derive_seed(seed, 0));
    const pbp::Permutation p_row =
        identity_pivots ? pbp::Permutation::identity(w.rows)
                        : pbp::Permutation::random(w.rows, rng);
    const pbp::Permutation p_col =
        identity_pivots ? pbp::Permutation::identity(w.cols)
                        : pbp::Permutation::random(w.cols, rng);
    const pbp::Mask mask =
        pbp::feed_forward_mask(w.rows, w.cols, tree.pattern(), p_row, p_col);
    const pbp::DenseMatrix masked = pbp::apply_mask(w, mask);
    matrix.emplace(
        pbp::from_masked(masked, p_row, p_col, tree.pattern(), layout));
    const double kept = pbp::total_abs_mass(masked);
    const double total = pbp::total_abs_mass(w);
    report.objective_initial = kept;
    report.objective_final = kept;
    report.retained_mass_fraction = total > 0.0 ? kept / total : 1.0;
    report.accepted_moves = 0;
  }

  nlohmann::json j;
  j["mode"] = mode;
  j["levels"] = levels;
  j["fill_in"] = matrix->fill_in();
  j["retained_mass_fraction"] = report.retained_mass_fraction;
  j["objective_initial"] = report.objective_initial;
  j["objective_final"] = report.objective_final;
  j["accepted_moves"] = report.accepted_moves;

  pbp::io::write_pbp(out, *matrix);
  if (!report_path.empty()) emit_json(j, report_path);
  emit_json(j, "");
  return 0;
}

int do_pack(const std::string& in, const std::string& layout_name,
            const std::string& out) {
  const pbp::Layout layout = layout_of(layout_name);
  const pbp::PbpMatrix m = pbp::io::read_pbp(in);
  const auto coeffs = pbp::unpack(m.packed());
  pbp::PbpMatrix repacked(m.p_row(), pbp::pack(m.pattern(), layout, coeffs),
                          m.p_col());
  pbp::io::write_pbp(out, repacked);
  return 0;
}

int do_run(const std::string& graph_path, const std::string& input_path,
           const std::string& out) {
  const pbp::LayerGraph g = pbp::io::load_graph(graph_path);
  const std::vector<float> x = load_vector_json(input_path);
  const pbp::ExecuteResult result = pbp::execute(g, x);
  nlohmann::json j;
  j["output"] = result.output;
  j["relabel"] = result.relabel.perm.idx();
  if (!out.empty()) emit_json(j, out);
  emit_json(j, "");
  return 0;
}

int do_fuse(const std::string& graph_path, const std::string& out,
            bool eliminate, const std::string& relabel_path) {
  const pbp::LayerGraph g = pbp::io::load_graph(graph_path);
  const auto flags = pbp::check_identity_fusion(g);
  pbp::LayerGraph optimized = pbp::fuse_cross_layer(g);
  std::optional<pbp::RelabelRecord> record;
  if (eliminate) {
    auto [graph, rec] = pbp::eliminate_output_perm(std::move(optimized));
    optimized = std::move(graph);
    record = std::move(rec);
  }

  pbp::io::save_graph(optimized, out);
  if (record) {
    const std::string path =
        relabel_path.empty() ? out + ".relabel.json" : relabel_path;
    pbp::io::save_relabel(path, *record);
  }

  nlohmann::json j;
  j["nodes"] = optimized.nodes.size();
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& f : flags) {
    pairs.push_back({{"b_node", f.b_node},
                     {"a_node", f.a_node},
                     {"identity", f.is_identity}});
  }
  j["identity_fusion"] = std::move(pairs);
  j["eliminated_output_perm"] = eliminate;
  emit_json(j, "");
  return 0;
}

struct ReferenceRow {
  const char* kernel;
  double load;
  double store;
};

// Reference measurements from a Maxwell-class GPU (nvprof): load/store
// efficiency percentages for a dense gemv, a CSR matvec, and the three
// block layouts.
constexpr ReferenceRow kReference[] = {
    {"gemv2N", 100.0, 100.0}, {"csrMv", 99.32, 12.5}, {"brc", 12.52, 100.0},
    {"bcr", 98.1, 100.0},     {"cbr", 98.7, 100.0},
};

int do_simulate(const std::string& layout_name, std::size_t width,
                std::size_t blocks, std::size_t warp_size,
                std::size_t transaction_bytes, std::size_t word_bytes,
                const std::string& out) {
  const pbp::Layout layout = layout_of(layout_name);
  const pbp::sim::WarpModel model{warp_size, transaction_bytes, word_bytes};
  const auto pattern =
      pbp::diagonal_pattern(blocks * width, blocks * width, blocks);
  const pbp::sim::EfficiencyReport r =
      pbp::sim::load_efficiency(layout, pattern, model);
  const double csr_store =
      pbp::sim::store_efficiency(pbp::sim::StoreKind::CsrScatter, width,
                                 model);

  nlohmann::json j;
  j["layout"] = layout_name;
  j["model"] = {{"warp_size", warp_size},
                {"transaction_bytes", transaction_bytes},
                {"word_bytes", word_bytes}};
  j["pattern"] = {{"blocks", blocks}, {"rows", width}, {"cols", width}};
  j["load_efficiency"] = r.load_efficiency;
  j["store_efficiency"] = r.store_efficiency;
  j["transactions"] = r.transactions;
  j["csr_scatter_store_efficiency"] = csr_store;
  nlohmann::json ref = nlohmann::json::array();
  for (const auto& row : kReference) {
    ref.push_back({{"kernel", row.kernel},
                   {"load_efficiency", row.load},
                   {"store_efficiency", row.store}});
  }
  j["reference"] = std::move(ref);
  j["reference_source"] =
      "reference measurements from a Maxwell-class GPU (nvprof)";

  if (!out.empty()) {
    emit_json(j, out);
    std::printf("%-8s %10s %10s\n", "kernel", "load%", "store%");
    for (const auto& row : kReference) {
      std::printf("%-8s %10.2f %10.2f  (reference)\n", row.kernel, row.load,
                  row.store);
    }
    std::printf("%-8s %10.2f %10.2f  (this model)\n", layout_name.c_str(),
                r.load_efficiency, r.store_efficiency);
  } else {
    emit_json(j, "");
  }
  return 0;
}

int do_bench(const std::vector<std::size_t>& sizes,
             const std::vector<double>& fills,
             const std::vector<std::string>& layout_names, std::size_t reps,
             std::size_t warmup, std::uint64_t seed, const std::string& out) {
  pbp::bench::BenchConfig cfg;
  if (!sizes.empty()) cfg.sizes = sizes;
  if (!fills.empty()) cfg.fill_ins = fills;
  if (!layout_names.empty()) {
    cfg.layouts.clear();
    for (const auto& name : layout_names) cfg.layouts.push_back(layout_of(name));
  }
  cfg.repetitions = reps;
  cfg.warmup = warmup;
  cfg.seed = seed;
  cfg.parallel_cells = env_threads();

  std::cerr << "informational: CPU reference timings, not comparable to GPU "
               "measurements\n";
  if (cfg.parallel_cells > 0) {
    std::cerr << "parallel cells (PBP_THREADS=" << cfg.parallel_cells
              << "): timings contend and are not comparable across cells\n";
  }
  const auto results = pbp::bench::run_sweep(cfg);
  if (out.empty()) {
    std::cout << pbp::bench::csv_string(results);
  } else {
    pbp::bench::write_csv(out, results);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"block-sparse PBP matrix toolkit"};
  app.require_subcommand(1);
  const auto layout_names = CLI::IsMember({"brc", "bcr", "cbr"});

  auto* gen = app.add_subcommand("gen", "generate a random dense matrix");
  std::size_t gen_rows = 0, gen_cols = 0;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("rows", gen_rows, "row count")
      ->required()
      ->check(CLI::PositiveNumber);
  gen->add_option("cols", gen_cols, "column count")
      ->required()
      ->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "rng seed");
  gen->add_option("--out", gen_out, "output .pbpd path")->required();

  auto* prune = app.add_subcommand(
      "prune", "prune a dense matrix into permuted block-diagonal form");
  std::string prune_in, prune_mode = "feedback", prune_layout = "brc";
  std::string prune_out, prune_report;
  std::size_t prune_levels = 1, prune_budget = 2000;
  std::uint64_t prune_seed = 0;
  bool prune_identity = false, prune_allow_identity = false;
  prune->add_option("input", prune_in, "input .pbpd path")->required();
  prune->add_option("--levels", prune_levels, "bisection levels");
  prune->add_option("--seed", prune_seed, "rng seed");
  prune->add_option("--mode", prune_mode, "feedback or feedforward")
      ->check(CLI::IsMember({"feedback", "feedforward"}));
  prune->add_option("--layout", prune_layout, "block layout")
      ->check(layout_names);
  prune->add_option("--budget", prune_budget,
                    "non-improving proposals before a search stops");
  prune->add_flag("--identity-pivots", prune_identity,
                  "feedforward only: identity pivots instead of random");
  prune->add_flag("--allow-identity", prune_allow_identity,
                  "confirm --identity-pivots");
  prune->add_option("--out", prune_out, "output .pbpx path")->required();
  prune->add_option("--report", prune_report, "report JSON path");

  auto* pack = app.add_subcommand("pack", "rewrite a PBP matrix's layout");
  std::string pack_in, pack_layout, pack_out;
  pack->add_option("input", pack_in, "input .pbpx path")->required();
  pack->add_option("--layout", pack_layout, "target layout")
      ->required()
      ->check(layout_names);
  pack->add_option("--out", pack_out, "output .pbpx path")->required();

  auto* run = app.add_subcommand("run", "execute a layer graph on a vector");
  std::string run_graph, run_input, run_out;
  run->add_option("graph", run_graph, "graph JSON path")->required();
  run->add_option("input", run_input, "input vector JSON path")->required();
  run->add_option("--out", run_out, "result JSON path (also printed)");

  auto* fuse = app.add_subcommand(
      "fuse", "fuse permutations across pointwise ops in a layer graph");
  std::string fuse_graph, fuse_out, fuse_relabel;
  bool fuse_eliminate = false;
  fuse->add_option("graph", fuse_graph, "graph JSON path")->required();
  fuse->add_option("--out", fuse_out, "optimized graph JSON path")->required();
  fuse->add_flag("--eliminate-output", fuse_eliminate,
                 "also drop the final row permutation into a relabel record");
  fuse->add_option("--relabel", fuse_relabel,
                   "relabel JSON path (default <out>.relabel.json)");

  auto* simulate = app.add_subcommand(
      "simulate", "model warp coalescing efficiency for a block layout");
  std::string sim_layout = "brc", sim_out;
  std::size_t sim_width = 32, sim_blocks = 1, sim_warp = 32, sim_tx = 32,
              sim_word = 4;
  simulate->add_option("--layout", sim_layout, "block layout")
      ->check(layout_names);
  simulate->add_option("--width", sim_width, "square block width")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--blocks", sim_blocks, "diagonal block count")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--warp-size", sim_warp, "threads per warp");
  simulate->add_option("--transaction-bytes", sim_tx, "transaction size");
  simulate->add_option("--word-bytes", sim_word, "word size");
  simulate->add_option("--out", sim_out, "report JSON path");

  auto* bench = app.add_subcommand(
      "bench", "time PBP matvec against dense and CSR baselines");
  std::vector<std::size_t> bench_sizes;
  std::vector<double> bench_fills;
  std::vector<std::string> bench_layouts;
  std::size_t bench_reps = 2500, bench_warmup = 100;
  std::uint64_t bench_seed = 0;
  std::string bench_out;
  bench->add_option("--size", bench_sizes, "matrix sizes to sweep");
  bench->add_option("--fill-in", bench_fills, "fill-in fractions to sweep");
  bench->add_option("--layout", bench_layouts, "layouts to sweep")
      ->check(layout_names);
  bench->add_option("--reps", bench_reps, "timed repetitions per cell");
  bench->add_option("--warmup", bench_warmup, "untimed warm-up calls");
  bench->add_option("--seed", bench_seed, "rng seed");
  bench->add_option("--out", bench_out, "CSV path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return do_gen(gen_rows, gen_cols, gen_seed, gen_out);
    if (*prune) {
      return do_prune(prune_in, prune_levels, prune_seed, prune_mode,
                      prune_layout, prune_budget, prune_identity,
                      prune_allow_identity, prune_out, prune_report);
    }
    if (*pack) return do_pack(pack_in, pack_layout, pack_out);
    if (*run) return do_run(run_graph, run_input, run_out);
    if (*fuse) return do_fuse(fuse_graph, fuse_out, fuse_eliminate,
                              fuse_relabel);
    if (*simulate) {
      return do_simulate(sim_layout, sim_width, sim_blocks, sim_warp, sim_tx,
                         sim_word, sim_out);
    }
    if (*bench) {
      return do_bench(bench_sizes, bench_fills, bench_layouts, bench_reps,
                      bench_warmup, bench_seed, bench_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
