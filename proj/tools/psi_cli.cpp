// psi: generate data, train, evaluate and sweep partial-subgraph InfoMax
// models from the command line.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "psi/harness.hpp"
#include "psi/testing/oracles.hpp"

namespace fs = std::filesystem;
using namespace psi;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string log_level = "info";
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config_file, "key = value settings file")->check(CLI::ExistingFile);
  app->add_option("-s,--set", c.overrides, "override one setting, key=value (repeatable)");
  app->add_option("--log-level", c.log_level, "trace, debug, info, warn, error")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
}

KeyValueConfig load_settings(const Common& c) {
  KeyValueConfig kv = c.config_file.empty() ? KeyValueConfig{} : KeyValueConfig::load(c.config_file);
  for (const auto& o : c.overrides) kv.set(o);
  return kv;
}

std::string command_line(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
  return s;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void write_tables(const fs::path& dir, std::span<const ResultRow> rows, std::vector<std::string>& outputs) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "runs.csv");
    write_runs_csv(out, rows);
  }
  const auto summary = summarize_rows(rows);
  {
    std::ofstream out(dir / "summary.csv");
    write_summary_csv(out, summary);
  }
  outputs.push_back((dir / "runs.csv").string());
  outputs.push_back((dir / "summary.csv").string());
  for (const auto& s : summary) {
    std::cout << s.model << " n_obs " << s.n_obs_train << "->" << s.n_obs_test << " lambda_khop " << s.lambda_khop
              << " lambda_second " << s.lambda_second << ": " << s.accuracy_mean << " +- " << s.accuracy_std << " ("
              << s.n_seeds << " seeds)\n";
  }
}

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::istringstream in(item);
    T v{};
    if (!(in >> v) || !in.eof()) throw std::invalid_argument("cannot parse list item '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty list '" + text + "'");
  return out;
}

int cmd_generate(const Common& c, const std::string& out_dir) {
  auto kv = load_settings(c);
  const auto cfg = run_config_from(kv);
  if (!cfg.use_synthetic) throw std::invalid_argument("generate only writes synthetic datasets");
  const auto bundle = generate_synthetic(cfg.synthetic);
  save_bundle(bundle, out_dir);
  const auto st = compute_statistics(bundle);
  std::cout << "wrote " << out_dir << ": " << st.subgraphs << " subgraphs, " << st.classes << " classes, "
            << st.global_nodes << " nodes, " << st.mean_nodes << " nodes per subgraph\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& cmdline) {
  const auto start = std::chrono::steady_clock::now();
  auto cfg = run_config_from(load_settings(c));
  const auto bundle = load_run_dataset(cfg);
  const auto dir = resolve_output_dir(cfg);
  fs::create_directories(dir);
  std::vector<std::string> outputs;
  const auto metrics = train(cfg, bundle, [&](const TrainedModel& t) {
    if (!cfg.save_checkpoints || t.result.diverged) return;
    const auto path = dir / "checkpoints" / ("seed_" + std::to_string(t.result.seed) + ".json");
    fs::create_directories(path.parent_path());
    save_parameters(t.model->parameters(), path);
    outputs.push_back(path.string());
  });
  std::vector<ResultRow> rows;
  for (const auto& r : metrics.runs) {
    ResultRow row;
    row.dataset = bundle.name;
    row.model = model_label(cfg.model);
    row.seed = r.seed;
    row.n_obs_train = row.n_obs_test = cfg.protocol.n_obs;
    row.lambda_khop = cfg.model.weights.lambda_khop;
    row.lambda_second = cfg.model.weights.lambda_second;
    row.accuracy = r.test_accuracy;
    rows.push_back(row);
  }
  write_tables(dir, rows, outputs);
  std::cout << "test accuracy " << metrics.mean << " +- " << metrics.std << " (majority rate "
            << majority_rate(bundle, Stage::kTest) << ")\n";
  write_manifest(dir / "manifest.json", cfg, {cmdline, seconds_since(start), &metrics, outputs});
  for (const auto& r : metrics.runs) {
    if (r.diverged) return 3;
  }
  return 0;
}

void dump_eval_sets(const RunConfig& cfg, const DatasetBundle& bundle, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (auto stage : {Stage::kVal, Stage::kTest}) {
    for (const auto& p : frozen_partials(bundle, stage, cfg.protocol)) {
      out << stage_name(stage) << '\t' << p.parent_index;
      for (auto id : p.observed_ids) out << '\t' << id;
      out << '\n';
    }
  }
}

int cmd_evaluate(const Common& c, const std::string& checkpoint, const std::string& split,
                 const std::string& dump_path, std::size_t n_obs) {
  auto cfg = run_config_from(load_settings(c));
  if (n_obs > 0) cfg.protocol.n_obs = n_obs;
  const auto bundle = load_run_dataset(cfg);
  if (!dump_path.empty()) dump_eval_sets(cfg, bundle, dump_path);
  if (checkpoint.empty()) {
    if (dump_path.empty()) throw std::invalid_argument("evaluate needs --checkpoint or --dump-eval-sets");
    return 0;
  }
  auto mc = resolve_model(cfg, bundle);
  PsiModel model(mc, bundle.graph, bundle.features, 0);
  load_parameters(model.parameters(), checkpoint);
  const auto stage = parse_stage(split);
  std::cout << split << " accuracy " << evaluate(model, bundle, stage, cfg.protocol) << '\n';
  return 0;
}

int cmd_sweep_observed(const Common& c, const std::string& sizes_text, const std::string& cmdline) {
  const auto start = std::chrono::steady_clock::now();
  auto cfg = run_config_from(load_settings(c));
  const auto bundle = load_run_dataset(cfg);
  const auto sizes = parse_list<std::size_t>(sizes_text);
  const auto rows = sweep_observed(cfg, bundle, sizes);
  std::vector<std::string> outputs;
  const auto dir = resolve_output_dir(cfg);
  write_tables(dir, rows, outputs);
  write_manifest(dir / "manifest.json", cfg, {cmdline, seconds_since(start), nullptr, outputs});
  return 0;
}

int cmd_sweep_lambda(const Common& c, const std::string& khop_text, const std::string& second_text,
                     const std::string& cmdline) {
  const auto start = std::chrono::steady_clock::now();
  auto cfg = run_config_from(load_settings(c));
  const auto bundle = load_run_dataset(cfg);
  const auto rows =
      sweep_lambda(cfg, bundle, parse_list<double>(khop_text), parse_list<double>(second_text));
  std::vector<std::string> outputs;
  const auto dir = resolve_output_dir(cfg);
  write_tables(dir, rows, outputs);
  write_manifest(dir / "manifest.json", cfg, {cmdline, seconds_since(start), nullptr, outputs});
  return 0;
}

int cmd_verify(std::uint64_t seed, std::size_t cgd_instances, std::size_t khop_graphs) {
  using namespace psi::testing;
  std::vector<CheckResult> all = op_gradient_checks(seed);
  for (auto& r : model_gradient_checks(seed)) all.push_back(std::move(r));
  all.push_back(khop_oracle_check(khop_graphs, 200, seed));
  all.push_back(cgd_bound_check(cgd_instances, seed));
  int failed = 0;
  for (const auto& r : all) {
    std::cout << (r.passed ? "ok    " : "FAIL  ") << r.name << ": " << r.detail << '\n';
    failed += r.passed ? 0 : 1;
  }
  std::cout << all.size() - static_cast<std::size_t>(failed) << "/" << all.size() << " checks passed\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partial-subgraph InfoMax models: data generation, training and evaluation"};
  app.require_subcommand(1);
  Common common;
  const auto cmdline = command_line(argc, argv);

  auto* gen = app.add_subcommand("generate", "write a synthetic dataset bundle");
  add_common(gen, common);
  std::string gen_out;
  gen->add_option("-o,--out", gen_out, "output directory")->required();

  auto* tr = app.add_subcommand("train", "train every seed and write runs.csv, summary.csv, manifest.json");
  add_common(tr, common);

  auto* ev = app.add_subcommand("evaluate", "accuracy of a saved checkpoint on frozen observations");
  add_common(ev, common);
  std::string checkpoint, split = "test", dump_path;
  std::size_t eval_n_obs = 0;
  ev->add_option("--checkpoint", checkpoint, "parameter file written by train")->check(CLI::ExistingFile);
  ev->add_option("--split", split, "val or test")->check(CLI::IsMember({"val", "test"}));
  ev->add_option("--n-obs", eval_n_obs, "observed-node count (default from config)");
  ev->add_option("--dump-eval-sets", dump_path, "write the frozen val/test observations to this file");

  auto* so = app.add_subcommand("sweep-observed", "train-size x test-size grid over observed-node counts");
  add_common(so, common);
  std::string sizes = "4,8";
  so->add_option("--sizes", sizes, "comma-separated observed-node counts");

  auto* sl = app.add_subcommand("sweep-lambda", "grid over the k-hop and second-stage loss weights");
  add_common(sl, common);
  std::string khop_grid = "1,2,3", second_grid = "1,2,3";
  sl->add_option("--lambda-khop", khop_grid, "comma-separated values");
  sl->add_option("--lambda-second", second_grid, "comma-separated values");

  auto* ve = app.add_subcommand("verify", "gradient checks, k-hop oracle and CGD bound");
  std::uint64_t verify_seed = 0;
  std::size_t cgd_instances = 1000, khop_graphs = 100;
  ve->add_option("--seed", verify_seed);
  ve->add_option("--cgd-instances", cgd_instances);
  ve->add_option("--khop-graphs", khop_graphs);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(common.log_level));

  try {
    if (gen->parsed()) return cmd_generate(common, gen_out);
    if (tr->parsed()) return cmd_train(common, cmdline);
    if (ev->parsed()) return cmd_evaluate(common, checkpoint, split, dump_path, eval_n_obs);
    if (so->parsed()) return cmd_sweep_observed(common, sizes, cmdline);
    if (sl->parsed()) return cmd_sweep_lambda(common, khop_grid, second_grid, cmdline);
    if (ve->parsed()) return cmd_verify(verify_seed, cgd_instances, khop_graphs);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
