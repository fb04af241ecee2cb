#include "psi/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "psi/graph_io.hpp"
#include "psi/stats.hpp"

#ifndef PSI_VERSION_STRING
#define PSI_VERSION_STRING "unknown"
#endif

namespace psi {

void RunConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (grad_accumulation < 1) throw std::invalid_argument("grad_accumulation must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  adam.validate();
  protocol.validate();
  model.validate();
  if (use_synthetic) synthetic.validate();
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

std::string fmt_compact(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

PreMixer parse_premixer(const std::string& s) {
  if (s == "none") return PreMixer::kNone;
  if (s == "mlp") return PreMixer::kMlp;
  if (s == "attention" || s == "self-attention") return PreMixer::kSelfAttention;
  throw std::invalid_argument("unknown premixer '" + s + "'");
}

std::string premixer_name(PreMixer p) {
  switch (p) {
    case PreMixer::kNone: return "none";
    case PreMixer::kMlp: return "mlp";
    case PreMixer::kSelfAttention: return "attention";
  }
  return "mlp";
}

}  // namespace

RunConfig run_config_from(const KeyValueConfig& c) {
  RunConfig r;
  // data
  const auto dataset = c.get_string("dataset", "synthetic");
  r.use_synthetic = dataset == "synthetic";
  auto& s = r.synthetic;
  s.num_nodes = c.get_uint("synthetic_nodes", s.num_nodes);
  s.communities = c.get_uint("synthetic_communities", s.communities);
  s.p_in = c.get_double("synthetic_p_in", s.p_in);
  s.p_out = c.get_double("synthetic_p_out", s.p_out);
  s.num_subgraphs = c.get_uint("synthetic_subgraphs", s.num_subgraphs);
  s.min_size = c.get_uint("synthetic_min_size", s.min_size);
  s.max_size = c.get_uint("synthetic_max_size", s.max_size);
  s.num_classes = c.get_uint("synthetic_classes", s.num_classes);
  s.stay_prob = c.get_double("synthetic_stay_prob", s.stay_prob);
  s.noise = c.get_double("synthetic_noise", s.noise);
  s.noise_dims = c.get_uint("synthetic_noise_dims", s.noise_dims);
  s.seed = c.get_uint("synthetic_seed", s.seed);
  s.ordered = c.get_bool("ordered", false);
  if (auto dir = c.get("data_dir")) r.data_dir = *dir;
  r.files.name = dataset;
  if (auto f = c.get("edge_file")) r.files.edge_file = *f;
  if (auto f = c.get("subgraph_file")) r.files.subgraph_file = *f;
  if (auto f = c.get("embedding_file")) r.files.embedding_file = *f;
  if (auto f = c.get("split_file")) r.files.split_file = *f;
  r.files.ordered = s.ordered;
  r.files.symmetrize = c.get_bool("symmetrize", true);
  r.files.split_seed = c.get_uint("split_seed", 0);
  const auto ratios = c.get_doubles("split_ratios", {0.7, 0.15, 0.15});
  if (ratios.size() != 3) throw std::invalid_argument("split_ratios needs three values");
  r.files.ratios = SplitRatios{ratios[0], ratios[1], ratios[2]};
  s.ratios = r.files.ratios;
  if (!r.use_synthetic && !r.data_dir && (r.files.edge_file.empty() || r.files.subgraph_file.empty())) {
    throw std::invalid_argument("dataset '" + dataset + "' needs data_dir or edge_file and subgraph_file");
  }

  // protocol
  r.protocol.n_obs = c.get_uint("n_obs", r.protocol.n_obs);
  r.protocol.ordered = s.ordered;
  r.protocol.train_jitter = c.get_bool("train_jitter", true);
  r.protocol.eval_seed = c.get_uint("eval_seed", 0);
  s.n_obs = r.protocol.n_obs;

  // model
  auto& m = r.model;
  const auto variant = c.get_string("variant", "ps-infograph");
  if (const auto plus = variant.find('+'); plus != std::string::npos) {
    m.variant = parse_variant(variant.substr(0, plus));
    m.second = parse_variant(variant.substr(plus + 1));
  } else {
    m.variant = parse_variant(variant);
  }
  if (auto est = c.get("estimator")) {
    const bool infonce = m.variant == Variant::kGraphCl;
    if (*est != (infonce ? "infonce" : "gd")) {
      throw std::invalid_argument("estimator '" + *est + "' does not match variant " + variant + " (uses " +
                                  (infonce ? "infonce" : "gd") + ")");
    }
  }
  m.input_dim = c.get_uint("input_dim", 32);
  m.hidden_dim = c.get_uint("hidden_dim", m.hidden_dim);
  m.bidirectional = c.get_bool("bidirectional", m.bidirectional);
  m.skip = c.get_bool("skip", m.skip);
  if (auto ro = c.get("readout")) {
    if (*ro == "mean_mlp" || *ro == "mean-mlp") {
      m.readout = ReadoutKind::kMeanMlp;
    } else if (*ro == "attention") {
      m.readout = ReadoutKind::kAttention;
    } else {
      throw std::invalid_argument("unknown readout '" + *ro + "'");
    }
  }
  m.premixer = parse_premixer(c.get_string("premixer", "mlp"));
  m.use_positional_encoding = c.get_bool("use_positional_encoding", false);
  m.dropout = c.get_double("dropout", m.dropout);
  m.temperature = c.get_double("temperature", m.temperature);
  m.aug_p = c.get_double("aug_p", m.aug_p);
  m.ppr.alpha = c.get_double("ppr_alpha", m.ppr.alpha);
  m.ppr.top_t = c.get_uint("ppr_top_t", m.ppr.top_t);
  m.khop.k = static_cast<int>(c.get_int("k", m.khop.k));
  const auto cap = c.get_int("neighborhood_cap", 5000);
  m.khop.cap = cap > 0 ? std::optional<std::size_t>(static_cast<std::size_t>(cap)) : std::nullopt;
  m.khop.edge_drop = c.get_double("p_d", m.khop.edge_drop);
  m.pool_ratio = c.get_double("pool_ratio", m.pool_ratio);
  m.khop_score_observed = c.get_bool("khop_score_observed", m.khop_score_observed);
  m.concat_obs_summary = c.get_bool("concat_obs_summary", m.concat_obs_summary);
  const auto edge_source = c.get_string("edge_source", "subgraph");
  if (edge_source == "subgraph") {
    m.edge_source = EdgeSource::kSubgraph;
  } else if (edge_source == "global") {
    m.edge_source = EdgeSource::kGlobal;
  } else {
    throw std::invalid_argument("edge_source must be 'subgraph' or 'global'");
  }
  m.weights.lambda_single = c.get_double("lambda", m.weights.lambda_single);
  m.weights.lambda_khop = c.get_double("lambda_khop", m.weights.lambda_khop);
  m.weights.lambda_second = c.get_double("lambda_second", m.weights.lambda_second);

  // training
  r.epochs = c.get_uint("epochs", r.epochs);
  r.batch_size = c.get_uint("batch_size", r.batch_size);
  r.grad_accumulation = c.get_uint("grad_accumulation", r.grad_accumulation);
  r.adam.learning_rate = c.get_double("learning_rate", r.adam.learning_rate);
  r.adam.weight_decay = c.get_double("weight_decay", r.adam.weight_decay);
  r.seeds = c.get_uints("seeds", r.seeds);
  r.output_dir = c.get_string("output_dir", r.output_dir.string());
  r.save_checkpoints = c.get_bool("save_checkpoints", r.save_checkpoints);

  if (auto unused = c.unused_keys(); !unused.empty()) {
    std::string list;
    for (const auto& k : unused) list += (list.empty() ? "" : ", ") + k;
    throw std::invalid_argument("unknown config keys: " + list);
  }
  r.validate();
  return r;
}

std::map<std::string, std::string> describe(const RunConfig& r) {
  std::map<std::string, std::string> d;
  const auto& m = r.model;
  d["dataset"] = r.use_synthetic ? "synthetic" : r.files.name;
  if (r.use_synthetic) {
    const auto& s = r.synthetic;
    d["synthetic_nodes"] = std::to_string(s.num_nodes);
    d["synthetic_communities"] = std::to_string(s.communities);
    d["synthetic_p_in"] = fmt_double(s.p_in);
    d["synthetic_p_out"] = fmt_double(s.p_out);
    d["synthetic_subgraphs"] = std::to_string(s.num_subgraphs);
    d["synthetic_min_size"] = std::to_string(s.min_size);
    d["synthetic_max_size"] = std::to_string(s.max_size);
    d["synthetic_classes"] = std::to_string(s.num_classes);
    d["synthetic_stay_prob"] = fmt_double(s.stay_prob);
    d["synthetic_noise"] = fmt_double(s.noise);
    d["synthetic_noise_dims"] = std::to_string(s.noise_dims);
    d["synthetic_seed"] = std::to_string(s.seed);
  }
  if (r.data_dir) d["data_dir"] = r.data_dir->string();
  d["n_obs"] = std::to_string(r.protocol.n_obs);
  d["ordered"] = r.protocol.ordered ? "true" : "false";
  d["train_jitter"] = r.protocol.train_jitter ? "true" : "false";
  d["eval_seed"] = std::to_string(r.protocol.eval_seed);
  d["variant"] = model_label(m);
  d["estimator"] = m.variant == Variant::kGraphCl ? "infonce" : "gd";
  d["hidden_dim"] = std::to_string(m.hidden_dim);
  d["bidirectional"] = m.bidirectional ? "true" : "false";
  d["skip"] = m.skip ? "true" : "false";
  d["readout"] = m.effective_readout() == ReadoutKind::kMeanMlp ? "mean_mlp" : "attention";
  d["premixer"] = premixer_name(m.premixer);
  d["use_positional_encoding"] = m.use_positional_encoding ? "true" : "false";
  d["dropout"] = fmt_double(m.dropout);
  d["temperature"] = fmt_double(m.temperature);
  d["aug_p"] = fmt_double(m.aug_p);
  d["ppr_alpha"] = fmt_double(m.ppr.alpha);
  d["ppr_top_t"] = std::to_string(m.ppr.top_t);
  d["k"] = std::to_string(m.khop.k);
  d["neighborhood_cap"] = m.khop.cap ? std::to_string(*m.khop.cap) : "0";
  d["p_d"] = fmt_double(m.khop.edge_drop);
  d["pool_ratio"] = fmt_double(m.pool_ratio);
  d["lambda"] = fmt_double(m.weights.lambda_single);
  d["lambda_khop"] = fmt_double(m.weights.lambda_khop);
  d["lambda_second"] = fmt_double(m.weights.lambda_second);
  d["epochs"] = std::to_string(r.epochs);
  d["batch_size"] = std::to_string(r.batch_size);
  d["grad_accumulation"] = std::to_string(r.grad_accumulation);
  d["learning_rate"] = fmt_double(r.adam.learning_rate);
  d["weight_decay"] = fmt_double(r.adam.weight_decay);
  std::string seeds;
  for (auto s : r.seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
  d["seeds"] = seeds;
  d["parameter_init"] = "uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))";
  d["model_selection"] = "best validation accuracy";
  return d;
}

DatasetBundle load_run_dataset(const RunConfig& config) {
  if (config.data_dir) return load_bundle(*config.data_dir, config.files.name);
  if (config.use_synthetic) return generate_synthetic(config.synthetic);
  return load_dataset(config.files);
}

ModelConfig resolve_model(const RunConfig& config, const DatasetBundle& bundle) {
  ModelConfig m = config.model;
  m.num_classes = std::max<std::size_t>(bundle.num_classes, 2);
  if (bundle.features) m.input_dim = bundle.features->cols();
  m.positional_max_length = std::max(m.positional_max_length, positional_max_length(config.protocol.n_obs));
  if (!bundle.records.empty() && bundle.records.front().subgraph_feature) {
    m.subgraph_feature_dim = bundle.records.front().subgraph_feature->size();
  }
  return m;
}

std::string model_label(const ModelConfig& model) {
  std::string label(variant_name(model.variant));
  if (model.second) label += "+" + std::string(variant_name(*model.second));
  return label;
}

std::vector<double> MetricsRecord::accuracies() const {
  std::vector<double> out;
  for (const auto& r : runs) {
    if (!r.diverged) out.push_back(r.test_accuracy);
  }
  return out;
}

MetricsRecord summarize_runs(std::vector<SeedResult> runs) {
  MetricsRecord m;
  m.runs = std::move(runs);
  const auto acc = m.accuracies();
  if (!acc.empty()) {
    m.mean = mean(acc);
    m.std = sample_std(acc);
  }
  return m;
}

std::vector<PartialSubgraph> frozen_partials(const DatasetBundle& bundle, Stage stage,
                                             const ObservationProtocol& protocol) {
  std::vector<PartialSubgraph> out;
  Rng unused(0);
  for (auto i : bundle.indices(stage)) {
    const auto ids = sample_observed(bundle.records[i], protocol, stage, i, unused);
    out.push_back(induced_partial_subgraph(bundle.records[i], ids, i));
  }
  return out;
}

namespace {

std::size_t argmax_row(const ad::Matrix& logits) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.cols(); ++c) {
    if (logits(0, c) > logits(0, best)) best = c;
  }
  return best;
}

double accuracy_over(const PsiModel& model, const DatasetBundle& bundle, std::span<const PartialSubgraph> partials,
                     std::uint64_t eval_seed) {
  if (partials.empty()) throw std::invalid_argument("evaluation stage has no records");
  std::size_t correct = 0;
  for (const auto& p : partials) {
    const auto& rec = bundle.records[p.parent_index];
    Rng rng(derive_seed(eval_seed, {p.parent_index, 0xe7a1}));
    const auto logits = model.predict(rec, p, rng);
    if (static_cast<int>(argmax_row(logits.value())) == rec.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(partials.size());
}

/// Consecutive batches of `order`; a trailing single record joins the
/// previous batch so cross-subgraph negatives always exist.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order, std::size_t size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + size)));
  }
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

}  // namespace

double evaluate(const PsiModel& model, const DatasetBundle& bundle, Stage stage, const ObservationProtocol& protocol) {
  const auto partials = frozen_partials(bundle, stage, protocol);
  return accuracy_over(model, bundle, partials, protocol.eval_seed);
}

double majority_rate(const DatasetBundle& bundle, Stage stage) {
  const auto idx = bundle.indices(stage);
  if (idx.empty()) throw std::invalid_argument("stage has no records");
  std::vector<std::size_t> counts(std::max<std::size_t>(bundle.num_classes, 1), 0);
  for (auto i : idx) ++counts[static_cast<std::size_t>(bundle.records[i].label)];
  return static_cast<double>(*std::max_element(counts.begin(), counts.end())) / static_cast<double>(idx.size());
}

TrainedModel train_seed(const RunConfig& config, const DatasetBundle& bundle, std::uint64_t seed) {
  config.validate();
  TrainedModel out;
  out.result.seed = seed;
  out.model = std::make_unique<PsiModel>(resolve_model(config, bundle), bundle.graph, bundle.features,
                                         derive_seed(seed, {1}));
  auto& model = *out.model;
  auto& result = out.result;
  Rng rng(derive_seed(seed, {2}));

  auto train_idx = bundle.indices(Stage::kTrain);
  if (train_idx.empty()) throw std::invalid_argument("no training records");
  const auto val_partials = frozen_partials(bundle, Stage::kVal, config.protocol);
  auto best = model.parameters().snapshot();
  result.best_val_accuracy = -1.0;

  std::size_t micro = 0;
  for (std::size_t epoch = 0; epoch < config.epochs && !result.diverged; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    EpochTrace trace;
    std::size_t seen = 0;
    for (const auto& batch : make_batches(train_idx, config.batch_size)) {
      std::vector<const SubgraphRecord*> records;
      std::vector<PartialSubgraph> partials;
      for (auto i : batch) {
        records.push_back(&bundle.records[i]);
        const auto ids = sample_observed(bundle.records[i], config.protocol, Stage::kTrain, i, rng);
        partials.push_back(induced_partial_subgraph(bundle.records[i], ids, i));
      }
      auto out_batch = model.batch_step(records, partials, rng, StepMode::kTraining);
      const double loss = out_batch.loss.item();
      if (!std::isfinite(loss)) {
        result.diverged = true;
        result.diagnostic = "non-finite loss at epoch " + std::to_string(epoch + 1);
        spdlog::error("seed {}: {}", seed, result.diagnostic);
        break;
      }
      for (const auto& st : out_batch.steps) {
        trace.loss_graph += st.loss_graph->item();
        if (st.loss_infomax) trace.loss_infomax += st.loss_infomax->item();
        if (st.loss_khop) trace.loss_khop += st.loss_khop->item();
        if (st.loss_second) trace.loss_second += st.loss_second->item();
        trace.loss_total += st.total->item();
      }
      seen += batch.size();
      ad::backward(config.grad_accumulation > 1
                       ? ad::scale(out_batch.loss, 1.0 / static_cast<double>(config.grad_accumulation))
                       : out_batch.loss);
      if (++micro % config.grad_accumulation == 0) adam_step(model.parameters(), config.adam);
    }
    if (result.diverged) break;
    const double inv = 1.0 / static_cast<double>(std::max<std::size_t>(seen, 1));
    trace.loss_graph *= inv;
    trace.loss_infomax *= inv;
    trace.loss_khop *= inv;
    trace.loss_second *= inv;
    trace.loss_total *= inv;
    trace.val_accuracy = val_partials.empty() ? 0.0 : accuracy_over(model, bundle, val_partials, config.protocol.eval_seed);
    result.epochs.push_back(trace);
    if (trace.val_accuracy > result.best_val_accuracy) {
      result.best_val_accuracy = trace.val_accuracy;
      result.best_epoch = epoch + 1;
      best = model.parameters().snapshot();
    }
    spdlog::debug("seed {} epoch {}: total {:.4f} graph {:.4f} val {:.3f}", seed, epoch + 1, trace.loss_total,
                  trace.loss_graph, trace.val_accuracy);
  }
  if (micro % config.grad_accumulation != 0) model.parameters().zero_grad();
  if (result.diverged) {
    result.test_accuracy = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  model.parameters().restore(best);
  result.test_accuracy = evaluate(model, bundle, Stage::kTest, config.protocol);
  return out;
}

MetricsRecord train(const RunConfig& config, const DatasetBundle& bundle,
                    const std::function<void(const TrainedModel&)>& on_seed) {
  std::vector<SeedResult> runs;
  for (auto seed : config.seeds) {
    auto trained = train_seed(config, bundle, seed);
    spdlog::info("seed {}: test accuracy {:.4f} (best val {:.4f} at epoch {})", seed, trained.result.test_accuracy,
                 trained.result.best_val_accuracy, trained.result.best_epoch);
    if (on_seed) on_seed(trained);
    runs.push_back(std::move(trained.result));
  }
  return summarize_runs(std::move(runs));
}

const std::vector<std::string>& runs_csv_columns() {
  static const std::vector<std::string> cols = {"dataset",     "model",      "seed",
                                                "n_obs_train", "n_obs_test", "lambda_khop",
                                                "lambda_second", "split",    "accuracy"};
  return cols;
}

const std::vector<std::string>& summary_csv_columns() {
  static const std::vector<std::string> cols = {"dataset",       "model", "n_obs_train", "n_obs_test",
                                                "lambda_khop",   "lambda_second", "split", "n_seeds",
                                                "accuracy_mean", "accuracy_std"};
  return cols;
}

std::vector<SummaryRow> summarize_rows(std::span<const ResultRow> rows) {
  std::vector<SummaryRow> out;
  std::vector<std::vector<double>> values;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SummaryRow& s) {
      return s.dataset == r.dataset && s.model == r.model && s.n_obs_train == r.n_obs_train &&
             s.n_obs_test == r.n_obs_test && s.lambda_khop == r.lambda_khop && s.lambda_second == r.lambda_second &&
             s.split == r.split;
    });
    if (it == out.end()) {
      out.push_back({r.dataset, r.model, r.n_obs_train, r.n_obs_test, r.lambda_khop, r.lambda_second, r.split, 0, 0, 0});
      values.emplace_back();
      it = out.end() - 1;
    }
    if (std::isfinite(r.accuracy)) values[static_cast<std::size_t>(it - out.begin())].push_back(r.accuracy);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].n_seeds = values[i].size();
    if (!values[i].empty()) {
      out[i].accuracy_mean = mean(values[i]);
      out[i].accuracy_std = sample_std(values[i]);
    }
  }
  return out;
}

namespace {
template <typename... Ts>
void write_csv_line(std::ostream& out, const Ts&... fields) {
  bool first = true;
  ((out << (first ? "" : ",") << fields, first = false), ...);
  out << '\n';
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}
}  // namespace

void write_runs_csv(std::ostream& out, std::span<const ResultRow> rows) {
  out << join(runs_csv_columns()) << '\n';
  for (const auto& r : rows) {
    write_csv_line(out, r.dataset, r.model, r.seed, r.n_obs_train, r.n_obs_test, fmt_compact(r.lambda_khop),
                   fmt_compact(r.lambda_second), r.split, fmt_double(r.accuracy));
  }
}

void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows) {
  out << join(summary_csv_columns()) << '\n';
  for (const auto& r : rows) {
    write_csv_line(out, r.dataset, r.model, r.n_obs_train, r.n_obs_test, fmt_compact(r.lambda_khop),
                   fmt_compact(r.lambda_second), r.split, r.n_seeds, fmt_double(r.accuracy_mean),
                   fmt_double(r.accuracy_std));
  }
}

std::vector<ResultRow> read_runs_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "missing header");
  if (line != join(runs_csv_columns())) throw ParseError(source, 1, "unexpected header '" + line + "'");
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != runs_csv_columns().size()) {
      throw ParseError(source, line_no, "expected 9 fields, found " + std::to_string(f.size()));
    }
    try {
      ResultRow r;
      r.dataset = f[0];
      r.model = f[1];
      r.seed = std::stoull(f[2]);
      r.n_obs_train = std::stoull(f[3]);
      r.n_obs_test = std::stoull(f[4]);
      r.lambda_khop = std::stod(f[5]);
      r.lambda_second = std::stod(f[6]);
      r.split = std::string(stage_name(parse_stage(f[7])));
      r.accuracy = std::stod(f[8]);
      if (r.dataset.empty() || r.model.empty()) throw std::invalid_argument("empty name");
      if (!(r.accuracy >= 0.0 && r.accuracy <= 1.0)) throw std::invalid_argument("accuracy outside [0, 1]");
      rows.push_back(r);
    } catch (const std::exception& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return rows;
}

std::vector<ResultRow> sweep_observed(const RunConfig& config, const DatasetBundle& bundle,
                                      std::span<const std::size_t> sizes) {
  if (sizes.empty()) throw std::invalid_argument("sweep_observed needs at least one size");
  std::size_t largest_subgraph = 0;
  for (const auto& r : bundle.records) largest_subgraph = std::max(largest_subgraph, r.node_ids.size());
  const auto max_size = *std::max_element(sizes.begin(), sizes.end());
  for (auto s : sizes) {
    if (s == 0) throw std::invalid_argument("observed sizes must be >= 1");
    if (s > largest_subgraph) {
      spdlog::warn("observed size {} exceeds every subgraph ({} nodes max); sizes are clamped", s, largest_subgraph);
    }
  }
  std::vector<ResultRow> rows;
  for (auto train_size : sizes) {
    RunConfig cfg = config;
    cfg.protocol.n_obs = train_size;
    cfg.model.positional_max_length = std::max(cfg.model.positional_max_length, positional_max_length(max_size));
    for (auto seed : config.seeds) {
      auto trained = train_seed(cfg, bundle, seed);
      for (auto test_size : sizes) {
        ObservationProtocol proto = cfg.protocol;
        proto.n_obs = test_size;
        ResultRow row;
        row.dataset = bundle.name;
        row.model = model_label(cfg.model);
        row.seed = seed;
        row.n_obs_train = train_size;
        row.n_obs_test = test_size;
        row.lambda_khop = cfg.model.weights.lambda_khop;
        row.lambda_second = cfg.model.weights.lambda_second;
        row.accuracy = trained.result.diverged ? std::numeric_limits<double>::quiet_NaN()
                                               : evaluate(*trained.model, bundle, Stage::kTest, proto);
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::vector<ResultRow> sweep_lambda(const RunConfig& config, const DatasetBundle& bundle,
                                    std::span<const double> lambda_khop, std::span<const double> lambda_second) {
  if (lambda_khop.empty() || lambda_second.empty()) throw std::invalid_argument("lambda grids must be nonempty");
  std::vector<ResultRow> rows;
  for (double lk : lambda_khop) {
    for (double l2 : lambda_second) {
      RunConfig cfg = config;
      cfg.model.weights.lambda_khop = lk;
      cfg.model.weights.lambda_second = l2;
      for (auto seed : config.seeds) {
        auto trained = train_seed(cfg, bundle, seed);
        ResultRow row;
        row.dataset = bundle.name;
        row.model = model_label(cfg.model);
        row.seed = seed;
        row.n_obs_train = cfg.protocol.n_obs;
        row.n_obs_test = cfg.protocol.n_obs;
        row.lambda_khop = lk;
        row.lambda_second = l2;
        row.accuracy = trained.result.test_accuracy;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::filesystem::path resolve_output_dir(const RunConfig& config) {
  if (config.output_dir.is_absolute()) return config.output_dir;
  if (const char* root = std::getenv("PSI_OUTPUT_ROOT"); root != nullptr && *root != '\0') {
    return std::filesystem::path(root) / config.output_dir;
  }
  return config.output_dir;
}

void write_manifest(const std::filesystem::path& path, const RunConfig& config, const ManifestInfo& info) {
  nlohmann::json doc;
  doc["tool"] = "psi";
  doc["version"] = PSI_VERSION_STRING;
  doc["command"] = info.command;
  doc["config"] = describe(config);
  doc["seeds"] = config.seeds;
  doc["wall_seconds"] = info.wall_seconds;
  doc["outputs"] = info.outputs;
  doc["created_unix"] =
      std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
  if (info.metrics) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : info.metrics->runs) {
      nlohmann::json trace = nlohmann::json::array();
      for (const auto& e : r.epochs) {
        trace.push_back({{"loss_graph", e.loss_graph},
                         {"loss_infomax", e.loss_infomax},
                         {"loss_khop", e.loss_khop},
                         {"loss_second", e.loss_second},
                         {"loss_total", e.loss_total},
                         {"val_accuracy", e.val_accuracy}});
      }
      runs.push_back({{"seed", r.seed},
                      {"test_accuracy", r.diverged ? nlohmann::json() : nlohmann::json(r.test_accuracy)},
                      {"best_val_accuracy", r.best_val_accuracy},
                      {"best_epoch", r.best_epoch},
                      {"diverged", r.diverged},
                      {"diagnostic", r.diagnostic},
                      {"epochs", trace}});
    }
    doc["metrics"] = {{"mean", info.metrics->mean}, {"std", info.metrics->std}, {"runs", runs}};
  }
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace psi
