#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psi/config.hpp"
#include "psi/dataset.hpp"
#include "psi/models.hpp"
#include "psi/optim.hpp"
#include "psi/protocols.hpp"

namespace psi {

struct RunConfig {
  // Data: a synthetic bundle, a directory written by save_bundle, or raw files.
  bool use_synthetic = true;
  SyntheticSpec synthetic;
  std::optional<std::filesystem::path> data_dir;
  LoadOptions files;

  ModelConfig model;
  ObservationProtocol protocol;

  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  std::size_t grad_accumulation = 1;
  AdamConfig adam;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

  std::filesystem::path output_dir = "runs";
  bool save_checkpoints = true;

  void validate() const;
};

/// Reads every recognised key; throws std::invalid_argument for bad values
/// and for keys nothing reads.
RunConfig run_config_from(const KeyValueConfig& config);
/// Resolved settings as key/value text, for manifests.
std::map<std::string, std::string> describe(const RunConfig& config);

DatasetBundle load_run_dataset(const RunConfig& config);
/// Model config with the dataset-dependent fields filled in (input width,
/// classes, subgraph feature width, positional table length).
ModelConfig resolve_model(const RunConfig& config, const DatasetBundle& bundle);
/// "ps-infograph", "khop+ps-dgi", ...
std::string model_label(const ModelConfig& model);

struct EpochTrace {
  double loss_graph = 0.0;
  double loss_infomax = 0.0;
  double loss_khop = 0.0;
  double loss_second = 0.0;
  double loss_total = 0.0;
  double val_accuracy = 0.0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  double test_accuracy = 0.0;
  double best_val_accuracy = 0.0;
  std::size_t best_epoch = 0;
  std::vector<EpochTrace> epochs;
  bool diverged = false;
  std::string diagnostic;
};

struct MetricsRecord {
  std::vector<SeedResult> runs;
  double mean = 0.0;  // over non-diverged seeds
  double std = 0.0;   // sample std over the same seeds

  std::vector<double> accuracies() const;
};

MetricsRecord summarize_runs(std::vector<SeedResult> runs);

struct TrainedModel {
  std::unique_ptr<PsiModel> model;  // holding the best-validation parameters
  SeedResult result;
};

/// One seed of the training loop: fresh observations per iteration, Adam
/// every grad_accumulation batches, frozen-val model selection, frozen-test
/// accuracy of the selected parameters.
TrainedModel train_seed(const RunConfig& config, const DatasetBundle& bundle, std::uint64_t seed);

/// Every seed of `config`; `on_seed` sees each trained model before it is
/// released.
MetricsRecord train(const RunConfig& config, const DatasetBundle& bundle,
                    const std::function<void(const TrainedModel&)>& on_seed = {});

/// Frozen observations for every record of `stage`, in index order.
std::vector<PartialSubgraph> frozen_partials(const DatasetBundle& bundle, Stage stage,
                                             const ObservationProtocol& protocol);

/// Accuracy over the frozen observations of `stage`; dropout off. Throws
/// std::invalid_argument for an empty stage.
double evaluate(const PsiModel& model, const DatasetBundle& bundle, Stage stage, const ObservationProtocol& protocol);

/// Largest class frequency among the records of `stage`.
double majority_rate(const DatasetBundle& bundle, Stage stage);

struct ResultRow {
  std::string dataset;
  std::string model;
  std::uint64_t seed = 0;
  std::size_t n_obs_train = 0;
  std::size_t n_obs_test = 0;
  double lambda_khop = 0.0;
  double lambda_second = 0.0;
  std::string split = "test";
  double accuracy = 0.0;
};

struct SummaryRow {
  std::string dataset;
  std::string model;
  std::size_t n_obs_train = 0;
  std::size_t n_obs_test = 0;
  double lambda_khop = 0.0;
  double lambda_second = 0.0;
  std::string split = "test";
  std::size_t n_seeds = 0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
};

const std::vector<std::string>& runs_csv_columns();
const std::vector<std::string>& summary_csv_columns();

/// Groups rows by every column except seed and accuracy, keeping first
/// appearance order.
std::vector<SummaryRow> summarize_rows(std::span<const ResultRow> rows);

void write_runs_csv(std::ostream& out, std::span<const ResultRow> rows);
void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows);
/// Strict reader: the header must match runs_csv_columns() exactly and
/// every row must parse. Throws ParseError otherwise.
std::vector<ResultRow> read_runs_csv(std::istream& in, const std::string& source = "<csv>");

/// Train-size x test-size grid: one model per (train size, seed), tested
/// on every size.
std::vector<ResultRow> sweep_observed(const RunConfig& config, const DatasetBundle& bundle,
                                      std::span<const std::size_t> sizes);
/// lambda_khop x lambda_second grid.
std::vector<ResultRow> sweep_lambda(const RunConfig& config, const DatasetBundle& bundle,
                                    std::span<const double> lambda_khop, std::span<const double> lambda_second);

/// `config.output_dir`, placed under $PSI_OUTPUT_ROOT when that is set and
/// the directory is relative.
std::filesystem::path resolve_output_dir(const RunConfig& config);

struct ManifestInfo {
  std::string command;
  double wall_seconds = 0.0;
  const MetricsRecord* metrics = nullptr;
  std::vector<std::string> outputs;
};
void write_manifest(const std::filesystem::path& path, const RunConfig& config, const ManifestInfo& info);

}  // namespace psi
