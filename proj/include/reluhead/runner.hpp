#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "reluhead/data.hpp"
#include "reluhead/diagnostics.hpp"
#include "reluhead/eval.hpp"
#include "reluhead/network.hpp"
#include "reluhead/preprocess.hpp"

namespace reluhead {

enum class ModelKind { Ffnn, Cnn };
std::string to_string(ModelKind kind);
ModelKind parse_model(const std::string& name);

/// Everything a run depends on. Defaults reproduce the published setup.
struct RunConfig {
  DatasetId dataset = DatasetId::Mnist;
  ModelKind model = ModelKind::Ffnn;
  HeadKind head = HeadKind::Softmax;
  ReluLoss relu_loss = ReluLoss::Normalized;
  std::uint64_t seed = 0;
  std::size_t epochs = 10;
  std::size_t batch_size = 128;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Unset: 256 for the image sets, none for wdbc. 0 disables PCA.
  std::optional<std::size_t> pca_dims;
  bool scale = true;
  double init_stddev = 0.05;
  double cnn_pool_dropout = 0.25;
  double cnn_dense_dropout = 0.5;
  double ffnn_dropout = 0.2;
  std::size_t cv_folds = 10;
  bool stratified_folds = false;
  double test_fraction = 0.3;  // wdbc only; the image sets have published splits
  std::size_t train_limit = 0;  // keep only the first N training rows; 0 keeps all
  std::filesystem::path output_dir = "out";
  std::filesystem::path data_dir;  // empty: default_data_dir()
};

/// Resolved PCA width (0 when disabled).
std::size_t effective_pca_dims(const RunConfig& config);
/// Throws ConfigError for an inconsistent configuration.
void validate(const RunConfig& config);
std::string config_json(const RunConfig& config);

struct InputFile {
  std::filesystem::path path;
  std::uint64_t bytes = 0;
  std::string fnv1a;
};

struct PreparedData {
  Dataset train;
  Dataset test;
  std::optional<ScalerParams> scaler;
  std::optional<PcaParams> pca;
  std::vector<InputFile> inputs;
};

/// Loads the cached dataset, splits it (wdbc) and fits the scaler and PCA on
/// the training side only.
PreparedData prepare_data(const RunConfig& config);
/// Applies fitted preprocessing to already-split data; exposed for tests.
void fit_preprocessing(const RunConfig& config, PreparedData& data);

Network build_network(const RunConfig& config, std::size_t input_dim, std::size_t classes);
TrainConfig train_config(const RunConfig& config);

struct TrainOutcome {
  MetricsReport report;
  TrainLog log;
  std::vector<double> dead_trace;  // ReLU head only: per-epoch dead fraction on a probe
  std::optional<CrossValResult> cv;
  double seconds = 0.0;
};

/// Trains on the training split, evaluates on the test split and writes
/// report.csv, confusion.csv, model.ckpt, the preprocessing parameters and
/// manifest.json (plus folds.csv when `with_cv`) to `config.output_dir`.
TrainOutcome run_train(const RunConfig& config, bool with_cv = false);

/// k-fold cross-validation on the training split; writes folds.csv and
/// manifest.json.
CrossValResult run_crossval(const RunConfig& config);

struct RunSummary {
  std::string dataset;
  std::string model;
  std::string head;
  std::uint64_t seed = 0;
  std::optional<double> cv_mean;
  double test_accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Reads manifest.json from a run directory.
RunSummary read_summary(const std::filesystem::path& run_dir);

/// Side-by-side table of two runs; throws ConfigError unless they share
/// dataset, model and seed. Writes compare.csv and compare.txt.
void write_compare(const RunSummary& left, const RunSummary& right,
                   const std::filesystem::path& output_dir);

struct GradCheckRun {
  std::string network;  // toy architecture label
  GradCheckReport report;
  double threshold = 0.0;
  bool passed() const { return report.max_rel_error() < threshold; }
};

/// Optional hook that edits a toy network before checking.
using NetworkTamper = std::function<void(Network&)>;

/// Gradient checks on small dense and convolutional toys with both heads.
/// Writes report.csv, report.txt and manifest.json when `output_dir` is set.
std::vector<GradCheckRun> run_gradcheck(std::uint64_t seed, ReluLoss relu_loss,
                                        const std::optional<std::filesystem::path>& output_dir,
                                        const NetworkTamper& tamper = {});

// Table helpers shared by the emitters.
using Table = std::vector<std::vector<std::string>>;
std::string to_csv(const Table& rows);
/// Columns padded to a common width, first column left-aligned.
std::string to_aligned_text(const Table& rows);
std::string format_fixed(double value, int decimals);

}  // namespace reluhead
