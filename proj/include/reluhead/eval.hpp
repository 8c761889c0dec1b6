#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "reluhead/data.hpp"
#include "reluhead/network.hpp"

namespace reluhead {

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::uint64_t> counts;  // classes x classes, row-major

  std::uint64_t at(std::size_t truth, std::size_t predicted) const {
    return counts[truth * classes + predicted];
  }
  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t col_sum(std::size_t predicted) const;
};

/// Throws InputError for a label outside [0, classes) or unequal lengths.
ConfusionMatrix confusion(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                          std::size_t classes);

/// trace / total, 0 for an empty matrix.
double accuracy(const ConfusionMatrix& cm);

struct ClassMetrics {
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  std::vector<std::uint64_t> support;
  // Support-weighted means.
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
};

/// Zero denominators give 0.
ClassMetrics precision_recall_f1(const ConfusionMatrix& cm);

struct FoldResult {
  double loss = 0.0;      // mean training loss of the final epoch
  double accuracy = 0.0;  // validation accuracy
};

struct CrossValResult {
  std::vector<FoldResult> folds;
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation of fold accuracies
};

/// Builds an untrained network for fold `fold` (0-based).
using NetworkFactory = std::function<Network(std::size_t fold)>;

/// k-fold cross-validation over `ds`. Every fold trains a fresh network
/// with its own seed derived from `config.seed`.
CrossValResult crossval(const NetworkFactory& factory, const Dataset& ds, std::size_t k,
                        const TrainConfig& config, bool stratified = false);

/// Mean and population standard deviation.
std::pair<double, double> mean_std(std::span<const double> values);

struct MetricsReport {
  double cv_mean = 0.0;
  double cv_std = 0.0;
  double test_accuracy = 0.0;
  ClassMetrics metrics;
  ConfusionMatrix confusion;
  std::vector<FoldResult> folds;
};

/// Eval-mode predictions on `test`; fills everything except the CV fields.
MetricsReport evaluate(Network& net, const Dataset& test);

}  // namespace reluhead
