#pragma once

#include <string>
#include <vector>

#include "reluhead/network.hpp"

namespace reluhead {

struct GradCheckOptions {
  double step = 1e-5;
  /// Coordinates whose perturbation moves a ReLU input (hidden layer or head
  /// raw score) that lies within this distance of zero are skipped.
  double skip_band = 1e-4;
  /// Gradients below this magnitude are compared absolutely: the relative
  /// error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
};

struct BlockCheck {
  std::string name;
  std::size_t coordinates = 0;
  std::size_t skipped = 0;
  double max_rel_error = 0.0;
  double mean_rel_error = 0.0;  // over checked coordinates
};

struct GradCheckReport {
  HeadKind head = HeadKind::Softmax;
  std::vector<BlockCheck> blocks;

  double max_rel_error() const;
  std::size_t skipped() const;
  std::size_t coordinates() const;
};

/// Central finite differences of the mean batch loss against the analytic
/// gradient, coordinate by coordinate, in eval mode. Throws NumericError if
/// any evaluated loss is not finite and ConfigError for a non-positive step.
GradCheckReport gradcheck(const Network& net, const Tensor& batch, const Tensor& onehot,
                          const GradCheckOptions& options = {});

/// Share of rows whose true-class head score is clamped to zero (eval mode).
double dead_fraction(Network& net, const Tensor& features, std::span<const std::size_t> labels);

/// Trains `net` for `config.epochs` epochs and records dead_fraction on the
/// probe set after each one. Throws ConfigError for a softmax head.
std::vector<double> dead_unit_trace(Network& net, const Tensor& train_x,
                                    std::span<const std::size_t> train_y, const Tensor& probe_x,
                                    std::span<const std::size_t> probe_y, const TrainConfig& config);

}  // namespace reluhead
