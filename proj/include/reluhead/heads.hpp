#pragma once

#include <string>
#include <vector>

#include "reluhead/tensor.hpp"

namespace reluhead {

enum class HeadKind { Softmax, Relu };

/// How the ReLU head turns clamped scores into a training loss.
enum class ReluLoss {
  /// -log10(f_k / sum_j f_j): the true-class term plus the log of the
  /// score sum. Gradients reach every active column.
  Normalized,
  /// -log10(f_k), gradient through the true-class column only. Unbounded
  /// below.
  Literal,
};

std::string to_string(HeadKind head);
std::string to_string(ReluLoss loss);
HeadKind parse_head(const std::string& name);
ReluLoss parse_relu_loss(const std::string& name);

/// Clamp inside the logarithm.
inline constexpr double kLogClamp = 1e-12;

struct LossValue {
  double mean = 0.0;
  std::vector<double> per_example;
};

/// Row-wise softmax with max-subtraction.
Tensor softmax(const Tensor& logits);

struct SoftmaxXent {
  LossValue loss;
  Tensor grad_logits;  // (p - y) / N
};

/// Natural-log cross entropy of softmax(logits) against one-hot targets.
SoftmaxXent softmax_xent(const Tensor& logits, const Tensor& onehot);

/// max(0, h * theta + b).
Tensor relu_head_scores(const Tensor& h, const Tensor& theta, const Tensor& b);

/// Mean over the batch of -log10(max(score_true, kLogClamp)).
LossValue relu_log_loss(const Tensor& scores, const Tensor& onehot);

struct HeadGrads {
  Tensor h;
  Tensor theta;
  Tensor b;
};

/// Gradient of relu_log_loss w.r.t. the penultimate activation and the head
/// parameters. Only the true-class column contributes, and examples whose
/// true-class raw score is <= kLogClamp contribute nothing.
HeadGrads relu_loss_grad(const Tensor& h, const Tensor& theta, const Tensor& b,
                         const Tensor& onehot);

/// Mean over the batch of -log10(max(f_k / sum_j f_j, kLogClamp)), f the
/// clamped scores. A zero score sum counts as p_k = 0.
LossValue relu_normalized_loss(const Tensor& scores, const Tensor& onehot);

/// Gradient of relu_normalized_loss w.r.t. the raw scores o = h*theta + b.
/// Examples with p_k <= kLogClamp contribute nothing; columns with o_j <= 0
/// receive nothing (clamp subgradient).
Tensor relu_normalized_grad_raw(const Tensor& raw_scores, const Tensor& onehot);

/// Same gradient as relu_loss_grad, expressed w.r.t. the raw scores.
Tensor relu_literal_grad_raw(const Tensor& raw_scores, const Tensor& onehot);

/// Chains a raw-score gradient through o = h*theta + b.
HeadGrads linear_head_backward(const Tensor& h, const Tensor& theta, const Tensor& grad_raw);

/// argmax per row, lowest index on ties. `outputs` are probabilities for the
/// softmax head and clamped scores for the ReLU head.
std::vector<std::size_t> predict(HeadKind head, const Tensor& outputs);

struct DeadUnitStats {
  double fraction = 0.0;            // over all (example, class) pairs
  std::vector<double> per_class;    // per column
};

/// Share of head scores clamped to exactly zero.
DeadUnitStats dead_unit_stats(const Tensor& scores);

/// Validates that every row of `onehot` has a single 1 and zeros elsewhere;
/// returns the hot index of each row.
std::vector<std::size_t> onehot_labels(const Tensor& onehot);
Tensor make_onehot(std::span<const std::size_t> labels, std::size_t classes);

}  // namespace reluhead
