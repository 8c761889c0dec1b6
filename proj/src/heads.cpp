#include "reluhead/heads.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "reluhead/error.hpp"

namespace reluhead {

namespace {

constexpr double kLn10 = std::numbers::ln10;

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw ShapeError(std::string(what) + " must be a matrix");
}

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
}

LossValue finish(std::vector<double> per_example) {
  LossValue v;
  double sum = 0.0;
  for (double x : per_example) sum += x;
  v.mean = per_example.empty() ? 0.0 : sum / static_cast<double>(per_example.size());
  v.per_example = std::move(per_example);
  return v;
}

}  // namespace

std::string to_string(HeadKind head) { return head == HeadKind::Softmax ? "softmax" : "relu"; }

std::string to_string(ReluLoss loss) {
  return loss == ReluLoss::Normalized ? "normalized" : "literal";
}

HeadKind parse_head(const std::string& name) {
  if (name == "softmax") return HeadKind::Softmax;
  if (name == "relu") return HeadKind::Relu;
  throw ConfigError("unknown head '" + name + "' (expected softmax or relu)");
}

ReluLoss parse_relu_loss(const std::string& name) {
  if (name == "normalized") return ReluLoss::Normalized;
  if (name == "literal") return ReluLoss::Literal;
  throw ConfigError("unknown relu loss '" + name + "' (expected normalized or literal)");
}

std::vector<std::size_t> onehot_labels(const Tensor& onehot) {
  require_matrix(onehot, "one-hot targets");
  std::vector<std::size_t> labels(onehot.dim(0));
  for (std::size_t r = 0; r < onehot.dim(0); ++r) {
    std::size_t hot = onehot.dim(1);
    for (std::size_t c = 0; c < onehot.dim(1); ++c) {
      const double v = onehot.at(r, c);
      if (v == 1.0 && hot == onehot.dim(1)) {
        hot = c;
      } else if (v != 0.0) {
        throw InputError("row " + std::to_string(r) + " is not a valid one-hot vector");
      }
    }
    if (hot == onehot.dim(1)) throw InputError("row " + std::to_string(r) + " has no hot entry");
    labels[r] = hot;
  }
  return labels;
}

Tensor make_onehot(std::span<const std::size_t> labels, std::size_t classes) {
  Tensor y({labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) throw InputError("label out of range");
    y.at(i, labels[i]) = 1.0;
  }
  return y;
}

Tensor softmax(const Tensor& logits) {
  require_matrix(logits, "logits");
  if (!logits.all_finite()) throw NumericError("softmax input is not finite");
  Tensor p(logits.shape());
  const std::size_t k = logits.dim(1);
  for (std::size_t r = 0; r < logits.dim(0); ++r) {
    double mx = logits.at(r, 0);
    for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, logits.at(r, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) sum += (p.at(r, c) = std::exp(logits.at(r, c) - mx));
    for (std::size_t c = 0; c < k; ++c) p.at(r, c) /= sum;
  }
  return p;
}

SoftmaxXent softmax_xent(const Tensor& logits, const Tensor& onehot) {
  require_same(logits, onehot, "softmax_xent");
  const auto labels = onehot_labels(onehot);
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (!logits.all_finite()) throw NumericError("softmax input is not finite");

  std::vector<double> per(n);
  Tensor grad(logits.shape());
  for (std::size_t r = 0; r < n; ++r) {
    double mx = logits.at(r, 0);
    for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, logits.at(r, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) sum += std::exp(logits.at(r, c) - mx);
    const double log_z = mx + std::log(sum);
    per[r] = log_z - logits.at(r, labels[r]);
    for (std::size_t c = 0; c < k; ++c) {
      const double p = std::exp(logits.at(r, c) - log_z);
      grad.at(r, c) = (p - (c == labels[r] ? 1.0 : 0.0)) / static_cast<double>(n);
    }
  }
  return {finish(std::move(per)), std::move(grad)};
}

Tensor relu_head_scores(const Tensor& h, const Tensor& theta, const Tensor& b) {
  Tensor o = matmul(h, theta);
  add_row_bias(o, b);
  return max_with_scalar(0.0, o);
}

LossValue relu_log_loss(const Tensor& scores, const Tensor& onehot) {
  require_same(scores, onehot, "relu_log_loss");
  const auto labels = onehot_labels(onehot);
  std::vector<double> per(labels.size());
  for (std::size_t r = 0; r < labels.size(); ++r)
    per[r] = -std::log10(std::max(scores.at(r, labels[r]), kLogClamp));
  return finish(std::move(per));
}

Tensor relu_literal_grad_raw(const Tensor& raw_scores, const Tensor& onehot) {
  require_same(raw_scores, onehot, "relu_literal_grad");
  const auto labels = onehot_labels(onehot);
  const double n = static_cast<double>(labels.size());
  Tensor grad(raw_scores.shape());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const double o = raw_scores.at(r, labels[r]);
    if (o > kLogClamp) grad.at(r, labels[r]) = -1.0 / (o * kLn10) / n;
  }
  return grad;
}

HeadGrads linear_head_backward(const Tensor& h, const Tensor& theta, const Tensor& grad_raw) {
  if (h.rank() != 2 || theta.rank() != 2 || h.dim(1) != theta.dim(0) ||
      grad_raw.shape() != Shape{h.dim(0), theta.dim(1)})
    throw ShapeError("head gradient shapes disagree");
  return {matmul(grad_raw, Transpose::No, theta, Transpose::Yes),
          matmul(h, Transpose::Yes, grad_raw, Transpose::No), column_sums(grad_raw)};
}

HeadGrads relu_loss_grad(const Tensor& h, const Tensor& theta, const Tensor& b,
                         const Tensor& onehot) {
  if (h.rank() != 2 || theta.rank() != 2 || h.dim(1) != theta.dim(0) || b.size() != theta.dim(1))
    throw ShapeError("relu_loss_grad: h, theta and b shapes disagree");
  Tensor o = matmul(h, theta);
  add_row_bias(o, b);
  return linear_head_backward(h, theta, relu_literal_grad_raw(o, onehot));
}

LossValue relu_normalized_loss(const Tensor& scores, const Tensor& onehot) {
  require_same(scores, onehot, "relu_normalized_loss");
  const auto labels = onehot_labels(onehot);
  std::vector<double> per(labels.size());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < scores.dim(1); ++c) sum += scores.at(r, c);
    const double p = sum > 0.0 ? scores.at(r, labels[r]) / sum : 0.0;
    per[r] = -std::log10(std::max(p, kLogClamp));
  }
  return finish(std::move(per));
}

Tensor relu_normalized_grad_raw(const Tensor& raw_scores, const Tensor& onehot) {
  require_same(raw_scores, onehot, "relu_normalized_grad");
  const auto labels = onehot_labels(onehot);
  const std::size_t k = raw_scores.dim(1);
  const double n = static_cast<double>(labels.size());
  Tensor grad(raw_scores.shape());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) sum += std::max(raw_scores.at(r, c), 0.0);
    const double fk = std::max(raw_scores.at(r, labels[r]), 0.0);
    if (!(sum > 0.0) || fk / sum <= kLogClamp) continue;
    // d/df_j [-log10(f_k) + log10(S)] = (1/S - [j == k]/f_k) / ln 10
    for (std::size_t c = 0; c < k; ++c) {
      if (raw_scores.at(r, c) <= 0.0) continue;
      double g = 1.0 / sum;
      if (c == labels[r]) g -= 1.0 / fk;
      grad.at(r, c) = g / kLn10 / n;
    }
  }
  return grad;
}

std::vector<std::size_t> predict(HeadKind head, const Tensor& outputs) {
  if (outputs.rank() != 2) throw ShapeError("predict expects an N x K matrix");
  if (head == HeadKind::Relu) return argmax_last(max_with_scalar(0.0, outputs));
  return argmax_last(outputs);
}

DeadUnitStats dead_unit_stats(const Tensor& scores) {
  require_matrix(scores, "scores");
  const std::size_t n = scores.dim(0), k = scores.dim(1);
  DeadUnitStats stats;
  stats.per_class.assign(k, 0.0);
  std::size_t total = 0;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < k; ++c)
      if (scores.at(r, c) == 0.0) {
        ++total;
        stats.per_class[c] += 1.0;
      }
  for (double& v : stats.per_class) v /= static_cast<double>(n);
  stats.fraction = static_cast<double>(total) / static_cast<double>(n * k);
  return stats;
}

}  // namespace reluhead
