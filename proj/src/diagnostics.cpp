#include "reluhead/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "reluhead/error.hpp"

namespace reluhead {

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& b : blocks) m = std::max(m, b.max_rel_error);
  return m;
}

std::size_t GradCheckReport::skipped() const {
  std::size_t s = 0;
  for (const auto& b : blocks) s += b.skipped;
  return s;
}

std::size_t GradCheckReport::coordinates() const {
  std::size_t s = 0;
  for (const auto& b : blocks) s += b.coordinates;
  return s;
}

namespace {

struct Probe {
  double loss = 0.0;
  std::vector<double> relu_inputs;  // every ReLU input, hidden and head
};

Probe evaluate_probe(Network& net, const Tensor& batch, const Tensor& onehot) {
  Shape full{batch.dim(0)};
  for (std::size_t d : net.input_shape()) full.push_back(d);
  Tensor x = batch.reshaped(full);
  Probe p;
  for (auto& layer : net.body()) {
    if (layer->describe() == "relu") {
      const auto v = x.data();
      p.relu_inputs.insert(p.relu_inputs.end(), v.begin(), v.end());
    }
    x = layer->forward(x, Mode::Eval);
  }
  ForwardOutput out;
  out.h = std::move(x);
  out.raw = matmul(out.h, net.theta());
  add_row_bias(out.raw, net.head_bias());
  if (net.head() == HeadKind::Relu) {
    const auto v = out.raw.data();
    p.relu_inputs.insert(p.relu_inputs.end(), v.begin(), v.end());
    out.output = max_with_scalar(0.0, out.raw);
  } else {
    out.output = softmax(out.raw);
  }
  p.loss = net.loss(out, onehot).mean;
  if (!std::isfinite(p.loss)) throw NumericError("gradcheck: non-finite loss");
  return p;
}

bool crosses_boundary(const Probe& plus, const Probe& minus, double band) {
  for (std::size_t i = 0; i < plus.relu_inputs.size(); ++i) {
    const double a = plus.relu_inputs[i], b = minus.relu_inputs[i];
    if (a == b) continue;  // not influenced by this coordinate
    if (std::abs(a) < band || std::abs(b) < band || (a > 0.0) != (b > 0.0)) return true;
  }
  return false;
}

}  // namespace

GradCheckReport gradcheck(const Network& original, const Tensor& batch, const Tensor& onehot,
                          const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw ConfigError("gradcheck step must be positive");
  Network net(original);
  net.forward(batch, Mode::Eval);
  const LossValue base = net.backward(onehot);
  if (!std::isfinite(base.mean)) throw NumericError("gradcheck: non-finite loss");

  GradCheckReport report;
  report.head = net.head();
  for (const ParamRef& ref : net.params()) {
    BlockCheck block;
    block.name = ref.name;
    block.coordinates = ref.value->size();
    const Tensor analytic = *ref.grad;
    double sum = 0.0;
    std::size_t checked = 0;
    for (std::size_t i = 0; i < ref.value->size(); ++i) {
      double& w = (*ref.value)[i];
      const double saved = w;
      w = saved + options.step;
      const Probe plus = evaluate_probe(net, batch, onehot);
      w = saved - options.step;
      const Probe minus = evaluate_probe(net, batch, onehot);
      w = saved;
      if (crosses_boundary(plus, minus, options.skip_band)) {
        ++block.skipped;
        continue;
      }
      const double numeric = (plus.loss - minus.loss) / (2.0 * options.step);
      const double a = analytic[i];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), options.floor});
      block.max_rel_error = std::max(block.max_rel_error, rel);
      sum += rel;
      ++checked;
    }
    block.mean_rel_error = checked ? sum / static_cast<double>(checked) : 0.0;
    report.blocks.push_back(block);
  }
  return report;
}

double dead_fraction(Network& net, const Tensor& features, std::span<const std::size_t> labels) {
  if (features.dim(0) != labels.size()) throw ShapeError("dead_fraction: rows and labels differ");
  if (labels.empty()) return 0.0;
  const Tensor out = predict_outputs(net, features);
  std::size_t dead = 0;
  for (std::size_t r = 0; r < labels.size(); ++r) dead += out.at(r, labels[r]) <= 0.0;
  return static_cast<double>(dead) / static_cast<double>(labels.size());
}

std::vector<double> dead_unit_trace(Network& net, const Tensor& train_x,
                                    std::span<const std::size_t> train_y, const Tensor& probe_x,
                                    std::span<const std::size_t> probe_y, const TrainConfig& config) {
  if (net.head() != HeadKind::Relu) throw ConfigError("dead_unit_trace needs a ReLU head");
  std::vector<double> series;
  auto optimizer = make_optimizer(config);
  train(net, train_x, train_y, config, *optimizer, [&](std::size_t, Network& n) {
    series.push_back(dead_fraction(n, probe_x, probe_y));
  });
  return series;
}

}  // namespace reluhead
