#include "reluhead/eval.hpp"

#include <cmath>

#include "reluhead/error.hpp"

namespace reluhead {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (std::uint64_t c : counts) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t k = 0; k < classes; ++k) t += at(k, k);
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t t = 0;
  for (std::size_t j = 0; j < classes; ++j) t += at(truth, j);
  return t;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t predicted) const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < classes; ++i) t += at(i, predicted);
  return t;
}

ConfusionMatrix confusion(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                          std::size_t classes) {
  if (truth.size() != predicted.size())
    throw InputError("confusion: " + std::to_string(truth.size()) + " labels vs " +
                     std::to_string(predicted.size()) + " predictions");
  ConfusionMatrix cm{classes, std::vector<std::uint64_t>(classes * classes, 0)};
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (truth[t] >= classes || predicted[t] >= classes)
      throw InputError("confusion: label out of range at position " + std::to_string(t));
    ++cm.counts[truth[t] * classes + predicted[t]];
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  return total == 0 ? 0.0 : static_cast<double>(cm.trace()) / static_cast<double>(total);
}

ClassMetrics precision_recall_f1(const ConfusionMatrix& cm) {
  const std::size_t k = cm.classes;
  ClassMetrics m;
  m.precision.assign(k, 0.0);
  m.recall.assign(k, 0.0);
  m.f1.assign(k, 0.0);
  m.support.assign(k, 0);
  std::uint64_t total = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double hit = static_cast<double>(cm.at(c, c));
    const std::uint64_t col = cm.col_sum(c), row = cm.row_sum(c);
    m.support[c] = row;
    total += row;
    if (col > 0) m.precision[c] = hit / static_cast<double>(col);
    if (row > 0) m.recall[c] = hit / static_cast<double>(row);
    const double denom = m.precision[c] + m.recall[c];
    if (denom > 0.0) m.f1[c] = 2.0 * m.precision[c] * m.recall[c] / denom;
  }
  if (total > 0) {
    for (std::size_t c = 0; c < k; ++c) {
      const double w = static_cast<double>(m.support[c]) / static_cast<double>(total);
      m.weighted_precision += w * m.precision[c];
      m.weighted_recall += w * m.recall[c];
      m.weighted_f1 += w * m.f1[c];
    }
  }
  return m;
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

CrossValResult crossval(const NetworkFactory& factory, const Dataset& ds, std::size_t k,
                        const TrainConfig& config, bool stratified) {
  Rng rng(config.seed);
  Rng plan_rng = rng.split(0);
  const FoldPlan plan =
      stratified ? stratified_kfold(ds.labels, k, plan_rng) : kfold(ds.size(), k, plan_rng);
  CrossValResult result;
  std::vector<double> accs;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const Fold& fold = plan.folds[f];
    const Dataset tr = ds.subset(fold.train), va = ds.subset(fold.validation);
    Network net = factory(f);
    TrainConfig fold_config = config;
    fold_config.seed = rng.split(f + 1).next_u64();
    auto optimizer = make_optimizer(fold_config);
    const TrainLog log = train(net, tr.features, tr.labels, fold_config, *optimizer);
    const auto pred = predict(net.head(), predict_outputs(net, va.features));
    const double acc = accuracy(confusion(va.labels, pred, ds.classes()));
    result.folds.push_back({log.loss.empty() ? 0.0 : log.loss.back(), acc});
    accs.push_back(acc);
  }
  std::tie(result.mean, result.stddev) = mean_std(accs);
  return result;
}

MetricsReport evaluate(Network& net, const Dataset& test) {
  if (test.features.rank() != 2 || test.features.dim(1) != net.input_size())
    throw ShapeError("evaluate: network takes " + std::to_string(net.input_size()) +
                     " features, test set has " + shape_string(test.features.shape()));
  MetricsReport r;
  const auto pred = predict(net.head(), predict_outputs(net, test.features));
  r.confusion = confusion(test.labels, pred, net.classes());
  r.test_accuracy = accuracy(r.confusion);
  r.metrics = precision_recall_f1(r.confusion);
  return r;
}

}  // namespace reluhead
