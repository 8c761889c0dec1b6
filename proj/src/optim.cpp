#include "reluhead/optim.hpp"

#include <cmath>
#include <numeric>

#include "reluhead/error.hpp"

namespace reluhead {

Adam::Adam(AdamSettings settings) : settings_(settings) {
  if (!(settings.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(settings.beta1 >= 0.0 && settings.beta1 < 1.0) ||
      !(settings.beta2 >= 0.0 && settings.beta2 < 1.0))
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(settings.epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

void Adam::step(std::span<const ParamRef> params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value->shape());
      v_.emplace_back(p.value->shape());
    }
  }
  if (m_.size() != params.size()) throw StateError("Adam state tracks a different parameter set");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].value->shape() != m_[i].shape() || params[i].grad->shape() != m_[i].shape())
      throw StateError("Adam state shape mismatch for parameter '" + params[i].name + "'");

  ++t_;
  const auto& s = settings_;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* w = params[i].value->raw();
    const double* g = params[i].grad->raw();
    double* m = m_[i].raw();
    double* v = v_[i].raw();
    for (std::size_t j = 0; j < m_[i].size(); ++j) {
      m[j] = s.beta1 * m[j] + (1.0 - s.beta1) * g[j];
      v[j] = s.beta2 * v[j] + (1.0 - s.beta2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      w[j] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
    }
  }
}

Sgd::Sgd(double learning_rate) : lr_(learning_rate) {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
}

void Sgd::step(std::span<const ParamRef> params) {
  for (const auto& p : params) {
    if (p.value->shape() != p.grad->shape())
      throw StateError("gradient shape mismatch for parameter '" + p.name + "'");
    double* w = p.value->raw();
    const double* g = p.grad->raw();
    for (std::size_t j = 0; j < p.value->size(); ++j) w[j] -= lr_ * g[j];
  }
}

std::vector<std::vector<std::size_t>> minibatch_iter(std::size_t n, std::size_t batch, Rng& rng) {
  if (batch == 0) throw ConfigError("batch size must be at least 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t end = std::min(n, start + batch);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace reluhead
