#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "reluhead/layers.hpp"
#include "reluhead/tensor.hpp"

namespace reluhead {

struct AdamSettings {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  /// Applies one update to every parameter from its gradient slot.
  virtual void step(std::span<const ParamRef> params) = 0;
  virtual std::string name() const = 0;
};

/// Bias-corrected Adam without weight decay.
class Adam final : public Optimizer {
 public:
  explicit Adam(AdamSettings settings = {});

  void step(std::span<const ParamRef> params) override;
  std::string name() const override { return "adam"; }

  std::uint64_t timestep() const { return t_; }
  const AdamSettings& settings() const { return settings_; }

 private:
  AdamSettings settings_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::uint64_t t_ = 0;
};

/// theta <- theta - lr * grad.
class Sgd final : public Optimizer {
 public:
  explicit Sgd(double learning_rate);

  void step(std::span<const ParamRef> params) override;
  std::string name() const override { return "sgd"; }

 private:
  double lr_;
};

/// One epoch's shuffled partition of [0, n) into batches of `batch` (the last
/// one possibly short).
std::vector<std::vector<std::size_t>> minibatch_iter(std::size_t n, std::size_t batch, Rng& rng);

}  // namespace reluhead
