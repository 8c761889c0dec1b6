#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "reluhead/tensor.hpp"

namespace reluhead {

enum class Mode { Train, Eval };

/// A trainable tensor and its gradient slot.
struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

class Layer {
 public:
  virtual ~Layer() = default;

  /// Caches whatever `backward` needs.
  virtual Tensor forward(const Tensor& input, Mode mode) = 0;
  /// Gradient w.r.t. the layer input; parameter gradients accumulate into
  /// their slots. Throws StateError when no forward pass is cached.
  virtual Tensor backward(const Tensor& upstream) = 0;

  virtual std::vector<ParamRef> params() { return {}; }
  virtual std::size_t param_count() const { return 0; }
  /// One-token description, e.g. "dense:256:512", used in checkpoints.
  virtual std::string describe() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  void zero_grad();
};

class DenseLayer final : public Layer {
 public:
  DenseLayer(std::size_t in, std::size_t out);
  DenseLayer(std::size_t in, std::size_t out, double init_stddev, Rng& rng);

  Tensor forward(const Tensor& input, Mode mode) override;
  Tensor backward(const Tensor& upstream) override;
  std::vector<ParamRef> params() override;
  std::size_t param_count() const override { return weights_.size() + bias_.size(); }
  std::string describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<DenseLayer>(*this); }

  const Tensor& weights() const { return weights_; }
  const Tensor& bias() const { return bias_; }
  Tensor& weights() { return weights_; }
  Tensor& bias() { return bias_; }
  const Tensor& weights_grad() const { return weights_grad_; }
  const Tensor& bias_grad() const { return bias_grad_; }

 private:
  Tensor weights_;  // in x out
  Tensor bias_;
  Tensor weights_grad_;
  Tensor bias_grad_;
  std::optional<Tensor> input_;
};

/// 3x3 valid convolution.
class Conv2DLayer final : public Layer {
 public:
  Conv2DLayer(std::size_t in_channels, std::size_t filters);
  Conv2DLayer(std::size_t in_channels, std::size_t filters, double init_stddev, Rng& rng);

  Tensor forward(const Tensor& input, Mode mode) override;
  Tensor backward(const Tensor& upstream) override;
  std::vector<ParamRef> params() override;
  std::size_t param_count() const override { return kernels_.size() + bias_.size(); }
  std::string describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2DLayer>(*this); }

  Tensor& kernels() { return kernels_; }
  Tensor& bias() { return bias_; }

 private:
  Tensor kernels_;  // F x C x 3 x 3
  Tensor bias_;
  Tensor kernels_grad_;
  Tensor bias_grad_;
  std::optional<Tensor> input_;
};

class MaxPoolLayer final : public Layer {
 public:
  Tensor forward(const Tensor& input, Mode mode) override;
  Tensor backward(const Tensor& upstream) override;
  std::string describe() const override { return "maxpool"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPoolLayer>(*this); }

 private:
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
  bool cached_ = false;
};

/// Inverted dropout: train-mode outputs are scaled by 1/(1-rate) so eval
/// mode is the identity.
class DropoutLayer final : public Layer {
 public:
  DropoutLayer(double rate, std::uint64_t seed);

  Tensor forward(const Tensor& input, Mode mode) override;
  Tensor backward(const Tensor& upstream) override;
  std::string describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<DropoutLayer>(*this); }

  double rate() const { return rate_; }
  void reseed(std::uint64_t seed) { rng_ = Rng(seed); }

 private:
  double rate_;
  Rng rng_;
  std::optional<Tensor> mask_;  // empty after an eval-mode pass
  bool cached_ = false;
};

/// N x C x H x W -> N x (C*H*W).
class FlattenLayer final : public Layer {
 public:
  Tensor forward(const Tensor& input, Mode mode) override;
  Tensor backward(const Tensor& upstream) override;
  std::string describe() const override { return "flatten"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<FlattenLayer>(*this); }

 private:
  Shape input_shape_;
};

class ReluActivation final : public Layer {
 public:
  Tensor forward(const Tensor& input, Mode mode) override;
  Tensor backward(const Tensor& upstream) override;
  std::string describe() const override { return "relu"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReluActivation>(*this); }

  /// Pre-activations strictly above zero; the subgradient at 0 is 0.
  const std::vector<bool>& active() const { return active_; }

 private:
  std::vector<bool> active_;
  Shape shape_;
};

/// Entries are 0 with probability `rate`, else 1/(1-rate).
Tensor dropout_mask(double rate, const Shape& shape, Rng& rng);

}  // namespace reluhead
