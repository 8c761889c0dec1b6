#include "reluhead/layers.hpp"

#include "reluhead/error.hpp"

namespace reluhead {

void Layer::zero_grad() {
  for (auto& p : params()) p.grad->fill(0.0);
}

// ---------------------------------------------------------------------------
// Dense

DenseLayer::DenseLayer(std::size_t in, std::size_t out)
    : weights_({in, out}), bias_({out}), weights_grad_({in, out}), bias_grad_({out}) {}

DenseLayer::DenseLayer(std::size_t in, std::size_t out, double init_stddev, Rng& rng)
    : DenseLayer(in, out) {
  weights_ = randn({in, out}, init_stddev, rng);
}

Tensor DenseLayer::forward(const Tensor& input, Mode) {
  if (input.rank() != 2 || input.dim(1) != weights_.dim(0))
    throw ShapeError("dense layer expects N x " + std::to_string(weights_.dim(0)) + ", got " +
                     shape_string(input.shape()));
  Tensor out = matmul(input, weights_);
  add_row_bias(out, bias_);
  input_ = input;
  return out;
}

Tensor DenseLayer::backward(const Tensor& upstream) {
  if (!input_) throw StateError("dense backward called before forward");
  if (upstream.shape() != Shape{input_->dim(0), weights_.dim(1)})
    throw ShapeError("dense upstream gradient has shape " + shape_string(upstream.shape()));
  weights_grad_ = add(weights_grad_, matmul(*input_, Transpose::Yes, upstream, Transpose::No));
  bias_grad_ = add(bias_grad_, column_sums(upstream));
  return matmul(upstream, Transpose::No, weights_, Transpose::Yes);
}

std::vector<ParamRef> DenseLayer::params() {
  return {{"weights", &weights_, &weights_grad_}, {"bias", &bias_, &bias_grad_}};
}

std::string DenseLayer::describe() const {
  return "dense:" + std::to_string(weights_.dim(0)) + ":" + std::to_string(weights_.dim(1));
}

// ---------------------------------------------------------------------------
// Conv2D

Conv2DLayer::Conv2DLayer(std::size_t in_channels, std::size_t filters)
    : kernels_({filters, in_channels, 3, 3}),
      bias_({filters}),
      kernels_grad_({filters, in_channels, 3, 3}),
      bias_grad_({filters}) {}

Conv2DLayer::Conv2DLayer(std::size_t in_channels, std::size_t filters, double init_stddev,
                         Rng& rng)
    : Conv2DLayer(in_channels, filters) {
  kernels_ = randn({filters, in_channels, 3, 3}, init_stddev, rng);
}

Tensor Conv2DLayer::forward(const Tensor& input, Mode) {
  Tensor out = conv2d_valid(input, kernels_, bias_);
  input_ = input;
  return out;
}

Tensor Conv2DLayer::backward(const Tensor& upstream) {
  if (!input_) throw StateError("conv2d backward called before forward");
  Conv2dGrads g = conv2d_valid_backward(*input_, kernels_, upstream);
  kernels_grad_ = add(kernels_grad_, g.kernels);
  bias_grad_ = add(bias_grad_, g.bias);
  return std::move(g.input);
}

std::vector<ParamRef> Conv2DLayer::params() {
  return {{"kernels", &kernels_, &kernels_grad_}, {"bias", &bias_, &bias_grad_}};
}

std::string Conv2DLayer::describe() const {
  return "conv:" + std::to_string(kernels_.dim(1)) + ":" + std::to_string(kernels_.dim(0));
}

// ---------------------------------------------------------------------------
// MaxPool

Tensor MaxPoolLayer::forward(const Tensor& input, Mode) {
  PoolResult r = maxpool2x2(input);
  input_shape_ = input.shape();
  argmax_ = std::move(r.argmax);
  cached_ = true;
  return std::move(r.output);
}

Tensor MaxPoolLayer::backward(const Tensor& upstream) {
  if (!cached_) throw StateError("maxpool backward called before forward");
  return maxpool2x2_backward(upstream, argmax_, input_shape_);
}

// ---------------------------------------------------------------------------
// Dropout

Tensor dropout_mask(double rate, const Shape& shape, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  Tensor mask(shape, 1.0);
  if (rate == 0.0) return mask;
  const double keep = 1.0 / (1.0 - rate);
  for (double& m : mask.data()) m = rng.uniform() < rate ? 0.0 : keep;
  return mask;
}

DropoutLayer::DropoutLayer(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
}

Tensor DropoutLayer::forward(const Tensor& input, Mode mode) {
  cached_ = true;
  if (mode == Mode::Eval || rate_ == 0.0) {
    mask_.reset();
    return input;
  }
  mask_ = dropout_mask(rate_, input.shape(), rng_);
  return mul(input, *mask_);
}

Tensor DropoutLayer::backward(const Tensor& upstream) {
  if (!cached_) throw StateError("dropout backward called before forward");
  return mask_ ? mul(upstream, *mask_) : upstream;
}

std::string DropoutLayer::describe() const {
  // Round-trips exactly through std::stod.
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", rate_);
  return std::string("dropout:") + buf;
}

// ---------------------------------------------------------------------------
// Flatten

Tensor FlattenLayer::forward(const Tensor& input, Mode) {
  input_shape_ = input.shape();
  return input.reshaped({input.dim(0), input.size() / input.dim(0)});
}

Tensor FlattenLayer::backward(const Tensor& upstream) {
  if (input_shape_.empty()) throw StateError("flatten backward called before forward");
  return upstream.reshaped(input_shape_);
}

// ---------------------------------------------------------------------------
// ReLU

Tensor ReluActivation::forward(const Tensor& input, Mode) {
  Tensor out = max_with_scalar(0.0, input);
  active_.resize(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) active_[i] = input[i] > 0.0;
  shape_ = input.shape();
  return out;
}

Tensor ReluActivation::backward(const Tensor& upstream) {
  if (shape_.empty()) throw StateError("relu backward called before forward");
  if (upstream.shape() != shape_) throw ShapeError("relu upstream gradient shape mismatch");
  Tensor grad(upstream.shape());
  for (std::size_t i = 0; i < upstream.size(); ++i) grad[i] = active_[i] ? upstream[i] : 0.0;
  return grad;
}

}  // namespace reluhead
