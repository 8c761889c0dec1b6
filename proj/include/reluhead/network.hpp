#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "reluhead/heads.hpp"
#include "reluhead/layers.hpp"
#include "reluhead/optim.hpp"
#include "reluhead/tensor.hpp"

namespace reluhead {

struct ForwardOutput {
  Tensor h;       // penultimate activation, N x D
  Tensor raw;     // h * theta + b, N x K
  Tensor output;  // softmax probabilities or clamped ReLU scores
};

struct LayerSummary {
  std::string description;
  std::size_t params = 0;
};

/// Ordered body layers producing the penultimate activation, followed by a
/// linear classification head (theta, b) and its output function.
class Network {
 public:
  /// `input_shape` is per-sample (e.g. {256} or {1, 16, 16}).
  Network(Shape input_shape, std::vector<std::unique_ptr<Layer>> body, std::size_t penultimate,
          std::size_t classes, HeadKind head, ReluLoss relu_loss = ReluLoss::Normalized);
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  /// `batch` is N x prod(input_shape) or N x input_shape.
  ForwardOutput forward(const Tensor& batch, Mode mode);
  /// Gradients of the mean batch loss for the cached forward pass, written
  /// into every parameter's gradient slot (previous contents are replaced).
  LossValue backward(const Tensor& onehot);
  /// Batch loss of `outputs` for this network's head and loss mode.
  LossValue loss(const ForwardOutput& outputs, const Tensor& onehot) const;

  std::vector<ParamRef> params();
  void zero_grad();
  std::size_t param_count() const;
  /// Body layers followed by the head ("head:<kind>:D:K").
  std::vector<LayerSummary> summary() const;

  HeadKind head() const { return head_; }
  ReluLoss relu_loss() const { return relu_loss_; }
  void set_relu_loss(ReluLoss loss) { relu_loss_ = loss; }
  std::size_t classes() const { return theta_.dim(1); }
  std::size_t penultimate_dim() const { return theta_.dim(0); }
  const Shape& input_shape() const { return input_shape_; }
  std::size_t input_size() const { return shape_size(input_shape_); }

  Tensor& theta() { return theta_; }
  Tensor& head_bias() { return b_; }
  const Tensor& theta() const { return theta_; }
  const Tensor& head_bias() const { return b_; }
  const Tensor& theta_grad() const { return theta_grad_; }
  const Tensor& head_bias_grad() const { return b_grad_; }
  std::vector<std::unique_ptr<Layer>>& body() { return body_; }

  /// Text form of the architecture, parsed back by `load`.
  std::string descriptor() const;

 private:
  Shape input_shape_;
  std::vector<std::unique_ptr<Layer>> body_;
  HeadKind head_;
  ReluLoss relu_loss_;
  Tensor theta_;
  Tensor b_;
  Tensor theta_grad_;
  Tensor b_grad_;
  std::optional<ForwardOutput> cache_;
};

struct BuildOptions {
  HeadKind head = HeadKind::Softmax;
  ReluLoss relu_loss = ReluLoss::Normalized;
  std::uint64_t seed = 0;
  double init_stddev = 0.05;
  double cnn_pool_dropout = 0.25;
  double cnn_dense_dropout = 0.5;
  double ffnn_dropout = 0.2;
};

/// VGG-like CNN on a 1 x 16 x 16 input: conv32-conv32-pool-drop-conv64-conv64-
/// pool-drop-flatten-dense256-drop-head.
Network build_cnn(const BuildOptions& options, std::size_t classes = 10);
/// Three dense(512) hidden layers with dropout, then the head.
Network build_ffnn(const BuildOptions& options, std::size_t input_dim = 256,
                   std::size_t classes = 10);
/// dense(64)-drop-dense(32)-drop-head for the 30-feature WDBC task.
Network build_ffnn_wdbc(const BuildOptions& options, std::size_t input_dim = 30,
                        std::size_t classes = 2);
/// Dense ReLU stack with dropout after every hidden layer.
Network build_mlp(const BuildOptions& options, std::size_t input_dim,
                  const std::vector<std::size_t>& hidden, std::size_t classes);

enum class OptimizerKind { Adam, Sgd };
std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& name);

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::Adam;
  AdamSettings adam{};
  double sgd_learning_rate = 1e-3;
};

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& config);

struct TrainLog {
  std::vector<double> loss;      // mean per-example training loss per epoch
  std::vector<double> accuracy;  // train-mode accuracy per epoch
};

using EpochCallback = std::function<void(std::size_t epoch, Network& net)>;

/// Mini-batch training. Throws NumericError if a batch loss is not finite.
TrainLog train(Network& net, const Tensor& features, std::span<const std::size_t> labels,
               const TrainConfig& config, Optimizer& optimizer,
               const EpochCallback& on_epoch = {});

/// Eval-mode forward in chunks; returns the head outputs for every row.
Tensor predict_outputs(Network& net, const Tensor& features, std::size_t chunk = 1000);

// Checkpoint container: "RLH1", version byte, u32 LE descriptor length,
// descriptor text, u64 LE value count, values as LE float64.
inline constexpr char kCheckpointMagic[4] = {'R', 'L', 'H', '1'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct Container {
  std::string descriptor;
  std::vector<double> values;
};

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

void save(const Network& net, const std::filesystem::path& path);
Network load(const std::filesystem::path& path);

}  // namespace reluhead
