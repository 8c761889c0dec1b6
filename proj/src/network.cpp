#include "reluhead/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "reluhead/error.hpp"
#include "reluhead/io.hpp"

namespace reluhead {

Network::Network(Shape input_shape, std::vector<std::unique_ptr<Layer>> body,
                 std::size_t penultimate, std::size_t classes, HeadKind head, ReluLoss relu_loss)
    : input_shape_(std::move(input_shape)),
      body_(std::move(body)),
      head_(head),
      relu_loss_(relu_loss),
      theta_({penultimate, classes}),
      b_({classes}),
      theta_grad_({penultimate, classes}),
      b_grad_({classes}) {
  if (classes < 2) throw ConfigError("a classifier needs at least two classes");
}

Network::Network(const Network& other)
    : input_shape_(other.input_shape_),
      head_(other.head_),
      relu_loss_(other.relu_loss_),
      theta_(other.theta_),
      b_(other.b_),
      theta_grad_(other.theta_grad_),
      b_grad_(other.b_grad_) {
  body_.reserve(other.body_.size());
  for (const auto& layer : other.body_) body_.push_back(layer->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) *this = Network(other);
  return *this;
}

ForwardOutput Network::forward(const Tensor& batch, Mode mode) {
  const std::size_t n = batch.dim(0);
  if (batch.size() != n * input_size())
    throw ShapeError("network expects " + std::to_string(input_size()) +
                     " features per sample, got batch " + shape_string(batch.shape()));
  Shape full{n};
  full.insert(full.end(), input_shape_.begin(), input_shape_.end());
  Tensor x = batch.shape() == full ? batch : batch.reshaped(full);
  for (auto& layer : body_) x = layer->forward(x, mode);
  if (x.rank() != 2 || x.dim(1) != penultimate_dim())
    throw ShapeError("body output " + shape_string(x.shape()) + " does not feed a head of width " +
                     std::to_string(penultimate_dim()));

  ForwardOutput out;
  out.raw = matmul(x, theta_);
  add_row_bias(out.raw, b_);
  out.output = head_ == HeadKind::Softmax ? softmax(out.raw) : max_with_scalar(0.0, out.raw);
  out.h = std::move(x);
  cache_ = out;
  return out;
}

LossValue Network::loss(const ForwardOutput& outputs, const Tensor& onehot) const {
  if (head_ == HeadKind::Softmax) return softmax_xent(outputs.raw, onehot).loss;
  if (relu_loss_ == ReluLoss::Literal) return relu_log_loss(outputs.output, onehot);
  return relu_normalized_loss(outputs.output, onehot);
}

LossValue Network::backward(const Tensor& onehot) {
  if (!cache_) throw StateError("network backward called without a cached forward pass");
  zero_grad();
  Tensor grad_raw;
  LossValue value;
  if (head_ == HeadKind::Softmax) {
    auto xent = softmax_xent(cache_->raw, onehot);
    value = std::move(xent.loss);
    grad_raw = std::move(xent.grad_logits);
  } else {
    value = loss(*cache_, onehot);
    grad_raw = relu_loss_ == ReluLoss::Literal ? relu_literal_grad_raw(cache_->raw, onehot)
                                               : relu_normalized_grad_raw(cache_->raw, onehot);
  }
  HeadGrads g = linear_head_backward(cache_->h, theta_, grad_raw);
  theta_grad_ = std::move(g.theta);
  b_grad_ = std::move(g.b);
  Tensor grad = std::move(g.h);
  for (auto it = body_.rbegin(); it != body_.rend(); ++it) grad = (*it)->backward(grad);
  return value;
}

std::vector<ParamRef> Network::params() {
  std::vector<ParamRef> all;
  for (std::size_t i = 0; i < body_.size(); ++i)
    for (auto p : body_[i]->params()) {
      p.name = "layer" + std::to_string(i) + "." + p.name;
      all.push_back(p);
    }
  all.push_back({"head.theta", &theta_, &theta_grad_});
  all.push_back({"head.bias", &b_, &b_grad_});
  return all;
}

void Network::zero_grad() {
  for (auto& layer : body_) layer->zero_grad();
  theta_grad_.fill(0.0);
  b_grad_.fill(0.0);
}

std::size_t Network::param_count() const {
  std::size_t total = theta_.size() + b_.size();
  for (const auto& layer : body_) total += layer->param_count();
  return total;
}

std::vector<LayerSummary> Network::summary() const {
  std::vector<LayerSummary> rows;
  for (const auto& layer : body_) rows.push_back({layer->describe(), layer->param_count()});
  rows.push_back({"head:" + to_string(head_) + ":" + std::to_string(penultimate_dim()) + ":" +
                      std::to_string(classes()),
                  theta_.size() + b_.size()});
  return rows;
}

std::string Network::descriptor() const {
  std::ostringstream out;
  out << "input=";
  for (std::size_t i = 0; i < input_shape_.size(); ++i) out << (i ? "x" : "") << input_shape_[i];
  out << ";head=" << to_string(head_) << ";loss=" << to_string(relu_loss_)
      << ";penultimate=" << penultimate_dim() << ";classes=" << classes() << ";layers=";
  for (std::size_t i = 0; i < body_.size(); ++i) out << (i ? "," : "") << body_[i]->describe();
  return out.str();
}

// ---------------------------------------------------------------------------
// Builders

namespace {

std::uint64_t dropout_seed(std::uint64_t seed, std::size_t index) {
  return seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL * (index + 1);
}

}  // namespace

Network build_cnn(const BuildOptions& o, std::size_t classes) {
  Rng rng(o.seed);
  std::vector<std::unique_ptr<Layer>> body;
  body.push_back(std::make_unique<Conv2DLayer>(1, 32, o.init_stddev, rng));
  body.push_back(std::make_unique<ReluActivation>());
  body.push_back(std::make_unique<Conv2DLayer>(32, 32, o.init_stddev, rng));
  body.push_back(std::make_unique<ReluActivation>());
  body.push_back(std::make_unique<MaxPoolLayer>());
  body.push_back(std::make_unique<DropoutLayer>(o.cnn_pool_dropout, dropout_seed(o.seed, 1)));
  body.push_back(std::make_unique<Conv2DLayer>(32, 64, o.init_stddev, rng));
  body.push_back(std::make_unique<ReluActivation>());
  body.push_back(std::make_unique<Conv2DLayer>(64, 64, o.init_stddev, rng));
  body.push_back(std::make_unique<ReluActivation>());
  body.push_back(std::make_unique<MaxPoolLayer>());
  body.push_back(std::make_unique<DropoutLayer>(o.cnn_pool_dropout, dropout_seed(o.seed, 2)));
  body.push_back(std::make_unique<FlattenLayer>());
  body.push_back(std::make_unique<DenseLayer>(64, 256, o.init_stddev, rng));
  body.push_back(std::make_unique<ReluActivation>());
  body.push_back(std::make_unique<DropoutLayer>(o.cnn_dense_dropout, dropout_seed(o.seed, 3)));
  Network net({1, 16, 16}, std::move(body), 256, classes, o.head, o.relu_loss);
  net.theta() = randn({256, classes}, o.init_stddev, rng);
  return net;
}

Network build_mlp(const BuildOptions& o, std::size_t input_dim,
                  const std::vector<std::size_t>& hidden, std::size_t classes) {
  Rng rng(o.seed);
  std::vector<std::unique_ptr<Layer>> body;
  std::size_t width = input_dim;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    body.push_back(std::make_unique<DenseLayer>(width, hidden[i], o.init_stddev, rng));
    body.push_back(std::make_unique<ReluActivation>());
    body.push_back(std::make_unique<DropoutLayer>(o.ffnn_dropout, dropout_seed(o.seed, i + 1)));
    width = hidden[i];
  }
  Network net({input_dim}, std::move(body), width, classes, o.head, o.relu_loss);
  net.theta() = randn({width, classes}, o.init_stddev, rng);
  return net;
}

Network build_ffnn(const BuildOptions& o, std::size_t input_dim, std::size_t classes) {
  return build_mlp(o, input_dim, {512, 512, 512}, classes);
}

Network build_ffnn_wdbc(const BuildOptions& o, std::size_t input_dim, std::size_t classes) {
  return build_mlp(o, input_dim, {64, 32}, classes);
}

// ---------------------------------------------------------------------------
// Training

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::Adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "sgd") return OptimizerKind::Sgd;
  throw ConfigError("unknown optimizer '" + name + "' (expected adam or sgd)");
}

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& config) {
  if (config.optimizer == OptimizerKind::Adam) return std::make_unique<Adam>(config.adam);
  return std::make_unique<Sgd>(config.sgd_learning_rate);
}

TrainLog train(Network& net, const Tensor& features, std::span<const std::size_t> labels,
               const TrainConfig& config, Optimizer& optimizer, const EpochCallback& on_epoch) {
  if (config.batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (features.rank() < 2 || features.dim(0) != labels.size())
    throw ShapeError("feature rows and label count differ");
  Rng rng(config.seed);
  TrainLog log;
  const std::size_t n = labels.size();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (const auto& batch : minibatch_iter(n, config.batch_size, rng)) {
      const Tensor x = features.gather_rows(batch);
      std::vector<std::size_t> y(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) y[i] = labels[batch[i]];
      const Tensor onehot = make_onehot(y, net.classes());

      const ForwardOutput out = net.forward(x, Mode::Train);
      const LossValue loss = net.backward(onehot);
      if (!std::isfinite(loss.mean))
        throw NumericError("non-finite training loss in epoch " + std::to_string(epoch + 1));
      auto params = net.params();
      optimizer.step(params);

      for (double l : loss.per_example) loss_sum += l;
      const auto pred = predict(net.head(), out.output);
      for (std::size_t i = 0; i < y.size(); ++i) correct += pred[i] == y[i];
    }
    log.loss.push_back(loss_sum / static_cast<double>(n));
    log.accuracy.push_back(static_cast<double>(correct) / static_cast<double>(n));
    if (on_epoch) on_epoch(epoch, net);
  }
  return log;
}

Tensor predict_outputs(Network& net, const Tensor& features, std::size_t chunk) {
  const std::size_t n = features.dim(0);
  Tensor out({n, net.classes()});
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t end = std::min(n, start + chunk);
    idx.resize(end - start);
    for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
    const ForwardOutput f = net.forward(features.gather_rows(idx), Mode::Eval);
    std::copy(f.output.data().begin(), f.output.data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(start * net.classes()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::endian::native == std::endian::little, "little-endian host expected");
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw CorruptError("checkpoint truncated");
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  return parts;
}

std::size_t to_size(const std::string& s) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw CorruptError("bad integer '" + s + "' in descriptor");
    return static_cast<std::size_t>(v);
  } catch (const std::logic_error&) {
    throw CorruptError("bad integer '" + s + "' in descriptor");
  }
}

std::unique_ptr<Layer> parse_layer(const std::string& token, std::size_t index) {
  const auto f = split(token, ':');
  if (f.empty()) throw CorruptError("empty layer token");
  if (f[0] == "dense" && f.size() == 3) return std::make_unique<DenseLayer>(to_size(f[1]), to_size(f[2]));
  if (f[0] == "conv" && f.size() == 3) return std::make_unique<Conv2DLayer>(to_size(f[1]), to_size(f[2]));
  if (f[0] == "relu" && f.size() == 1) return std::make_unique<ReluActivation>();
  if (f[0] == "maxpool" && f.size() == 1) return std::make_unique<MaxPoolLayer>();
  if (f[0] == "flatten" && f.size() == 1) return std::make_unique<FlattenLayer>();
  if (f[0] == "dropout" && f.size() == 2) {
    char* end = nullptr;
    const double rate = std::strtod(f[1].c_str(), &end);
    if (f[1].empty() || end != f[1].c_str() + f[1].size())
      throw CorruptError("bad dropout rate '" + f[1] + "'");
    return std::make_unique<DropoutLayer>(rate, index);
  }
  throw CorruptError("unknown layer token '" + token + "'");
}

std::vector<double> flat_values(const Network& net) {
  Network& mut = const_cast<Network&>(net);  // params() only exposes pointers
  std::vector<double> values;
  values.reserve(net.param_count());
  for (const auto& p : mut.params())
    values.insert(values.end(), p.value->data().begin(), p.value->data().end());
  return values;
}

}  // namespace

void write_container(const std::filesystem::path& path, const Container& c) {
  std::string bytes(kCheckpointMagic, 4);
  bytes.push_back(static_cast<char>(kCheckpointVersion));
  put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(c.descriptor.size()));
  bytes += c.descriptor;
  put_le<std::uint64_t>(bytes, c.values.size());
  for (double v : c.values) put_le<double>(bytes, v);
  write_file_atomic(path, bytes);
}

Container read_container(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw VersionError(path.string() + " is not a checkpoint (bad magic)");
  if (static_cast<std::uint8_t>(bytes[4]) != kCheckpointVersion)
    throw VersionError("unsupported checkpoint version " +
                       std::to_string(static_cast<unsigned>(static_cast<std::uint8_t>(bytes[4]))));
  std::size_t pos = 5;
  const auto len = get_le<std::uint32_t>(bytes, pos);
  if (pos + len > bytes.size()) throw CorruptError("checkpoint truncated in descriptor");
  Container c;
  c.descriptor = bytes.substr(pos, len);
  pos += len;
  const auto count = get_le<std::uint64_t>(bytes, pos);
  if (bytes.size() - pos != count * sizeof(double))
    throw CorruptError("checkpoint payload holds " + std::to_string(bytes.size() - pos) +
                       " bytes, expected " + std::to_string(count * sizeof(double)));
  c.values.resize(count);
  for (auto& v : c.values) v = get_le<double>(bytes, pos);
  return c;
}

void save(const Network& net, const std::filesystem::path& path) {
  write_container(path, {net.descriptor(), flat_values(net)});
}

Network load(const std::filesystem::path& path) {
  Container c = read_container(path);
  std::string input, head, loss, layers;
  std::size_t penultimate = 0, classes = 0;
  for (const auto& field : split(c.descriptor, ';')) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw CorruptError("malformed descriptor field '" + field + "'");
    const std::string key = field.substr(0, eq), value = field.substr(eq + 1);
    if (key == "input") input = value;
    else if (key == "head") head = value;
    else if (key == "loss") loss = value;
    else if (key == "penultimate") penultimate = to_size(value);
    else if (key == "classes") classes = to_size(value);
    else if (key == "layers") layers = value;
    else throw CorruptError("unknown descriptor key '" + key + "'");
  }
  Shape input_shape;
  for (const auto& d : split(input, 'x')) input_shape.push_back(to_size(d));
  std::optional<Network> built;
  try {
    std::vector<std::unique_ptr<Layer>> body;
    if (!layers.empty())
      for (const auto& token : split(layers, ',')) body.push_back(parse_layer(token, body.size()));
    built.emplace(input_shape, std::move(body), penultimate, classes, parse_head(head),
                  parse_relu_loss(loss));
  } catch (const CorruptError&) {
    throw;
  } catch (const Error& e) {
    throw CorruptError(std::string("inconsistent checkpoint descriptor: ") + e.what());
  }
  Network net = std::move(*built);
  auto params = net.params();
  std::size_t expected = 0;
  for (const auto& p : params) expected += p.value->size();
  if (expected != c.values.size())
    throw CorruptError("checkpoint holds " + std::to_string(c.values.size()) +
                       " values, architecture needs " + std::to_string(expected));
  std::size_t pos = 0;
  for (auto& p : params)
    for (double& v : p.value->data()) v = c.values[pos++];
  return net;
}

}  // namespace reluhead
