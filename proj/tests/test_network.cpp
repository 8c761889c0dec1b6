#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "reluhead/data.hpp"
#include "reluhead/diagnostics.hpp"
#include "reluhead/error.hpp"
#include "reluhead/io.hpp"
#include "reluhead/network.hpp"

using namespace reluhead;
namespace fs = std::filesystem;

namespace {

std::vector<std::size_t> dense_param_counts(const Network& net) {
  std::vector<std::size_t> counts;
  for (const auto& s : net.summary())
    if (s.params > 0) counts.push_back(s.params);
  return counts;
}

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "reluhead_tests";
  fs::create_directories(dir);
  return dir / name;
}

Network tiny(HeadKind head, std::uint64_t seed = 0) {
  BuildOptions o;
  o.head = head;
  o.seed = seed;
  o.init_stddev = 0.5;
  return build_mlp(o, 8, {6, 5}, 3);
}

}  // namespace

TEST(Builders, CnnParameterCounts) {
  const Network cnn = build_cnn({});
  EXPECT_EQ(dense_param_counts(cnn),
            (std::vector<std::size_t>{320, 9248, 18496, 36928, 16640, 2570}));
  EXPECT_EQ(cnn.param_count(), 84202u);
}

TEST(Builders, FfnnParameterCounts) {
  const Network ffnn = build_ffnn({});
  EXPECT_EQ(dense_param_counts(ffnn), (std::vector<std::size_t>{131584, 262656, 262656, 5130}));
  EXPECT_EQ(ffnn.param_count(), 662026u);
}

TEST(Builders, WdbcParameterCounts) {
  EXPECT_EQ(dense_param_counts(build_ffnn_wdbc({})), (std::vector<std::size_t>{1984, 2080, 66}));
}

TEST(Builders, SeededInitIsReproducible) {
  BuildOptions o;
  o.seed = 17;
  Network a = build_ffnn(o), b = build_ffnn(o);
  auto pa = a.params(), pb = b.params();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i].value, *pb[i].value);
}

TEST(NetworkForward, ZeroWeightsGiveUniformOrZeroOutputs) {
  for (HeadKind head : {HeadKind::Softmax, HeadKind::Relu}) {
    Network net = tiny(head);
    for (auto& p : net.params()) p.value->fill(0.0);
    Rng rng(1);
    const ForwardOutput out = net.forward(randn({4, 8}, 1.0, rng), Mode::Eval);
    EXPECT_EQ(out.output.shape(), (Shape{4, 3}));
    for (double v : out.output.data())
      EXPECT_NEAR(v, head == HeadKind::Softmax ? 1.0 / 3.0 : 0.0, 1e-15);
  }
}

TEST(NetworkForward, ShapeMismatchIsShapeError) {
  Network net = tiny(HeadKind::Softmax);
  EXPECT_THROW(net.forward(Tensor({2, 7}), Mode::Eval), ShapeError);
}

TEST(NetworkBackward, NeedsForward) {
  Network net = tiny(HeadKind::Softmax);
  EXPECT_THROW(net.backward(make_onehot(std::vector<std::size_t>{0}, 3)), StateError);
}

TEST(NetworkBackward, FiniteDifferencesBothHeads) {
  for (HeadKind head : {HeadKind::Softmax, HeadKind::Relu}) {
    Network net = tiny(head, 3);
    if (head == HeadKind::Relu)
      for (double& b : net.head_bias().data()) b = 1.0;
    Rng rng(4);
    const Tensor x = randn({4, 8}, 1.0, rng);
    const Tensor y = make_onehot(std::vector<std::size_t>{0, 1, 2, 0}, 3);
    const GradCheckReport r = gradcheck(net, x, y);
    EXPECT_LT(r.max_rel_error(), head == HeadKind::Softmax ? 1e-6 : 1e-4);
  }
}

TEST(NetworkBackward, DeadBatchHasZeroHeadGradients) {
  for (ReluLoss loss : {ReluLoss::Literal, ReluLoss::Normalized}) {
    Network net = tiny(HeadKind::Relu);
    net.set_relu_loss(loss);
    net.theta().fill(0.0);
    net.head_bias().fill(-5.0);
    Rng rng(5);
    net.forward(randn({4, 8}, 1.0, rng), Mode::Train);
    net.backward(make_onehot(std::vector<std::size_t>{0, 1, 2, 0}, 3));
    for (double v : net.theta_grad().data()) EXPECT_EQ(v, 0.0);
    for (double v : net.head_bias_grad().data()) EXPECT_EQ(v, 0.0);
  }
}

TEST(NetworkBackward, SoftmaxHeadInputGradientIsResidualTimesThetaT) {
  // 2 examples, D = K = 2, no hidden layers: grad_h = (p - y) theta^T / N.
  std::vector<std::unique_ptr<Layer>> body;
  Network net({2}, std::move(body), 2, 2, HeadKind::Softmax);
  net.theta() = Tensor::matrix({{0.3, -0.2}, {0.1, 0.4}});
  net.head_bias() = Tensor::vector({0.05, -0.05});
  const Tensor x = Tensor::matrix({{1.0, 2.0}, {-1.0, 0.5}});
  const Tensor y = make_onehot(std::vector<std::size_t>{1, 0}, 2);
  net.forward(x, Mode::Train);
  net.backward(y);
  // Symbolic: theta grad = h^T (p - y) / N.
  Tensor o = oracle::matmul(x, net.theta());
  add_row_bias(o, net.head_bias());
  const Tensor p = softmax(o);
  const Tensor resid = scale(0.5, sub(p, y));
  const Tensor expected = oracle::matmul(x.transposed(), resid);
  EXPECT_LT(oracle::max_rel_error(net.theta_grad(), expected), 1e-14);
  // And the input-side contribution row-wise equals (p - y) theta^T.
  const Tensor gh = oracle::matmul(resid, net.theta().transposed());
  const HeadGrads hg = linear_head_backward(x, net.theta(), resid);
  EXPECT_LT(oracle::max_rel_error(hg.h, gh), 1e-14);
}

TEST(NetworkEval, DeterministicAndDropoutFree) {
  BuildOptions o;
  o.ffnn_dropout = 0.5;
  Network net = build_mlp(o, 8, {16}, 3);
  Rng rng(6);
  const Tensor x = randn({5, 8}, 1.0, rng);
  EXPECT_EQ(net.forward(x, Mode::Eval).output, net.forward(x, Mode::Eval).output);
}

namespace {

struct Toy {
  Tensor x;
  std::vector<std::size_t> y;
};

Toy blobs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Toy t{Tensor({n, 8}), {}};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % 3;
    t.y.push_back(label);
    for (std::size_t j = 0; j < 8; ++j)
      t.x.at(i, j) = rng.gaussian() * 0.5 + (j % 3 == label ? 2.0 : 0.0);
  }
  return t;
}

}  // namespace

TEST(Train, ReducesLossAndIsDeterministic) {
  const Toy toy = blobs(120, 1);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.seed = 9;
  auto run = [&] {
    Network net = tiny(HeadKind::Softmax, 2);
    auto opt = make_optimizer(cfg);
    return train(net, toy.x, toy.y, cfg, *opt);
  };
  const TrainLog a = run(), b = run();
  ASSERT_EQ(a.loss.size(), 3u);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_LT(a.loss.back(), a.loss.front());
}

TEST(Train, ZeroEpochsLeavesParametersUntouched) {
  const Toy toy = blobs(30, 2);
  Network net = tiny(HeadKind::Relu);
  const Network before = net;
  TrainConfig cfg;
  cfg.epochs = 0;
  auto opt = make_optimizer(cfg);
  const TrainLog log = train(net, toy.x, toy.y, cfg, *opt);
  EXPECT_TRUE(log.loss.empty());
  auto pa = net.params();
  auto pb = const_cast<Network&>(before).params();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i].value, *pb[i].value);
}

TEST(Train, BadHyperparametersAreConfigErrors) {
  const Toy toy = blobs(30, 3);
  Network net = tiny(HeadKind::Softmax);
  TrainConfig cfg;
  cfg.batch_size = 0;
  Sgd sgd(0.1);
  EXPECT_THROW(train(net, toy.x, toy.y, cfg, sgd), ConfigError);
  cfg.optimizer = OptimizerKind::Sgd;
  cfg.sgd_learning_rate = -1.0;
  EXPECT_THROW(make_optimizer(cfg), ConfigError);
}

TEST(Train, NonFiniteLossIsNumericError) {
  Toy toy = blobs(30, 4);
  toy.x.at(0, 0) = NAN;
  Network net = tiny(HeadKind::Softmax);
  TrainConfig cfg;
  cfg.epochs = 1;
  auto opt = make_optimizer(cfg);
  EXPECT_THROW(train(net, toy.x, toy.y, cfg, *opt), NumericError);
}

TEST(Train, OneEpochOnHundredMnistSamplesReducesLoss) {
  const fs::path dir = default_data_dir();
  if (!fs::exists(dir / "mnist" / "t10k-images-idx3-ubyte.gz")) GTEST_SKIP() << "MNIST not cached";
  const Dataset test = load_idx(dir / "mnist" / "t10k-images-idx3-ubyte.gz",
                                dir / "mnist" / "t10k-labels-idx1-ubyte.gz");
  std::vector<std::size_t> first(100);
  for (std::size_t i = 0; i < 100; ++i) first[i] = i;
  const Dataset small = test.subset(first);
  for (HeadKind head : {HeadKind::Softmax, HeadKind::Relu}) {
    BuildOptions o;
    o.head = head;
    Network net = build_ffnn(o, 784);
    const Tensor onehot = make_onehot(small.labels, 10);
    const double initial = net.loss(net.forward(small.features, Mode::Eval), onehot).mean;
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 10;
    auto opt = make_optimizer(cfg);
    train(net, small.features, small.labels, cfg, *opt);
    const double after = net.loss(net.forward(small.features, Mode::Eval), onehot).mean;
    EXPECT_LT(after, initial) << to_string(head);
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  for (HeadKind head : {HeadKind::Softmax, HeadKind::Relu}) {
    BuildOptions o;
    o.head = head;
    o.relu_loss = ReluLoss::Literal;
    o.seed = 5;
    o.cnn_pool_dropout = 0.1 + 1e-17;  // text encoding must not round
    const Network net = build_cnn(o);
    const fs::path a = temp_path("a.ckpt"), b = temp_path("b.ckpt");
    save(net, a);
    Network loaded = load(a);
    save(loaded, b);
    EXPECT_EQ(read_file(a), read_file(b));
    EXPECT_EQ(loaded.descriptor(), net.descriptor());
    EXPECT_EQ(loaded.head(), head);
    EXPECT_EQ(loaded.relu_loss(), ReluLoss::Literal);
    auto pa = const_cast<Network&>(net).params();
    auto pb = loaded.params();
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i].value, *pb[i].value);
  }
}

TEST(Checkpoint, RandomizedRoundTrips) {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    BuildOptions o;
    o.seed = rng.next_u64();
    o.head = trial % 2 ? HeadKind::Relu : HeadKind::Softmax;
    o.ffnn_dropout = rng.uniform() * 0.9;
    std::vector<std::size_t> hidden;
    for (std::uint64_t i = 0, n = 1 + rng.below(3); i < n; ++i) hidden.push_back(1 + rng.below(9));
    Network net = build_mlp(o, 1 + rng.below(6), hidden, 2 + rng.below(4));
    for (auto& p : net.params())
      for (double& v : p.value->data()) v = rng.gaussian() * 1e3;
    const fs::path path = temp_path("r.ckpt");
    save(net, path);
    Network back = load(path);
    auto pa = net.params(), pb = back.params();
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i].value, *pb[i].value);
    EXPECT_EQ(back.descriptor(), net.descriptor());
  }
}

TEST(Checkpoint, TruncatedFileIsCorrupt) {
  const fs::path path = temp_path("t.ckpt");
  save(build_ffnn_wdbc({}), path);
  std::string bytes = read_file(path);
  bytes.resize(bytes.size() - 3);
  write_file_atomic(path, bytes);
  EXPECT_THROW(load(path), CorruptError);
}

TEST(Checkpoint, WrongMagicOrVersionIsVersionError) {
  const fs::path path = temp_path("m.ckpt");
  save(build_ffnn_wdbc({}), path);
  std::string bytes = read_file(path);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  write_file_atomic(path, bad_magic);
  EXPECT_THROW(load(path), VersionError);
  std::string bad_version = bytes;
  bad_version[4] = 2;
  write_file_atomic(path, bad_version);
  EXPECT_THROW(load(path), VersionError);
}

TEST(Checkpoint, MalformedDescriptorIsCorrupt) {
  const fs::path path = temp_path("d.ckpt");
  write_container(path, {"input=8;head=softmax;loss=normalized;penultimate=4;classes=2;"
                         "layers=dense:8:4,dropout:abc",
                         std::vector<double>(46)});
  EXPECT_THROW(load(path), CorruptError);
  write_container(path, {"input=8;head=softmax;loss=normalized;penultimate=4;classes=2;"
                         "layers=dense:8:4,dropout:2.5",
                         std::vector<double>(46)});
  EXPECT_THROW(load(path), CorruptError);
  write_container(path, {"input=8;head=softmax;loss=normalized;penultimate=4;classes=2;"
                         "layers=dense:8:4",
                         std::vector<double>(45)});
  EXPECT_THROW(load(path), CorruptError);
}

TEST(Checkpoint, MissingFileIsIoError) {
  EXPECT_THROW(load(temp_path("does-not-exist.ckpt")), IoError);
}
