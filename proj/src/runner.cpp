#include "reluhead/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <json.hpp>

#include "reluhead/error.hpp"
#include "reluhead/io.hpp"

namespace reluhead {

using nlohmann::ordered_json;

std::string to_string(ModelKind kind) { return kind == ModelKind::Cnn ? "cnn" : "ffnn"; }

ModelKind parse_model(const std::string& name) {
  if (name == "ffnn") return ModelKind::Ffnn;
  if (name == "cnn") return ModelKind::Cnn;
  throw ConfigError("unknown model '" + name + "' (expected ffnn or cnn)");
}

namespace {

std::size_t raw_feature_dim(DatasetId id) { return id == DatasetId::Wdbc ? 30 : 784; }

bool is_rate(double r) { return r >= 0.0 && r < 1.0; }

}  // namespace

std::size_t effective_pca_dims(const RunConfig& c) {
  if (c.pca_dims) return *c.pca_dims;
  return c.dataset == DatasetId::Wdbc ? 0 : 256;
}

void validate(const RunConfig& c) {
  const std::size_t pca = effective_pca_dims(c);
  if (c.model == ModelKind::Cnn && c.dataset == DatasetId::Wdbc)
    throw ConfigError("the cnn model needs an image dataset (mnist or fashion)");
  if (c.model == ModelKind::Cnn && pca != 256)
    throw ConfigError("the cnn model reads a 16x16 input, so --pca-dims must be 256");
  if (pca > raw_feature_dim(c.dataset))
    throw ConfigError("--pca-dims " + std::to_string(pca) + " exceeds the " +
                      std::to_string(raw_feature_dim(c.dataset)) + " input features");
  if (c.epochs == 0) throw ConfigError("--epochs must be at least 1");
  if (c.batch_size == 0) throw ConfigError("--batch-size must be at least 1");
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate))
    throw ConfigError("--learning-rate must be positive");
  if (!is_rate(c.beta1) || !is_rate(c.beta2)) throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(c.epsilon > 0.0)) throw ConfigError("--epsilon must be positive");
  if (!(c.init_stddev > 0.0)) throw ConfigError("--init-stddev must be positive");
  if (!is_rate(c.cnn_pool_dropout) || !is_rate(c.cnn_dense_dropout) || !is_rate(c.ffnn_dropout))
    throw ConfigError("dropout rates must lie in [0, 1)");
  if (c.cv_folds < 2) throw ConfigError("--cv-folds must be at least 2");
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0))
    throw ConfigError("--test-fraction must lie in (0, 1)");
}

std::string config_json(const RunConfig& c) {
  ordered_json j;
  j["dataset"] = to_string(c.dataset);
  j["model"] = to_string(c.model);
  j["head"] = to_string(c.head);
  j["relu_loss"] = to_string(c.relu_loss);
  j["seed"] = c.seed;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["optimizer"] = to_string(c.optimizer);
  j["learning_rate"] = c.learning_rate;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["epsilon"] = c.epsilon;
  j["pca_dims"] = effective_pca_dims(c);
  j["scale"] = c.scale;
  j["init_stddev"] = c.init_stddev;
  j["cnn_pool_dropout"] = c.cnn_pool_dropout;
  j["cnn_dense_dropout"] = c.cnn_dense_dropout;
  j["ffnn_dropout"] = c.ffnn_dropout;
  j["cv_folds"] = c.cv_folds;
  j["stratified_folds"] = c.stratified_folds;
  j["test_fraction"] = c.test_fraction;
  j["train_limit"] = c.train_limit;
  j["output_dir"] = c.output_dir.string();
  j["data_dir"] = c.data_dir.string();
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Data

void fit_preprocessing(const RunConfig& c, PreparedData& d) {
  if (c.scale) {
    d.scaler = scaler_fit(d.train.features);
    d.train.features = scaler_transform(*d.scaler, d.train.features);
    if (d.test.size() > 0) d.test.features = scaler_transform(*d.scaler, d.test.features);
  }
  const std::size_t dims = effective_pca_dims(c);
  if (dims > 0) {
    d.pca = pca_fit(d.train.features, dims);
    d.train.features = pca_transform(*d.pca, d.train.features);
    if (d.test.size() > 0) d.test.features = pca_transform(*d.pca, d.test.features);
  }
}

PreparedData prepare_data(const RunConfig& c) {
  validate(c);
  const std::filesystem::path dir = c.data_dir.empty() ? default_data_dir() : c.data_dir;
  LoadedSplits loaded = load_cached(c.dataset, dir);
  PreparedData d;
  for (const auto& path : loaded.files) {
    const std::string bytes = read_file(path);
    d.inputs.push_back({path, bytes.size(), fnv1a_hex(bytes)});
  }
  if (c.dataset == DatasetId::Wdbc) {
    Rng rng = Rng(c.seed).split(11);
    std::tie(d.train, d.test) = split_train_test(loaded.train, c.test_fraction, rng);
  } else {
    d.train = std::move(loaded.train);
    d.test = std::move(loaded.test);
  }
  if (c.train_limit > 0 && c.train_limit < d.train.size()) {
    std::vector<std::size_t> keep(c.train_limit);
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
    d.train = d.train.subset(keep);
  }
  fit_preprocessing(c, d);
  return d;
}

Network build_network(const RunConfig& c, std::size_t input_dim, std::size_t classes) {
  BuildOptions o;
  o.head = c.head;
  o.relu_loss = c.relu_loss;
  o.seed = c.seed;
  o.init_stddev = c.init_stddev;
  o.cnn_pool_dropout = c.cnn_pool_dropout;
  o.cnn_dense_dropout = c.cnn_dense_dropout;
  o.ffnn_dropout = c.ffnn_dropout;
  if (c.model == ModelKind::Cnn) {
    if (input_dim != 256) throw ConfigError("the cnn model needs 256 input features");
    return build_cnn(o, classes);
  }
  if (c.dataset == DatasetId::Wdbc) return build_ffnn_wdbc(o, input_dim, classes);
  return build_ffnn(o, input_dim, classes);
}

TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  t.epochs = c.epochs;
  t.batch_size = c.batch_size;
  t.seed = Rng(c.seed).split(7).next_u64();  // batch order independent of init draws
  t.optimizer = c.optimizer;
  t.adam = {c.learning_rate, c.beta1, c.beta2, c.epsilon};
  t.sgd_learning_rate = c.learning_rate;
  return t;
}

// ---------------------------------------------------------------------------
// Tables

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

std::string to_csv(const Table& rows) {
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      const bool quote = row[i].find_first_of(",\"") != std::string::npos;
      if (!quote) {
        out += row[i];
        continue;
      }
      out += '"';
      for (char ch : row[i]) {
        if (ch == '"') out += '"';
        out += ch;
      }
      out += '"';
    }
    out += '\n';
  }
  return out;
}

std::string to_aligned_text(const Table& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::string out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) line += "  ";
      const std::string pad(width[i] - row[i].size(), ' ');
      line += i == 0 ? row[i] + pad : pad + row[i];
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
  }
  return out;
}

namespace {

void write_table(const std::filesystem::path& dir, const std::string& stem, const Table& rows) {
  write_file_atomic(dir / (stem + ".csv"), to_csv(rows));
  write_file_atomic(dir / (stem + ".txt"), to_aligned_text(rows));
}

std::string csv_number(double v) { return format_fixed(v, 6); }

Table report_table(const MetricsReport& r, const std::vector<std::string>& names) {
  Table t{{"class", "name", "precision", "recall", "f1", "support"}};
  const auto& m = r.metrics;
  for (std::size_t k = 0; k < m.precision.size(); ++k)
    t.push_back({std::to_string(k), k < names.size() ? names[k] : "", csv_number(m.precision[k]),
                 csv_number(m.recall[k]), csv_number(m.f1[k]), std::to_string(m.support[k])});
  t.push_back({"weighted", "", csv_number(m.weighted_precision), csv_number(m.weighted_recall),
               csv_number(m.weighted_f1), std::to_string(r.confusion.total())});
  t.push_back({"accuracy", "", "", "", csv_number(r.test_accuracy),
               std::to_string(r.confusion.total())});
  return t;
}

Table confusion_table(const ConfusionMatrix& cm) {
  Table t;
  for (std::size_t i = 0; i < cm.classes; ++i) {
    std::vector<std::string> row;
    for (std::size_t j = 0; j < cm.classes; ++j) row.push_back(std::to_string(cm.at(i, j)));
    t.push_back(std::move(row));
  }
  return t;
}

Table folds_table(const CrossValResult& cv) {
  Table t{{"fold", "loss", "accuracy"}};
  std::vector<double> losses;
  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    t.push_back({std::to_string(f + 1), csv_number(cv.folds[f].loss),
                 csv_number(cv.folds[f].accuracy)});
    losses.push_back(cv.folds[f].loss);
  }
  const auto [loss_mean, loss_std] = mean_std(losses);
  t.push_back({"mean", csv_number(loss_mean), csv_number(cv.mean)});
  t.push_back({"std", csv_number(loss_std), csv_number(cv.stddev)});
  return t;
}

ordered_json inputs_json(const std::vector<InputFile>& inputs) {
  ordered_json arr = ordered_json::array();
  for (const auto& f : inputs)
    arr.push_back({{"path", f.path.string()}, {"bytes", f.bytes}, {"fnv1a64", f.fnv1a}});
  return arr;
}

ordered_json cv_json(const CrossValResult& cv) {
  ordered_json folds = ordered_json::array();
  for (const auto& f : cv.folds) folds.push_back({{"loss", f.loss}, {"accuracy", f.accuracy}});
  return {{"folds", folds}, {"mean", cv.mean}, {"std", cv.stddev}};
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

CrossValResult crossval_on(const RunConfig& c, const Dataset& train) {
  const std::size_t dim = train.feature_dim(), classes = train.classes();
  RunConfig fold_config = c;
  const NetworkFactory factory = [&](std::size_t fold) {
    fold_config.seed = Rng(c.seed).split(100 + fold).next_u64();
    return build_network(fold_config, dim, classes);
  };
  return crossval(factory, train, c.cv_folds, train_config(c), c.stratified_folds);
}

}  // namespace

TrainOutcome run_train(const RunConfig& c, bool with_cv) {
  const auto start = std::chrono::steady_clock::now();
  PreparedData d = prepare_data(c);
  std::filesystem::create_directories(c.output_dir);
  TrainOutcome outcome;
  if (with_cv) outcome.cv = crossval_on(c, d.train);

  Network net = build_network(c, d.train.feature_dim(), d.train.classes());
  const TrainConfig tc = train_config(c);
  auto optimizer = make_optimizer(tc);

  // Probe for the dead-unit series: the first (up to) 1000 training rows.
  std::vector<std::size_t> probe_idx(std::min<std::size_t>(1000, d.train.size()));
  for (std::size_t i = 0; i < probe_idx.size(); ++i) probe_idx[i] = i;
  const Dataset probe = d.train.subset(probe_idx);
  EpochCallback on_epoch;
  if (c.head == HeadKind::Relu)
    on_epoch = [&](std::size_t, Network& n) {
      outcome.dead_trace.push_back(dead_fraction(n, probe.features, probe.labels));
    };
  outcome.log = train(net, d.train.features, d.train.labels, tc, *optimizer, on_epoch);
  outcome.report = evaluate(net, d.test);
  if (outcome.cv) {
    outcome.report.cv_mean = outcome.cv->mean;
    outcome.report.cv_std = outcome.cv->stddev;
    outcome.report.folds = outcome.cv->folds;
  }

  const auto& dir = c.output_dir;
  save(net, dir / "model.ckpt");
  if (d.scaler) save_scaler(*d.scaler, dir / "scaler.ckpt");
  if (d.pca) save_pca(*d.pca, dir / "pca.ckpt");
  write_table(dir, "report", report_table(outcome.report, d.train.class_names));
  write_table(dir, "confusion", confusion_table(outcome.report.confusion));
  if (outcome.cv) write_table(dir, "folds", folds_table(*outcome.cv));
  outcome.seconds = seconds_since(start);

  const auto& m = outcome.report.metrics;
  ordered_json manifest;
  manifest["command"] = "train";
  manifest["config"] = ordered_json::parse(config_json(c));
  manifest["inputs"] = inputs_json(d.inputs);
  manifest["train_size"] = d.train.size();
  manifest["test_size"] = d.test.size();
  manifest["parameters"] = net.param_count();
  manifest["wall_clock_seconds"] = outcome.seconds;
  ordered_json metrics{{"test_accuracy", outcome.report.test_accuracy},
                       {"weighted_precision", m.weighted_precision},
                       {"weighted_recall", m.weighted_recall},
                       {"weighted_f1", m.weighted_f1}};
  if (outcome.cv) {
    metrics["cv_mean"] = outcome.cv->mean;
    metrics["cv_std"] = outcome.cv->stddev;
  }
  manifest["metrics"] = metrics;
  manifest["train_log"] = {{"loss", outcome.log.loss}, {"accuracy", outcome.log.accuracy}};
  if (!outcome.dead_trace.empty()) manifest["dead_fraction_per_epoch"] = outcome.dead_trace;
  if (outcome.cv) manifest["crossval"] = cv_json(*outcome.cv);
  ordered_json artifacts{{"report", "report.csv"}, {"confusion", "confusion.csv"},
                         {"model", "model.ckpt"}};
  if (d.scaler) artifacts["scaler"] = "scaler.ckpt";
  if (d.pca) artifacts["pca"] = "pca.ckpt";
  if (outcome.cv) artifacts["folds"] = "folds.csv";
  manifest["artifacts"] = artifacts;
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  return outcome;
}

CrossValResult run_crossval(const RunConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  PreparedData d = prepare_data(c);
  std::filesystem::create_directories(c.output_dir);
  const CrossValResult cv = crossval_on(c, d.train);
  write_table(c.output_dir, "folds", folds_table(cv));
  ordered_json manifest;
  manifest["command"] = "crossval";
  manifest["config"] = ordered_json::parse(config_json(c));
  manifest["inputs"] = inputs_json(d.inputs);
  manifest["train_size"] = d.train.size();
  manifest["wall_clock_seconds"] = seconds_since(start);
  manifest["metrics"] = {{"cv_mean", cv.mean}, {"cv_std", cv.stddev}};
  manifest["crossval"] = cv_json(cv);
  manifest["artifacts"] = {{"folds", "folds.csv"}};
  write_file_atomic(c.output_dir / "manifest.json", manifest.dump(2) + "\n");
  return cv;
}

// ---------------------------------------------------------------------------
// Compare

RunSummary read_summary(const std::filesystem::path& run_dir) {
  const auto path = run_dir / "manifest.json";
  if (!std::filesystem::exists(path)) throw ConfigError(path.string() + " does not exist");
  ordered_json j;
  try {
    j = ordered_json::parse(read_file(path));
    RunSummary s;
    const auto& cfg = j.at("config");
    s.dataset = cfg.at("dataset").get<std::string>();
    s.model = cfg.at("model").get<std::string>();
    s.head = cfg.at("head").get<std::string>();
    s.seed = cfg.at("seed").get<std::uint64_t>();
    const auto& m = j.at("metrics");
    if (m.contains("cv_mean")) s.cv_mean = m.at("cv_mean").get<double>();
    s.test_accuracy = m.at("test_accuracy").get<double>();
    s.precision = m.at("weighted_precision").get<double>();
    s.recall = m.at("weighted_recall").get<double>();
    s.f1 = m.at("weighted_f1").get<double>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + " is not a train manifest: " + e.what());
  }
}

void write_compare(const RunSummary& a, const RunSummary& b, const std::filesystem::path& dir) {
  if (a.dataset != b.dataset || a.model != b.model || a.seed != b.seed)
    throw ConfigError("compared runs must share dataset, model and seed (" + a.dataset + "/" +
                      a.model + "/" + std::to_string(a.seed) + " vs " + b.dataset + "/" +
                      b.model + "/" + std::to_string(b.seed) + ")");
  const std::string left = a.model + "-" + a.head, right = b.model + "-" + b.head;
  auto cv = [](const RunSummary& s, bool pct) {
    if (!s.cv_mean) return std::string("n/a");
    return pct ? format_fixed(100.0 * *s.cv_mean, 2) + "%" : csv_number(*s.cv_mean);
  };
  Table csv{{"metric", left, right},
            {"cv_accuracy", cv(a, false), cv(b, false)},
            {"test_accuracy", csv_number(a.test_accuracy), csv_number(b.test_accuracy)},
            {"precision", csv_number(a.precision), csv_number(b.precision)},
            {"recall", csv_number(a.recall), csv_number(b.recall)},
            {"f1", csv_number(a.f1), csv_number(b.f1)}};
  Table text{{"", left, right},
             {"Cross-validation accuracy", cv(a, true), cv(b, true)},
             {"Test accuracy", format_fixed(100.0 * a.test_accuracy, 2) + "%",
              format_fixed(100.0 * b.test_accuracy, 2) + "%"},
             {"Precision", format_fixed(a.precision, 2), format_fixed(b.precision, 2)},
             {"Recall", format_fixed(a.recall, 2), format_fixed(b.recall, 2)},
             {"F1-score", format_fixed(a.f1, 2), format_fixed(b.f1, 2)}};
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "compare.csv", to_csv(csv));
  write_file_atomic(dir / "compare.txt", to_aligned_text(text));
}

// ---------------------------------------------------------------------------
// Gradient check

namespace {

struct Toy {
  std::string label;
  Network net;
  Tensor batch;
  Tensor onehot;
};

Toy dense_toy(HeadKind head, ReluLoss loss, std::uint64_t seed) {
  BuildOptions o;
  o.head = head;
  o.relu_loss = loss;
  o.seed = seed;
  o.init_stddev = 0.5;
  o.ffnn_dropout = 0.0;
  Rng rng(seed + 1);
  Tensor x = randn({6, 8}, 1.0, rng);
  std::vector<std::size_t> y{0, 1, 2, 0, 1, 2};
  return {"dense-8-6-5-3", build_mlp(o, 8, {6, 5}, 3), std::move(x), make_onehot(y, 3)};
}

Toy conv_toy(HeadKind head, ReluLoss loss, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::unique_ptr<Layer>> body;
  body.push_back(std::make_unique<Conv2DLayer>(1, 2, 0.5, rng));
  body.push_back(std::make_unique<ReluActivation>());
  body.push_back(std::make_unique<MaxPoolLayer>());
  body.push_back(std::make_unique<FlattenLayer>());
  Network net({1, 6, 6}, std::move(body), 8, 3, head, loss);
  net.theta() = randn({8, 3}, 0.5, rng);
  Rng data_rng(seed + 2);
  Tensor x = randn({4, 36}, 1.0, data_rng);
  std::vector<std::size_t> y{0, 1, 2, 1};
  return {"conv-1x6x6-2-pool-3", std::move(net), std::move(x), make_onehot(y, 3)};
}

// The ReLU head trains on the raw scores of the true class; keep them on
// the active side so the check exercises the live gradient path.
void lift_true_scores(Toy& toy) {
  if (toy.net.head() != HeadKind::Relu) return;
  for (double& b : toy.net.head_bias().data()) b += 1.0;
}

}  // namespace

std::vector<GradCheckRun> run_gradcheck(std::uint64_t seed, ReluLoss relu_loss,
                                        const std::optional<std::filesystem::path>& output_dir,
                                        const NetworkTamper& tamper) {
  std::vector<GradCheckRun> runs;
  for (HeadKind head : {HeadKind::Softmax, HeadKind::Relu}) {
    for (int which = 0; which < 2; ++which) {
      Toy toy = which == 0 ? dense_toy(head, relu_loss, seed) : conv_toy(head, relu_loss, seed);
      lift_true_scores(toy);
      if (tamper) tamper(toy.net);
      GradCheckRun run;
      run.network = toy.label;
      run.report = gradcheck(toy.net, toy.batch, toy.onehot);
      run.threshold = head == HeadKind::Softmax ? 1e-6 : 1e-4;
      runs.push_back(std::move(run));
    }
  }
  if (output_dir) {
    std::filesystem::create_directories(*output_dir);
    Table t{{"head", "network", "block", "coordinates", "skipped", "max_rel_error",
             "mean_rel_error", "threshold", "status"}};
    auto sci = [](double v) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3e", v);
      return std::string(buf);
    };
    ordered_json checks = ordered_json::array();
    for (const auto& run : runs) {
      for (const auto& b : run.report.blocks)
        t.push_back({to_string(run.report.head), run.network, b.name, std::to_string(b.coordinates),
                     std::to_string(b.skipped), sci(b.max_rel_error), sci(b.mean_rel_error),
                     sci(run.threshold), b.max_rel_error < run.threshold ? "pass" : "FAIL"});
      checks.push_back({{"head", to_string(run.report.head)},
                        {"network", run.network},
                        {"max_rel_error", run.report.max_rel_error()},
                        {"skipped", run.report.skipped()},
                        {"coordinates", run.report.coordinates()},
                        {"threshold", run.threshold},
                        {"passed", run.passed()}});
    }
    write_table(*output_dir, "report", t);
    ordered_json manifest{{"command", "gradcheck"},
                          {"seed", seed},
                          {"relu_loss", to_string(relu_loss)},
                          {"checks", checks},
                          {"artifacts", {{"report", "report.csv"}}}};
    write_file_atomic(*output_dir / "manifest.json", manifest.dump(2) + "\n");
  }
  return runs;
}

}  // namespace reluhead
