// Command-line experiment runner: fetch, train, crossval, compare, gradcheck.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "reluhead/error.hpp"
#include "reluhead/io.hpp"
#include "reluhead/runner.hpp"

using namespace reluhead;

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kUsage = 2, kData = 3, kNumeric = 4 };

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case Error::Kind::Config:
      return kUsage;
    case Error::Kind::Numeric:
      return kNumeric;
    case Error::Kind::Input:
    case Error::Kind::Format:
    case Error::Kind::Consistency:
    case Error::Kind::Parse:
    case Error::Kind::Io:
    case Error::Kind::Version:
    case Error::Kind::Corrupt:
    case Error::Kind::Network:
    case Error::Kind::Integrity:
      return kData;
    default:
      return kInternal;
  }
}

/// String-valued flags, converted after parsing so bad values map to
/// ConfigError like every other invalid setting.
struct RawFlags {
  std::string dataset = "mnist";
  std::string model = "ffnn";
  std::string head = "softmax";
  std::string relu_loss = "normalized";
  std::string optimizer = "adam";
  long long pca_dims = -1;
  bool no_scale = false;
  std::string output_dir = "out";
  std::string data_dir;
};

void add_run_flags(CLI::App* cmd, RunConfig& c, RawFlags& raw) {
  cmd->add_option("--dataset", raw.dataset, "mnist, fashion or wdbc")->capture_default_str();
  cmd->add_option("--model", raw.model, "ffnn or cnn")->capture_default_str();
  cmd->add_option("--head", raw.head, "softmax or relu")->capture_default_str();
  cmd->add_option("--relu-loss", raw.relu_loss, "normalized or literal")->capture_default_str();
  cmd->add_option("--seed", c.seed)->capture_default_str();
  cmd->add_option("--epochs", c.epochs)->capture_default_str();
  cmd->add_option("--batch-size", c.batch_size)->capture_default_str();
  cmd->add_option("--optimizer", raw.optimizer, "adam or sgd")->capture_default_str();
  cmd->add_option("--learning-rate", c.learning_rate)->capture_default_str();
  cmd->add_option("--beta1", c.beta1)->capture_default_str();
  cmd->add_option("--beta2", c.beta2)->capture_default_str();
  cmd->add_option("--epsilon", c.epsilon)->capture_default_str();
  cmd->add_option("--pca-dims", raw.pca_dims,
                  "principal components kept (default 256 for images, 0 = off)");
  cmd->add_flag("--no-scale", raw.no_scale, "skip z-score standardization");
  cmd->add_option("--init-stddev", c.init_stddev)->capture_default_str();
  cmd->add_option("--cnn-pool-dropout", c.cnn_pool_dropout)->capture_default_str();
  cmd->add_option("--cnn-dense-dropout", c.cnn_dense_dropout)->capture_default_str();
  cmd->add_option("--ffnn-dropout", c.ffnn_dropout)->capture_default_str();
  cmd->add_option("--cv-folds", c.cv_folds)->capture_default_str();
  cmd->add_flag("--stratified-folds", c.stratified_folds);
  cmd->add_option("--test-fraction", c.test_fraction, "wdbc hold-out share")->capture_default_str();
  cmd->add_option("--train-limit", c.train_limit, "use only the first N training rows");
  cmd->add_option("--output-dir", raw.output_dir)->capture_default_str();
  cmd->add_option("--data-dir", raw.data_dir, "dataset cache (default $RELUHEAD_DATA_DIR)");
}

void resolve(RunConfig& c, const RawFlags& raw) {
  c.dataset = parse_dataset(raw.dataset);
  c.model = parse_model(raw.model);
  c.head = parse_head(raw.head);
  c.relu_loss = parse_relu_loss(raw.relu_loss);
  c.optimizer = parse_optimizer(raw.optimizer);
  if (raw.pca_dims >= 0) c.pca_dims = static_cast<std::size_t>(raw.pca_dims);
  c.scale = !raw.no_scale;
  c.output_dir = raw.output_dir;
  c.data_dir = raw.data_dir.empty() ? default_data_dir() : std::filesystem::path(raw.data_dir);
  validate(c);
}

void print_train(const TrainOutcome& o, const RunConfig& c) {
  const auto& m = o.report.metrics;
  std::printf("%s-%s on %s: test accuracy %.2f%%  precision %.2f  recall %.2f  f1 %.2f\n",
              to_string(c.model).c_str(), to_string(c.head).c_str(), to_string(c.dataset).c_str(),
              100.0 * o.report.test_accuracy, m.weighted_precision, m.weighted_recall,
              m.weighted_f1);
  if (o.cv)
    std::printf("cross-validation accuracy %.2f%% +- %.2f\n", 100.0 * o.cv->mean,
                100.0 * o.cv->stddev);
  if (!o.dead_trace.empty())
    std::printf("dead true-class fraction after epoch 1: %.4f, final: %.4f\n",
                o.dead_trace.front(), o.dead_trace.back());
  std::printf("wrote %s (%.1f s)\n", c.output_dir.string().c_str(), o.seconds);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ReLU vs softmax classification heads: experiment runner"};
  app.require_subcommand(1);

  // fetch
  std::string fetch_name, fetch_dir, mirror;
  auto* fetch_cmd = app.add_subcommand("fetch", "download and verify a dataset into the cache");
  fetch_cmd->add_option("dataset", fetch_name, "mnist, fashion or wdbc")->required();
  fetch_cmd->add_option("--data-dir", fetch_dir, "cache directory (default $RELUHEAD_DATA_DIR)");
  fetch_cmd->add_option("--mirror", mirror, "base URL to download from (file:// accepted)");

  // train / crossval / compare share the run flags
  RunConfig train_cfg, cv_cfg, cmp_cfg;
  RawFlags train_raw, cv_raw, cmp_raw;
  bool train_with_cv = false, cmp_with_cv = false;
  auto* train_cmd = app.add_subcommand("train", "train on the training split, evaluate on test");
  add_run_flags(train_cmd, train_cfg, train_raw);
  train_cmd->add_flag("--cv", train_with_cv, "also run k-fold cross-validation on the train split");

  auto* cv_cmd = app.add_subcommand("crossval", "k-fold cross-validation on the training split");
  add_run_flags(cv_cmd, cv_cfg, cv_raw);

  std::vector<std::string> runs;
  auto* cmp_cmd = app.add_subcommand(
      "compare", "side-by-side table of the two heads (runs both, or reads --runs A B)");
  add_run_flags(cmp_cmd, cmp_cfg, cmp_raw);
  cmp_cmd->add_flag("--cv", cmp_with_cv, "include cross-validation accuracy");
  cmp_cmd->add_option("--runs", runs, "two existing run directories")->expected(2);

  std::uint64_t gc_seed = 0;
  std::string gc_loss = "normalized", gc_dir = "out/gradcheck";
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of both heads");
  gc_cmd->add_option("--seed", gc_seed)->capture_default_str();
  gc_cmd->add_option("--relu-loss", gc_loss)->capture_default_str();
  gc_cmd->add_option("--output-dir", gc_dir)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*fetch_cmd) {
      const DatasetId id = parse_dataset(fetch_name);
      const std::filesystem::path dir = fetch_dir.empty() ? default_data_dir() : std::filesystem::path(fetch_dir);
      const FetchResult r =
          fetch(id, dir, mirror.empty() ? std::nullopt : std::optional<std::string>(mirror));
      for (const auto& name : r.repaired)
        std::fprintf(stderr, "integrity check failed for cached %s; downloaded again\n",
                     name.c_str());
      for (const auto& f : r.files) std::printf("%s\n", f.string().c_str());
      std::printf("%zu file(s) downloaded, %zu already cached\n", r.downloaded,
                  r.files.size() - r.downloaded);
      return kOk;
    }
    if (*train_cmd) {
      resolve(train_cfg, train_raw);
      print_train(run_train(train_cfg, train_with_cv), train_cfg);
      return kOk;
    }
    if (*cv_cmd) {
      resolve(cv_cfg, cv_raw);
      run_crossval(cv_cfg);
      std::printf("%s", read_file(cv_cfg.output_dir / "folds.txt").c_str());
      return kOk;
    }
    if (*cmp_cmd) {
      std::filesystem::path out = cmp_raw.output_dir;
      if (!runs.empty()) {
        write_compare(read_summary(runs[0]), read_summary(runs[1]), out);
      } else {
        resolve(cmp_cfg, cmp_raw);
        std::vector<RunSummary> sides;
        for (HeadKind head : {HeadKind::Softmax, HeadKind::Relu}) {
          RunConfig c = cmp_cfg;
          c.head = head;
          c.output_dir = out / to_string(head);
          print_train(run_train(c, cmp_with_cv), c);
          sides.push_back(read_summary(c.output_dir));
        }
        write_compare(sides[0], sides[1], out);
      }
      std::printf("%s", read_file(out / "compare.txt").c_str());
      return kOk;
    }
    if (*gc_cmd) {
      const auto checks = run_gradcheck(gc_seed, parse_relu_loss(gc_loss), gc_dir);
      bool ok = true;
      for (const auto& run : checks) {
        std::printf("%-8s %-22s max rel error %.3e (threshold %.0e, %zu of %zu skipped) %s\n",
                    to_string(run.report.head).c_str(), run.network.c_str(),
                    run.report.max_rel_error(), run.threshold, run.report.skipped(),
                    run.report.coordinates(), run.passed() ? "pass" : "FAIL");
        ok = ok && run.passed();
      }
      return ok ? kOk : kNumeric;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kInternal;
  }
  return kUsage;
}
