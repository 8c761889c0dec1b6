#include <gtest/gtest.h>
#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "fixtures.hpp"
#include "reluhead/error.hpp"
#include "reluhead/io.hpp"
#include "reluhead/runner.hpp"

using namespace reluhead;

namespace {

int run_cli(const std::string& args, const std::filesystem::path& log = {}) {
  const std::string sink = log.empty() ? "/dev/null" : log.string();
  const std::string cmd = std::string(RELUHEAD_CLI) + " " + args + " >" + sink + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Cache directory holding a synthetic wdbc.data, fetched through file://.
const std::filesystem::path& wdbc_cache() {
  static const std::filesystem::path cache = [] {
    const auto mirror = fixture::scratch("cli_mirror");
    const auto dir = fixture::scratch("cli_cache");
    fixture::write_wdbc(mirror / "wdbc.data", 11);
    if (run_cli("fetch wdbc --data-dir " + dir.string() + " --mirror file://" + mirror.string()) != 0)
      throw std::runtime_error("fixture fetch failed");
    return dir;
  }();
  return cache;
}

std::string wdbc_flags(const std::filesystem::path& out) {
  return "--dataset wdbc --epochs 5 --batch-size 32 --data-dir " + wdbc_cache().string() +
         " --output-dir " + out.string();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("train --dataset cifar"), 2);
  EXPECT_EQ(run_cli("train --dataset wdbc --model cnn"), 2);
  EXPECT_EQ(run_cli("train --model cnn --pca-dims 100"), 2);
  EXPECT_EQ(run_cli("train --head sigmoid"), 2);
  EXPECT_EQ(run_cli("train --epochs 0"), 2);
  EXPECT_EQ(run_cli("train --no-such-flag"), 2);
  EXPECT_EQ(run_cli("fetch imagenet"), 2);
  EXPECT_EQ(run_cli("--help"), 0);
}

TEST(Cli, DataErrorsExitThree) {
  const auto empty = fixture::scratch("cli_empty");
  EXPECT_EQ(run_cli("train --dataset wdbc --data-dir " + empty.string()), 3);
  EXPECT_EQ(run_cli("fetch wdbc --data-dir " + empty.string() + " --mirror file:///nonexistent/"),
            3);
}

TEST(Cli, GradcheckPasses) {
  const auto out = fixture::scratch("cli_gradcheck");
  EXPECT_EQ(run_cli("gradcheck --output-dir " + out.string()), 0);
  const std::string csv = read_file(out / "report.csv");
  EXPECT_EQ(csv.find("FAIL"), std::string::npos);
  EXPECT_NE(csv.find("softmax"), std::string::npos);
  EXPECT_NE(csv.find("relu"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(out / "manifest.json"));
}

TEST(Cli, TrainWritesArtifactsReproducibly) {
  const auto a = fixture::scratch("cli_train_a"), b = fixture::scratch("cli_train_b");
  ASSERT_EQ(run_cli("train --head relu " + wdbc_flags(a)), 0);
  ASSERT_EQ(run_cli("train --head relu " + wdbc_flags(b)), 0);
  for (const char* f : {"report.csv", "confusion.csv", "model.ckpt", "scaler.ckpt"}) {
    ASSERT_TRUE(std::filesystem::exists(a / f)) << f;
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  }
  EXPECT_FALSE(std::filesystem::exists(a / "pca.ckpt"));

  const auto report = lines(read_file(a / "report.csv"));
  ASSERT_EQ(report.size(), 5u);
  EXPECT_EQ(report[0], "class,name,precision,recall,f1,support");
  EXPECT_EQ(report[1].rfind("0,benign,", 0), 0u);
  EXPECT_EQ(report[3].rfind("weighted,", 0), 0u);
  EXPECT_EQ(report[4].rfind("accuracy,", 0), 0u);

  const auto manifest = nlohmann::json::parse(read_file(a / "manifest.json"));
  EXPECT_EQ(manifest["config"]["head"], "relu");
  EXPECT_EQ(manifest["config"]["seed"], 0);
  EXPECT_EQ(manifest["inputs"].size(), 1u);
  EXPECT_EQ(manifest["dead_fraction_per_epoch"].size(), 5u);
  EXPECT_GT(manifest["metrics"]["test_accuracy"].get<double>(), 0.9);

  // Saved model reproduces the reported accuracy.
  Network net = load(a / "model.ckpt");
  EXPECT_EQ(net.head(), HeadKind::Relu);
  EXPECT_EQ(net.param_count(), 1984u + 2080u + 66u);
}

TEST(Cli, CrossvalTwoFoldsIsQuick) {
  const auto out = fixture::scratch("cli_cv");
  const auto start = std::chrono::steady_clock::now();
  ASSERT_EQ(run_cli("crossval --cv-folds 2 " + wdbc_flags(out)), 0);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(seconds, 10.0);
  const auto folds = lines(read_file(out / "folds.csv"));
  ASSERT_EQ(folds.size(), 5u);
  EXPECT_EQ(folds[0], "fold,loss,accuracy");
  EXPECT_EQ(folds[3].rfind("mean,", 0), 0u);
  EXPECT_EQ(folds[4].rfind("std,", 0), 0u);
}

TEST(Cli, CompareTabulatesBothHeads) {
  const auto out = fixture::scratch("cli_compare");
  ASSERT_EQ(run_cli("compare --cv --cv-folds 2 " + wdbc_flags(out)), 0);
  const auto rows = lines(read_file(out / "compare.csv"));
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0], "metric,ffnn-softmax,ffnn-relu");
  const RunSummary soft = read_summary(out / "softmax"), relu = read_summary(out / "relu");
  EXPECT_EQ(rows[2], "test_accuracy," + format_fixed(soft.test_accuracy, 6) + "," +
                         format_fixed(relu.test_accuracy, 6));
  ASSERT_TRUE(soft.cv_mean.has_value());
  EXPECT_NE(rows[1].find(format_fixed(*soft.cv_mean, 6)), std::string::npos);

  // Re-tabulating the two existing runs gives the same table.
  const auto again = fixture::scratch("cli_compare_again");
  ASSERT_EQ(run_cli("compare --runs " + (out / "softmax").string() + " " +
                    (out / "relu").string() + " --output-dir " + again.string()),
            0);
  EXPECT_EQ(read_file(again / "compare.csv"), read_file(out / "compare.csv"));
}

TEST(Cli, CompareRejectsMismatchedRuns) {
  const auto a = fixture::scratch("cli_mismatch_a"), b = fixture::scratch("cli_mismatch_b");
  ASSERT_EQ(run_cli("train " + wdbc_flags(a)), 0);
  ASSERT_EQ(run_cli("train --seed 3 " + wdbc_flags(b)), 0);
  EXPECT_EQ(run_cli("compare --runs " + a.string() + " " + b.string() + " --output-dir " +
                    fixture::scratch("cli_mismatch_out").string()),
            2);
  EXPECT_EQ(run_cli("compare --runs " + a.string() + " /nonexistent"), 2);
}

TEST(Runner, ValidateRejectsInconsistentSettings) {
  RunConfig c;
  EXPECT_NO_THROW(validate(c));
  EXPECT_EQ(effective_pca_dims(c), 256u);
  auto bad = [](auto edit) {
    RunConfig c;
    edit(c);
    EXPECT_THROW(validate(c), ConfigError);
  };
  bad([](RunConfig& c) { c.pca_dims = 785; });
  bad([](RunConfig& c) { c.dataset = DatasetId::Wdbc, c.pca_dims = 31; });
  bad([](RunConfig& c) { c.batch_size = 0; });
  bad([](RunConfig& c) { c.learning_rate = -1; });
  bad([](RunConfig& c) { c.beta1 = 1.0; });
  bad([](RunConfig& c) { c.ffnn_dropout = 1.0; });
  bad([](RunConfig& c) { c.cv_folds = 1; });
  bad([](RunConfig& c) { c.test_fraction = 1.5; });
  RunConfig w;
  w.dataset = DatasetId::Wdbc;
  EXPECT_EQ(effective_pca_dims(w), 0u);
}

TEST(Runner, TableHelpers) {
  EXPECT_EQ(to_csv({{"a", "b"}, {"1", "2"}}), "a,b\n1,2\n");
  EXPECT_EQ(format_fixed(0.123456789, 6), "0.123457");
  const std::string text = to_aligned_text({{"x", "long"}, {"longer", "y"}});
  const auto rows = lines(text);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].size(), rows[1].size());
}
