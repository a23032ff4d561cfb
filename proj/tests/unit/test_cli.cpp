#include <gtest/gtest.h>

#include <filesystem>

#include "peduncle.hpp"
#include "peduncle/cli.hpp"

using namespace peduncle;
namespace fs = std::filesystem;

namespace {

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "peduncle");
  return cli::run(args);
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root = fs::temp_directory_path() / ("peduncle_unit_cli_" +
                                        std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root);
    fs::create_directories(root);
    cfg = (root / "fast.cfg").string();
    text::write_file(cfg, "cnn_epochs = 1\ncnn_patches_per_class = 10\nsvm_samples_per_class = 60\n");
  }
  void TearDown() override { fs::remove_all(root); }

  std::string path(const std::string& rel) const { return (root / rel).string(); }

  fs::path root;
  std::string cfg;
};

}  // namespace

TEST_F(CliTest, GenSceneIsDeterministic) {
  ASSERT_EQ(run_cli({"gen-scene", "--seed", "9", "--count", "2", "--out", path("a")}), cli::kOk);
  ASSERT_EQ(run_cli({"gen-scene", "--seed", "9", "--count", "2", "--out", path("b")}), cli::kOk);
  for (const auto& f : fs::directory_iterator(path("a"))) {
    const auto name = f.path().filename().string();
    EXPECT_EQ(text::read_file(f.path().string()), text::read_file(path("b/" + name))) << name;
  }
  const auto entries = parse_manifest(text::read_file(path("a/manifest.txt")));
  EXPECT_EQ(entries.size(), 2u);
  EXPECT_TRUE(verify_benchmark(path("a"), entries));
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run_cli({"gen-scene", "--bogus", "--out", path("x")}), cli::kUsage);
  EXPECT_EQ(run_cli({"gen-scene"}), cli::kUsage);  // --out required
  EXPECT_EQ(run_cli({}), cli::kUsage);
  EXPECT_EQ(run_cli({"eval", "--scenes", path("missing.txt"), "--models", path(""), "--out", path("e")}), cli::kUsage);
  EXPECT_EQ(run_cli({"--help"}), cli::kOk);
}

TEST_F(CliTest, PrCurveFromCsv) {
  text::write_file(path("in.csv"), "score,label\n0.9,1\n0.8,0\n0.7,1\n0.3,1\n0.1,0\n0.5,-1\n");
  ASSERT_EQ(run_cli({"pr-curve", "--input", path("in.csv"), "--out", path("pr")}), cli::kOk);
  EXPECT_EQ(text::read_file(path("pr/summary_raw.txt")), "best_f1 0.8571428571428571 at 0.11\n");
  EXPECT_EQ(text::lines(text::read_file(path("pr/pr.csv"))).size(), 102u);
  text::write_file(path("bad.csv"), "0.9,2\n");
  EXPECT_EQ(run_cli({"pr-curve", "--input", path("bad.csv"), "--out", path("pr2")}), cli::kDataError);
}

TEST_F(CliTest, TrainFilterAndEval) {
  const std::string scenes = path("scenes"), manifest = scenes + "/manifest.txt", models = path("models");
  ASSERT_EQ(run_cli({"gen-scene", "--seed", "3", "--count", "2", "--out", scenes}), cli::kOk);
  ASSERT_EQ(run_cli({"train-nb", "--scenes", manifest, "--out", models, "--config", cfg}), cli::kOk);
  ASSERT_EQ(run_cli({"train-svm", "--scenes", manifest, "--out", models, "--config", cfg}), cli::kOk);
  ASSERT_EQ(run_cli({"train-cnn", "--scenes", manifest, "--out", models, "--config", cfg}), cli::kOk);

  ASSERT_EQ(run_cli({"eval", "--scenes", manifest, "--models", models, "--detector", "pfh-svm", "--mode", "both",
                 "--out", path("eval"), "--config", cfg}),
            cli::kOk);
  EXPECT_TRUE(fs::exists(path("eval/summary_raw.txt")));
  EXPECT_TRUE(fs::exists(path("eval/summary_filtered.txt")));

  // the same numbers through the library
  const Settings s = load_settings(cfg);
  const Models m = load_models(models);
  const auto entries = parse_manifest(text::read_file(manifest));
  std::vector<SceneCandidates> cands;
  for (const auto& e : entries) cands.push_back(prepare_scene(load_scene(scenes, e, s), m, DetectorKind::PfhSvm, s));
  const auto grid = threshold_grid(s.eval_thresholds);
  EXPECT_EQ(text::read_file(path("eval/summary_raw.txt")), format_summary(eval_raw(cands, grid)));
  EXPECT_EQ(text::read_file(path("eval/summary_filtered.txt")),
            format_summary(eval_filtered(cands, m.nb, grid, filter_params(s), box_params(s)).curve));

  // green peppers are not detected by a red-pepper colour model
  ASSERT_EQ(run_cli({"gen-scene", "--seed", "4", "--count", "1", "--pepper-color", "green", "--out", path("green")}),
            cli::kOk);
  EXPECT_EQ(run_cli({"filter", "--scenes", path("green/manifest.txt"), "--models", models, "--detector", "cnn", "--out",
                 path("gf"), "--config", cfg}),
            cli::kNotDetected);
  EXPECT_NE(text::read_file(path("gf/report.txt")).find("scene_0000 "), std::string::npos);
}
