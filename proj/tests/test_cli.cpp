#include "stereovol/evaluation.hpp"
#include "stereovol/io.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

using namespace stereovol;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args)
{
  const std::string cmd = std::string(STEREOVOL_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// One synthetic dataset split into manifests, shared by the tests.
class Cli : public ::testing::Test {
protected:
  static void SetUpTestSuite()
  {
    dir_ = new fs::path(testkit::temp_dir("cli"));
    const std::string d = dir_->string();
    ASSERT_EQ(run("synth --out " + d + "/synth --classes 3 --items 6 --frames 5 --image-size 16"), 0);
    ASSERT_EQ(run("ingest --sequences " + d + "/synth/sequences.jsonl --out " + d + "/split --max-pairs 2"), 0);
  }
  static void TearDownTestSuite() { delete dir_; }

  static std::string d() { return dir_->string(); }

private:
  static fs::path* dir_;
};

fs::path* Cli::dir_ = nullptr;

} // namespace

TEST_F(Cli, TrainPredictEvaluateReport)
{
  ASSERT_EQ(run("train --train-manifest " + d() + "/split/train.jsonl --out " + d() + "/m1 --epochs 3"), 0);
  ASSERT_TRUE(fs::exists(d() + "/m1/final.ckpt"));
  ASSERT_TRUE(fs::exists(d() + "/m1/best.ckpt"));
  ASSERT_TRUE(fs::exists(d() + "/m1/run_manifest.json"));
  ASSERT_EQ(run("predict --checkpoint " + d() + "/m1/final.ckpt --manifest " + d() + "/split/test.jsonl --out " +
                d() + "/p1.jsonl"),
            0);
  const auto preds = read_predictions(d() + "/p1.jsonl");
  EXPECT_GT(preds.size(), 0u);
  ASSERT_EQ(run("evaluate --predictions " + d() + "/p1.jsonl --out " + d() + "/eval"), 0);
  for (const char* f : {"metrics.json", "cdf.csv", "kde.csv"}) {
    EXPECT_TRUE(fs::exists(d() + "/eval/" + f)) << f;
  }
  const auto metrics = read_json_file(d() + "/eval/metrics.json");
  EXPECT_NEAR(metrics["mae_ml"].get<double>(), compute_metrics(preds).mae_ml, 1e-9);

  ASSERT_EQ(run("baseline --kind category_mean --train-manifest " + d() + "/split/train.jsonl --test-manifest " + d() +
                "/split/test.jsonl --out " + d() + "/b.jsonl"),
            0);
  ASSERT_EQ(run("evaluate --predictions " + d() + "/b.jsonl --out " + d() + "/beval"), 0);
  ASSERT_EQ(run("report --metrics catmean=" + d() + "/beval/metrics.json --metrics ours=" + d() +
                "/eval/metrics.json --out " + d() + "/rep"),
            0);
  EXPECT_NE(read_text_file(d() + "/rep/table.txt").find("Improvement (ours)"), std::string::npos);
}

TEST_F(Cli, TrainingAndPredictionAreByteIdentical)
{
  const std::string train = "train --train-manifest " + d() + "/split/train.jsonl --epochs 2 --out ";
  ASSERT_EQ(run(train + d() + "/a"), 0);
  ASSERT_EQ(run(train + d() + "/b"), 0);
  EXPECT_EQ(read_text_file(d() + "/a/final.ckpt"), read_text_file(d() + "/b/final.ckpt"));
  const std::string pred = "predict --checkpoint " + d() + "/a/final.ckpt --manifest " + d() + "/split/test.jsonl --out ";
  ASSERT_EQ(run(pred + d() + "/pa.jsonl"), 0);
  ASSERT_EQ(run(pred + d() + "/pb.jsonl"), 0);
  EXPECT_EQ(read_text_file(d() + "/pa.jsonl"), read_text_file(d() + "/pb.jsonl"));
}

TEST_F(Cli, AblateWritesEveryVariant)
{
  ASSERT_EQ(run("ablate --train-manifest " + d() + "/split/train.jsonl --test-manifest " + d() +
                "/split/test.jsonl --epochs 2 --variant stereo_only --variant prompt_template_1 --out " + d() + "/abl"),
            0);
  const auto summary = read_json_file(d() + "/abl/ablation.json");
  EXPECT_TRUE(summary.contains("stereo_only"));
  EXPECT_TRUE(summary["prompt_template_1"].contains("fusion_head_gflops"));
  EXPECT_TRUE(fs::exists(d() + "/abl/stereo_only/predictions.jsonl"));
}

TEST_F(Cli, ConfigFileAndHelp)
{
  std::ofstream(d() + "/cfg.json") << R"({"epochs": 1, "image_encoder.dim": 16})";
  ASSERT_EQ(run("train --config " + d() + "/cfg.json --train-manifest " + d() + "/split/train.jsonl --out " + d() +
                "/cfgrun"),
            0);
  EXPECT_EQ(read_json_file(d() + "/cfgrun/run_manifest.json")["image_encoder"]["dim"], 16);
  EXPECT_EQ(run("config-help"), 0);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, MeshVolume)
{
  std::ofstream(d() + "/cube.obj") << "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n"
                                      "f 1 4 3\nf 1 3 2\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\n"
                                      "f 2 3 7\nf 2 7 6\nf 3 4 8\nf 3 8 7\nf 4 1 5\nf 4 5 8\n";
  EXPECT_EQ(run("mesh-volume --mesh " + d() + "/cube.obj"), 0);
  std::ofstream(d() + "/open.obj") << "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\nf 1 4 3\n";
  EXPECT_EQ(run("mesh-volume --mesh " + d() + "/open.obj"), 3);
}

TEST_F(Cli, ExitCodesByErrorFamily)
{
  const std::string train = "train --train-manifest " + d() + "/split/train.jsonl --out " + d() + "/err ";
  // command-line parse errors and bad configuration
  EXPECT_EQ(run("no-such-command"), 2);
  EXPECT_EQ(run("train --out x --train-manifest /nonexistent.jsonl"), 2);
  EXPECT_EQ(run(train + "--template 9"), 2);
  std::ofstream(d() + "/bad.json") << R"({"epoch": 1})";
  EXPECT_EQ(run(train + "--config " + d() + "/bad.json"), 2);
  // data
  std::ofstream(d() + "/vocab_small.txt") << "nothing\n";
  EXPECT_EQ(run(train + "--vocab " + d() + "/vocab_small.txt"), 3);
  // model: unknown encoder backend with no cached embeddings
  std::ofstream(d() + "/clip.json") << R"({"image_encoder.name": "clip-vit-b32"})";
  EXPECT_EQ(run(train + "--config " + d() + "/clip.json"), 4);
  std::ofstream(d() + "/broken.ckpt") << "garbage";
  EXPECT_EQ(run("predict --checkpoint " + d() + "/broken.ckpt --manifest " + d() + "/split/test.jsonl --out " + d() +
                "/x.jsonl"),
            4);
  // numerical
  EXPECT_EQ(run(train + "--lr 1e300 --epochs 30"), 5);
  // io: the output directory is a regular file
  std::ofstream(d() + "/plain_file") << "x";
  EXPECT_EQ(run("synth --items 1 --out " + d() + "/plain_file/synth"), 7);
}
