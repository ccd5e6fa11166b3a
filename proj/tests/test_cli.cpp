#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vdst/cli.hpp"
#include "vdst/netpbm.hpp"

namespace fs = std::filesystem;

namespace vdst::cli {
namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "vdst");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) { return netpbm::read_file(p); }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("vdst_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string gen(int rungs, int frames, std::vector<std::string> extra = {}) {
    std::vector<std::string> a = {"--seed", "4", "--out", (dir_ / "data").string(), "gen", "--rungs",
                                  std::to_string(rungs), "--frames", std::to_string(frames)};
    a.insert(a.end(), extra.begin(), extra.end());
    const Outcome r = run(a);
    EXPECT_EQ(r.code, 0) << r.err;
    return (dir_ / "data" / "manifest.json").string();
  }
  std::vector<std::string> quick(const std::string& data) {
    return {"--data", data, "--ground-iterations", "40", "--iterations", "10"};
  }

  fs::path dir_;
};

TEST_F(Cli, GenWritesManifestAndFrames) {
  const std::string data = gen(3, 2, {"--random-frames", "3", "--random-min", "4"});
  const Manifest m = load_manifest(data);
  ASSERT_EQ(m.sequences.size(), 4u);
  EXPECT_EQ(m.sequences[0].id, "car01");
  EXPECT_TRUE(m.sequences[0].labeled);
  EXPECT_EQ(m.sequences[1].id, "uav02");
  EXPECT_EQ(m.sequences[3].id, "uav_random");
  EXPECT_EQ(m.sequences[3].split, "test");
  EXPECT_EQ(m.train_sequences().size(), 3u);
  EXPECT_EQ(m.palette.size(), 6u);
  for (const auto& s : m.sequences) {
    for (const auto& f : s.frames) {
      EXPECT_TRUE(fs::exists(dir_ / "data" / f.image));
      EXPECT_TRUE(fs::exists(dir_ / "data" / f.label));
    }
  }
  const Sequence s = load_sequence(m.sequences[1], dir_ / "data");
  EXPECT_EQ(s.samples.size(), 2u);
  EXPECT_DOUBLE_EQ(s.height_m, m.sequences[1].height_m);
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run({"--out", dir_.string(), "gen", "--frames", "0"}).code, kExitUsage);
  EXPECT_EQ(run({"bogus"}).code, kExitUsage);
  EXPECT_EQ(run({"--out", dir_.string(), "baseline", "--method", "mixup"}).code, kExitUsage);
  EXPECT_EQ(run({"--out", dir_.string(), "distill", "--interval", "0", "--data", "x"}).code, kExitUsage);
}

TEST_F(Cli, MissingManifestExitsTwo) {
  const Outcome r = run({"--out", (dir_ / "o").string(), "train-ground", "--data", (dir_ / "nope.json").string()});
  EXPECT_EQ(r.code, kExitIo);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST_F(Cli, CheckpointClassMismatchExitsOne) {
  const std::string data = gen(2, 1);
  const std::string street = (dir_ / "street").string();
  ASSERT_EQ(run({"--out", street, "gen", "--preset", "street", "--rungs", "2", "--frames", "1"}).code, 0);
  const fs::path out = dir_ / "st";
  const Outcome t = run({"--out", out.string(), "train-ground", "--data", street + "/manifest.json",
                         "--ground-iterations", "20"});
  ASSERT_EQ(t.code, 0) << t.err;
  const Outcome r = run({"--out", (dir_ / "e").string(), "eval", "--data", data, "--checkpoint",
                     (out / "checkpoints" / "N_01.ckpt").string()});
  EXPECT_EQ(r.code, kExitUsage) << r.err;
  EXPECT_NE(r.err.find("classes"), std::string::npos);
}

TEST_F(Cli, DistillIsByteDeterministic) {
  const std::string data = gen(3, 2);
  auto distill = [&](const fs::path& out) {
    auto a = quick(data);
    a.insert(a.begin(), {"--seed", "9", "--out", out.string(), "distill"});
    const Outcome r = run(a);
    EXPECT_EQ(r.code, 0) << r.err;
  };
  distill(dir_ / "a");
  distill(dir_ / "b");
  const auto m = nlohmann::json::parse(slurp(dir_ / "a" / "manifest.json"));
  EXPECT_EQ(slurp(dir_ / "a" / "manifest.json"), slurp(dir_ / "b" / "manifest.json"));
  std::size_t checked = 0;
  for (const auto& o : m["runs"]["distill"]["outputs"]) {
    const std::string rel = o["path"];
    EXPECT_EQ(slurp(dir_ / "a" / rel), slurp(dir_ / "b" / rel)) << rel;
    ++checked;
  }
  EXPECT_GT(checked, 5u);
  for (const char* f : {"checkpoints/N_01.ckpt", "checkpoints/N_02.ckpt", "checkpoints/N_03.ckpt",
                        "checkpoints/final.ckpt", "logs/loss_uav02_progressive.csv", "configs/distill.json",
                        "pseudo/progressive/uav03/0001.pgm"}) {
    EXPECT_TRUE(fs::exists(dir_ / "a" / f)) << f;
  }
  // Re-running from the saved config reproduces the same final checkpoint.
  const Outcome again = run({"--out", (dir_ / "c").string(), "--config", (dir_ / "a" / "configs" / "distill.json").string(),
                         "distill"});
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(slurp(dir_ / "a" / "checkpoints" / "final.ckpt"), slurp(dir_ / "c" / "checkpoints" / "final.ckpt"));
}

TEST_F(Cli, IntervalTwoTrainsOddRungs) {
  const std::string data = gen(10, 1);
  auto a = quick(data);
  a.insert(a.begin(), {"--out", (dir_ / "o").string(), "distill", "--interval", "2"});
  const Outcome r = run(a);
  ASSERT_EQ(r.code, 0) << r.err;
  std::vector<std::string> got;
  for (const auto& e : fs::directory_iterator(dir_ / "o" / "checkpoints")) got.push_back(e.path().filename());
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, (std::vector<std::string>{"N_01.ckpt", "N_03.ckpt", "N_05.ckpt", "N_07.ckpt", "N_09.ckpt",
                                           "final.ckpt"}));
  EXPECT_NE(r.out.find("stage uav05 labels from N@uav03"), std::string::npos) << r.out;
}

TEST_F(Cli, EvalWritesTableWithFooter) {
  const std::string data = gen(3, 1);
  const fs::path out = dir_ / "o";
  auto a = quick(data);
  a.insert(a.begin(), {"--out", out.string(), "distill"});
  ASSERT_EQ(run(a).code, 0);
  const Outcome r = run({"--out", out.string(), "eval", "--data", data, "--checkpoint",
                     (out / "checkpoints" / "final.ckpt").string(), "--against",
                     (out / "checkpoints" / "N_01.ckpt").string(), "--categories"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("rai"), std::string::npos);
  const std::string csv = slurp(out / "metrics" / "final.csv");
  EXPECT_EQ(csv.rfind("sequence,height,", 0), 0u);
  EXPECT_NE(csv.find(",miou,rai_pct\n"), std::string::npos);
  EXPECT_NE(csv.find("\nmean,std,mean_rai_pct\n"), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "metrics" / "final_categories.csv"));
  const auto m = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_TRUE(m["runs"].contains("distill"));
  EXPECT_TRUE(m["runs"].contains("eval"));
}

TEST_F(Cli, BaselineAndAblateRun) {
  const std::string data = gen(3, 1);
  auto a = quick(data);
  a.insert(a.begin(), {"--out", (dir_ / "b").string(), "baseline", "--method", "classmix"});
  ASSERT_EQ(run(a).code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "b" / "checkpoints" / "classmix.ckpt"));
  a = quick(data);
  a.insert(a.begin(), {"--out", (dir_ / "x").string(), "ablate", "--kind", "no-nnpl"});
  const Outcome r = run(a);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("without_nnpl"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "x" / "metrics" / "ablation_no-nnpl.csv"));
}

}  // namespace
}  // namespace vdst::cli
