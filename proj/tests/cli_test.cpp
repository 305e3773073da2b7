// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "json.hpp"
#include "pairforge/cli.hpp"
#include "pairforge/image_io.hpp"
#include "pairforge/io.hpp"
#include "pairforge/source_gen.hpp"

using namespace pairforge;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pairforge");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

const char* kSmallConfig = R"(seed = 7
[corpus]
num_samples = 180
[gan]
epochs = 1
checkpoint_interval = 1
[captioner]
epochs = 1
[gmm]
components = 2
max_iter = 20
)";

// Runs every stage of the pipeline into `work`.
void run_pipeline(const fs::path& work) {
  fs::create_directories(work);
  write_file_atomic(work / "run.toml", kSmallConfig);
  const std::vector<std::string> base{"--config", (work / "run.toml").string(), "--work", work.string()};
  auto step = [&](std::vector<std::string> args) {
    args.insert(args.end(), base.begin(), base.end());
    const CliRun r = cli(args);
    ASSERT_EQ(r.code, kExitOk) << args.front() << "\n" << r.err;
  };
  step({"gen-data"});
  step({"train-gan"});
  step({"train-captioner"});
  step({"embed", "--space", "text"});
  step({"embed", "--space", "image"});
  step({"fit-gmm", "--space", "text"});
  step({"fit-gmm", "--space", "image"});
  step({"sample-pairs", "--source", "text", "--method", "prototype", "--count", "4"});
  step({"sample-pairs", "--source", "image", "--method", "density", "--count", "3", "--out",
        (work / "dense").string()});
  step({"interp-sweep", "--a", "the flower is red", "--b", "the flower is blue", "--steps", "4"});
  step({"cycle", "--direction", "image", "--index", "2"});
  step({"cycle-report", "--n", "5"});
}

class Pipeline : public ::testing::Test {
 protected:
  static fs::path root() { return fs::temp_directory_path() / "pairforge_cli_test"; }
  static fs::path work() { return root() / "a"; }

  static void SetUpTestSuite() {
    fs::remove_all(root());
    run_pipeline(work());
  }
  static void TearDownTestSuite() { fs::remove_all(root()); }
};

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
  EXPECT_NE(cli({"--help"}).out.find("sample-pairs"), std::string::npos);
  EXPECT_EQ(cli({"gen-data", "--help"}).code, kExitOk);
  EXPECT_EQ(cli({}).code, kExitUsage);
  const CliRun unknown = cli({"frobnicate"});
  EXPECT_EQ(unknown.code, kExitUsage);
  EXPECT_FALSE(unknown.err.empty());
  EXPECT_EQ(cli({"gen-data", "--bogus"}).code, kExitUsage);
  EXPECT_EQ(cli({"sample-pairs", "--source", "audio"}).code, kExitUsage);
  EXPECT_EQ(cli({"interp-sweep", "--a", "x"}).code, kExitUsage);  // --b missing
  EXPECT_EQ(cli({"gen-data", "--seed", "abc"}).code, kExitUsage);
}

TEST(Cli, BadConfigIsAUsageErrorAndMissingInputsAreRuntimeErrors) {
  const fs::path dir = fs::temp_directory_path() / "pairforge_cli_errors";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_file_atomic(dir / "bad.toml", "[gan]\nepoch = 3\n");
  const CliRun bad = cli({"gen-data", "--config", (dir / "bad.toml").string()});
  EXPECT_EQ(bad.code, kExitUsage);
  EXPECT_NE(bad.err.find("gan.epoch"), std::string::npos);

  const CliRun missing = cli({"train-gan", "--work", dir.string()});
  EXPECT_EQ(missing.code, kExitRuntime);
  EXPECT_NE(missing.err.find("gen-data"), std::string::npos);
  EXPECT_EQ(cli({"cycle-report", "--work", dir.string(), "--gan", (dir / "none.pgk").string()}).code,
            kExitRuntime);
  fs::remove_all(dir);
}

TEST(Cli, GenDataIsByteIdenticalForTheSameSeed) {
  const fs::path dir = fs::temp_directory_path() / "pairforge_cli_gendata";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_file_atomic(dir / "small.toml", "[corpus]\nnum_samples = 40\n");
  for (const char* sub : {"x", "y"}) {
    ASSERT_EQ(cli({"gen-data", "--config", (dir / "small.toml").string(), "--out", (dir / sub).string(), "--seed",
                   "7"})
                  .code,
              kExitOk);
  }
  for (const char* f : {"images.bin", "captions.txt", "meta.json"}) {
    EXPECT_EQ(read_file(dir / "x" / f), read_file(dir / "y" / f)) << f;
  }
  ASSERT_EQ(cli({"gen-data", "--config", (dir / "small.toml").string(), "--out", (dir / "z").string(), "--seed", "8"})
                .code,
            kExitOk);
  EXPECT_NE(read_file(dir / "x" / "images.bin"), read_file(dir / "z" / "images.bin"));
  fs::remove_all(dir);
}

TEST_F(Pipeline, TrainingWritesMetricsAndCheckpoints) {
  const auto lines = read_file(work() / "gan_metrics.jsonl");
  const auto first = nlohmann::json::parse(lines.substr(0, lines.find('\n')));
  for (const char* key : {"epoch", "loss_d", "loss_g", "d_accuracy"}) EXPECT_TRUE(first.contains(key)) << key;
  EXPECT_TRUE(fs::exists(work() / "gan.pgk"));
  EXPECT_TRUE(fs::exists(work() / "captioner.pgk"));
  EXPECT_TRUE(fs::exists(work() / "captioner_metrics.jsonl"));
  // The interval snapshot is skipped for the final epoch, which is the main checkpoint.
  EXPECT_FALSE(fs::exists(work() / "gan.epoch1.pgk"));
  const auto text = load_bank(work() / "text_bank.pge");
  EXPECT_EQ(text.dim, 32u);
  EXPECT_EQ(load_bank(work() / "image_bank.pge").dim, 1024u);
  EXPECT_EQ(load_gmm(work() / "text_gmm.pgm").components(), 2u);
}

TEST_F(Pipeline, SamplePairsOutputContract) {
  const fs::path dir = work() / "pairs";
  for (int i = 0; i < 4; ++i) {
    const Tensor img = read_image_ppm(dir / ("pair_00" + std::to_string(i) + ".ppm"));
    EXPECT_EQ(img.shape, (Shape{3, 16, 16}));
  }
  EXPECT_FALSE(fs::exists(dir / "pair_004.ppm"));
  const std::string captions = read_file(dir / "captions.txt");
  EXPECT_EQ(std::count(captions.begin(), captions.end(), '\n'), 4);
  const auto prov = nlohmann::json::parse(read_file(dir / "provenance.json"));
  ASSERT_EQ(prov.size(), 4u);
  for (const auto& p : prov) {
    EXPECT_EQ(p["method"], "prototype");
    ASSERT_EQ(p["prototypes"].size(), 2u);
    EXPECT_NE(p["prototypes"][0]["row"], p["prototypes"][1]["row"]);
    EXPECT_GE(p["lambda"].get<double>(), 0.0);
    EXPECT_LE(p["lambda"].get<double>(), 1.0);
    EXPECT_TRUE(p.contains("z_seed"));
  }
  const auto dense = nlohmann::json::parse(read_file(work() / "dense" / "provenance.json"));
  ASSERT_EQ(dense.size(), 3u);
  for (const auto& p : dense) {
    EXPECT_EQ(p["source"], "image");
    EXPECT_LT(p["component"].get<std::size_t>(), 2u);
  }
}

TEST_F(Pipeline, SweepAndCycleOutputs) {
  const auto sweep = nlohmann::json::parse(read_file(work() / "sweep" / "sweep.json"));
  ASSERT_EQ(sweep["frames"].size(), 4u);
  EXPECT_EQ(sweep["frames"][0]["lambda"].get<double>(), 1.0);
  EXPECT_EQ(sweep["frames"][3]["lambda"].get<double>(), 0.0);
  EXPECT_NEAR(sweep["frames"][1]["lambda"].get<double>(), 2.0 / 3.0, 1e-15);
  EXPECT_TRUE(fs::exists(work() / "sweep" / "sweep.ppm"));
  const auto cycle = nlohmann::json::parse(read_file(work() / "cycle" / "cycle.json"));
  EXPECT_LE(cycle["cos_phi"].get<double>(), 1.0);
  const auto report = nlohmann::json::parse(read_file(work() / "cycle_report.json"));
  EXPECT_EQ(report["n"], 5);
}

TEST_F(Pipeline, TextCycleAndEval) {
  const CliRun text = cli({"cycle", "--work", work().string(), "--direction", "text", "--caption",
                        "the flower is red", "--out", (work() / "tcycle").string()});
  ASSERT_EQ(text.code, kExitOk) << text.err;
  EXPECT_TRUE(fs::exists(work() / "tcycle" / "generated.ppm"));
  const CliRun eval = cli({"eval", "--work", work().string(), "--n", "5"});
  ASSERT_EQ(eval.code, kExitOk) << eval.err;
  const auto j = nlohmann::json::parse(read_file(work() / "eval.json"));
  EXPECT_TRUE(j["gan"].contains("real_match_accuracy"));
  EXPECT_TRUE(j["captioner"].contains("color_accuracy"));
  EXPECT_TRUE(j["cycle"].contains("mean_cos_phi"));
}

TEST_F(Pipeline, HashMismatchWarnsButRuns) {
  const fs::path other = root() / "other";
  ASSERT_EQ(cli({"gen-data", "--out", other.string(), "--seed", "99", "--config", (work() / "run.toml").string()})
                .code,
            kExitOk);
  const CliRun r = cli({"embed", "--work", work().string(), "--data", other.string(), "--out",
                     (root() / "x.pge").string()});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.err.find("warning"), std::string::npos);
}

TEST_F(Pipeline, TwoRunsAreBitIdentical) {
  const fs::path second = root() / "b";
  run_pipeline(second);
  for (const char* f : {"gan.pgk", "captioner.pgk", "gan_metrics.jsonl", "captioner_metrics.jsonl", "text_bank.pge",
                        "image_bank.pge", "text_gmm.pgm", "pairs/pair_000.ppm", "pairs/pair_003.ppm",
                        "pairs/provenance.json", "dense/provenance.json", "sweep/step_000.ppm", "sweep/sweep.ppm",
                        "cycle/cycled.ppm", "cycle_report.json"}) {
    EXPECT_EQ(read_file(work() / f), read_file(second / f)) << f;
  }
}
