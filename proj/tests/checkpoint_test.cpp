// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <sstream>

#include "pairforge/checkpoint.hpp"
#include "pairforge/io.hpp"
#include "pairforge/run_config.hpp"

using namespace pairforge;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const char* name) {
  const fs::path dir = fs::temp_directory_path() / "pairforge_checkpoint_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CheckpointInfo sample_info() {
  CheckpointInfo info;
  info.seed = 42;
  info.epoch = 3;
  info.corpus_hash = "00112233aabbccdd";
  info.vocab_words = {"a", "blue", "flower", "red"};
  info.config_json = R"({"epochs":3})";
  return info;
}

void patch_u32(std::string& bytes, std::size_t offset, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes[offset + i] = static_cast<char>((v >> (8 * i)) & 0xff);
}

}  // namespace

TEST(Checkpoint, GanRoundTripIsBitExact) {
  const auto dir = scratch("gan");
  const auto params = init_gan(8, 5);
  save_checkpoint(dir / "a.pgk", gan_checkpoint(params, sample_info()));
  const Checkpoint loaded = load_checkpoint(dir / "a.pgk");
  save_checkpoint(dir / "b.pgk", loaded);
  EXPECT_EQ(read_file(dir / "a.pgk"), read_file(dir / "b.pgk"));

  auto restored = gan_from_checkpoint(loaded);
  auto original = params;
  const auto a = original.named(), b = restored.named();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    EXPECT_EQ(a[i].second->shape, b[i].second->shape);
    EXPECT_EQ(0, std::memcmp(a[i].second->data.data(), b[i].second->data.data(), a[i].second->data.size() * 4))
        << a[i].first;
  }
  const auto info = decode_info(loaded.metadata);
  EXPECT_EQ(info.seed, 42u);
  EXPECT_EQ(info.epoch, 3u);
  EXPECT_EQ(info.vocab_words, sample_info().vocab_words);
}

TEST(Checkpoint, CaptionerRoundTripAndKindCheck) {
  const auto params = init_captioner(9, 1);
  const Checkpoint ckpt = decode_checkpoint(encode_checkpoint(captioner_checkpoint(params, sample_info())));
  EXPECT_EQ(ckpt.kind, ModelKind::kCaptioner);
  const auto back = captioner_from_checkpoint(ckpt);
  EXPECT_TRUE(params_equal(params, back));
  EXPECT_THROW(gan_from_checkpoint(ckpt), ConfigError);
}

TEST(Checkpoint, TruncationIsAParseError) {
  const std::string bytes = encode_checkpoint(gan_checkpoint(init_gan(6, 2), sample_info()));
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(decode_checkpoint(bytes.substr(0, cut)), ParseError) << cut;
  }
  const auto dir = scratch("truncated");
  write_file_atomic(dir / "t.pgk", bytes.substr(0, bytes.size() - 7));
  EXPECT_THROW(load_checkpoint(dir / "t.pgk"), ParseError);
  EXPECT_THROW(load_checkpoint(dir / "missing.pgk"), DependencyError);
}

TEST(Checkpoint, RejectsForeignMagicAndNewerVersion) {
  std::string bytes = encode_checkpoint(gan_checkpoint(init_gan(6, 2), sample_info()));
  std::string magic = bytes;
  magic[3] = '2';
  EXPECT_THROW(decode_checkpoint(magic), ParseError);

  patch_u32(bytes, 4, kCheckpointVersion + 1);
  try {
    decode_checkpoint(bytes);
    FAIL() << "newer version accepted";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("version 2"), std::string::npos) << e.what();
    EXPECT_EQ(e.offset(), 4u);
  }
}

TEST(Checkpoint, MissingOrMisshapenTensorsAreRejected) {
  Checkpoint ckpt = gan_checkpoint(init_gan(6, 2), sample_info());
  Checkpoint missing = ckpt;
  missing.tensors.pop_back();
  EXPECT_THROW(gan_from_checkpoint(missing), ConfigError);
  Checkpoint wrong = ckpt;
  wrong.tensors.back().second = Tensor({2});
  EXPECT_THROW(gan_from_checkpoint(wrong), ShapeError);
}

TEST(Checkpoint, CorpusHashMismatchOnlyWarns) {
  const Checkpoint ckpt = gan_checkpoint(init_gan(6, 2), sample_info());
  std::ostringstream warn;
  EXPECT_TRUE(check_corpus_hash(ckpt, "00112233aabbccdd", warn));
  EXPECT_TRUE(warn.str().empty());
  EXPECT_FALSE(check_corpus_hash(ckpt, "ffffffffffffffff", warn));
  EXPECT_NE(warn.str().find("warning"), std::string::npos);
}

TEST(RunConfig, DefaultsMatchTheLibraryDefaults) {
  const RunConfig cfg = parse_run_config("");
  EXPECT_EQ(cfg.corpus.num_samples, 2000u);
  EXPECT_EQ(cfg.gan.epochs, 30u);
  EXPECT_EQ(cfg.gan.batch_size, 32u);
  EXPECT_DOUBLE_EQ(cfg.gan.adam.learning_rate, 2e-4);
  EXPECT_DOUBLE_EQ(cfg.gan.adam.beta1, 0.5);
  EXPECT_EQ(cfg.captioner.epochs, 20u);
  EXPECT_EQ(cfg.work_dir, fs::path("run"));
}

TEST(RunConfig, ParsesSectionsCommentsAndSeed) {
  const RunConfig cfg = parse_run_config(R"(
# pipeline seed
seed = 7

[corpus]
num_samples = 90   # small
noise_amplitude = 0.1

[gan]
epochs = 2
learning_rate = 1e-3

[paths]
work_dir = "out # dir"
)");
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.corpus.seed, 7u);
  EXPECT_EQ(cfg.gan.seed, 7u);
  EXPECT_EQ(cfg.corpus.num_samples, 90u);
  EXPECT_DOUBLE_EQ(cfg.corpus.noise_amplitude, 0.1);
  EXPECT_EQ(cfg.gan.epochs, 2u);
  EXPECT_DOUBLE_EQ(cfg.gan.adam.learning_rate, 1e-3);
  EXPECT_EQ(cfg.work_dir, fs::path("out # dir"));
}

TEST(RunConfig, TextFormRoundTrips) {
  RunConfig cfg = parse_run_config("seed = 3\n[gmm]\ncomponents = 4\ntol = 1e-9\n");
  const RunConfig back = parse_run_config(cfg.to_toml());
  EXPECT_EQ(back.to_toml(), cfg.to_toml());
  EXPECT_EQ(back.gmm_components, 4u);
  EXPECT_DOUBLE_EQ(back.gmm.tol, 1e-9);
}

TEST(RunConfig, RejectsUnknownDuplicateAndMalformedEntries) {
  EXPECT_THROW(parse_run_config("sed = 1\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[gan]\nepoch = 3\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[training]\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[gan]\nepochs = 3\nepochs = 4\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[gan]\nepochs = three\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[gan]\nepochs = -1\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[paths]\nwork_dir = run\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[gan\n"), ConfigError);
  EXPECT_THROW(parse_run_config("just words\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[gan]\nbatch_size = 0\n"), ConfigError);
  try {
    parse_run_config("seed = 1\n\n[gan]\nbogus = 2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("gan.bogus"), std::string::npos) << e.what();
  }
}
