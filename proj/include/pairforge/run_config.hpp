// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Run configuration: a TOML-style file of `[section]` headers and
// `key = value` lines. Unknown sections or keys are rejected.
//
//   seed = 0
//
//   [corpus]
//   num_samples = 2000          captions_per_image = 3     noise_amplitude = 0.05
//   [gan]
//   epochs = 30   batch_size = 32   learning_rate = 2e-4   beta1 = 0.5   beta2 = 0.999
//   checkpoint_interval = 0     # epochs between extra checkpoints, 0 = none
//   [captioner]
//   epochs = 20   batch_size = 32   learning_rate = 2e-3   beta1 = 0.9   beta2 = 0.999
//   max_len = 12
//   [gmm]
//   components = 6   max_iter = 200   tol = 1e-6
//   [paths]
//   work_dir = "run"            # every artifact path defaults below this directory

#include <cstdint>
#include <filesystem>
#include <string>

#include "pairforge/captioner.hpp"
#include "pairforge/corpus.hpp"
#include "pairforge/gan.hpp"
#include "pairforge/source_gen.hpp"

namespace pairforge {

struct RunConfig {
  std::uint64_t seed = 0;
  CorpusConfig corpus;
  GanTrainConfig gan;
  CaptionerTrainConfig captioner;
  std::size_t caption_max_len = kMaxCaptionTokens;
  std::size_t gmm_components = 6;
  GmmFitOptions gmm;
  std::filesystem::path work_dir = "run";

  /// Copies `seed` into the per-stage configs.
  void apply_seed(std::uint64_t s);
  void validate() const;
  /// Canonical text form; parse_run_config(to_toml()) reproduces the config.
  std::string to_toml() const;
};

/// Throws ConfigError with the line number for syntax errors, unknown keys,
/// or values of the wrong type.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace pairforge
