// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Checkpoint file layout (little endian):
//
//   "PGK1" | u32 version | u32 kind (0 = gan, 1 = captioner)
//   u32 tensor count, then per tensor: u32 name length, UTF-8 name,
//                                      u32 rank, u32 dims[rank], f32 data
//   u32 metadata length, metadata JSON
//
// Saving a loaded checkpoint reproduces the original bytes.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "pairforge/captioner.hpp"
#include "pairforge/gan.hpp"

namespace pairforge {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class ModelKind : std::uint32_t { kGan = 0, kCaptioner = 1 };

const char* model_kind_name(ModelKind kind);

struct Checkpoint {
  ModelKind kind = ModelKind::kGan;
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::string metadata = "{}";  // JSON object: seed, epoch, config, corpus_hash, vocab
};

std::string encode_checkpoint(const Checkpoint& ckpt);
/// Throws ParseError with the byte offset of the first problem.
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws DependencyError when the file does not exist.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Metadata every checkpoint carries.
struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  std::string corpus_hash;
  std::vector<std::string> vocab_words;
  std::string config_json = "{}";  // echo of the training configuration
};

std::string encode_info(const CheckpointInfo& info);
CheckpointInfo decode_info(const std::string& metadata);

Checkpoint gan_checkpoint(const GanParams<float>& params, const CheckpointInfo& info);
Checkpoint captioner_checkpoint(const CaptionerParams<float>& params, const CheckpointInfo& info);

/// Rebuild parameters; every expected tensor must be present with the right shape.
GanParams<float> gan_from_checkpoint(const Checkpoint& ckpt);
CaptionerParams<float> captioner_from_checkpoint(const Checkpoint& ckpt);

/// Writes a warning to `warn` when the checkpoint was trained on another corpus.
/// Returns true when the hashes match.
bool check_corpus_hash(const Checkpoint& ckpt, const std::string& corpus_hash, std::ostream& warn);

}  // namespace pairforge
