// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Procedural captioned-flower corpus: colored shapes on a textured background,
// a whitespace tokenizer, stratified splits and a color oracle for scoring
// generated images.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "pairforge/tensor.hpp"

namespace pairforge {

inline constexpr std::size_t kImageChannels = 3;
inline constexpr std::size_t kImageSize = 16;
inline constexpr std::size_t kImageNumel = kImageChannels * kImageSize * kImageSize;
inline constexpr std::size_t kMaxCaptionTokens = 12;

inline constexpr int kPadId = 0;
inline constexpr int kStartId = 1;
inline constexpr int kEndId = 2;
inline constexpr int kUnkId = 3;

struct NamedColor {
  std::string name;
  std::array<float, 3> rgb;  // in [0, 1]
};

const std::vector<NamedColor>& default_colors();
const std::vector<std::string>& default_shapes();

struct CorpusConfig {
  std::size_t num_samples = 2000;
  std::vector<NamedColor> colors = default_colors();
  std::vector<std::string> shapes = default_shapes();
  std::size_t captions_per_image = 3;
  double noise_amplitude = 0.05;
  std::uint64_t seed = 0;

  std::size_t num_classes() const { return colors.size() * shapes.size(); }
  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

struct PairedSample {
  Tensor image;  // [3 x 16 x 16], values in [-1, 1]
  std::vector<std::string> captions;
  int class_id = 0;
  std::size_t color = 0;
  std::size_t shape = 0;
};

/// Rendering parameters of a single sample; exposed so tests can pin them.
struct FlowerLayout {
  std::size_t color = 0;
  std::size_t shape = 0;
  double scale = 0.7;  // radius as a fraction of half the image width
  int offset_x = 0;
  int offset_y = 0;
};

Tensor render_flower(const CorpusConfig& cfg, const FlowerLayout& layout, std::uint64_t noise_seed);

/// Sample i has class i % num_classes and its own RNG stream derived from
/// (seed, i); the result is a pure function of `cfg`.
std::vector<PairedSample> generate_corpus(const CorpusConfig& cfg);

/// Caption templates; `{c}` is the color word and `{s}` the shape word.
const std::vector<std::string>& caption_templates();
std::string fill_template(std::string_view tmpl, std::string_view color, std::string_view shape);

class Vocab {
 public:
  Vocab();
  /// Reserved ids first, then `words` sorted lexicographically.
  explicit Vocab(std::vector<std::string> words);

  int id(std::string_view token) const;  // kUnkId when absent
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  /// Non-reserved tokens in id order.
  std::vector<std::string> words() const;

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> ids_;
};

Vocab build_vocab(const std::vector<PairedSample>& corpus);

/// Lowercase, strip non-alphanumerics, split on whitespace.
std::vector<std::string> normalize_caption(std::string_view text);
std::vector<int> encode_caption(const Vocab& vocab, std::string_view text);
/// Skips PAD/START and stops at END.
std::string decode_tokens(const Vocab& vocab, const std::vector<int>& ids);

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct CorpusSplit {
  std::vector<PairedSample> train;
  std::vector<PairedSample> val;
  std::vector<PairedSample> test;
};

/// Class-stratified, disjoint, deterministic in `seed`.
CorpusSplit split_corpus(const std::vector<PairedSample>& corpus, std::size_t num_classes,
                         SplitRatios ratios = {}, std::uint64_t seed = 0);

struct ColorReading {
  std::string color;
  std::size_t index = 0;
  double confidence = 0.0;  // distance margin between best and second-best color
};

/// Nearest named color to the mean RGB of the brightest pixels, where
/// "brightest" means the top quarter of the image's value (max-channel) range.
ColorReading dominant_attributes(const Tensor& image,
                                 const std::vector<NamedColor>& colors = default_colors());

/// FNV-1a over the exported image and caption payloads.
std::string corpus_hash(const std::vector<PairedSample>& corpus);

void export_corpus(const std::filesystem::path& dir, const CorpusConfig& cfg,
                   const std::vector<PairedSample>& corpus);

struct LoadedCorpus {
  CorpusConfig config;
  std::vector<PairedSample> samples;
};

LoadedCorpus import_corpus(const std::filesystem::path& dir);

}  // namespace pairforge
