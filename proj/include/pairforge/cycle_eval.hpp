// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Image -> text -> image and text -> image -> text cycles through the
// generator and the captioner, scored by cosine similarity of phi embeddings
// against a random-derangement baseline.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pairforge/captioner.hpp"
#include "pairforge/gan.hpp"

namespace pairforge {

struct CosineResult {
  double value = 0.0;
  bool degenerate = false;  // a zero-norm input; value is then 0
};

CosineResult cosine_checked(std::span<const double> a, std::span<const double> b);
double cosine(std::span<const double> a, std::span<const double> b);
double cosine(std::span<const float> a, std::span<const float> b);

/// Borrowed model handles; a null pointer means the checkpoint is missing.
struct CycleModels {
  const GanParams<float>* gan = nullptr;
  const CaptionerParams<float>* captioner = nullptr;
  const Vocab* vocab = nullptr;

  /// Throws DependencyError naming whatever is missing.
  void require() const;
};

/// Where the generator noise of a cycle comes from. kFixed derives z from
/// (seed, sample key) so a cycle is reproducible per sample; kFresh draws the
/// next vector from a stream seeded once.
class NoiseSource {
 public:
  enum class Kind { kFixed, kFresh };
  explicit NoiseSource(Kind kind = Kind::kFixed, std::uint64_t seed = 0);
  std::vector<float> next(std::uint64_t key);

 private:
  Kind kind_;
  std::uint64_t seed_;
  Rng rng_;
};

struct ImageCycle {
  std::vector<int> tokens;  // g(phi(v))
  Tensor image;             // f(psi(tokens))
};

struct TextCycle {
  Tensor image;             // f(psi(t))
  std::vector<int> tokens;  // g(phi(image))
};

ImageCycle cycle_image(const Tensor& image, const CycleModels& models, NoiseSource& noise, std::uint64_t key = 0);
TextCycle cycle_text(const std::vector<int>& tokens, const CycleModels& models, NoiseSource& noise,
                     std::uint64_t key = 0);

/// Batched image cycles; sample i uses noise key `keys[i]`.
std::vector<ImageCycle> cycle_images(const std::vector<Tensor>& images, const CycleModels& models,
                                     NoiseSource& noise, const std::vector<std::uint64_t>& keys);
std::vector<TextCycle> cycle_texts(const std::vector<std::vector<int>>& tokens, const CycleModels& models,
                                   NoiseSource& noise, const std::vector<std::uint64_t>& keys);

struct CycleSample {
  std::size_t index = 0;  // position in the evaluated set
  std::string caption;    // decoded intermediate caption
  double cos_phi = 0.0;
  double cos_pixel = 0.0;
  std::size_t baseline_partner = 0;
  double baseline_cos_phi = 0.0;
};

struct CycleReport {
  std::size_t n = 0;
  double mean_cos_phi = 0.0;
  double std_cos_phi = 0.0;
  std::optional<double> baseline_cos_phi;  // undefined for a single sample
  double mean_cos_pixel = 0.0;
  std::vector<CycleSample> per_sample;

  std::string to_json() const;
};

/// Seeded derangement of [0, n) (a single cycle, so no fixed points for n >= 2).
std::vector<std::size_t> random_derangement(std::size_t n, Rng& rng);

/// Aggregates precomputed cycle outputs. The baseline pairs phi(v_i) with
/// phi(v'_{pi(i)}) for a seeded derangement pi.
CycleReport summarize_cycles(const std::vector<std::vector<float>>& phi_original,
                             const std::vector<std::vector<float>>& phi_cycled,
                             const std::vector<Tensor>& original, const std::vector<Tensor>& cycled,
                             const std::vector<std::string>& captions, std::uint64_t seed);

/// Runs image cycles over `n` samples drawn without replacement from `samples`.
CycleReport cycle_report(const std::vector<PairedSample>& samples, const CycleModels& models, std::size_t n,
                         std::uint64_t seed);

/// Fraction of color-naming captions whose text cycle keeps the color word.
double text_cycle_color_agreement(const std::vector<std::string>& captions, const CycleModels& models,
                                  std::uint64_t seed, const std::vector<NamedColor>& colors = default_colors());

}  // namespace pairforge
