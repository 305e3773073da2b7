// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Matching-aware conditional GAN with a jointly trained GRU text encoder.
//
//   psi : tokens -> R^32              (final GRU hidden state)
//   G   : (z in R^16, psi) -> [3x16x16]
//   D   : (image, psi) -> (0, 1), with phi(image) = its 64x4x4 conv activation
//
// phi is computed before any text enters D, so it is an image-only embedding.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pairforge/autograd.hpp"
#include "pairforge/corpus.hpp"
#include "pairforge/optim.hpp"
#include "pairforge/params.hpp"

namespace pairforge {

inline constexpr std::size_t kNoiseDim = 16;
inline constexpr std::size_t kTextEmbedDim = 32;
inline constexpr std::size_t kTextTokenDim = 24;
inline constexpr std::size_t kImageEmbedDim = 1024;
inline constexpr std::size_t kDiscJoinChannels = 256;
inline constexpr double kScoreClamp = 1e-7;

template <class S>
struct TextEncoderSlots {
  S embed;  // [V x 24]
  S w_ih;   // [24 x 96], gate order (reset, update, candidate)
  S w_hh;   // [32 x 96]
  S b_ih;   // [96]
  S b_hh;   // [96]
  template <class Self, class F>
  static void visit(Self& s, F&& f) {
    f("embed", s.embed);
    f("w_ih", s.w_ih);
    f("w_hh", s.w_hh);
    f("b_ih", s.b_ih);
    f("b_hh", s.b_hh);
  }
};

template <class S>
struct GeneratorSlots {
  S fc_w;   // [48 x 2048]
  S fc_b;   // [2048]
  S up1_w;  // [128 x 64 x 4 x 4]
  S up1_b;  // [64]
  S up2_w;  // [64 x 3 x 4 x 4]
  S up2_b;  // [3]
  template <class Self, class F>
  static void visit(Self& s, F&& f) {
    f("fc.weight", s.fc_w);
    f("fc.bias", s.fc_b);
    f("up1.weight", s.up1_w);
    f("up1.bias", s.up1_b);
    f("up2.weight", s.up2_w);
    f("up2.bias", s.up2_b);
  }
};

template <class S>
struct DiscriminatorSlots {
  S conv1_w;  // [32 x 3 x 4 x 4]
  S conv1_b;  // [32]
  S conv2_w;  // [64 x 32 x 4 x 4]
  S conv2_b;  // [64]
  S join_w;   // [256 x 96 x 1 x 1], over concat(phi map, replicated psi)
  S join_b;   // [256]
  S out_w;    // [4096 x 1]
  S out_b;    // [1]
  template <class Self, class F>
  static void visit(Self& s, F&& f) {
    f("conv1.weight", s.conv1_w);
    f("conv1.bias", s.conv1_b);
    f("conv2.weight", s.conv2_w);
    f("conv2.bias", s.conv2_b);
    f("join.weight", s.join_w);
    f("join.bias", s.join_b);
    f("out.weight", s.out_w);
    f("out.bias", s.out_b);
  }
};

template <typename T>
using TextEncoderParams = TextEncoderSlots<BasicTensor<T>>;
template <typename T>
using GeneratorParams = GeneratorSlots<BasicTensor<T>>;
template <typename T>
using DiscriminatorParams = DiscriminatorSlots<BasicTensor<T>>;

template <typename T>
struct GanParams {
  TextEncoderParams<T> psi;
  GeneratorParams<T> gen;
  DiscriminatorParams<T> disc;

  NamedParams<T> named();
  template <typename U>
  GanParams<U> cast() const {
    return {cast_params<U>(psi), cast_params<U>(gen), cast_params<U>(disc)};
  }
};

/// Fan-in scaled normal conv/dense weights, uniform GRU weights, zero biases.
GanParams<float> init_gan(std::size_t vocab_size, std::uint64_t seed);
/// Every tensor zero; used for the zero-network contracts.
GanParams<float> zero_gan(std::size_t vocab_size);

// ---- graph-level building blocks (f32 and f64) ----

/// Batched encoder over variable-length sequences -> [B x 32].
template <typename T>
Var<T> encode_text(const TextEncoderSlots<Var<T>>& psi, const std::vector<std::vector<int>>& tokens);

/// z [B x 16], psi [B x 32] -> images [B x 3 x 16 x 16].
template <typename T>
Var<T> generator_forward(const GeneratorSlots<Var<T>>& gen, Var<T> z, Var<T> psi);

/// images [B x 3 x 16 x 16] -> phi map [B x 64 x 4 x 4].
template <typename T>
Var<T> discriminator_features(const DiscriminatorSlots<Var<T>>& disc, Var<T> images);

/// phi map [B x 64 x 4 x 4], psi [B x 32] -> scores [B x 1] in (0, 1).
template <typename T>
Var<T> discriminator_head(const DiscriminatorSlots<Var<T>>& disc, Var<T> features, Var<T> psi);

/// Batch mean of log s_rm + (log(1 - s_rw) + log(1 - s_fm)) / 2 with scores
/// clamped to [1e-7, 1 - 1e-7]. The discriminator maximizes this.
template <typename T>
Var<T> d_objective(Var<T> s_real_match, Var<T> s_real_mismatch, Var<T> s_fake_match);

/// Batch mean of -log s_fm (non-saturating generator loss).
template <typename T>
Var<T> g_objective(Var<T> s_fake_match);

double d_objective(double s_real_match, double s_real_mismatch, double s_fake_match);
double g_objective(double s_fake_match);

// ---- single-sample inference on f32 parameters ----

std::vector<float> psi_encode(const GanParams<float>& params, const std::vector<int>& tokens);
Tensor generate_image(const GanParams<float>& params, std::span<const float> z,
                      std::span<const float> psi);
double discriminate(const GanParams<float>& params, const Tensor& image, std::span<const float> psi);
std::vector<float> phi_extract(const GanParams<float>& params, const Tensor& image);

/// Batched variants; images are [3x16x16] tensors.
std::vector<std::vector<float>> psi_encode_batch(const GanParams<float>& params,
                                                 const std::vector<std::vector<int>>& tokens);
std::vector<Tensor> generate_images(const GanParams<float>& params,
                                    const std::vector<std::vector<float>>& z,
                                    const std::vector<std::vector<float>>& psi);
std::vector<std::vector<float>> phi_extract_batch(const GanParams<float>& params,
                                                  const std::vector<Tensor>& images);
std::vector<double> discriminate_batch(const GanParams<float>& params,
                                       const std::vector<Tensor>& images,
                                       const std::vector<std::vector<float>>& psi);

/// Standard-normal noise vector drawn from a dedicated stream.
std::vector<float> sample_noise(std::uint64_t seed);

// ---- training ----

struct GanTrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  AdamConfig adam{2e-4, 0.5, 0.999, 1e-8};
  std::uint64_t seed = 0;
  std::size_t checkpoint_interval = 0;  // epochs between periodic checkpoints; 0 disables
  // Scale on the text encoder's gradient in the G step. At full weight G drags
  // every caption embedding toward one point before D has learned to match.
  double psi_g_weight = 0.1;

  void validate() const;
};

struct GanEpochMetrics {
  std::size_t epoch = 0;
  double loss_d = 0.0;  // mean L_D (maximized by D)
  double loss_g = 0.0;  // mean -log D(G(z, psi), psi)
  double d_accuracy = 0.0;  // mean of [s_rm > 0.5] and [s_fm < 0.5] over the epoch
};

struct GanTrainResult {
  GanParams<float> params;
  std::vector<GanEpochMetrics> metrics;
};

using GanEpochCallback = std::function<void(const GanEpochMetrics&, const GanParams<float>&)>;

/// Alternates one D step (on -L_D) and one G step per minibatch. Mismatched
/// captions come from a uniformly chosen sample of a different class.
GanTrainResult train_gan(const std::vector<PairedSample>& train, const Vocab& vocab,
                         const GanTrainConfig& cfg, const GanEpochCallback& on_epoch = {});

/// Picks one caption per sample with `rng`; returns encoded token sequences.
std::vector<std::vector<int>> pick_captions(const std::vector<const PairedSample*>& batch,
                                            const Vocab& vocab, Rng& rng);

// ---- evaluation ----

/// Fraction of held-out (image, own caption) pairs scored above 0.5.
double real_match_accuracy(const GanParams<float>& params, const std::vector<PairedSample>& held_out,
                           const Vocab& vocab, std::uint64_t seed);

/// Fraction of (caption "the flower is <c>", z) draws whose generated image has
/// dominant color c; colors are cycled and z is drawn from `seed`.
double color_agreement(const GanParams<float>& params, const Vocab& vocab,
                       const std::vector<NamedColor>& colors, std::size_t draws, std::uint64_t seed);

}  // namespace pairforge
