// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// LSTM caption model over image embeddings. The projected embedding is the
// step-0 input; START and the caption tokens follow under teacher forcing, so
// a caption of length L contributes L - 1 predictions.

#include <cstdint>
#include <functional>
#include <vector>

#include "pairforge/gan.hpp"

namespace pairforge {

inline constexpr std::size_t kCaptionWordDim = 24;
inline constexpr std::size_t kCaptionHiddenDim = 64;

template <class S>
struct CaptionerSlots {
  S proj_w;   // [1024 x 24]
  S proj_b;   // [24]
  S embed;    // [V x 24]
  S w_ih;     // [24 x 256], gate order (input, forget, cell, output)
  S w_hh;     // [64 x 256]
  S bias;     // [256]
  S out_w;    // [64 x V]
  S out_b;    // [V]
  template <class Self, class F>
  static void visit(Self& s, F&& f) {
    f("proj.weight", s.proj_w);
    f("proj.bias", s.proj_b);
    f("embed", s.embed);
    f("w_ih", s.w_ih);
    f("w_hh", s.w_hh);
    f("bias", s.bias);
    f("out.weight", s.out_w);
    f("out.bias", s.out_b);
  }
};

template <typename T>
using CaptionerParams = CaptionerSlots<BasicTensor<T>>;

CaptionerParams<float> init_captioner(std::size_t vocab_size, std::uint64_t seed);

/// Per-step logits [B x V] for teacher-forced captions; entry t predicts token t + 1.
/// Every sequence must start with START, end with END and hold at least two tokens.
template <typename T>
std::vector<Var<T>> caption_logits(const CaptionerSlots<Var<T>>& theta, Var<T> phi,
                                   const std::vector<std::vector<int>>& tokens);

/// Summed negative log-likelihood over every sequence and position.
template <typename T>
Var<T> caption_nll(const CaptionerSlots<Var<T>>& theta, Var<T> phi,
                   const std::vector<std::vector<int>>& tokens);

double caption_nll(const CaptionerParams<float>& theta, const std::vector<float>& phi,
                   const std::vector<int>& tokens);

/// Softmax rows of the teacher-forced predictions, one per target position.
std::vector<std::vector<double>> caption_distributions(const CaptionerParams<float>& theta,
                                                       const std::vector<float>& phi,
                                                       const std::vector<int>& tokens);

/// Argmax decoding that never emits PAD or START; ties go to the lowest id.
/// Returns START ... END, or a sequence truncated at `max_len` tokens.
std::vector<int> greedy_decode(const CaptionerParams<float>& theta, const std::vector<float>& phi,
                               std::size_t max_len = kMaxCaptionTokens);
std::vector<std::vector<int>> greedy_decode_batch(const CaptionerParams<float>& theta,
                                                  const std::vector<std::vector<float>>& phi,
                                                  std::size_t max_len = kMaxCaptionTokens);

struct CaptionerTrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  AdamConfig adam{2e-3, 0.9, 0.999, 1e-8};
  std::uint64_t seed = 0;

  void validate() const;
};

struct CaptionerEpochMetrics {
  std::size_t epoch = 0;
  double mean_nll = 0.0;  // per caption
};

struct CaptionerTrainResult {
  CaptionerParams<float> params;
  std::vector<CaptionerEpochMetrics> metrics;
};

using CaptionerEpochCallback =
    std::function<void(const CaptionerEpochMetrics&, const CaptionerParams<float>&)>;

/// Adam on caption_nll over (phi(v), t) with the GAN's discriminator frozen;
/// one caption is drawn per image per epoch.
CaptionerTrainResult train_captioner(const std::vector<PairedSample>& train, const GanParams<float>& gan,
                                     const Vocab& vocab, const CaptionerTrainConfig& cfg,
                                     const CaptionerEpochCallback& on_epoch = {});

/// Fractions of images whose greedy caption contains their true color / shape word.
struct CaptionAccuracy {
  double color = 0.0;
  double shape = 0.0;
};

CaptionAccuracy caption_accuracy(const CaptionerParams<float>& theta, const GanParams<float>& gan,
                                 const Vocab& vocab, const std::vector<PairedSample>& samples,
                                 const std::vector<NamedColor>& colors = default_colors(),
                                 const std::vector<std::string>& shapes = default_shapes());

}  // namespace pairforge
