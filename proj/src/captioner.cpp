// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#include "pairforge/captioner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pairforge {
namespace {

constexpr std::size_t kGates = 4 * kCaptionHiddenDim;

void check_caption(const std::vector<int>& seq) {
  if (seq.size() < 2 || seq.front() != kStartId || seq.back() != kEndId) {
    throw ContractError("caption tokens must be START ... END");
  }
}

template <typename T>
struct LstmState {
  Var<T> h;
  Var<T> c;
};

template <typename T>
LstmState<T> lstm_step(const CaptionerSlots<Var<T>>& theta, Var<T> x, const LstmState<T>& s) {
  const std::size_t h = kCaptionHiddenDim;
  Var<T> gates = add_bias(add(matmul(x, theta.w_ih), matmul(s.h, theta.w_hh)), theta.bias);
  Var<T> i = activation(slice_cols(gates, 0, h), Activation::kSigmoid);
  Var<T> f = activation(slice_cols(gates, h, h), Activation::kSigmoid);
  Var<T> g = activation(slice_cols(gates, 2 * h, h), Activation::kTanh);
  Var<T> o = activation(slice_cols(gates, 3 * h, h), Activation::kSigmoid);
  Var<T> c = add(mul(f, s.c), mul(i, g));
  return {mul(o, activation(c, Activation::kTanh)), c};
}

template <typename T>
LstmState<T> prime(const CaptionerSlots<Var<T>>& theta, Var<T> phi) {
  if (phi.shape().size() != 2 || phi.shape()[1] != kImageEmbedDim) {
    throw ShapeError("captioner expects image embeddings [B x 1024], got " + shape_to_string(phi.shape()));
  }
  BasicGraph<T>& g = *phi.graph;
  const std::size_t batch = phi.shape()[0];
  LstmState<T> s{g.constant(BasicTensor<T>({batch, kCaptionHiddenDim})),
                 g.constant(BasicTensor<T>({batch, kCaptionHiddenDim}))};
  Var<T> x0 = add_bias(matmul(phi, theta.proj_w), theta.proj_b);
  return lstm_step(theta, x0, s);
}

Tensor stack_phi(const std::vector<std::vector<float>>& phi, std::size_t begin, std::size_t end) {
  Tensor out({end - begin, kImageEmbedDim});
  for (std::size_t i = begin; i < end; ++i) {
    if (phi[i].size() != kImageEmbedDim) {
      throw ShapeError("image embedding must have 1024 entries, got " + std::to_string(phi[i].size()));
    }
    std::copy(phi[i].begin(), phi[i].end(), out.data.begin() + (i - begin) * kImageEmbedDim);
  }
  return out;
}

}  // namespace

CaptionerParams<float> init_captioner(std::size_t vocab_size, std::uint64_t seed) {
  Rng rng(seed);
  CaptionerParams<float> p;
  p.proj_w = normal_init<float>({kImageEmbedDim, kCaptionWordDim}, 1.0 / std::sqrt(double(kImageEmbedDim)), rng);
  p.proj_b = zeros_init<float>({kCaptionWordDim});
  p.embed = normal_init<float>({vocab_size, kCaptionWordDim}, 1.0, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(kCaptionHiddenDim));
  p.w_ih = uniform_init<float>({kCaptionWordDim, kGates}, bound, rng);
  p.w_hh = uniform_init<float>({kCaptionHiddenDim, kGates}, bound, rng);
  p.bias = zeros_init<float>({kGates});
  // Forget gate starts open.
  std::fill_n(p.bias.data.begin() + kCaptionHiddenDim, kCaptionHiddenDim, 1.0f);
  p.out_w = uniform_init<float>({kCaptionHiddenDim, vocab_size}, bound, rng);
  p.out_b = zeros_init<float>({vocab_size});
  return p;
}

template <typename T>
std::vector<Var<T>> caption_logits(const CaptionerSlots<Var<T>>& theta, Var<T> phi,
                                   const std::vector<std::vector<int>>& tokens) {
  if (tokens.size() != phi.shape()[0]) throw ShapeError("caption batch does not match embedding batch");
  std::size_t max_len = 0;
  for (const auto& seq : tokens) {
    check_caption(seq);
    max_len = std::max(max_len, seq.size());
  }
  LstmState<T> s = prime(theta, phi);
  std::vector<Var<T>> out;
  std::vector<int> ids(tokens.size());
  for (std::size_t t = 0; t + 1 < max_len; ++t) {
    for (std::size_t b = 0; b < tokens.size(); ++b) ids[b] = t + 1 < tokens[b].size() ? tokens[b][t] : -1;
    s = lstm_step(theta, embedding(theta.embed, std::span<const int>(ids)), s);
    out.push_back(add_bias(matmul(s.h, theta.out_w), theta.out_b));
  }
  return out;
}

template <typename T>
Var<T> caption_nll(const CaptionerSlots<Var<T>>& theta, Var<T> phi,
                   const std::vector<std::vector<int>>& tokens) {
  const auto logits = caption_logits(theta, phi, tokens);
  std::vector<int> targets(tokens.size());
  Var<T> total;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    for (std::size_t b = 0; b < tokens.size(); ++b) {
      targets[b] = t + 1 < tokens[b].size() ? tokens[b][t + 1] : -1;
    }
    Var<T> step = cross_entropy_logits(logits[t], std::span<const int>(targets));
    total = t == 0 ? step : add(total, step);
  }
  return total;
}

template std::vector<Var<float>> caption_logits<float>(const CaptionerSlots<Var<float>>&, Var<float>,
                                                       const std::vector<std::vector<int>>&);
template std::vector<Var<double>> caption_logits<double>(const CaptionerSlots<Var<double>>&, Var<double>,
                                                        const std::vector<std::vector<int>>&);
template Var<float> caption_nll<float>(const CaptionerSlots<Var<float>>&, Var<float>,
                                       const std::vector<std::vector<int>>&);
template Var<double> caption_nll<double>(const CaptionerSlots<Var<double>>&, Var<double>,
                                         const std::vector<std::vector<int>>&);

double caption_nll(const CaptionerParams<float>& theta, const std::vector<float>& phi,
                   const std::vector<int>& tokens) {
  Graph g;
  const auto vars = bind_frozen(g, theta);
  return caption_nll(vars, g.constant(stack_phi({phi}, 0, 1)), {tokens}).item();
}

std::vector<std::vector<double>> caption_distributions(const CaptionerParams<float>& theta,
                                                       const std::vector<float>& phi,
                                                       const std::vector<int>& tokens) {
  Graph g;
  const auto vars = bind_frozen(g, theta);
  std::vector<std::vector<double>> out;
  for (Var<float> logits : caption_logits(vars, g.constant(stack_phi({phi}, 0, 1)), {tokens})) {
    const auto v = logits.value();
    const double peak = *std::max_element(v.begin(), v.end());
    std::vector<double> row(v.size());
    double z = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) z += row[i] = std::exp(v[i] - peak);
    for (auto& p : row) p /= z;
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<std::vector<int>> greedy_decode_batch(const CaptionerParams<float>& theta,
                                                  const std::vector<std::vector<float>>& phi,
                                                  std::size_t max_len) {
  std::vector<std::vector<int>> out(phi.size(), std::vector<int>{kStartId});
  if (phi.empty() || max_len <= 1) return out;
  Graph g;
  const auto vars = bind_frozen(g, theta);
  LstmState<float> s = prime(vars, g.constant(stack_phi(phi, 0, phi.size())));
  std::vector<int> ids(phi.size(), kStartId);
  std::vector<bool> done(phi.size(), false);
  const std::size_t vocab = theta.out_b.numel();
  for (std::size_t len = 1; len < max_len; ++len) {
    s = lstm_step(vars, embedding(vars.embed, std::span<const int>(ids)), s);
    const auto logits = add_bias(matmul(s.h, vars.out_w), vars.out_b).value();
    bool all_done = true;
    for (std::size_t b = 0; b < phi.size(); ++b) {
      if (done[b]) continue;
      int best = -1;
      for (std::size_t v = 0; v < vocab; ++v) {
        if (static_cast<int>(v) == kPadId || static_cast<int>(v) == kStartId) continue;
        if (best < 0 || logits[b * vocab + v] > logits[b * vocab + static_cast<std::size_t>(best)]) {
          best = static_cast<int>(v);
        }
      }
      out[b].push_back(best);
      ids[b] = best;
      done[b] = best == kEndId;
      all_done = all_done && done[b];
    }
    if (all_done) break;
  }
  return out;
}

std::vector<int> greedy_decode(const CaptionerParams<float>& theta, const std::vector<float>& phi,
                               std::size_t max_len) {
  return greedy_decode_batch(theta, {phi}, max_len).front();
}

void CaptionerTrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(adam.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
}

CaptionerTrainResult train_captioner(const std::vector<PairedSample>& train, const GanParams<float>& gan,
                                     const Vocab& vocab, const CaptionerTrainConfig& cfg,
                                     const CaptionerEpochCallback& on_epoch) {
  cfg.validate();
  if (train.empty()) throw ConfigError("training set is empty");
  CaptionerTrainResult result{init_captioner(vocab.size(), derive_seed(cfg.seed, 11)), {}};
  auto& p = result.params;
  const auto params = param_list(p);
  AdamState opt{cfg.adam, {}, {}, 0};

  std::vector<Tensor> images;
  images.reserve(train.size());
  for (const auto& s : train) images.push_back(s.image);
  const auto phi = phi_extract_batch(gan, images);

  Rng order_rng(derive_seed(cfg.seed, 12));
  Rng caption_rng(derive_seed(cfg.seed, 13));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.uniform_int(i)]);
    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::vector<const PairedSample*> batch;
      std::vector<std::vector<float>> batch_phi;
      for (std::size_t i = begin; i < end; ++i) {
        batch.push_back(&train[order[i]]);
        batch_phi.push_back(phi[order[i]]);
      }
      const auto tokens = pick_captions(batch, vocab, caption_rng);
      Graph g;
      const auto theta = bind_trainable(g, p);
      Var<float> nll = caption_nll(theta, g.constant(stack_phi(batch_phi, 0, batch_phi.size())), tokens);
      total += nll.item();
      zero_grads<float>(params);
      g.backward(affine(nll, 1.0f / static_cast<float>(end - begin), 0.0f));
      for (const auto* t : params) {
        for (float v : t->grad) {
          if (!std::isfinite(v)) throw NumericError("non-finite captioner gradient");
        }
      }
      adam_step<float>(params, opt);
    }
    CaptionerEpochMetrics m{epoch + 1, total / static_cast<double>(train.size())};
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m, p);
  }
  zero_grads<float>(params);
  return result;
}

CaptionAccuracy caption_accuracy(const CaptionerParams<float>& theta, const GanParams<float>& gan,
                                 const Vocab& vocab, const std::vector<PairedSample>& samples,
                                 const std::vector<NamedColor>& colors,
                                 const std::vector<std::string>& shapes) {
  if (samples.empty()) return {};
  std::vector<Tensor> images;
  for (const auto& s : samples) images.push_back(s.image);
  const auto decoded = greedy_decode_batch(theta, phi_extract_batch(gan, images));
  CaptionAccuracy acc;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto words = normalize_caption(decode_tokens(vocab, decoded[i]));
    auto has = [&](const std::string& w) { return std::find(words.begin(), words.end(), w) != words.end(); };
    acc.color += has(colors.at(samples[i].color).name);
    acc.shape += has(shapes.at(samples[i].shape));
  }
  acc.color /= static_cast<double>(samples.size());
  acc.shape /= static_cast<double>(samples.size());
  return acc;
}

}  // namespace pairforge
