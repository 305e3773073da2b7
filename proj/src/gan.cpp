// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#include "pairforge/gan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pairforge {
namespace {

constexpr std::size_t kGateDim = 3 * kTextEmbedDim;
constexpr std::size_t kGenBaseChannels = 128;
constexpr std::size_t kGenMidChannels = 64;
constexpr std::size_t kDiscChannels1 = 32;
constexpr std::size_t kDiscChannels2 = 64;
constexpr std::size_t kFeatureSize = 4;
constexpr std::size_t kInferenceBatch = 64;

double he_std(std::size_t fan_in) { return std::sqrt(2.0 / static_cast<double>(fan_in)); }

template <typename T>
void require_finite_grads(const std::vector<BasicTensor<T>*>& params) {
  for (const auto* p : params) {
    for (T g : p->grad) {
      if (!std::isfinite(g)) throw NumericError("non-finite parameter gradient during training");
    }
  }
}

Tensor stack_images(const std::vector<const Tensor*>& images) {
  Tensor out({images.size(), kImageChannels, kImageSize, kImageSize});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->numel() != kImageNumel) {
      throw ShapeError("expected a 3x16x16 image, got " + shape_to_string(images[i]->shape));
    }
    std::copy(images[i]->data.begin(), images[i]->data.end(), out.data.begin() + i * kImageNumel);
  }
  return out;
}

Tensor stack_rows(const std::vector<std::vector<float>>& rows, std::size_t width, std::size_t begin,
                  std::size_t end) {
  Tensor out({end - begin, width});
  for (std::size_t i = begin; i < end; ++i) {
    if (rows[i].size() != width) {
      throw ShapeError("expected a vector of length " + std::to_string(width) + ", got " +
                       std::to_string(rows[i].size()));
    }
    std::copy(rows[i].begin(), rows[i].end(), out.data.begin() + (i - begin) * width);
  }
  return out;
}

std::vector<float> row_of(Var<float> v, std::size_t row) {
  const std::size_t width = v.numel() / v.shape()[0];
  const auto vals = v.value();
  return {vals.begin() + row * width, vals.begin() + (row + 1) * width};
}

}  // namespace

template <typename T>
NamedParams<T> GanParams<T>::named() {
  NamedParams<T> out = named_params(psi, "psi.");
  for (auto& p : named_params(gen, "gen.")) out.push_back(p);
  for (auto& p : named_params(disc, "disc.")) out.push_back(p);
  return out;
}

template struct GanParams<float>;
template struct GanParams<double>;

GanParams<float> init_gan(std::size_t vocab_size, std::uint64_t seed) {
  Rng rng(seed);
  GanParams<float> p;
  const double gru_bound = 1.0 / std::sqrt(static_cast<double>(kTextEmbedDim));
  p.psi.embed = normal_init<float>({vocab_size, kTextTokenDim}, 1.0, rng);
  p.psi.w_ih = uniform_init<float>({kTextTokenDim, kGateDim}, gru_bound, rng);
  p.psi.w_hh = uniform_init<float>({kTextEmbedDim, kGateDim}, gru_bound, rng);
  p.psi.b_ih = zeros_init<float>({kGateDim});
  p.psi.b_hh = zeros_init<float>({kGateDim});

  const std::size_t fc_in = kNoiseDim + kTextEmbedDim;
  const std::size_t fc_out = kGenBaseChannels * kFeatureSize * kFeatureSize;
  p.gen.fc_w = normal_init<float>({fc_in, fc_out}, he_std(fc_in), rng);
  p.gen.fc_b = zeros_init<float>({fc_out});
  // A stride-2 transposed conv feeds each output from C_in * k*k / 4 taps.
  p.gen.up1_w = normal_init<float>({kGenBaseChannels, kGenMidChannels, 4, 4}, he_std(kGenBaseChannels * 4), rng);
  p.gen.up1_b = zeros_init<float>({kGenMidChannels});
  p.gen.up2_w = normal_init<float>({kGenMidChannels, kImageChannels, 4, 4}, 0.5 * he_std(kGenMidChannels * 4), rng);
  p.gen.up2_b = zeros_init<float>({kImageChannels});

  p.disc.conv1_w = normal_init<float>({kDiscChannels1, kImageChannels, 4, 4}, he_std(kImageChannels * 16), rng);
  p.disc.conv1_b = zeros_init<float>({kDiscChannels1});
  p.disc.conv2_w = normal_init<float>({kDiscChannels2, kDiscChannels1, 4, 4}, he_std(kDiscChannels1 * 16), rng);
  p.disc.conv2_b = zeros_init<float>({kDiscChannels2});
  const std::size_t join_in = kDiscChannels2 + kTextEmbedDim;
  const std::size_t head_in = kDiscJoinChannels * kFeatureSize * kFeatureSize;
  p.disc.join_w = normal_init<float>({kDiscJoinChannels, join_in, 1, 1}, he_std(join_in), rng);
  p.disc.join_b = zeros_init<float>({kDiscJoinChannels});
  p.disc.out_w = normal_init<float>({head_in, 1}, 1.0 / std::sqrt(double(head_in)), rng);
  p.disc.out_b = zeros_init<float>({1});
  return p;
}

GanParams<float> zero_gan(std::size_t vocab_size) {
  GanParams<float> p = init_gan(vocab_size, 0);
  for (auto& [name, t] : p.named()) std::fill(t->data.begin(), t->data.end(), 0.0f);
  return p;
}

// ---- graph building blocks ----

template <typename T>
Var<T> encode_text(const TextEncoderSlots<Var<T>>& psi, const std::vector<std::vector<int>>& tokens) {
  if (tokens.empty()) throw ContractError("encode_text: empty batch");
  std::size_t max_len = 0;
  for (const auto& seq : tokens) {
    if (seq.empty()) throw ContractError("encode_text: empty token sequence");
    max_len = std::max(max_len, seq.size());
  }
  BasicGraph<T>& g = *psi.embed.graph;
  const std::size_t batch = tokens.size();
  const std::size_t h = kTextEmbedDim;
  Var<T> state = g.constant(BasicTensor<T>({batch, h}));
  std::vector<int> ids(batch);
  for (std::size_t t = 0; t < max_len; ++t) {
    bool ragged = false;
    for (std::size_t b = 0; b < batch; ++b) {
      ids[b] = t < tokens[b].size() ? tokens[b][t] : -1;
      ragged = ragged || ids[b] < 0;
    }
    Var<T> x = embedding(psi.embed, std::span<const int>(ids));
    Var<T> gi = add_bias(matmul(x, psi.w_ih), psi.b_ih);
    Var<T> gh = add_bias(matmul(state, psi.w_hh), psi.b_hh);
    Var<T> r = activation(add(slice_cols(gi, 0, h), slice_cols(gh, 0, h)), Activation::kSigmoid);
    Var<T> z = activation(add(slice_cols(gi, h, h), slice_cols(gh, h, h)), Activation::kSigmoid);
    Var<T> n = activation(add(slice_cols(gi, 2 * h, h), mul(r, slice_cols(gh, 2 * h, h))),
                          Activation::kTanh);
    // h' = (1 - z) * n + z * h
    Var<T> next = add(n, mul(z, sub(state, n)));
    if (ragged) {
      // Finished sequences keep their last state.
      BasicTensor<T> mask({batch, h});
      for (std::size_t b = 0; b < batch; ++b) {
        if (ids[b] >= 0) std::fill_n(mask.data.begin() + b * h, h, T(1));
      }
      next = add(state, mul(g.constant(mask), sub(next, state)));
    }
    state = next;
  }
  return state;
}

template <typename T>
Var<T> generator_forward(const GeneratorSlots<Var<T>>& gen, Var<T> z, Var<T> psi) {
  const std::size_t batch = z.shape()[0];
  Var<T> x = concat_axis1(z, psi);
  Var<T> hidden = activation(add_bias(matmul(x, gen.fc_w), gen.fc_b), Activation::kRelu);
  hidden = reshape(hidden, {batch, kGenBaseChannels, kFeatureSize, kFeatureSize});
  hidden = activation(conv2d_transpose(hidden, gen.up1_w, gen.up1_b, 2, 1), Activation::kRelu);
  return activation(conv2d_transpose(hidden, gen.up2_w, gen.up2_b, 2, 1), Activation::kTanh);
}

template <typename T>
Var<T> discriminator_features(const DiscriminatorSlots<Var<T>>& disc, Var<T> images) {
  if (images.shape().size() != 4 || images.shape()[1] != kImageChannels ||
      images.shape()[2] != kImageSize || images.shape()[3] != kImageSize) {
    throw ShapeError("discriminator expects [B x 3 x 16 x 16], got " + shape_to_string(images.shape()));
  }
  Var<T> h = activation(conv2d(images, disc.conv1_w, disc.conv1_b, 2, 1), Activation::kLeakyRelu);
  return activation(conv2d(h, disc.conv2_w, disc.conv2_b, 2, 1), Activation::kLeakyRelu);
}

template <typename T>
Var<T> discriminator_head(const DiscriminatorSlots<Var<T>>& disc, Var<T> features, Var<T> psi) {
  const std::size_t batch = features.shape()[0];
  if (psi.shape().size() != 2 || psi.shape()[0] != batch || psi.shape()[1] != kTextEmbedDim) {
    throw ShapeError("text embedding batch " + shape_to_string(psi.shape()) + " does not match " +
                     shape_to_string(features.shape()));
  }
  Var<T> joined = concat_axis1(features, replicate_spatial(psi, kFeatureSize, kFeatureSize));
  joined = activation(conv2d(joined, disc.join_w, disc.join_b, 1, 0), Activation::kLeakyRelu);
  Var<T> flat = reshape(joined, {batch, kDiscJoinChannels * kFeatureSize * kFeatureSize});
  return activation(add_bias(matmul(flat, disc.out_w), disc.out_b), Activation::kSigmoid);
}

template <typename T>
Var<T> d_objective(Var<T> s_real_match, Var<T> s_real_mismatch, Var<T> s_fake_match) {
  const T lo = static_cast<T>(kScoreClamp);
  const T hi = static_cast<T>(1.0 - kScoreClamp);
  auto log_score = [&](Var<T> s) { return mean(log(clamp(s, lo, hi))); };
  auto log_one_minus = [&](Var<T> s) { return mean(log(affine(clamp(s, lo, hi), T(-1), T(1)))); };
  Var<T> wrong = add(log_one_minus(s_real_mismatch), log_one_minus(s_fake_match));
  return add(log_score(s_real_match), affine(wrong, T(0.5), T(0)));
}

template <typename T>
Var<T> g_objective(Var<T> s_fake_match) {
  const T lo = static_cast<T>(kScoreClamp);
  const T hi = static_cast<T>(1.0 - kScoreClamp);
  return affine(mean(log(clamp(s_fake_match, lo, hi))), T(-1), T(0));
}

double d_objective(double s_real_match, double s_real_mismatch, double s_fake_match) {
  auto c = [](double s) { return std::clamp(s, kScoreClamp, 1.0 - kScoreClamp); };
  return std::log(c(s_real_match)) +
         0.5 * (std::log(1.0 - c(s_real_mismatch)) + std::log(1.0 - c(s_fake_match)));
}

double g_objective(double s_fake_match) {
  return -std::log(std::clamp(s_fake_match, kScoreClamp, 1.0 - kScoreClamp));
}

#define PAIRFORGE_INSTANTIATE_GAN(T)                                                               \
  template Var<T> encode_text<T>(const TextEncoderSlots<Var<T>>&, const std::vector<std::vector<int>>&); \
  template Var<T> generator_forward<T>(const GeneratorSlots<Var<T>>&, Var<T>, Var<T>);              \
  template Var<T> discriminator_features<T>(const DiscriminatorSlots<Var<T>>&, Var<T>);             \
  template Var<T> discriminator_head<T>(const DiscriminatorSlots<Var<T>>&, Var<T>, Var<T>);         \
  template Var<T> d_objective<T>(Var<T>, Var<T>, Var<T>);                                          \
  template Var<T> g_objective<T>(Var<T>);

PAIRFORGE_INSTANTIATE_GAN(float)
PAIRFORGE_INSTANTIATE_GAN(double)
#undef PAIRFORGE_INSTANTIATE_GAN

// ---- inference ----

std::vector<std::vector<float>> psi_encode_batch(const GanParams<float>& params,
                                                 const std::vector<std::vector<int>>& tokens) {
  std::vector<std::vector<float>> out;
  out.reserve(tokens.size());
  for (std::size_t begin = 0; begin < tokens.size(); begin += kInferenceBatch) {
    const std::size_t end = std::min(tokens.size(), begin + kInferenceBatch);
    Graph g;
    const auto psi = bind_frozen(g, params.psi);
    const std::vector<std::vector<int>> chunk(tokens.begin() + begin, tokens.begin() + end);
    Var<float> emb = encode_text(psi, chunk);
    for (std::size_t i = 0; i < chunk.size(); ++i) out.push_back(row_of(emb, i));
  }
  return out;
}

std::vector<float> psi_encode(const GanParams<float>& params, const std::vector<int>& tokens) {
  return psi_encode_batch(params, {tokens}).front();
}

std::vector<Tensor> generate_images(const GanParams<float>& params,
                                    const std::vector<std::vector<float>>& z,
                                    const std::vector<std::vector<float>>& psi) {
  if (z.size() != psi.size()) throw ShapeError("generate_images: noise and text batch sizes differ");
  std::vector<Tensor> out;
  out.reserve(z.size());
  for (std::size_t begin = 0; begin < z.size(); begin += kInferenceBatch) {
    const std::size_t end = std::min(z.size(), begin + kInferenceBatch);
    Graph g;
    const auto gen = bind_frozen(g, params.gen);
    Var<float> img = generator_forward(gen, g.constant(stack_rows(z, kNoiseDim, begin, end)),
                                       g.constant(stack_rows(psi, kTextEmbedDim, begin, end)));
    for (std::size_t i = 0; i < end - begin; ++i) {
      out.emplace_back(Shape{kImageChannels, kImageSize, kImageSize}, row_of(img, i));
    }
  }
  return out;
}

Tensor generate_image(const GanParams<float>& params, std::span<const float> z, std::span<const float> psi) {
  return generate_images(params, {{z.begin(), z.end()}}, {{psi.begin(), psi.end()}}).front();
}

std::vector<std::vector<float>> phi_extract_batch(const GanParams<float>& params,
                                                  const std::vector<Tensor>& images) {
  std::vector<std::vector<float>> out;
  out.reserve(images.size());
  for (std::size_t begin = 0; begin < images.size(); begin += kInferenceBatch) {
    const std::size_t end = std::min(images.size(), begin + kInferenceBatch);
    std::vector<const Tensor*> chunk;
    for (std::size_t i = begin; i < end; ++i) chunk.push_back(&images[i]);
    Graph g;
    const auto disc = bind_frozen(g, params.disc);
    Var<float> phi = discriminator_features(disc, g.constant(stack_images(chunk)));
    for (std::size_t i = 0; i < chunk.size(); ++i) out.push_back(row_of(phi, i));
  }
  return out;
}

std::vector<float> phi_extract(const GanParams<float>& params, const Tensor& image) {
  return phi_extract_batch(params, {image}).front();
}

std::vector<double> discriminate_batch(const GanParams<float>& params, const std::vector<Tensor>& images,
                                       const std::vector<std::vector<float>>& psi) {
  if (images.size() != psi.size()) throw ShapeError("discriminate: image and text batch sizes differ");
  std::vector<double> out;
  out.reserve(images.size());
  for (std::size_t begin = 0; begin < images.size(); begin += kInferenceBatch) {
    const std::size_t end = std::min(images.size(), begin + kInferenceBatch);
    std::vector<const Tensor*> chunk;
    for (std::size_t i = begin; i < end; ++i) chunk.push_back(&images[i]);
    Graph g;
    const auto disc = bind_frozen(g, params.disc);
    Var<float> feats = discriminator_features(disc, g.constant(stack_images(chunk)));
    Var<float> scores = discriminator_head(disc, feats, g.constant(stack_rows(psi, kTextEmbedDim, begin, end)));
    for (float s : scores.value()) out.push_back(s);
  }
  return out;
}

double discriminate(const GanParams<float>& params, const Tensor& image, std::span<const float> psi) {
  return discriminate_batch(params, {image}, {{psi.begin(), psi.end()}}).front();
}

std::vector<float> sample_noise(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> z(kNoiseDim);
  for (auto& v : z) v = static_cast<float>(rng.normal());
  return z;
}

// ---- training ----

void GanTrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(adam.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(psi_g_weight >= 0.0 && psi_g_weight <= 1.0)) throw ConfigError("psi_g_weight must lie in [0, 1]");
}

std::vector<std::vector<int>> pick_captions(const std::vector<const PairedSample*>& batch,
                                            const Vocab& vocab, Rng& rng) {
  std::vector<std::vector<int>> out;
  out.reserve(batch.size());
  for (const auto* s : batch) {
    if (s->captions.empty()) throw ContractError("sample without captions");
    out.push_back(encode_caption(vocab, s->captions[rng.uniform_int(s->captions.size())]));
  }
  return out;
}

GanTrainResult train_gan(const std::vector<PairedSample>& train, const Vocab& vocab,
                         const GanTrainConfig& cfg, const GanEpochCallback& on_epoch) {
  cfg.validate();
  if (train.empty()) throw ConfigError("training set is empty");
  const int first_class = train.front().class_id;
  if (std::all_of(train.begin(), train.end(), [&](const auto& s) { return s.class_id == first_class; })) {
    throw ConfigError("training set has a single class; mismatched captions cannot be formed");
  }

  GanTrainResult result{init_gan(vocab.size(), derive_seed(cfg.seed, 1)), {}};
  GanParams<float>& p = result.params;
  const auto psi_params = param_list(p.psi);
  const auto gen_params = param_list(p.gen);
  const auto disc_params = param_list(p.disc);
  AdamState psi_opt{cfg.adam, {}, {}, 0};
  AdamState gen_opt{cfg.adam, {}, {}, 0};
  AdamState disc_opt{cfg.adam, {}, {}, 0};

  Rng order_rng(derive_seed(cfg.seed, 2));
  Rng batch_rng(derive_seed(cfg.seed, 3));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.uniform_int(i)]);

    double sum_d = 0.0, sum_g = 0.0, hits = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const std::size_t n = end - begin;
      std::vector<const PairedSample*> batch, wrong;
      std::vector<const Tensor*> images;
      for (std::size_t i = begin; i < end; ++i) {
        const PairedSample& s = train[order[i]];
        batch.push_back(&s);
        images.push_back(&s.image);
        const PairedSample* other;
        do {
          other = &train[batch_rng.uniform_int(train.size())];
        } while (other->class_id == s.class_id);
        wrong.push_back(other);
      }
      const auto match_tokens = pick_captions(batch, vocab, batch_rng);
      const auto wrong_tokens = pick_captions(wrong, vocab, batch_rng);
      Tensor z({n, kNoiseDim});
      for (auto& v : z.data) v = static_cast<float>(batch_rng.normal());
      const Tensor real = stack_images(images);

      // Fakes for the D step come from the current G and psi without gradient.
      Tensor fake;
      {
        Graph g;
        const auto psi = bind_frozen(g, p.psi);
        const auto gen = bind_frozen(g, p.gen);
        Var<float> img = generator_forward(gen, g.constant(z), encode_text(psi, match_tokens));
        fake = Tensor(img.shape(), {img.value().begin(), img.value().end()});
      }

      {
        Graph g;
        const auto psi = bind_trainable(g, p.psi);
        const auto disc = bind_trainable(g, p.disc);
        Var<float> t_match = encode_text(psi, match_tokens);
        Var<float> t_wrong = encode_text(psi, wrong_tokens);
        Var<float> real_feats = discriminator_features(disc, g.constant(real));
        Var<float> s_rm = discriminator_head(disc, real_feats, t_match);
        Var<float> s_rw = discriminator_head(disc, real_feats, t_wrong);
        Var<float> s_fm = discriminator_head(disc, discriminator_features(disc, g.constant(fake)), t_match);
        Var<float> objective = d_objective(s_rm, s_rw, s_fm);
        zero_grads<float>(psi_params);
        zero_grads<float>(disc_params);
        g.backward(affine(objective, -1.0f, 0.0f));
        require_finite_grads(psi_params);
        require_finite_grads(disc_params);
        adam_step<float>(disc_params, disc_opt);
        adam_step<float>(psi_params, psi_opt);
        sum_d += objective.item() * static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          hits += 0.5 * ((s_rm.value()[i] > 0.5f) + (s_fm.value()[i] < 0.5f));
        }
      }

      {
        Graph g;
        const auto psi = bind_trainable(g, p.psi);
        const auto gen = bind_trainable(g, p.gen);
        const auto disc = bind_frozen(g, p.disc);
        Var<float> t_match = encode_text(psi, match_tokens);
        Var<float> img = generator_forward(gen, g.constant(z), t_match);
        Var<float> s_fm = discriminator_head(disc, discriminator_features(disc, img), t_match);
        Var<float> loss = g_objective(s_fm);
        zero_grads<float>(psi_params);
        zero_grads<float>(gen_params);
        g.backward(loss);
        require_finite_grads(psi_params);
        require_finite_grads(gen_params);
        adam_step<float>(gen_params, gen_opt);
        const auto w = static_cast<float>(cfg.psi_g_weight);
        for (auto* t : psi_params) {
          for (auto& v : t->grad) v *= w;
        }
        adam_step<float>(psi_params, psi_opt);
        sum_g += loss.item() * static_cast<double>(n);
      }
    }
    const double total = static_cast<double>(train.size());
    GanEpochMetrics m{epoch + 1, sum_d / total, sum_g / total, hits / total};
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m, p);
  }
  zero_grads<float>(psi_params);
  zero_grads<float>(gen_params);
  zero_grads<float>(disc_params);
  return result;
}

// ---- evaluation ----

double real_match_accuracy(const GanParams<float>& params, const std::vector<PairedSample>& held_out,
                           const Vocab& vocab, std::uint64_t seed) {
  if (held_out.empty()) throw ConfigError("held-out set is empty");
  Rng rng(seed);
  std::vector<const PairedSample*> samples;
  std::vector<Tensor> images;
  for (const auto& s : held_out) {
    samples.push_back(&s);
    images.push_back(s.image);
  }
  const auto psi = psi_encode_batch(params, pick_captions(samples, vocab, rng));
  const auto scores = discriminate_batch(params, images, psi);
  const auto above = std::count_if(scores.begin(), scores.end(), [](double s) { return s > 0.5; });
  return static_cast<double>(above) / static_cast<double>(scores.size());
}

double color_agreement(const GanParams<float>& params, const Vocab& vocab,
                       const std::vector<NamedColor>& colors, std::size_t draws, std::uint64_t seed) {
  if (draws == 0 || colors.empty()) throw ConfigError("color_agreement needs draws and colors");
  Rng rng(seed);
  std::vector<std::vector<int>> tokens;
  std::vector<std::vector<float>> z;
  for (std::size_t i = 0; i < draws; ++i) {
    tokens.push_back(encode_caption(vocab, "the flower is " + colors[i % colors.size()].name));
    std::vector<float> noise(kNoiseDim);
    for (auto& v : noise) v = static_cast<float>(rng.normal());
    z.push_back(std::move(noise));
  }
  const auto images = generate_images(params, z, psi_encode_batch(params, tokens));
  std::size_t agree = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    agree += dominant_attributes(images[i], colors).index == i % colors.size();
  }
  return static_cast<double>(agree) / static_cast<double>(draws);
}

}  // namespace pairforge
