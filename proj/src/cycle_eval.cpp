// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#include "pairforge/cycle_eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace pairforge {
namespace {

template <typename T>
CosineResult cosine_impl(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return {0.0, true};
  return {std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0), false};
}

std::vector<std::vector<float>> noise_batch(NoiseSource& noise, const std::vector<std::uint64_t>& keys) {
  std::vector<std::vector<float>> z;
  z.reserve(keys.size());
  for (auto k : keys) z.push_back(noise.next(k));
  return z;
}

}  // namespace

CosineResult cosine_checked(std::span<const double> a, std::span<const double> b) { return cosine_impl(a, b); }
double cosine(std::span<const double> a, std::span<const double> b) { return cosine_impl(a, b).value; }
double cosine(std::span<const float> a, std::span<const float> b) { return cosine_impl(a, b).value; }

void CycleModels::require() const {
  if (gan == nullptr) throw DependencyError("cycle needs a trained GAN checkpoint");
  if (captioner == nullptr) throw DependencyError("cycle needs a trained captioner checkpoint");
  if (vocab == nullptr) throw DependencyError("cycle needs the vocabulary stored with the checkpoints");
}

NoiseSource::NoiseSource(Kind kind, std::uint64_t seed) : kind_(kind), seed_(seed), rng_(derive_seed(seed, 77)) {}

std::vector<float> NoiseSource::next(std::uint64_t key) {
  if (kind_ == Kind::kFixed) return sample_noise(derive_seed(seed_, key));
  std::vector<float> z(kNoiseDim);
  for (auto& v : z) v = static_cast<float>(rng_.normal());
  return z;
}

std::vector<ImageCycle> cycle_images(const std::vector<Tensor>& images, const CycleModels& models,
                                     NoiseSource& noise, const std::vector<std::uint64_t>& keys) {
  models.require();
  if (keys.size() != images.size()) throw ShapeError("cycle_images: one noise key per image");
  const auto tokens = greedy_decode_batch(*models.captioner, phi_extract_batch(*models.gan, images));
  const auto z = noise_batch(noise, keys);
  auto generated = generate_images(*models.gan, z, psi_encode_batch(*models.gan, tokens));
  std::vector<ImageCycle> out;
  for (std::size_t i = 0; i < images.size(); ++i) out.push_back({tokens[i], std::move(generated[i])});
  return out;
}

std::vector<TextCycle> cycle_texts(const std::vector<std::vector<int>>& tokens, const CycleModels& models,
                                   NoiseSource& noise, const std::vector<std::uint64_t>& keys) {
  models.require();
  if (keys.size() != tokens.size()) throw ShapeError("cycle_texts: one noise key per caption");
  const auto z = noise_batch(noise, keys);
  auto images = generate_images(*models.gan, z, psi_encode_batch(*models.gan, tokens));
  const auto decoded = greedy_decode_batch(*models.captioner, phi_extract_batch(*models.gan, images));
  std::vector<TextCycle> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) out.push_back({std::move(images[i]), decoded[i]});
  return out;
}

ImageCycle cycle_image(const Tensor& image, const CycleModels& models, NoiseSource& noise, std::uint64_t key) {
  return cycle_images({image}, models, noise, {key}).front();
}

TextCycle cycle_text(const std::vector<int>& tokens, const CycleModels& models, NoiseSource& noise,
                     std::uint64_t key) {
  return cycle_texts({tokens}, models, noise, {key}).front();
}

std::vector<std::size_t> random_derangement(std::size_t n, Rng& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  // Sattolo's algorithm: a uniformly random n-cycle.
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_int(i - 1)]);
  return perm;
}

CycleReport summarize_cycles(const std::vector<std::vector<float>>& phi_original,
                             const std::vector<std::vector<float>>& phi_cycled,
                             const std::vector<Tensor>& original, const std::vector<Tensor>& cycled,
                             const std::vector<std::string>& captions, std::uint64_t seed) {
  const std::size_t n = phi_original.size();
  if (n == 0) throw ConfigError("cycle report needs at least one sample");
  if (phi_cycled.size() != n || original.size() != n || cycled.size() != n || captions.size() != n) {
    throw ShapeError("cycle report inputs differ in length");
  }
  Rng rng(derive_seed(seed, 78));
  const auto partner = random_derangement(n, rng);
  CycleReport report;
  report.n = n;
  double base_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    CycleSample s;
    s.index = i;
    s.caption = captions[i];
    s.cos_phi = cosine(phi_original[i], phi_cycled[i]);
    s.cos_pixel = cosine(original[i].data, cycled[i].data);
    s.baseline_partner = partner[i];
    s.baseline_cos_phi = cosine(phi_original[i], phi_cycled[partner[i]]);
    report.mean_cos_phi += s.cos_phi;
    report.mean_cos_pixel += s.cos_pixel;
    base_sum += s.baseline_cos_phi;
    report.per_sample.push_back(std::move(s));
  }
  report.mean_cos_phi /= static_cast<double>(n);
  report.mean_cos_pixel /= static_cast<double>(n);
  double var = 0.0;
  for (const auto& s : report.per_sample) var += (s.cos_phi - report.mean_cos_phi) * (s.cos_phi - report.mean_cos_phi);
  report.std_cos_phi = std::sqrt(var / static_cast<double>(n));
  if (n >= 2) report.baseline_cos_phi = base_sum / static_cast<double>(n);
  return report;
}

CycleReport cycle_report(const std::vector<PairedSample>& samples, const CycleModels& models, std::size_t n,
                         std::uint64_t seed) {
  models.require();
  if (n == 0) throw ConfigError("cycle report needs n >= 1");
  if (n > samples.size()) {
    throw ConfigError("cycle report asks for " + std::to_string(n) + " samples but only " +
                      std::to_string(samples.size()) + " are available");
  }
  Rng rng(derive_seed(seed, 79));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);
  order.resize(n);

  std::vector<Tensor> originals;
  std::vector<std::uint64_t> keys;
  for (std::size_t idx : order) {
    originals.push_back(samples[idx].image);
    keys.push_back(idx);
  }
  NoiseSource noise(NoiseSource::Kind::kFixed, seed);
  const auto cycles = cycle_images(originals, models, noise, keys);
  std::vector<Tensor> cycled;
  std::vector<std::string> captions;
  for (const auto& c : cycles) {
    cycled.push_back(c.image);
    captions.push_back(decode_tokens(*models.vocab, c.tokens));
  }
  auto report = summarize_cycles(phi_extract_batch(*models.gan, originals), phi_extract_batch(*models.gan, cycled),
                                 originals, cycled, captions, seed);
  for (std::size_t i = 0; i < n; ++i) report.per_sample[i].index = order[i];
  return report;
}

double text_cycle_color_agreement(const std::vector<std::string>& captions, const CycleModels& models,
                                  std::uint64_t seed, const std::vector<NamedColor>& colors) {
  models.require();
  std::vector<std::vector<int>> tokens;
  std::vector<std::string> wanted;
  std::vector<std::uint64_t> keys;
  for (std::size_t i = 0; i < captions.size(); ++i) {
    const auto words = normalize_caption(captions[i]);
    for (const auto& c : colors) {
      if (std::find(words.begin(), words.end(), c.name) != words.end()) {
        tokens.push_back(encode_caption(*models.vocab, captions[i]));
        wanted.push_back(c.name);
        keys.push_back(i);
        break;
      }
    }
  }
  if (tokens.empty()) throw ConfigError("no caption names a known color");
  NoiseSource noise(NoiseSource::Kind::kFixed, seed);
  const auto cycles = cycle_texts(tokens, models, noise, keys);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < cycles.size(); ++i) {
    const auto words = normalize_caption(decode_tokens(*models.vocab, cycles[i].tokens));
    kept += std::find(words.begin(), words.end(), wanted[i]) != words.end();
  }
  return static_cast<double>(kept) / static_cast<double>(cycles.size());
}

std::string CycleReport::to_json() const {
  nlohmann::ordered_json j;
  j["n"] = n;
  j["mean_cos_phi"] = mean_cos_phi;
  j["std_cos_phi"] = std_cos_phi;
  j["baseline_cos_phi"] = baseline_cos_phi ? nlohmann::ordered_json(*baseline_cos_phi) : nullptr;
  j["mean_cos_pixel"] = mean_cos_pixel;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& s : per_sample) {
    rows.push_back({{"index", s.index},
                    {"caption", s.caption},
                    {"cos_phi", s.cos_phi},
                    {"cos_pixel", s.cos_pixel},
                    {"baseline_partner", s.baseline_partner},
                    {"baseline_cos_phi", s.baseline_cos_phi}});
  }
  j["per_sample"] = std::move(rows);
  return j.dump(2) + "\n";
}

}  // namespace pairforge
