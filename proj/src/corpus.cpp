// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#include "pairforge/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "pairforge/io.hpp"
#include "pairforge/rng.hpp"

namespace pairforge {

using nlohmann::json;

const std::vector<NamedColor>& default_colors() {
  static const std::vector<NamedColor> colors{
      {"red", {0.90f, 0.10f, 0.10f}},    {"blue", {0.10f, 0.20f, 0.90f}},
      {"yellow", {0.95f, 0.90f, 0.10f}}, {"white", {0.95f, 0.95f, 0.95f}},
      {"purple", {0.60f, 0.10f, 0.70f}}, {"orange", {0.95f, 0.55f, 0.05f}},
  };
  return colors;
}

const std::vector<std::string>& default_shapes() {
  static const std::vector<std::string> shapes{"round", "star", "trumpet"};
  return shapes;
}

void CorpusConfig::validate() const {
  if (num_samples == 0) throw ConfigError("corpus: num_samples must be positive");
  if (colors.empty() || shapes.empty()) throw ConfigError("corpus: need at least one color and shape");
  if (captions_per_image < 1 || captions_per_image > 10) {
    throw ConfigError("corpus: captions_per_image must be in [1, 10]");
  }
  if (!(noise_amplitude >= 0.0 && noise_amplitude <= 0.2)) {
    throw ConfigError("corpus: noise_amplitude must be in [0, 0.2]");
  }
}

const std::vector<std::string>& caption_templates() {
  // Three of five templates open with "this {s}", so a greedy decoder that
  // follows the majority prefix names the shape as well as the color.
  static const std::vector<std::string> templates{
      "the flower is {c}",
      "this {s} flower has {c} petals",
      "a {c} {s} flower",
      "this {s} flower is {c}",
      "this flower has {c} {s} petals",
  };
  return templates;
}

std::string fill_template(std::string_view tmpl, std::string_view color, std::string_view shape) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '{' && i + 2 < tmpl.size() && tmpl[i + 2] == '}') {
      out += tmpl[i + 1] == 'c' ? color : shape;
      i += 2;
    } else {
      out += tmpl[i];
    }
  }
  return out;
}

namespace {

constexpr std::array<float, 3> kBackground{0.05f, 0.25f, 0.08f};
constexpr int kSupersample = 4;

bool inside_shape(std::size_t shape, double u, double v, double radius) {
  switch (shape % 3) {
    case 0:
      return u * u + v * v <= radius * radius;
    case 1: {
      const double r = std::sqrt(u * u + v * v);
      const double theta = std::atan2(v, u);
      return r <= radius * (0.55 + 0.45 * std::cos(5.0 * theta + 1.5707963267948966));
    }
    default: {
      // Bell that flares from a narrow top to a wide rim at the bottom.
      if (v < -radius || v > radius) return false;
      const double half_width = radius * (0.15 + 0.85 * (v + radius) / (2.0 * radius));
      return std::abs(u) <= half_width;
    }
  }
}

float texture(std::size_t x, std::size_t y) {
  const double fx = static_cast<double>(x), fy = static_cast<double>(y);
  return static_cast<float>(0.035 * std::sin(1.3 * fx + 0.7 * fy) +
                            0.02 * std::cos(0.5 * fx - 1.1 * fy));
}

}  // namespace

Tensor render_flower(const CorpusConfig& cfg, const FlowerLayout& layout,
                     std::uint64_t noise_seed) {
  Rng rng(noise_seed);
  Tensor img({kImageChannels, kImageSize, kImageSize});
  const auto& petal = cfg.colors.at(layout.color).rgb;
  const double cx = kImageSize / 2.0 + layout.offset_x;
  const double cy = kImageSize / 2.0 + layout.offset_y;
  const double radius = layout.scale * (kImageSize / 2.0);
  const std::size_t plane = kImageSize * kImageSize;
  for (std::size_t y = 0; y < kImageSize; ++y) {
    for (std::size_t x = 0; x < kImageSize; ++x) {
      int hits = 0;
      for (int sy = 0; sy < kSupersample; ++sy) {
        for (int sx = 0; sx < kSupersample; ++sx) {
          const double px = x + (sx + 0.5) / kSupersample;
          const double py = y + (sy + 0.5) / kSupersample;
          hits += inside_shape(layout.shape, px - cx, py - cy, radius) ? 1 : 0;
        }
      }
      const float coverage = static_cast<float>(hits) / (kSupersample * kSupersample);
      const float t = texture(x, y);
      const std::array<float, 3> bg{kBackground[0], kBackground[1] + t, kBackground[2] + 0.5f * t};
      for (std::size_t c = 0; c < kImageChannels; ++c) {
        float value = coverage * petal[c] + (1.0f - coverage) * bg[c];
        value += static_cast<float>(rng.uniform(-cfg.noise_amplitude, cfg.noise_amplitude));
        img.data[c * plane + y * kImageSize + x] = std::clamp(2.0f * value - 1.0f, -1.0f, 1.0f);
      }
    }
  }
  return img;
}

std::vector<PairedSample> generate_corpus(const CorpusConfig& cfg) {
  cfg.validate();
  const auto& templates = caption_templates();
  std::vector<PairedSample> out;
  out.reserve(cfg.num_samples);
  for (std::size_t i = 0; i < cfg.num_samples; ++i) {
    Rng rng(derive_seed(cfg.seed, i));
    FlowerLayout layout;
    const std::size_t cls = i % cfg.num_classes();
    layout.color = cls / cfg.shapes.size();
    layout.shape = cls % cfg.shapes.size();
    layout.scale = rng.uniform(0.5, 0.9);
    layout.offset_x = static_cast<int>(rng.uniform_int(5)) - 2;
    layout.offset_y = static_cast<int>(rng.uniform_int(5)) - 2;
    const std::uint64_t noise_seed = rng.next_u64();

    PairedSample s;
    s.image = render_flower(cfg, layout, noise_seed);
    s.class_id = static_cast<int>(cls);
    s.color = layout.color;
    s.shape = layout.shape;
    std::vector<std::size_t> order(templates.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t j = order.size(); j > 1; --j) {
      std::swap(order[j - 1], order[rng.uniform_int(j)]);
    }
    for (std::size_t j = 0; j < cfg.captions_per_image; ++j) {
      s.captions.push_back(fill_template(templates[order[j % order.size()]],
                                         cfg.colors[layout.color].name, cfg.shapes[layout.shape]));
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---- vocabulary --------------------------------------------------------

Vocab::Vocab() : Vocab(std::vector<std::string>{}) {}

Vocab::Vocab(std::vector<std::string> words) {
  tokens_ = {"<pad>", "<start>", "<end>", "<unk>"};
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  for (auto& w : words) {
    if (std::find(tokens_.begin(), tokens_.begin() + 4, w) != tokens_.begin() + 4) continue;
    tokens_.push_back(std::move(w));
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) ids_.emplace(tokens_[i], static_cast<int>(i));
}

int Vocab::id(std::string_view token) const {
  auto it = ids_.find(token);
  return it == ids_.end() || it->second < 4 ? kUnkId : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("vocab: token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<std::string> Vocab::words() const { return {tokens_.begin() + 4, tokens_.end()}; }

std::vector<std::string> normalize_caption(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (std::isspace(c) && !cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocab build_vocab(const std::vector<PairedSample>& corpus) {
  if (corpus.empty()) throw ConfigError("build_vocab: empty corpus");
  std::vector<std::string> words;
  for (const auto& s : corpus) {
    for (const auto& c : s.captions) {
      for (auto& w : normalize_caption(c)) words.push_back(std::move(w));
    }
  }
  return Vocab(std::move(words));
}

std::vector<int> encode_caption(const Vocab& vocab, std::string_view text) {
  std::vector<int> ids{kStartId};
  for (const auto& w : normalize_caption(text)) ids.push_back(vocab.id(w));
  ids.push_back(kEndId);
  return ids;
}

std::string decode_tokens(const Vocab& vocab, const std::vector<int>& ids) {
  std::string out;
  for (int id : ids) {
    if (id == kEndId) break;
    if (id == kPadId || id == kStartId) continue;
    if (!out.empty()) out += ' ';
    out += vocab.token(id);
  }
  return out;
}

// ---- splits ------------------------------------------------------------

CorpusSplit split_corpus(const std::vector<PairedSample>& corpus, std::size_t num_classes,
                         SplitRatios ratios, std::uint64_t seed) {
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9 || ratios.train < 0 ||
      ratios.val < 0 || ratios.test < 0) {
    throw ConfigError("split: ratios must be non-negative and sum to 1");
  }
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto cls = static_cast<std::size_t>(corpus[i].class_id);
    if (cls >= num_classes) throw ConfigError("split: class id out of range");
    by_class[cls].push_back(i);
  }
  CorpusSplit out;
  for (std::size_t cls = 0; cls < num_classes; ++cls) {
    auto& idx = by_class[cls];
    if (idx.empty()) continue;
    Rng rng(derive_seed(seed, cls));
    for (std::size_t j = idx.size(); j > 1; --j) std::swap(idx[j - 1], idx[rng.uniform_int(j)]);
    const double n = static_cast<double>(idx.size());
    const auto n_train = static_cast<std::size_t>(std::lround(n * ratios.train));
    const auto n_val = std::min(idx.size() - n_train,
                                static_cast<std::size_t>(std::lround(n * ratios.val)));
    if (n_train == 0) {
      throw ConfigError("split: class " + std::to_string(cls) + " would have no training samples");
    }
    for (std::size_t j = 0; j < idx.size(); ++j) {
      auto& dst = j < n_train ? out.train : (j < n_train + n_val ? out.val : out.test);
      dst.push_back(corpus[idx[j]]);
    }
  }
  return out;
}

// ---- color oracle ------------------------------------------------------

ColorReading dominant_attributes(const Tensor& image, const std::vector<NamedColor>& colors) {
  if (image.shape != Shape{kImageChannels, kImageSize, kImageSize}) {
    throw ShapeError("dominant_attributes: expected [3x16x16], got " + shape_to_string(image.shape));
  }
  if (colors.empty()) throw ConfigError("dominant_attributes: empty palette");
  const std::size_t plane = kImageSize * kImageSize;
  std::vector<float> value(plane);
  for (std::size_t p = 0; p < plane; ++p) {
    float v = image.data[p];
    for (std::size_t c = 1; c < kImageChannels; ++c) v = std::max(v, image.data[c * plane + p]);
    value[p] = v;
  }
  const auto [lo, hi] = std::minmax_element(value.begin(), value.end());
  const float threshold = *lo + 0.75f * (*hi - *lo);
  std::array<double, 3> mean{0, 0, 0};
  std::size_t count = 0;
  for (std::size_t p = 0; p < plane; ++p) {
    if (value[p] < threshold) continue;
    for (std::size_t c = 0; c < kImageChannels; ++c) {
      mean[c] += (static_cast<double>(image.data[c * plane + p]) + 1.0) / 2.0;
    }
    ++count;
  }
  for (auto& m : mean) m /= static_cast<double>(count);
  double best = 1e300, second = 1e300;
  std::size_t best_idx = 0;
  for (std::size_t i = 0; i < colors.size(); ++i) {
    double d2 = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      const double diff = mean[c] - colors[i].rgb[c];
      d2 += diff * diff;
    }
    const double d = std::sqrt(d2);
    if (d < best) {
      second = best;
      best = d;
      best_idx = i;
    } else if (d < second) {
      second = d;
    }
  }
  ColorReading r;
  r.color = colors[best_idx].name;
  r.index = best_idx;
  r.confidence = colors.size() > 1 ? second - best : 1.0;
  return r;
}

// ---- persistence -------------------------------------------------------

namespace {

std::string images_payload(const std::vector<PairedSample>& corpus) {
  ByteWriter w;
  w.put_bytes("PGC1");
  w.put_u32(static_cast<std::uint32_t>(corpus.size()));
  for (const auto& s : corpus) w.put_f32s(s.image.data.data(), s.image.numel());
  return w.bytes();
}

std::string captions_payload(const std::vector<PairedSample>& corpus) {
  std::string out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (const auto& c : corpus[i].captions) {
      out += std::to_string(i);
      out += '\t';
      out += c;
      out += '\n';
    }
  }
  return out;
}

json config_to_json(const CorpusConfig& cfg) {
  json colors = json::array();
  for (const auto& c : cfg.colors) colors.push_back({{"name", c.name}, {"rgb", c.rgb}});
  return {{"num_samples", cfg.num_samples},
          {"colors", colors},
          {"shapes", cfg.shapes},
          {"captions_per_image", cfg.captions_per_image},
          {"noise_amplitude", cfg.noise_amplitude},
          {"seed", cfg.seed}};
}

CorpusConfig config_from_json(const json& j) {
  CorpusConfig cfg;
  cfg.num_samples = j.at("num_samples").get<std::size_t>();
  cfg.colors.clear();
  for (const auto& c : j.at("colors")) {
    cfg.colors.push_back({c.at("name").get<std::string>(), c.at("rgb").get<std::array<float, 3>>()});
  }
  cfg.shapes = j.at("shapes").get<std::vector<std::string>>();
  cfg.captions_per_image = j.at("captions_per_image").get<std::size_t>();
  cfg.noise_amplitude = j.at("noise_amplitude").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

}  // namespace

std::string corpus_hash(const std::vector<PairedSample>& corpus) {
  return fnv1a_hex(images_payload(corpus) + captions_payload(corpus));
}

void export_corpus(const std::filesystem::path& dir, const CorpusConfig& cfg,
                   const std::vector<PairedSample>& corpus) {
  std::filesystem::create_directories(dir);
  json classes = json::array();
  for (std::size_t c = 0; c < cfg.num_classes(); ++c) {
    classes.push_back({{"id", c},
                       {"color", cfg.colors[c / cfg.shapes.size()].name},
                       {"shape", cfg.shapes[c % cfg.shapes.size()]}});
  }
  std::vector<int> labels;
  for (const auto& s : corpus) labels.push_back(s.class_id);
  const json meta{{"config", config_to_json(cfg)},
                  {"classes", classes},
                  {"class_ids", labels},
                  {"corpus_hash", corpus_hash(corpus)}};
  write_file_atomic(dir / "images.bin", images_payload(corpus));
  write_file_atomic(dir / "captions.txt", captions_payload(corpus));
  write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");
}

LoadedCorpus import_corpus(const std::filesystem::path& dir) {
  const json meta = json::parse(read_file(dir / "meta.json"));
  LoadedCorpus out;
  out.config = config_from_json(meta.at("config"));
  const auto labels = meta.at("class_ids").get<std::vector<int>>();

  const std::string bytes = read_file(dir / "images.bin");
  ByteReader r(bytes);
  r.expect_magic("PGC1");
  const std::uint32_t count = r.u32("image count");
  if (count != labels.size()) {
    throw ParseError("images.bin holds " + std::to_string(count) + " images but meta.json lists " +
                         std::to_string(labels.size()) + " labels",
                     4);
  }
  out.samples.resize(count);
  const std::size_t n_shapes = out.config.shapes.size();
  for (std::uint32_t i = 0; i < count; ++i) {
    auto& s = out.samples[i];
    s.image = Tensor({kImageChannels, kImageSize, kImageSize});
    r.f32s(s.image.data.data(), kImageNumel, "image tensor");
    s.class_id = labels[i];
    s.color = static_cast<std::size_t>(labels[i]) / n_shapes;
    s.shape = static_cast<std::size_t>(labels[i]) % n_shapes;
  }
  if (!r.done()) throw ParseError("trailing bytes in images.bin", r.offset());

  std::istringstream captions(read_file(dir / "captions.txt"));
  std::string line;
  while (std::getline(captions, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error("captions.txt: missing tab in line: " + line);
    const auto id = std::stoul(line.substr(0, tab));
    if (id >= out.samples.size()) throw std::runtime_error("captions.txt: sample id out of range");
    out.samples[id].captions.push_back(line.substr(tab + 1));
  }
  return out;
}

}  // namespace pairforge
