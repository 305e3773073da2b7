// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#include "pairforge/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pairforge/checkpoint.hpp"
#include "pairforge/cycle_eval.hpp"
#include "pairforge/image_io.hpp"
#include "pairforge/io.hpp"
#include "pairforge/run_config.hpp"

namespace pairforge {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// Seed streams for the command-level randomness; training stages derive their own.
constexpr std::uint64_t kSampleStream = 500;
constexpr std::uint64_t kNoiseStream = 1000;
constexpr std::uint64_t kSweepStream = 2000;

/// Options shared by every subcommand.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string work_dir;

  RunConfig resolve() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (seed) cfg.apply_seed(*seed);
    if (!work_dir.empty()) cfg.work_dir = work_dir;
    cfg.validate();
    return cfg;
  }
};

struct Dataset {
  LoadedCorpus corpus;
  CorpusSplit split;
  std::string hash;

  const std::vector<PairedSample>& part(const std::string& name) const {
    if (name == "train") return split.train;
    if (name == "val") return split.val;
    if (name == "test") return split.test;
    if (name == "all") return corpus.samples;
    throw ConfigError("unknown split '" + name + "' (expected train, val, test or all)");
  }
};

Dataset load_dataset(const fs::path& dir) {
  if (!fs::exists(dir / "meta.json")) {
    throw DependencyError("no corpus in " + dir.string() + "; run `pairforge gen-data` first");
  }
  Dataset d;
  d.corpus = import_corpus(dir);
  d.split = split_corpus(d.corpus.samples, d.corpus.config.num_classes(), {}, d.corpus.config.seed);
  d.hash = corpus_hash(d.corpus.samples);
  return d;
}

struct LoadedGan {
  GanParams<float> params;
  Vocab vocab;
  CheckpointInfo info;
};

LoadedGan load_gan(const fs::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  LoadedGan g{gan_from_checkpoint(ckpt), {}, decode_info(ckpt.metadata)};
  g.vocab = Vocab(g.info.vocab_words);
  if (g.vocab.size() != g.params.psi.embed.shape[0]) {
    throw ConfigError(path.string() + ": stored vocabulary does not match the embedding table");
  }
  return g;
}

struct LoadedCaptioner {
  CaptionerParams<float> params;
  CheckpointInfo info;
};

LoadedCaptioner load_captioner(const fs::path& path, const Vocab& vocab) {
  const Checkpoint ckpt = load_checkpoint(path);
  LoadedCaptioner c{captioner_from_checkpoint(ckpt), decode_info(ckpt.metadata)};
  if (Vocab(c.info.vocab_words) != vocab) {
    throw ConfigError(path.string() + ": captioner vocabulary differs from the GAN checkpoint's");
  }
  return c;
}

void warn_on_hash(const fs::path& path, const std::string& stored, const std::string& current, std::ostream& err) {
  if (stored != current) {
    err << "warning: " << path.string() << " was trained on corpus " << stored
        << " but the current corpus hashes to " << current << "\n";
  }
}

std::vector<float> to_float(const std::vector<double>& v) { return {v.begin(), v.end()}; }
std::vector<double> to_double(const std::vector<float>& v) { return {v.begin(), v.end()}; }

std::string numbered(const std::string& stem, std::size_t i, const char* ext) {
  std::ostringstream name;
  name << stem << std::setw(3) << std::setfill('0') << i << ext;
  return name.str();
}

ordered_json gan_config_json(const GanTrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.adam.learning_rate},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"epsilon", c.adam.epsilon},
          {"checkpoint_interval", c.checkpoint_interval},
          {"seed", c.seed}};
}

ordered_json captioner_config_json(const CaptionerTrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.adam.learning_rate},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"epsilon", c.adam.epsilon},
          {"seed", c.seed}};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- subcommands ----

void cmd_gen_data(const RunConfig& cfg, const fs::path& out_dir, std::ostream& out) {
  const auto corpus = generate_corpus(cfg.corpus);
  export_corpus(out_dir, cfg.corpus, corpus);
  out << "wrote " << corpus.size() << " samples (" << cfg.corpus.num_classes() << " classes) to "
      << out_dir.string() << ", corpus hash " << corpus_hash(corpus) << "\n";
}

void cmd_train_gan(const RunConfig& cfg, const fs::path& data_dir, const fs::path& ckpt_path,
                   const fs::path& metrics_path, std::ostream& out) {
  const Dataset data = load_dataset(data_dir);
  const Vocab vocab = build_vocab(data.split.train);
  CheckpointInfo info;
  info.seed = cfg.seed;
  info.corpus_hash = data.hash;
  info.vocab_words = vocab.words();
  info.config_json = gan_config_json(cfg.gan).dump();

  std::string metrics;
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = train_gan(data.split.train, vocab, cfg.gan, [&](const GanEpochMetrics& m, const GanParams<float>& p) {
    ordered_json line{{"epoch", m.epoch}, {"loss_d", m.loss_d}, {"loss_g", m.loss_g}, {"d_accuracy", m.d_accuracy}};
    metrics += line.dump() + "\n";
    write_file_atomic(metrics_path, metrics);
    out << "epoch " << m.epoch << "/" << cfg.gan.epochs << "  L_D " << std::fixed << std::setprecision(4) << m.loss_d
        << "  L_G " << m.loss_g << "  D acc " << std::setprecision(3) << m.d_accuracy << "  (" << std::setprecision(0)
        << seconds_since(t0) << "s)\n"
        << std::defaultfloat << std::setprecision(6);
    if (cfg.gan.checkpoint_interval > 0 && m.epoch % cfg.gan.checkpoint_interval == 0 && m.epoch < cfg.gan.epochs) {
      CheckpointInfo snap = info;
      snap.epoch = m.epoch;
      fs::path snap_path = ckpt_path;
      snap_path.replace_extension(".epoch" + std::to_string(m.epoch) + ckpt_path.extension().string());
      save_checkpoint(snap_path, gan_checkpoint(p, snap));
    }
  });
  if (cfg.gan.epochs == 0) write_file_atomic(metrics_path, "");
  info.epoch = cfg.gan.epochs;
  save_checkpoint(ckpt_path, gan_checkpoint(result.params, info));
  out << "saved " << ckpt_path.string() << "\n";
}

void cmd_train_captioner(const RunConfig& cfg, const fs::path& data_dir, const fs::path& gan_path,
                         const fs::path& ckpt_path, const fs::path& metrics_path, std::ostream& out,
                         std::ostream& err) {
  const Dataset data = load_dataset(data_dir);
  const LoadedGan gan = load_gan(gan_path);
  warn_on_hash(gan_path, gan.info.corpus_hash, data.hash, err);
  CheckpointInfo info;
  info.seed = cfg.seed;
  info.corpus_hash = data.hash;
  info.vocab_words = gan.vocab.words();
  info.config_json = captioner_config_json(cfg.captioner).dump();

  std::string metrics;
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = train_captioner(
      data.split.train, gan.params, gan.vocab, cfg.captioner,
      [&](const CaptionerEpochMetrics& m, const CaptionerParams<float>&) {
        metrics += ordered_json{{"epoch", m.epoch}, {"mean_nll", m.mean_nll}}.dump() + "\n";
        write_file_atomic(metrics_path, metrics);
        out << "epoch " << m.epoch << "/" << cfg.captioner.epochs << "  NLL " << std::fixed << std::setprecision(4)
            << m.mean_nll << "  (" << std::setprecision(0) << seconds_since(t0) << "s)\n"
            << std::defaultfloat << std::setprecision(6);
      });
  if (cfg.captioner.epochs == 0) write_file_atomic(metrics_path, "");
  info.epoch = cfg.captioner.epochs;
  save_checkpoint(ckpt_path, captioner_checkpoint(result.params, info));
  const auto acc = caption_accuracy(result.params, gan.params, gan.vocab, data.split.test, data.corpus.config.colors,
                                    data.corpus.config.shapes);
  out << "held-out caption accuracy: color " << acc.color << ", shape " << acc.shape << "\n";
  out << "saved " << ckpt_path.string() << "\n";
}

void cmd_embed(EmbeddingSpace space, const std::string& split, const fs::path& data_dir, const fs::path& gan_path,
               const fs::path& bank_path, std::ostream& out, std::ostream& err) {
  const Dataset data = load_dataset(data_dir);
  const LoadedGan gan = load_gan(gan_path);
  warn_on_hash(gan_path, gan.info.corpus_hash, data.hash, err);
  const auto& samples = data.part(split);
  EmbeddingBank bank;
  bank.space = space;
  if (space == EmbeddingSpace::kText) {
    std::vector<std::vector<int>> tokens;
    for (const auto& s : samples) {
      for (const auto& c : s.captions) {
        tokens.push_back(encode_caption(gan.vocab, c));
        bank.labels.push_back(s.class_id);
      }
    }
    for (const auto& row : psi_encode_batch(gan.params, tokens)) bank.rows.push_back(to_double(row));
    bank.dim = kTextEmbedDim;
  } else {
    std::vector<Tensor> images;
    for (const auto& s : samples) {
      images.push_back(s.image);
      bank.labels.push_back(s.class_id);
    }
    for (const auto& row : phi_extract_batch(gan.params, images)) bank.rows.push_back(to_double(row));
    bank.dim = kImageEmbedDim;
  }
  bank.validate();
  save_bank(bank_path, bank);
  out << "wrote " << bank.size() << " " << space_name(space) << " embeddings (d = " << bank.dim << ") to "
      << bank_path.string() << "\n";
}

void cmd_fit_gmm(const RunConfig& cfg, const fs::path& bank_path, std::size_t k, const fs::path& gmm_path,
                 std::ostream& out) {
  const EmbeddingBank bank = load_bank(bank_path);
  const auto fit = fit_gmm(bank, k, cfg.gmm);
  save_gmm(gmm_path, fit.model);
  out << "fitted " << k << " components on " << bank.size() << " " << space_name(bank.space) << " embeddings in "
      << fit.log_likelihood.size() << " EM iterations; log-likelihood " << fit.log_likelihood.back();
  if (fit.reinitialized > 0) out << " (" << fit.reinitialized << " collapsed components restarted)";
  out << "\nsaved " << gmm_path.string() << "\n";
}

struct SampleOptions {
  EmbeddingSpace source = EmbeddingSpace::kText;
  std::string method = "prototype";
  std::size_t count = 4;
  bool same_class = false;
  std::optional<double> lambda;
  std::optional<std::size_t> component;
};

std::size_t draw_component(const GmmModel& model, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t c = 0; c < model.components(); ++c) {
    acc += model.weights[c];
    if (u < acc) return c;
  }
  return model.components() - 1;
}

void cmd_sample_pairs(const RunConfig& cfg, const SampleOptions& opt, const fs::path& bank_path,
                      const fs::path& gmm_path, const fs::path& gan_path, const fs::path& captioner_path,
                      const fs::path& out_dir, std::ostream& out) {
  if (opt.count == 0) throw ConfigError("--count must be positive");
  const LoadedGan gan = load_gan(gan_path);
  const LoadedCaptioner cap = load_captioner(captioner_path, gan.vocab);
  const std::size_t dim = opt.source == EmbeddingSpace::kText ? kTextEmbedDim : kImageEmbedDim;

  std::optional<EmbeddingBank> bank;
  std::optional<GmmModel> gmm;
  if (opt.method == "prototype") {
    bank = load_bank(bank_path);
    if (bank->space != opt.source) {
      throw ConfigError(bank_path.string() + " holds " + space_name(bank->space) + " embeddings, not " +
                        space_name(opt.source));
    }
  } else if (opt.method == "density") {
    gmm = load_gmm(gmm_path);
    if (gmm->dim() != dim) {
      throw ConfigError(gmm_path.string() + " has dimension " + std::to_string(gmm->dim()) + ", expected " +
                        std::to_string(dim) + " for " + space_name(opt.source) + " embeddings");
    }
    if (opt.component && *opt.component >= gmm->components()) {
      throw ConfigError("--component " + std::to_string(*opt.component) + " is out of range (model has " +
                        std::to_string(gmm->components()) + " components)");
    }
  } else {
    throw ConfigError("unknown method '" + opt.method + "' (expected prototype or density)");
  }

  Rng rng(derive_seed(cfg.seed, kSampleStream));
  std::vector<std::vector<double>> embeddings;
  auto provenance = ordered_json::array();
  for (std::size_t k = 0; k < opt.count; ++k) {
    ordered_json entry{{"index", k}, {"source", space_name(opt.source)}, {"method", opt.method}};
    if (bank) {
      const auto pair = sample_prototype_pair(
          *bank, opt.same_class ? PairMode::kSameClass : PairMode::kAny,
          opt.lambda ? LambdaDist::constant(*opt.lambda) : LambdaDist::uniform(), rng);
      embeddings.push_back(lerp_embedding(bank->rows[pair.i], bank->rows[pair.j], pair.lambda));
      entry["prototypes"] = {{{"row", pair.i}, {"class_id", bank->labels[pair.i]}},
                             {{"row", pair.j}, {"class_id", bank->labels[pair.j]}}};
      entry["lambda"] = pair.lambda;
    } else {
      const std::size_t c = opt.component ? *opt.component : draw_component(*gmm, rng);
      embeddings.push_back(gmm_sample(*gmm, rng, c));
      entry["component"] = c;
      entry["component_weight"] = gmm->weights[c];
    }
    entry["z_seed"] = derive_seed(cfg.seed, kNoiseStream + k);
    provenance.push_back(std::move(entry));
  }

  std::vector<std::vector<float>> z;
  for (std::size_t k = 0; k < opt.count; ++k) z.push_back(sample_noise(derive_seed(cfg.seed, kNoiseStream + k)));
  std::vector<Tensor> images;
  std::vector<std::vector<int>> captions;
  if (opt.source == EmbeddingSpace::kText) {
    // Text-side novelty: image from the mixed psi, caption read back from that image.
    std::vector<std::vector<float>> psi;
    for (const auto& e : embeddings) psi.push_back(to_float(e));
    images = generate_images(gan.params, z, psi);
    captions = greedy_decode_batch(cap.params, phi_extract_batch(gan.params, images), cfg.caption_max_len);
  } else {
    // Image-side novelty: caption decoded from the mixed phi, image drawn from that caption.
    std::vector<std::vector<float>> phi;
    for (const auto& e : embeddings) phi.push_back(to_float(e));
    captions = greedy_decode_batch(cap.params, phi, cfg.caption_max_len);
    images = generate_images(gan.params, z, psi_encode_batch(gan.params, captions));
  }

  fs::create_directories(out_dir);
  std::string caption_lines;
  for (std::size_t k = 0; k < opt.count; ++k) {
    const std::string file = numbered("pair_", k, ".ppm");
    const std::string text = decode_tokens(gan.vocab, captions[k]);
    write_image_ppm(out_dir / file, images[k]);
    caption_lines += text + "\n";
    provenance[k]["image"] = file;
    provenance[k]["caption"] = text;
    provenance[k]["dominant_color"] = dominant_attributes(images[k]).color;
    out << file << "  " << text << "\n";
  }
  write_file_atomic(out_dir / "captions.txt", caption_lines);
  write_file_atomic(out_dir / "provenance.json", provenance.dump(2) + "\n");
  out << "wrote " << opt.count << " pairs to " << out_dir.string() << "\n";
}

void cmd_interp_sweep(const RunConfig& cfg, const std::string& a, const std::string& b, std::size_t steps,
                      const fs::path& gan_path, const fs::path& out_dir, std::ostream& out) {
  if (steps < 2) throw ConfigError("--steps must be at least 2");
  const LoadedGan gan = load_gan(gan_path);
  const auto psi = psi_encode_batch(gan.params, {encode_caption(gan.vocab, a), encode_caption(gan.vocab, b)});
  const auto psi_a = to_double(psi[0]), psi_b = to_double(psi[1]);
  const auto z = sample_noise(derive_seed(cfg.seed, kSweepStream));

  std::vector<std::vector<float>> mixed;
  std::vector<double> lambdas;
  for (std::size_t i = 0; i < steps; ++i) {
    const double lambda = 1.0 - static_cast<double>(i) / static_cast<double>(steps - 1);
    lambdas.push_back(lambda);
    mixed.push_back(to_float(lerp_embedding(psi_a, psi_b, lambda)));
  }
  const auto images = generate_images(gan.params, std::vector<std::vector<float>>(steps, z), mixed);

  fs::create_directories(out_dir);
  auto rows = ordered_json::array();
  for (std::size_t i = 0; i < steps; ++i) {
    const std::string file = numbered("step_", i, ".ppm");
    const auto reading = dominant_attributes(images[i]);
    write_image_ppm(out_dir / file, images[i]);
    rows.push_back({{"step", i}, {"lambda", lambdas[i]}, {"image", file}, {"dominant_color", reading.color}});
    out << file << "  lambda " << std::fixed << std::setprecision(3) << lambdas[i] << std::defaultfloat
        << std::setprecision(6) << "  " << reading.color << "\n";
  }
  write_image_ppm(out_dir / "sweep.ppm", tile_images({images}));
  const ordered_json summary{{"a", a}, {"b", b}, {"steps", steps}, {"z_seed", derive_seed(cfg.seed, kSweepStream)},
                             {"frames", rows}};
  write_file_atomic(out_dir / "sweep.json", summary.dump(2) + "\n");
  out << "wrote " << steps << " frames to " << out_dir.string() << "\n";
}

struct CycleOptions {
  std::string direction = "image";
  std::optional<std::size_t> index;
  std::string image_path;
  std::string caption;
  bool fresh_noise = false;
};

void cmd_cycle(const RunConfig& cfg, const CycleOptions& opt, const fs::path& data_dir, const fs::path& gan_path,
               const fs::path& captioner_path, const fs::path& out_dir, std::ostream& out) {
  const LoadedGan gan = load_gan(gan_path);
  const LoadedCaptioner cap = load_captioner(captioner_path, gan.vocab);
  const CycleModels models{&gan.params, &cap.params, &gan.vocab};
  NoiseSource noise(opt.fresh_noise ? NoiseSource::Kind::kFresh : NoiseSource::Kind::kFixed, cfg.seed);
  fs::create_directories(out_dir);
  ordered_json summary{{"direction", opt.direction}};

  if (opt.direction == "image") {
    Tensor image;
    std::uint64_t key = 0;
    if (!opt.image_path.empty()) {
      image = read_image_ppm(opt.image_path);
      summary["input"] = opt.image_path;
    } else {
      const Dataset data = load_dataset(data_dir);
      const std::size_t idx = opt.index.value_or(0);
      if (idx >= data.split.test.size()) {
        throw ConfigError("--index " + std::to_string(idx) + " is past the end of the held-out split (" +
                          std::to_string(data.split.test.size()) + " samples)");
      }
      image = data.split.test[idx].image;
      key = idx;
      summary["input"] = "test[" + std::to_string(idx) + "]";
    }
    const auto cycle = cycle_image(image, models, noise, key);
    const std::string caption = decode_tokens(gan.vocab, cycle.tokens);
    const double cos_phi = cosine(phi_extract(gan.params, image), phi_extract(gan.params, cycle.image));
    const double cos_pixel = cosine(image.data, cycle.image.data);
    write_image_ppm(out_dir / "input.ppm", image);
    write_image_ppm(out_dir / "cycled.ppm", cycle.image);
    write_image_ppm(out_dir / "pair.ppm", tile_images({{image, cycle.image}}));
    summary["caption"] = caption;
    summary["cos_phi"] = cos_phi;
    summary["cos_pixel"] = cos_pixel;
    out << "caption: " << caption << "\ncos(phi(v), phi(v')) = " << cos_phi << "\ncos(v, v') = " << cos_pixel << "\n";
  } else if (opt.direction == "text") {
    if (opt.caption.empty()) throw ConfigError("--caption is required for a text cycle");
    const auto tokens = encode_caption(gan.vocab, opt.caption);
    const auto cycle = cycle_text(tokens, models, noise, 0);
    const std::string caption = decode_tokens(gan.vocab, cycle.tokens);
    write_image_ppm(out_dir / "generated.ppm", cycle.image);
    summary["input"] = opt.caption;
    summary["caption"] = caption;
    summary["dominant_color"] = dominant_attributes(cycle.image).color;
    out << "generated image: " << summary["dominant_color"].get<std::string>() << "\ncaption back: " << caption
        << "\n";
  } else {
    throw ConfigError("unknown direction '" + opt.direction + "' (expected image or text)");
  }
  write_file_atomic(out_dir / "cycle.json", summary.dump(2) + "\n");
}

void cmd_cycle_report(const RunConfig& cfg, std::size_t n, const std::string& split, const fs::path& data_dir,
                      const fs::path& gan_path, const fs::path& captioner_path, const fs::path& report_path,
                      std::ostream& out, std::ostream& err) {
  const Dataset data = load_dataset(data_dir);
  const LoadedGan gan = load_gan(gan_path);
  warn_on_hash(gan_path, gan.info.corpus_hash, data.hash, err);
  const LoadedCaptioner cap = load_captioner(captioner_path, gan.vocab);
  const auto report = cycle_report(data.part(split), {&gan.params, &cap.params, &gan.vocab}, n, cfg.seed);
  write_file_atomic(report_path, report.to_json());
  out << "n = " << report.n << "\nmean cos(phi(v), phi(v')) = " << report.mean_cos_phi << " (std "
      << report.std_cos_phi << ")\n";
  if (report.baseline_cos_phi) out << "derangement baseline     = " << *report.baseline_cos_phi << "\n";
  out << "mean cos(v, v')          = " << report.mean_cos_pixel << "\nsaved " << report_path.string() << "\n";
}

void cmd_eval(const RunConfig& cfg, const fs::path& data_dir, const fs::path& gan_path,
              const fs::path& captioner_path, std::size_t cycle_n, const fs::path& eval_path, std::ostream& out,
              std::ostream& err) {
  const Dataset data = load_dataset(data_dir);
  const LoadedGan gan = load_gan(gan_path);
  warn_on_hash(gan_path, gan.info.corpus_hash, data.hash, err);
  const auto& test = data.split.test;
  const auto& colors = data.corpus.config.colors;

  ordered_json result;
  result["corpus_hash"] = data.hash;
  result["held_out"] = test.size();
  result["gan"] = {{"real_match_accuracy", real_match_accuracy(gan.params, test, gan.vocab, cfg.seed)},
                   {"color_agreement", color_agreement(gan.params, gan.vocab, colors, 200, cfg.seed)}};
  if (fs::exists(captioner_path)) {
    const LoadedCaptioner cap = load_captioner(captioner_path, gan.vocab);
    const auto acc = caption_accuracy(cap.params, gan.params, gan.vocab, test, colors, data.corpus.config.shapes);
    const CycleModels models{&gan.params, &cap.params, &gan.vocab};
    const auto report = cycle_report(test, models, std::min(cycle_n, test.size()), cfg.seed);
    std::vector<std::string> captions;
    for (const auto& s : test) captions.push_back(s.captions.front());
    result["captioner"] = {{"color_accuracy", acc.color}, {"shape_accuracy", acc.shape}};
    result["cycle"] = {{"n", report.n},
                       {"mean_cos_phi", report.mean_cos_phi},
                       {"baseline_cos_phi", report.baseline_cos_phi ? ordered_json(*report.baseline_cos_phi) : nullptr},
                       {"mean_cos_pixel", report.mean_cos_pixel},
                       {"text_color_agreement", text_cycle_color_agreement(captions, models, cfg.seed, colors)}};
  } else {
    err << "note: " << captioner_path.string() << " not found; skipping captioner and cycle metrics\n";
  }
  write_file_atomic(eval_path, result.dump(2) + "\n");
  out << result.dump(2) << "\n";
}

// ---- wiring ----

void read_thread_env() {
  const char* env = std::getenv("PAIRFORGE_THREADS");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError(std::string("PAIRFORGE_THREADS must be a positive integer, got '") + env + "'");
  set_num_threads(static_cast<std::size_t>(n));
}

fs::path or_default(const std::string& given, const fs::path& fallback) {
  return given.empty() ? fallback : fs::path(given);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"pairforge: paired text/image sample generation with a conditional GAN and a captioner",
               "pairforge"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config_path, "Run configuration file (TOML-style)");
  app.add_option("--seed", common.seed, "Seed for every random stream (overrides the config)");
  app.add_option("--work", common.work_dir, "Working directory for default artifact paths (default: run)");

  std::string data, gan, captioner, out_path, metrics, bank, gmm, split = "test", space = "text";
  std::optional<std::size_t> epochs;

  auto* gen_data = app.add_subcommand("gen-data", "Render the synthetic captioned-flower corpus");
  gen_data->add_option("--out", out_path, "Output directory (default: <work>/data)");

  auto* train_gan_cmd = app.add_subcommand("train-gan", "Train the conditional GAN and text encoder");
  train_gan_cmd->add_option("--data", data, "Corpus directory (default: <work>/data)");
  train_gan_cmd->add_option("--out", out_path, "Checkpoint path (default: <work>/gan.pgk)");
  train_gan_cmd->add_option("--metrics", metrics, "Per-epoch metrics JSONL (default: <work>/gan_metrics.jsonl)");
  train_gan_cmd->add_option("--epochs", epochs, "Override the configured epoch count");

  auto* train_cap_cmd = app.add_subcommand("train-captioner", "Train the captioner on the frozen discriminator");
  train_cap_cmd->add_option("--data", data, "Corpus directory (default: <work>/data)");
  train_cap_cmd->add_option("--gan", gan, "GAN checkpoint (default: <work>/gan.pgk)");
  train_cap_cmd->add_option("--out", out_path, "Checkpoint path (default: <work>/captioner.pgk)");
  train_cap_cmd->add_option("--metrics", metrics, "Per-epoch metrics JSONL (default: <work>/captioner_metrics.jsonl)");
  train_cap_cmd->add_option("--epochs", epochs, "Override the configured epoch count");

  std::string embed_split = "train";
  auto* embed_cmd = app.add_subcommand("embed", "Dump text (psi) or image (phi) embeddings of a corpus split");
  embed_cmd->add_option("--space", space, "text or image")->check(CLI::IsMember({"text", "image"}));
  embed_cmd->add_option("--split", embed_split, "train, val, test or all (default: train)")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  embed_cmd->add_option("--data", data, "Corpus directory (default: <work>/data)");
  embed_cmd->add_option("--gan", gan, "GAN checkpoint (default: <work>/gan.pgk)");
  embed_cmd->add_option("--out", out_path, "Bank path (default: <work>/<space>_bank.pge)");

  std::optional<std::size_t> k;
  auto* fit_cmd = app.add_subcommand("fit-gmm", "Fit a diagonal Gaussian mixture to an embedding bank");
  fit_cmd->add_option("--space", space, "Picks the default bank and output paths")
      ->check(CLI::IsMember({"text", "image"}));
  fit_cmd->add_option("--bank", bank, "Embedding bank (default: <work>/<space>_bank.pge)");
  fit_cmd->add_option("--k", k, "Number of components (default: gmm.components)");
  fit_cmd->add_option("--out", out_path, "Mixture path (default: <work>/<space>_gmm.pgm)");

  SampleOptions sample;
  std::string source = "text";
  auto* sample_cmd = app.add_subcommand("sample-pairs", "Generate novel (image, caption) pairs");
  sample_cmd->add_option("--source", source, "Embedding space of the novel sample: text or image")
      ->check(CLI::IsMember({"text", "image"}));
  sample_cmd->add_option("--method", sample.method, "prototype or density")
      ->check(CLI::IsMember({"prototype", "density"}));
  sample_cmd->add_option("--count", sample.count, "Number of pairs (default: 4)");
  sample_cmd->add_flag("--same-class", sample.same_class, "Mix prototypes of one class only");
  sample_cmd->add_option("--lambda", sample.lambda, "Fixed mixing weight (default: uniform draw)")
      ->check(CLI::Range(0.0, 1.0));
  sample_cmd->add_option("--component", sample.component, "Sample one mixture component only");
  sample_cmd->add_option("--bank", bank, "Embedding bank (default: <work>/<source>_bank.pge)");
  sample_cmd->add_option("--gmm", gmm, "Mixture (default: <work>/<source>_gmm.pgm)");
  sample_cmd->add_option("--gan", gan, "GAN checkpoint (default: <work>/gan.pgk)");
  sample_cmd->add_option("--captioner", captioner, "Captioner checkpoint (default: <work>/captioner.pgk)");
  sample_cmd->add_option("--out", out_path, "Output directory (default: <work>/pairs)");

  std::string text_a, text_b;
  std::size_t steps = 8;
  auto* sweep_cmd = app.add_subcommand("interp-sweep", "Images along a linear path between two caption embeddings");
  sweep_cmd->add_option("--a", text_a, "Caption at lambda = 1")->required();
  sweep_cmd->add_option("--b", text_b, "Caption at lambda = 0")->required();
  sweep_cmd->add_option("--steps", steps, "Number of frames (default: 8)");
  sweep_cmd->add_option("--gan", gan, "GAN checkpoint (default: <work>/gan.pgk)");
  sweep_cmd->add_option("--out", out_path, "Output directory (default: <work>/sweep)");

  CycleOptions cycle;
  auto* cycle_cmd = app.add_subcommand("cycle", "Run one image->text->image or text->image->text cycle");
  cycle_cmd->add_option("--direction", cycle.direction, "image or text")->check(CLI::IsMember({"image", "text"}));
  cycle_cmd->add_option("--index", cycle.index, "Held-out sample to cycle (image direction, default 0)");
  cycle_cmd->add_option("--image", cycle.image_path, "PPM image to cycle instead of a held-out sample");
  cycle_cmd->add_option("--caption", cycle.caption, "Caption to cycle (text direction)");
  cycle_cmd->add_flag("--fresh-noise", cycle.fresh_noise, "Draw generator noise from a running stream");
  cycle_cmd->add_option("--data", data, "Corpus directory (default: <work>/data)");
  cycle_cmd->add_option("--gan", gan, "GAN checkpoint (default: <work>/gan.pgk)");
  cycle_cmd->add_option("--captioner", captioner, "Captioner checkpoint (default: <work>/captioner.pgk)");
  cycle_cmd->add_option("--out", out_path, "Output directory (default: <work>/cycle)");

  std::size_t n = 100;
  auto* report_cmd = app.add_subcommand("cycle-report", "Cycle-preservation statistics over held-out images");
  report_cmd->add_option("--n", n, "Number of images (default: 100)");
  report_cmd->add_option("--split", split, "Split to draw from (default: test)")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  report_cmd->add_option("--data", data, "Corpus directory (default: <work>/data)");
  report_cmd->add_option("--gan", gan, "GAN checkpoint (default: <work>/gan.pgk)");
  report_cmd->add_option("--captioner", captioner, "Captioner checkpoint (default: <work>/captioner.pgk)");
  report_cmd->add_option("--out", out_path, "Report JSON (default: <work>/cycle_report.json)");

  auto* eval_cmd = app.add_subcommand("eval", "Held-out metrics for the trained models");
  eval_cmd->add_option("--n", n, "Images in the cycle report (default: 100)");
  eval_cmd->add_option("--data", data, "Corpus directory (default: <work>/data)");
  eval_cmd->add_option("--gan", gan, "GAN checkpoint (default: <work>/gan.pgk)");
  eval_cmd->add_option("--captioner", captioner, "Captioner checkpoint (default: <work>/captioner.pgk)");
  eval_cmd->add_option("--out", out_path, "Metrics JSON (default: <work>/eval.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return kExitUsage;
  }

  try {
    read_thread_env();
    RunConfig cfg = common.resolve();
    const fs::path work = cfg.work_dir;
    const fs::path data_dir = or_default(data, work / "data");
    const fs::path gan_path = or_default(gan, work / "gan.pgk");
    const fs::path cap_path = or_default(captioner, work / "captioner.pgk");

    if (gen_data->parsed()) {
      cmd_gen_data(cfg, or_default(out_path, data_dir), out);
    } else if (train_gan_cmd->parsed()) {
      if (epochs) cfg.gan.epochs = *epochs;
      cmd_train_gan(cfg, data_dir, or_default(out_path, work / "gan.pgk"),
                    or_default(metrics, work / "gan_metrics.jsonl"), out);
    } else if (train_cap_cmd->parsed()) {
      if (epochs) cfg.captioner.epochs = *epochs;
      cmd_train_captioner(cfg, data_dir, gan_path, or_default(out_path, work / "captioner.pgk"),
                          or_default(metrics, work / "captioner_metrics.jsonl"), out, err);
    } else if (embed_cmd->parsed()) {
      cmd_embed(parse_space(space), embed_split, data_dir, gan_path, or_default(out_path, work / (space + "_bank.pge")),
                out, err);
    } else if (fit_cmd->parsed()) {
      cmd_fit_gmm(cfg, or_default(bank, work / (space + "_bank.pge")), k.value_or(cfg.gmm_components),
                  or_default(out_path, work / (space + "_gmm.pgm")), out);
    } else if (sample_cmd->parsed()) {
      sample.source = parse_space(source);
      cmd_sample_pairs(cfg, sample, or_default(bank, work / (source + "_bank.pge")),
                       or_default(gmm, work / (source + "_gmm.pgm")), gan_path, cap_path,
                       or_default(out_path, work / "pairs"), out);
    } else if (sweep_cmd->parsed()) {
      cmd_interp_sweep(cfg, text_a, text_b, steps, gan_path, or_default(out_path, work / "sweep"), out);
    } else if (cycle_cmd->parsed()) {
      cmd_cycle(cfg, cycle, data_dir, gan_path, cap_path, or_default(out_path, work / "cycle"), out);
    } else if (report_cmd->parsed()) {
      cmd_cycle_report(cfg, n, split, data_dir, gan_path, cap_path, or_default(out_path, work / "cycle_report.json"),
                       out, err);
    } else if (eval_cmd->parsed()) {
      cmd_eval(cfg, data_dir, gan_path, cap_path, n, or_default(out_path, work / "eval.json"), out, err);
    }
  } catch (const ConfigError& e) {
    // Bad values in flags or the config file are usage errors too.
    err << "error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace pairforge
