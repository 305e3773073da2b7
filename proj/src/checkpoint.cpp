// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#include "pairforge/checkpoint.hpp"

#include <ostream>

#include "json.hpp"
#include "pairforge/io.hpp"

namespace pairforge {
namespace {

using nlohmann::ordered_json;

template <template <class> class Slots>
void append_tensors(Checkpoint& ckpt, const Slots<Tensor>& params, const std::string& prefix) {
  Slots<Tensor>::visit(params, [&](const char* name, const Tensor& t) {
    Tensor copy(t.shape, t.data);
    ckpt.tensors.emplace_back(prefix + name, std::move(copy));
  });
}

template <template <class> class Slots>
void restore_tensors(const Checkpoint& ckpt, Slots<Tensor>& params, const std::string& prefix,
                     const Slots<Tensor>& shapes) {
  std::vector<const Tensor*> expected;
  Slots<Tensor>::visit(shapes, [&](const char*, const Tensor& t) { expected.push_back(&t); });
  std::size_t i = 0;
  Slots<Tensor>::visit(params, [&](const char* name, Tensor& t) {
    const std::string key = prefix + name;
    const Tensor* found = nullptr;
    for (const auto& [n, tensor] : ckpt.tensors) {
      if (n == key) found = &tensor;
    }
    if (found == nullptr) throw ConfigError("checkpoint is missing tensor '" + key + "'");
    if (found->shape != expected[i]->shape) {
      throw ShapeError("checkpoint tensor '" + key + "' has shape " + shape_to_string(found->shape) +
                       ", expected " + shape_to_string(expected[i]->shape));
    }
    t = Tensor(found->shape, found->data, true);
    ++i;
  });
}

std::size_t vocab_size_of(const Checkpoint& ckpt, const std::string& embed_name) {
  for (const auto& [n, t] : ckpt.tensors) {
    if (n == embed_name && t.rank() == 2) return t.shape[0];
  }
  throw ConfigError("checkpoint is missing tensor '" + embed_name + "'");
}

}  // namespace

const char* model_kind_name(ModelKind kind) { return kind == ModelKind::kGan ? "gan" : "captioner"; }

std::string encode_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.put_bytes("PGK1");
  w.put_u32(kCheckpointVersion);
  w.put_u32(static_cast<std::uint32_t>(ckpt.kind));
  w.put_u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    w.put_string(name);
    w.put_u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape) w.put_u32(static_cast<std::uint32_t>(d));
    w.put_f32s(t.data.data(), t.data.size());
  }
  w.put_string(ckpt.metadata);
  return w.bytes();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  ByteReader r(bytes);
  r.expect_magic("PGK1");
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32("format version");
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version) + " (this build reads version " +
                         std::to_string(kCheckpointVersion) + ")",
                     version_at);
  }
  const std::size_t kind_at = r.offset();
  const std::uint32_t kind = r.u32("model kind");
  if (kind > 1) throw ParseError("unknown model kind " + std::to_string(kind), kind_at);
  Checkpoint ckpt;
  ckpt.kind = static_cast<ModelKind>(kind);
  const std::uint32_t count = r.u32("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.string("tensor name");
    const std::size_t rank_at = r.offset();
    const std::uint32_t rank = r.u32("tensor rank");
    if (rank == 0 || rank > 8) throw ParseError("implausible tensor rank " + std::to_string(rank), rank_at);
    Shape shape;
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::size_t dim_at = r.offset();
      shape.push_back(r.u32("tensor dimension"));
      if (shape.back() == 0) throw ParseError("zero tensor dimension", dim_at);
      numel *= shape.back();
      if (numel * 4 > r.remaining()) throw ParseError("tensor '" + name + "' runs past the end of the file", dim_at);
    }
    std::vector<float> data(numel);
    r.f32s(data.data(), numel, "tensor data");
    ckpt.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  ckpt.metadata = r.string("metadata");
  if (!r.done()) throw ParseError("trailing bytes after checkpoint metadata", r.offset());
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DependencyError("checkpoint not found: " + path.string());
  try {
    return decode_checkpoint(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  }
}

std::string encode_info(const CheckpointInfo& info) {
  ordered_json j;
  j["seed"] = info.seed;
  j["epoch"] = info.epoch;
  j["corpus_hash"] = info.corpus_hash;
  j["config"] = ordered_json::parse(info.config_json);
  j["vocab"] = info.vocab_words;
  return j.dump();
}

CheckpointInfo decode_info(const std::string& metadata) {
  CheckpointInfo info;
  try {
    const auto j = ordered_json::parse(metadata);
    info.seed = j.value("seed", std::uint64_t{0});
    info.epoch = j.value("epoch", std::size_t{0});
    info.corpus_hash = j.value("corpus_hash", std::string());
    if (j.contains("config")) info.config_json = j["config"].dump();
    if (j.contains("vocab")) info.vocab_words = j["vocab"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint metadata: ") + e.what(), 0);
  }
  return info;
}

Checkpoint gan_checkpoint(const GanParams<float>& params, const CheckpointInfo& info) {
  Checkpoint ckpt;
  ckpt.kind = ModelKind::kGan;
  append_tensors(ckpt, params.psi, "psi.");
  append_tensors(ckpt, params.gen, "gen.");
  append_tensors(ckpt, params.disc, "disc.");
  ckpt.metadata = encode_info(info);
  return ckpt;
}

Checkpoint captioner_checkpoint(const CaptionerParams<float>& params, const CheckpointInfo& info) {
  Checkpoint ckpt;
  ckpt.kind = ModelKind::kCaptioner;
  append_tensors(ckpt, params, "captioner.");
  ckpt.metadata = encode_info(info);
  return ckpt;
}

GanParams<float> gan_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != ModelKind::kGan) throw ConfigError("expected a gan checkpoint, got a captioner checkpoint");
  const auto shapes = init_gan(vocab_size_of(ckpt, "psi.embed"), 0);
  GanParams<float> p;
  restore_tensors(ckpt, p.psi, "psi.", shapes.psi);
  restore_tensors(ckpt, p.gen, "gen.", shapes.gen);
  restore_tensors(ckpt, p.disc, "disc.", shapes.disc);
  return p;
}

CaptionerParams<float> captioner_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != ModelKind::kCaptioner) throw ConfigError("expected a captioner checkpoint, got a gan checkpoint");
  const auto shapes = init_captioner(vocab_size_of(ckpt, "captioner.embed"), 0);
  CaptionerParams<float> p;
  restore_tensors(ckpt, p, "captioner.", shapes);
  return p;
}

bool check_corpus_hash(const Checkpoint& ckpt, const std::string& corpus_hash, std::ostream& warn) {
  const auto info = decode_info(ckpt.metadata);
  if (info.corpus_hash == corpus_hash) return true;
  warn << "warning: " << model_kind_name(ckpt.kind) << " checkpoint was trained on corpus " << info.corpus_hash
       << " but the current corpus hashes to " << corpus_hash << "\n";
  return false;
}

}  // namespace pairforge
