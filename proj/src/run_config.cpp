// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#include "pairforge/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "pairforge/io.hpp"

namespace pairforge {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError("'" + key + "' expects " + want + ", got '" + value + "'");
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  // std::from_chars for double is missing from older libstdc++; istringstream is enough here.
  std::istringstream in(v);
  in.imbue(std::locale::classic());
  double out = 0.0;
  if (!(in >> out) || !in.eof() || !std::isfinite(out)) bad_value(key, v, "a finite number");
  return out;
}

std::string to_string_value(const std::string& key, const std::string& v) {
  if (v.size() < 2 || v.front() != '"' || v.back() != '"') bad_value(key, v, "a quoted string");
  return v.substr(1, v.size() - 2);
}

std::string fmt_double(double v) {
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out.precision(17);
  out << v;
  return out.str();
}

#define PF_SIZE(expr)                                                                        \
  Field {                                                                                    \
    [](RunConfig& c, const std::string& v) { expr = static_cast<std::size_t>(to_u64("", v)); }, \
        [](const RunConfig& c) { return std::to_string(expr); }                              \
  }
#define PF_DOUBLE(expr)                                                          \
  Field {                                                                        \
    [](RunConfig& c, const std::string& v) { expr = to_double("", v); },         \
        [](const RunConfig& c) { return fmt_double(expr); }                      \
  }

// Ordered so to_toml() groups keys by section.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table{
      {"seed", Field{[](RunConfig& c, const std::string& v) { c.seed = to_u64("", v); },
                     [](const RunConfig& c) { return std::to_string(c.seed); }}},
      {"corpus.num_samples", PF_SIZE(c.corpus.num_samples)},
      {"corpus.captions_per_image", PF_SIZE(c.corpus.captions_per_image)},
      {"corpus.noise_amplitude", PF_DOUBLE(c.corpus.noise_amplitude)},
      {"gan.epochs", PF_SIZE(c.gan.epochs)},
      {"gan.batch_size", PF_SIZE(c.gan.batch_size)},
      {"gan.learning_rate", PF_DOUBLE(c.gan.adam.learning_rate)},
      {"gan.beta1", PF_DOUBLE(c.gan.adam.beta1)},
      {"gan.beta2", PF_DOUBLE(c.gan.adam.beta2)},
      {"gan.checkpoint_interval", PF_SIZE(c.gan.checkpoint_interval)},
      {"gan.psi_g_weight", PF_DOUBLE(c.gan.psi_g_weight)},
      {"captioner.epochs", PF_SIZE(c.captioner.epochs)},
      {"captioner.batch_size", PF_SIZE(c.captioner.batch_size)},
      {"captioner.learning_rate", PF_DOUBLE(c.captioner.adam.learning_rate)},
      {"captioner.beta1", PF_DOUBLE(c.captioner.adam.beta1)},
      {"captioner.beta2", PF_DOUBLE(c.captioner.adam.beta2)},
      {"captioner.max_len", PF_SIZE(c.caption_max_len)},
      {"gmm.components", PF_SIZE(c.gmm_components)},
      {"gmm.max_iter", PF_SIZE(c.gmm.max_iter)},
      {"gmm.tol", PF_DOUBLE(c.gmm.tol)},
      {"paths.work_dir",
       Field{[](RunConfig& c, const std::string& v) { c.work_dir = to_string_value("paths.work_dir", v); },
             [](const RunConfig& c) { return "\"" + c.work_dir.string() + "\""; }}},
  };
  return table;
}

#undef PF_SIZE
#undef PF_DOUBLE

const Field* find_field(const std::string& key) {
  for (const auto& [name, f] : fields()) {
    if (name == key) return &f;
  }
  return nullptr;
}

}  // namespace

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  corpus.seed = s;
  gan.seed = s;
  captioner.seed = s;
  gmm.seed = s;
}

void RunConfig::validate() const {
  corpus.validate();
  gan.validate();
  captioner.validate();
  if (caption_max_len < 2) throw ConfigError("captioner.max_len must be at least 2");
  if (gmm_components == 0) throw ConfigError("gmm.components must be positive");
  if (gmm.max_iter == 0) throw ConfigError("gmm.max_iter must be positive");
  if (!(gmm.tol >= 0.0)) throw ConfigError("gmm.tol must be non-negative");
  if (work_dir.empty()) throw ConfigError("paths.work_dir must not be empty");
}

std::string RunConfig::to_toml() const {
  std::string out;
  std::string section;
  for (const auto& [name, f] : fields()) {
    const auto dot = name.find('.');
    const std::string sec = dot == std::string::npos ? "" : name.substr(0, dot);
    if (sec != section) {
      out += "\n[" + sec + "]\n";
      section = sec;
    }
    out += name.substr(dot == std::string::npos ? 0 : dot + 1) + " = " + f.get(*this) + "\n";
  }
  return out;
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::map<std::string, std::size_t> seen;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::size_t line_no = 0;
  bool seed_set = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      static const char* known[] = {"corpus", "gan", "captioner", "gmm", "paths"};
      if (std::find(std::begin(known), std::end(known), section) == std::end(known)) {
        throw ConfigError(where + "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    const Field* field = find_field(full);
    if (field == nullptr) throw ConfigError(where + "unknown key '" + full + "'");
    if (auto it = seen.find(full); it != seen.end()) {
      throw ConfigError(where + "'" + full + "' already set on line " + std::to_string(it->second));
    }
    seen[full] = line_no;
    try {
      field->set(cfg, value);
    } catch (const ConfigError& e) {
      std::string msg = e.what();
      if (msg.rfind("'' ", 0) == 0) msg = "'" + full + "' " + msg.substr(3);
      throw ConfigError(where + msg);
    }
    seed_set = seed_set || full == "seed";
  }
  if (seed_set) cfg.apply_seed(cfg.seed);
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DependencyError("config file not found: " + path.string());
  try {
    return parse_run_config(read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace pairforge
