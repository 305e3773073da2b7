// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#include "pairforge/source_gen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "pairforge/io.hpp"

namespace pairforge {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2 pi)

void check_rows(const std::vector<std::vector<double>>& data) {
  if (data.empty() || data.front().empty()) throw ConfigError("GMM data must be non-empty");
  const std::size_t d = data.front().size();
  for (const auto& row : data) {
    if (row.size() != d) throw ShapeError("GMM data rows differ in dimension");
    for (double v : row) {
      if (!std::isfinite(v)) throw NumericError("GMM data contains a non-finite value");
    }
  }
}

double log_component(const GmmModel& m, std::size_t k, const std::vector<double>& x) {
  double s = std::log(m.weights[k]);
  const auto& mu = m.means[k];
  const auto& var = m.variances[k];
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double diff = x[j] - mu[j];
    s -= 0.5 * (kLog2Pi + std::log(var[j]) + diff * diff / var[j]);
  }
  return s;
}

double log_sum_exp(const std::vector<double>& v) {
  const double peak = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(peak)) return peak;
  double s = 0.0;
  for (double x : v) s += std::exp(x - peak);
  return peak + std::log(s);
}

std::vector<double> global_variance(const std::vector<std::vector<double>>& data) {
  const std::size_t n = data.size(), d = data.front().size();
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (const auto& row : data)
    for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
  for (auto& v : mean) v /= static_cast<double>(n);
  for (const auto& row : data)
    for (std::size_t j = 0; j < d; ++j) var[j] += (row[j] - mean[j]) * (row[j] - mean[j]);
  for (auto& v : var) v = std::max(v / static_cast<double>(n), kVarianceFloor);
  return var;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

std::vector<std::vector<double>> kmeans_pp(const std::vector<std::vector<double>>& data, std::size_t k, Rng& rng) {
  std::vector<std::vector<double>> centers{data[rng.uniform_int(data.size())]};
  std::vector<double> d2(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) d2[i] = sq_dist(data[i], centers[0]);
  while (centers.size() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (pick = 0; pick + 1 < data.size(); ++pick) {
        u -= d2[pick];
        if (u < 0.0) break;
      }
    } else {
      pick = rng.uniform_int(data.size());
    }
    centers.push_back(data[pick]);
    for (std::size_t i = 0; i < data.size(); ++i) d2[i] = std::min(d2[i], sq_dist(data[i], centers.back()));
  }
  return centers;
}

// E-step: fills responsibilities and returns the total log-likelihood.
double e_step(const GmmModel& m, const std::vector<std::vector<double>>& data,
              std::vector<std::vector<double>>& resp) {
  const std::size_t k = m.components();
  std::vector<double> logs(k);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t c = 0; c < k; ++c) logs[c] = log_component(m, c, data[i]);
    const double lse = log_sum_exp(logs);
    total += lse;
    for (std::size_t c = 0; c < k; ++c) resp[i][c] = std::exp(logs[c] - lse);
  }
  return total;
}

void m_step(GmmModel& m, const std::vector<std::vector<double>>& data, const std::vector<std::vector<double>>& resp) {
  const std::size_t n = data.size(), d = data.front().size(), k = m.components();
  for (std::size_t c = 0; c < k; ++c) {
    double nk = 0.0;
    std::vector<double> mean(d, 0.0), var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      nk += resp[i][c];
      for (std::size_t j = 0; j < d; ++j) mean[j] += resp[i][c] * data[i][j];
    }
    m.weights[c] = nk / static_cast<double>(n);
    if (nk <= 0.0) continue;  // handled by the collapse policy
    for (auto& v : mean) v /= nk;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = data[i][j] - mean[j];
        var[j] += resp[i][c] * diff * diff;
      }
    }
    for (auto& v : var) v = std::max(v / nk, kVarianceFloor);
    m.means[c] = std::move(mean);
    m.variances[c] = std::move(var);
  }
}

}  // namespace

const char* space_name(EmbeddingSpace space) { return space == EmbeddingSpace::kText ? "text" : "image"; }

EmbeddingSpace parse_space(const std::string& name) {
  if (name == "text") return EmbeddingSpace::kText;
  if (name == "image") return EmbeddingSpace::kImage;
  throw ConfigError("unknown embedding space '" + name + "' (expected text or image)");
}

void EmbeddingBank::validate() const {
  if (rows.size() < 2) throw ConfigError("embedding bank needs at least two rows");
  if (labels.size() != rows.size()) throw ConfigError("embedding bank labels do not match rows");
  for (const auto& r : rows) {
    if (r.size() != dim) throw ShapeError("embedding bank row has the wrong dimension");
    for (double v : r) {
      if (!std::isfinite(v)) throw NumericError("embedding bank contains a non-finite value");
    }
  }
  for (int l : labels) {
    if (l < 0) throw ConfigError("embedding bank label must be a class id");
  }
}

void save_bank(const std::filesystem::path& path, const EmbeddingBank& bank) {
  bank.validate();
  ByteWriter w;
  w.put_bytes("PGE1");
  w.put_u32(static_cast<std::uint32_t>(bank.size()));
  w.put_u32(static_cast<std::uint32_t>(bank.dim));
  w.put_u8(static_cast<std::uint8_t>(bank.space));
  for (const auto& r : bank.rows)
    for (double v : r) w.put_f32(static_cast<float>(v));
  for (int l : bank.labels) w.put_u32(static_cast<std::uint32_t>(l));
  write_file_atomic(path, w.bytes());
}

EmbeddingBank load_bank(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  ByteReader r(bytes);
  r.expect_magic("PGE1");
  EmbeddingBank bank;
  const std::size_t n = r.u32("row count");
  bank.dim = r.u32("dimension");
  const auto space = r.u8("space tag");
  if (space > 1) throw ParseError("unknown embedding space tag", r.offset() - 1);
  bank.space = static_cast<EmbeddingSpace>(space);
  if (r.remaining() != n * bank.dim * 4 + n * 4) throw ParseError("embedding bank size mismatch", r.offset());
  bank.rows.assign(n, std::vector<double>(bank.dim));
  for (auto& row : bank.rows)
    for (auto& v : row) v = r.f32("embedding value");
  for (std::size_t i = 0; i < n; ++i) bank.labels.push_back(static_cast<int>(r.u32("label")));
  bank.validate();
  return bank;
}

std::vector<double> lerp_embedding(const std::vector<double>& a, const std::vector<double>& b, double lambda) {
  if (a.size() != b.size()) throw ShapeError("lerp: dimension mismatch");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ContractError("lerp: lambda must lie in [0, 1]");
  if (lambda == 1.0) return a;
  if (lambda == 0.0) return b;
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = lambda * a[i] + (1.0 - lambda) * b[i];
  return out;
}

PrototypePair sample_prototype_pair(const EmbeddingBank& bank, PairMode mode, LambdaDist lambda, Rng& rng) {
  if (lambda.fixed && !(lambda.value >= 0.0 && lambda.value <= 1.0)) {
    throw ConfigError("fixed lambda must lie in [0, 1]");
  }
  const std::size_t n = bank.size();
  PrototypePair pair;
  if (mode == PairMode::kAny) {
    if (n < 2) throw ConfigError("need at least two embeddings to form a pair");
    pair.i = rng.uniform_int(n);
    pair.j = rng.uniform_int(n - 1);
    if (pair.j >= pair.i) ++pair.j;
  } else {
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < n; ++i) members[bank.labels.at(i)].push_back(i);
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < n; ++i) {
      if (members[bank.labels[i]].size() >= 2) eligible.push_back(i);
    }
    if (eligible.empty()) throw ConfigError("no class has two or more embeddings");
    pair.i = eligible[rng.uniform_int(eligible.size())];
    const auto& peers = members[bank.labels[pair.i]];
    do {
      pair.j = peers[rng.uniform_int(peers.size())];
    } while (pair.j == pair.i);
  }
  pair.lambda = lambda.fixed ? lambda.value : rng.uniform();
  return pair;
}

void GmmModel::validate() const {
  const std::size_t k = components();
  if (k == 0 || means.size() != k || variances.size() != k) throw ConfigError("GMM shape is inconsistent");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ConfigError("GMM weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-6) throw ConfigError("GMM weights must sum to one");
  for (std::size_t c = 0; c < k; ++c) {
    if (means[c].size() != dim() || variances[c].size() != dim()) throw ShapeError("GMM component dimension");
    for (double v : variances[c]) {
      if (!(v >= kVarianceFloor * (1.0 - 1e-6))) throw ConfigError("GMM variance below floor");
    }
  }
}

GmmFitResult fit_gmm(const std::vector<std::vector<double>>& data, std::size_t k, const GmmFitOptions& options,
                     EmbeddingSpace space) {
  check_rows(data);
  if (k == 0) throw ConfigError("GMM needs at least one component");
  if (data.size() < k) {
    throw ConfigError("GMM with K=" + std::to_string(k) + " needs at least K rows, got " +
                      std::to_string(data.size()));
  }
  Rng rng(options.seed);
  GmmFitResult result;
  GmmModel& m = result.model;
  m.space = space;
  const auto base_var = global_variance(data);
  m.means = kmeans_pp(data, k, rng);
  m.variances.assign(k, base_var);
  m.weights.assign(k, 1.0 / static_cast<double>(k));

  std::vector<std::vector<double>> resp(data.size(), std::vector<double>(k));
  double prev = e_step(m, data, resp);
  result.log_likelihood.push_back(prev);
  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    m_step(m, data, resp);
    bool restarted = false;
    for (std::size_t c = 0; c < k; ++c) {
      if (m.weights[c] < kCollapsedWeight) {
        m.means[c] = data[rng.uniform_int(data.size())];
        m.variances[c] = base_var;
        m.weights[c] = 1.0 / static_cast<double>(k);
        ++result.reinitialized;
        restarted = true;
      }
    }
    if (restarted) {
      double total = 0.0;
      for (double w : m.weights) total += w;
      for (auto& w : m.weights) w /= total;
    }
    const double ll = e_step(m, data, resp);
    result.log_likelihood.push_back(ll);
    const bool converged = std::abs(ll - prev) <= options.tol * std::max(std::abs(prev), 1e-300);
    prev = ll;
    if (converged && !restarted) break;
  }
  return result;
}

GmmFitResult fit_gmm(const EmbeddingBank& bank, std::size_t k, const GmmFitOptions& options) {
  return fit_gmm(bank.rows, k, options, bank.space);
}

double gmm_log_likelihood(const GmmModel& model, const std::vector<double>& x) {
  if (x.size() != model.dim()) throw ShapeError("GMM input dimension mismatch");
  std::vector<double> logs(model.components());
  for (std::size_t c = 0; c < logs.size(); ++c) logs[c] = log_component(model, c, x);
  return log_sum_exp(logs);
}

std::vector<double> gmm_responsibilities(const GmmModel& model, const std::vector<double>& x) {
  if (x.size() != model.dim()) throw ShapeError("GMM input dimension mismatch");
  std::vector<double> logs(model.components());
  for (std::size_t c = 0; c < logs.size(); ++c) logs[c] = log_component(model, c, x);
  const double lse = log_sum_exp(logs);
  for (auto& v : logs) v = std::exp(v - lse);
  return logs;
}

std::vector<double> gmm_sample(const GmmModel& model, Rng& rng, std::optional<std::size_t> component) {
  std::size_t c = 0;
  if (component) {
    if (*component >= model.components()) {
      throw std::out_of_range("GMM component " + std::to_string(*component) + " out of range");
    }
    c = *component;
  } else {
    double u = rng.uniform();
    for (c = 0; c + 1 < model.components(); ++c) {
      u -= model.weights[c];
      if (u < 0.0) break;
    }
  }
  std::vector<double> x(model.dim());
  for (std::size_t j = 0; j < x.size(); ++j) {
    x[j] = model.means[c][j] + std::sqrt(model.variances[c][j]) * rng.normal();
  }
  return x;
}

void save_gmm(const std::filesystem::path& path, const GmmModel& model) {
  model.validate();
  ByteWriter w;
  w.put_bytes("PGM1");
  w.put_u32(static_cast<std::uint32_t>(model.components()));
  w.put_u32(static_cast<std::uint32_t>(model.dim()));
  for (double v : model.weights) w.put_f32(static_cast<float>(v));
  for (const auto& mu : model.means)
    for (double v : mu) w.put_f32(static_cast<float>(v));
  for (const auto& var : model.variances)
    for (double v : var) w.put_f32(static_cast<float>(v));
  write_file_atomic(path, w.bytes());
}

GmmModel load_gmm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  ByteReader r(bytes);
  r.expect_magic("PGM1");
  const std::size_t k = r.u32("component count");
  const std::size_t d = r.u32("dimension");
  if (k == 0 || d == 0) throw ParseError("GMM with no components or zero dimension", r.offset());
  if (r.remaining() != (k + 2 * k * d) * 4) throw ParseError("GMM size mismatch", r.offset());
  GmmModel m;
  // The file carries no space tag; the dimension identifies it.
  m.space = d == 1024 ? EmbeddingSpace::kImage : EmbeddingSpace::kText;
  m.weights.resize(k);
  for (auto& w : m.weights) w = r.f32("weight");
  double total = 0.0;
  for (double w : m.weights) total += w;
  for (auto& w : m.weights) w /= total;  // undo f32 rounding
  m.means.assign(k, std::vector<double>(d));
  for (auto& mu : m.means)
    for (auto& v : mu) v = r.f32("mean");
  m.variances.assign(k, std::vector<double>(d));
  for (auto& var : m.variances)
    for (auto& v : var) v = std::max<double>(r.f32("variance"), kVarianceFloor);
  m.validate();
  return m;
}

}  // namespace pairforge
