// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Novel source embeddings: convex mixes of two prototypes, and draws from a
// diagonal Gaussian mixture fitted with EM.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "pairforge/rng.hpp"
#include "pairforge/tensor.hpp"

namespace pairforge {

enum class EmbeddingSpace : std::uint8_t { kText = 0, kImage = 1 };

const char* space_name(EmbeddingSpace space);
/// "text" or "image"; throws ConfigError otherwise.
EmbeddingSpace parse_space(const std::string& name);

struct EmbeddingBank {
  EmbeddingSpace space = EmbeddingSpace::kText;
  std::size_t dim = 0;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;

  std::size_t size() const { return rows.size(); }
  /// Throws ConfigError unless rows are finite, equally sized, labelled, and N >= 2.
  void validate() const;
};

void save_bank(const std::filesystem::path& path, const EmbeddingBank& bank);
EmbeddingBank load_bank(const std::filesystem::path& path);

/// lambda * a + (1 - lambda) * b, exact at both endpoints.
std::vector<double> lerp_embedding(const std::vector<double>& a, const std::vector<double>& b, double lambda);

enum class PairMode { kAny, kSameClass };

struct LambdaDist {
  bool fixed = false;
  double value = 0.5;  // used when fixed

  static LambdaDist uniform() { return {}; }
  static LambdaDist constant(double lambda) { return {true, lambda}; }
};

struct PrototypePair {
  std::size_t i = 0;
  std::size_t j = 0;
  double lambda = 0.5;
};

/// Uniform over ordered pairs i != j (restricted to equal labels in kSameClass).
PrototypePair sample_prototype_pair(const EmbeddingBank& bank, PairMode mode, LambdaDist lambda, Rng& rng);

struct GmmModel {
  EmbeddingSpace space = EmbeddingSpace::kText;
  std::vector<double> weights;                 // K
  std::vector<std::vector<double>> means;      // K x d
  std::vector<std::vector<double>> variances;  // K x d

  std::size_t components() const { return weights.size(); }
  std::size_t dim() const { return means.empty() ? 0 : means.front().size(); }
  void validate() const;
};

inline constexpr double kVarianceFloor = 1e-6;
inline constexpr double kCollapsedWeight = 1e-8;

struct GmmFitOptions {
  std::size_t max_iter = 200;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

struct GmmFitResult {
  GmmModel model;
  std::vector<double> log_likelihood;  // total data log-likelihood per EM iteration
  std::size_t reinitialized = 0;       // collapsed components restarted from a data point
};

/// EM on a diagonal-covariance mixture, k-means++ initialization.
GmmFitResult fit_gmm(const std::vector<std::vector<double>>& data, std::size_t k, const GmmFitOptions& options,
                     EmbeddingSpace space = EmbeddingSpace::kText);
GmmFitResult fit_gmm(const EmbeddingBank& bank, std::size_t k, const GmmFitOptions& options);

double gmm_log_likelihood(const GmmModel& model, const std::vector<double>& x);

/// Posterior component probabilities for x.
std::vector<double> gmm_responsibilities(const GmmModel& model, const std::vector<double>& x);

/// Ancestral draw, or a draw from `component` when given.
std::vector<double> gmm_sample(const GmmModel& model, Rng& rng, std::optional<std::size_t> component = {});

void save_gmm(const std::filesystem::path& path, const GmmModel& model);
GmmModel load_gmm(const std::filesystem::path& path);

}  // namespace pairforge
