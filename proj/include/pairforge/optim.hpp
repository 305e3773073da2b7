// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pairforge/tensor.hpp"

namespace pairforge {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct BasicAdamState {
  AdamConfig config;
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;
  std::uint64_t step = 0;
};

using AdamState = BasicAdamState<float>;

/// One bias-corrected Adam update using each parameter's `grad` buffer.
/// Moment buffers are created on the first call; afterwards the parameter list
/// must keep the same order and shapes. Parameters with an empty gradient are
/// treated as having a zero gradient.
template <typename T>
void adam_step(std::span<BasicTensor<T>* const> params, BasicAdamState<T>& state);

/// Clears gradient buffers of every tensor in the list.
template <typename T>
void zero_grads(std::span<BasicTensor<T>* const> params);

}  // namespace pairforge
