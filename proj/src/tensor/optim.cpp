// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#include "pairforge/optim.hpp"

#include <cmath>
#include <string>

namespace pairforge {

template <typename T>
void adam_step(std::span<BasicTensor<T>* const> params, BasicAdamState<T>& state) {
  if (state.first_moment.empty() && state.step == 0) {
    for (auto* p : params) {
      state.first_moment.emplace_back(p->numel(), T{0});
      state.second_moment.emplace_back(p->numel(), T{0});
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: optimizer tracks " + std::to_string(state.first_moment.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto* p = params[i];
    if (state.first_moment[i].size() != p->numel() ||
        state.second_moment[i].size() != p->numel() ||
        (!p->grad.empty() && p->grad.size() != p->numel())) {
      throw ShapeError("adam_step: moment/gradient buffer does not match parameter " +
                       std::to_string(i) + " of shape " + shape_to_string(p->shape));
    }
  }
  ++state.step;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  const T b1 = static_cast<T>(c.beta1);
  const T b2 = static_cast<T>(c.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto* p = params[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < p->numel(); ++j) {
      const T g = p->grad.empty() ? T{0} : p->grad[j];
      m[j] = b1 * m[j] + (T{1} - b1) * g;
      v[j] = b2 * v[j] + (T{1} - b2) * g * g;
      const double m_hat = static_cast<double>(m[j]) / bc1;
      const double v_hat = static_cast<double>(v[j]) / bc2;
      p->data[j] -= static_cast<T>(c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon));
    }
  }
}

template <typename T>
void zero_grads(std::span<BasicTensor<T>* const> params) {
  for (auto* p : params) p->zero_grad();
}

template void adam_step<float>(std::span<Tensor* const>, BasicAdamState<float>&);
template void adam_step<double>(std::span<TensorD* const>, BasicAdamState<double>&);
template void zero_grads<float>(std::span<Tensor* const>);
template void zero_grads<double>(std::span<TensorD* const>);

}  // namespace pairforge
