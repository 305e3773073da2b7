// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#include "pairforge/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace pairforge {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

double grad_check(const ScalarFn& f, const TensorD& point, double h) {
  TensorD x = point;
  x.requires_grad = true;
  x.zero_grad();
  const auto evaluate = [&]() {
    GraphD g;
    return f(g, g.parameter(x)).item();
  };
  {
    GraphD g;
    g.backward(f(g, g.parameter(x)));
  }
  const std::vector<double> analytic = x.grad;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double saved = x.data[i];
    x.data[i] = saved + h;
    const double plus = evaluate();
    x.data[i] = saved - h;
    const double minus = evaluate();
    x.data[i] = saved;
    worst = std::max(worst, relative_error(analytic[i], (plus - minus) / (2.0 * h)));
  }
  return worst;
}

double grad_check_params(const ScalarBuilder& build, const std::vector<TensorD*>& params,
                         double h, std::size_t coords_per_param, Rng& rng) {
  for (auto* p : params) {
    p->requires_grad = true;
    p->zero_grad();
  }
  {
    GraphD g;
    g.backward(build(g));
  }
  const auto evaluate = [&]() {
    GraphD g;
    return build(g).item();
  };
  double worst = 0.0;
  for (auto* p : params) {
    std::vector<std::size_t> coords;
    if (coords_per_param == 0 || coords_per_param >= p->numel()) {
      for (std::size_t i = 0; i < p->numel(); ++i) coords.push_back(i);
    } else {
      for (std::size_t i = 0; i < coords_per_param; ++i) {
        coords.push_back(static_cast<std::size_t>(rng.uniform_int(p->numel())));
      }
    }
    for (std::size_t i : coords) {
      const double saved = p->data[i];
      p->data[i] = saved + h;
      const double plus = evaluate();
      p->data[i] = saved - h;
      const double minus = evaluate();
      p->data[i] = saved;
      worst = std::max(worst, relative_error(p->grad[i], (plus - minus) / (2.0 * h)));
    }
  }
  return worst;
}

}  // namespace pairforge
