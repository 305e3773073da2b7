// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "pairforge/autograd.hpp"
#include "pairforge/rng.hpp"

namespace pairforge {

using ScalarFn = std::function<Var<double>(GraphD&, Var<double>)>;
using ScalarBuilder = std::function<Var<double>(GraphD&)>;

/// Relative error used throughout: |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

/// Max relative error between the autodiff gradient of `f` at `point` and
/// central differences with step `h`, over every coordinate (f64).
double grad_check(const ScalarFn& f, const TensorD& point, double h = 1e-6);

/// Same check against a set of parameters bound inside `build`. When
/// `coords_per_param` is non-zero, that many coordinates are sampled from each
/// parameter with `rng`; otherwise every coordinate is checked.
double grad_check_params(const ScalarBuilder& build, const std::vector<TensorD*>& params,
                         double h, std::size_t coords_per_param, Rng& rng);

}  // namespace pairforge
