// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

namespace pairforge::detail {

/// C (M x N) = op(A) * op(B), or C += ... when `accumulate`.
/// op(A) is M x K: A is stored M x K, or K x M when `trans_a`.
/// op(B) is K x N: B is stored K x N, or N x K when `trans_b`.
/// Each output element is reduced over k in ascending order regardless of the
/// thread count.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate);

}  // namespace pairforge::detail
