// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#include "gemm.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

#include "pairforge/autograd.hpp"

namespace pairforge {

namespace {
std::atomic<std::size_t> g_num_threads{1};
}

void set_num_threads(std::size_t n) { g_num_threads.store(std::max<std::size_t>(n, 1)); }
std::size_t num_threads() { return g_num_threads.load(); }

namespace detail {

namespace {

template <typename T>
void transpose(const T* src, std::size_t rows, std::size_t cols, std::vector<T>& dst) {
  dst.resize(rows * cols);
  constexpr std::size_t kBlock = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kBlock) {
    const std::size_t r1 = std::min(rows, r0 + kBlock);
    for (std::size_t c0 = 0; c0 < cols; c0 += kBlock) {
      const std::size_t c1 = std::min(cols, c0 + kBlock);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
      }
    }
  }
}

template <typename T>
void gemm_rows(std::size_t row_begin, std::size_t row_end, std::size_t n, std::size_t k,
               const T* a, const T* b, T* c, bool accumulate) {
  for (std::size_t i = row_begin; i < row_end; ++i) {
    T* __restrict crow = c + i * n;
    if (!accumulate) std::fill(crow, crow + n, T{0});
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* __restrict brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate) {
  std::vector<T> a_buf;
  std::vector<T> b_buf;
  if (trans_a) {
    transpose(a, k, m, a_buf);
    a = a_buf.data();
  }
  if (trans_b) {
    transpose(b, n, k, b_buf);
    b = b_buf.data();
  }
  const std::size_t threads = std::min(num_threads(), m);
  constexpr std::size_t kParallelWork = 1u << 20;
  if (threads <= 1 || m * n * k < kParallelWork) {
    gemm_rows(0, m, n, k, a, b, c, accumulate);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(threads);
  const std::size_t chunk = (m + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(m, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([=] { gemm_rows(begin, end, n, k, a, b, c, accumulate); });
  }
  for (auto& w : workers) w.join();
}

template void gemm<float>(bool, bool, std::size_t, std::size_t, std::size_t, const float*,
                          const float*, float*, bool);
template void gemm<double>(bool, bool, std::size_t, std::size_t, std::size_t, const double*,
                           const double*, double*, bool);

}  // namespace detail
}  // namespace pairforge
