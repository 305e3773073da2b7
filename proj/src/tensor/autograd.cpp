// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#include "pairforge/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "gemm.hpp"

namespace pairforge {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t conv_output_size(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  // Trailing rows/columns that do not fill a whole window are dropped (floor).
  if (in + 2 * pad < k) {
    throw ShapeError("conv2d: kernel " + std::to_string(k) + " does not fit input " +
                     std::to_string(in) + " with pad " + std::to_string(pad) +
                     "; output size would not be a positive integer");
  }
  return (in + 2 * pad - k) / stride + 1;
}

std::size_t conv_transpose_output_size(std::size_t in, std::size_t k, std::size_t stride,
                                       std::size_t pad) {
  if (stride == 0) throw ShapeError("conv2d_transpose: stride must be positive");
  const long long out = (static_cast<long long>(in) - 1) * static_cast<long long>(stride) -
                        2 * static_cast<long long>(pad) + static_cast<long long>(k);
  if (out <= 0) {
    throw ShapeError("conv2d_transpose: output size (H-1)*stride - 2*pad + k must be positive");
  }
  return static_cast<std::size_t>(out);
}

// ---- Var ---------------------------------------------------------------

template <typename T>
const Shape& Var<T>::shape() const {
  return graph->node(id).shape;
}

template <typename T>
std::span<const T> Var<T>::value() const {
  return graph->node(id).value;
}

template <typename T>
std::span<const T> Var<T>::grad() const {
  return graph->node(id).grad;
}

template <typename T>
T Var<T>::item() const {
  const auto& v = graph->node(id).value;
  if (v.size() != 1) throw ContractError("item() on non-scalar of shape " + shape_to_string(shape()));
  return v[0];
}

// ---- Graph -------------------------------------------------------------

template <typename T>
Var<T> BasicGraph<T>::constant(const BasicTensor<T>& t) {
  return record("constant", t.shape, t.data, {}, nullptr);
}

template <typename T>
Var<T> BasicGraph<T>::constant(Shape shape, std::vector<T> values) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("constant: data length does not match shape " + shape_to_string(shape));
  }
  return record("constant", std::move(shape), std::move(values), {}, nullptr);
}

template <typename T>
Var<T> BasicGraph<T>::parameter(BasicTensor<T>& t) {
  Var<T> v = record("parameter", t.shape, t.data, {}, nullptr);
  Node& n = nodes_.back();
  n.param = &t;
  n.needs_grad = t.requires_grad;
  return v;
}

template <typename T>
Var<T> BasicGraph<T>::record(std::string op, Shape shape, std::vector<T> value,
                             std::vector<int> inputs, BackwardFn backward) {
  for (const T& x : value) {
    if (!std::isfinite(x)) throw NumericError("non-finite value produced by " + op);
  }
  Node n;
  n.op = std::move(op);
  n.shape = std::move(shape);
  n.value = std::move(value);
  for (int in : inputs) {
    if (in < 0 || static_cast<std::size_t>(in) >= nodes_.size()) {
      throw ContractError(n.op + ": input does not belong to this graph");
    }
    n.needs_grad = n.needs_grad || nodes_[static_cast<std::size_t>(in)].needs_grad;
  }
  n.inputs = std::move(inputs);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var<T>{this, static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
std::span<T> BasicGraph<T>::input_grad(int id) {
  Node& n = node(id);
  if (!n.needs_grad) return {};
  return n.grad;
}

template <typename T>
void BasicGraph<T>::backward(Var<T> loss) {
  if (nodes_.empty()) throw ContractError("backward: graph is empty");
  if (loss.graph != this) throw ContractError("backward: loss is not on this graph");
  const Node& root = node(loss.id);
  if (root.value.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_to_string(root.shape));
  }
  const auto last = static_cast<std::size_t>(loss.id);
  for (std::size_t i = 0; i <= last; ++i) {
    Node& n = nodes_[i];
    if (n.needs_grad) n.grad.assign(n.value.size(), T{0});
    else n.grad.clear();
  }
  if (!root.needs_grad) return;
  nodes_[last].grad[0] = T{1};
  for (std::size_t i = last + 1; i-- > 0;) {
    if (nodes_[i].needs_grad && nodes_[i].backward) nodes_[i].backward(*this, static_cast<int>(i));
  }
  for (std::size_t i = 0; i <= last; ++i) {
    Node& n = nodes_[i];
    if (!n.param || !n.needs_grad) continue;
    auto& g = n.param->grad;
    if (g.size() != n.grad.size()) g.assign(n.grad.size(), T{0});
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += n.grad[j];
  }
}

// ---- helpers -----------------------------------------------------------

namespace {

template <typename T>
void require_same_graph(Var<T> a, Var<T> b, const char* op) {
  if (a.graph == nullptr || a.graph != b.graph) {
    throw ContractError(std::string(op) + ": operands must live on the same graph");
  }
}

template <typename T>
void require_same_shape(Var<T> a, Var<T> b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

template <typename T>
void accumulate(std::span<T> dst, std::span<const T> src) {
  if (dst.empty()) return;
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

struct ConvGeometry {
  std::size_t batch, channels, height, width, kernel, stride, pad, out_h, out_w;
  std::size_t col_rows() const { return channels * kernel * kernel; }
  std::size_t col_cols() const { return batch * out_h * out_w; }
};

// cols[(c, ky, kx), (n, oy, ox)] = image[n, c, oy*s - p + ky, ox*s - p + kx]
template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* cols) {
  const std::size_t ncols = g.col_cols();
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        T* row = cols + ((c * g.kernel + ky) * g.kernel + kx) * ncols;
        for (std::size_t n = 0; n < g.batch; ++n) {
          const T* src = image + (n * g.channels + c) * g.height * g.width;
          T* dst = row + n * plane;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const long long iy = static_cast<long long>(oy * g.stride + ky) -
                                 static_cast<long long>(g.pad);
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const long long ix = static_cast<long long>(ox * g.stride + kx) -
                                   static_cast<long long>(g.pad);
              const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long long>(g.height) &&
                                  ix < static_cast<long long>(g.width);
              dst[oy * g.out_w + ox] =
                  inside ? src[static_cast<std::size_t>(iy) * g.width + static_cast<std::size_t>(ix)]
                         : T{0};
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: image += scatter(cols).
template <typename T>
void col2im(const T* cols, const ConvGeometry& g, T* image) {
  const std::size_t ncols = g.col_cols();
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const T* row = cols + ((c * g.kernel + ky) * g.kernel + kx) * ncols;
        for (std::size_t n = 0; n < g.batch; ++n) {
          T* dst = image + (n * g.channels + c) * g.height * g.width;
          const T* src = row + n * plane;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const long long iy = static_cast<long long>(oy * g.stride + ky) -
                                 static_cast<long long>(g.pad);
            if (iy < 0 || iy >= static_cast<long long>(g.height)) continue;
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const long long ix = static_cast<long long>(ox * g.stride + kx) -
                                   static_cast<long long>(g.pad);
              if (ix < 0 || ix >= static_cast<long long>(g.width)) continue;
              dst[static_cast<std::size_t>(iy) * g.width + static_cast<std::size_t>(ix)] +=
                  src[oy * g.out_w + ox];
            }
          }
        }
      }
    }
  }
}

// [N x C x P] <-> [C x (N*P)]
template <typename T>
void batch_to_channel_major(const T* src, std::size_t n, std::size_t c, std::size_t p, T* dst) {
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      std::copy_n(src + (b * c + ch) * p, p, dst + ch * n * p + b * p);
    }
  }
}

template <typename T>
void channel_major_to_batch(const T* src, std::size_t n, std::size_t c, std::size_t p, T* dst,
                            bool add) {
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* s = src + ch * n * p + b * p;
      T* d = dst + (b * c + ch) * p;
      if (add) {
        for (std::size_t i = 0; i < p; ++i) d[i] += s[i];
      } else {
        std::copy_n(s, p, d);
      }
    }
  }
}

struct ImageDims {
  std::size_t batch, channels, height, width;
  bool batched;
};

ImageDims image_dims(const Shape& s, const char* op) {
  if (s.size() == 3) return {1, s[0], s[1], s[2], false};
  if (s.size() == 4) return {s[0], s[1], s[2], s[3], true};
  throw ShapeError(std::string(op) + ": expected [C x H x W] or [N x C x H x W], got " +
                   shape_to_string(s));
}

Shape image_shape(const ImageDims& d, std::size_t c, std::size_t h, std::size_t w) {
  if (d.batched) return {d.batch, c, h, w};
  return {c, h, w};
}

template <typename T>
bool has_bias(Var<T> bias) {
  return bias.graph != nullptr;
}

}  // namespace

// ---- ops ---------------------------------------------------------------

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  require_same_graph(a, b, "matmul");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(sa) + " and " +
                     shape_to_string(sb));
  }
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  std::vector<T> out(m * n);
  detail::gemm(false, false, m, n, k, a.value().data(), b.value().data(), out.data(), false);
  const int ia = a.id, ib = b.id;
  return a.graph->record("matmul", {m, n}, std::move(out), {ia, ib},
                         [ia, ib, m, n, k](BasicGraph<T>& g, int self) {
                           const T* dc = g.node(self).grad.data();
                           auto ga = g.input_grad(ia);
                           auto gb = g.input_grad(ib);
                           if (!ga.empty()) {
                             detail::gemm(false, true, m, k, n, dc, g.node(ib).value.data(),
                                          ga.data(), true);
                           }
                           if (!gb.empty()) {
                             detail::gemm(true, false, k, n, m, g.node(ia).value.data(), dc,
                                          gb.data(), true);
                           }
                         });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_graph(a, b, "add");
  require_same_shape(a, b, "add");
  auto va = a.value();
  auto vb = b.value();
  std::vector<T> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
  const int ia = a.id, ib = b.id;
  return a.graph->record("add", a.shape(), std::move(out), {ia, ib},
                         [ia, ib](BasicGraph<T>& g, int self) {
                           std::span<const T> d = g.node(self).grad;
                           accumulate(g.input_grad(ia), d);
                           accumulate(g.input_grad(ib), d);
                         });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_same_graph(a, b, "sub");
  require_same_shape(a, b, "sub");
  auto va = a.value();
  auto vb = b.value();
  std::vector<T> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] - vb[i];
  const int ia = a.id, ib = b.id;
  return a.graph->record("sub", a.shape(), std::move(out), {ia, ib},
                         [ia, ib](BasicGraph<T>& g, int self) {
                           std::span<const T> d = g.node(self).grad;
                           accumulate(g.input_grad(ia), d);
                           auto gb = g.input_grad(ib);
                           for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= d[i];
                         });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_graph(a, b, "mul");
  require_same_shape(a, b, "mul");
  auto va = a.value();
  auto vb = b.value();
  std::vector<T> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
  const int ia = a.id, ib = b.id;
  return a.graph->record("mul", a.shape(), std::move(out), {ia, ib},
                         [ia, ib](BasicGraph<T>& g, int self) {
                           const auto& d = g.node(self).grad;
                           auto ga = g.input_grad(ia);
                           auto gb = g.input_grad(ib);
                           const auto& xa = g.node(ia).value;
                           const auto& xb = g.node(ib).value;
                           for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += d[i] * xb[i];
                           for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += d[i] * xa[i];
                         });
}

template <typename T>
Var<T> affine(Var<T> x, T alpha, T beta) {
  auto vx = x.value();
  std::vector<T> out(vx.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * vx[i] + beta;
  const int ix = x.id;
  return x.graph->record("affine", x.shape(), std::move(out), {ix},
                         [ix, alpha](BasicGraph<T>& g, int self) {
                           const auto& d = g.node(self).grad;
                           auto gx = g.input_grad(ix);
                           for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += alpha * d[i];
                         });
}

template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias) {
  require_same_graph(x, bias, "add_bias");
  const Shape& sx = x.shape();
  const std::size_t n = bias.numel();
  if (bias.shape().size() != 1 || sx.empty() || sx.size() > 2 || sx.back() != n) {
    throw ShapeError("add_bias: expected x [B x n] and bias [n], got " + shape_to_string(sx) +
                     " and " + shape_to_string(bias.shape()));
  }
  const std::size_t rows = x.numel() / n;
  auto vx = x.value();
  auto vb = bias.value();
  std::vector<T> out(vx.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = vx[r * n + j] + vb[j];
  }
  const int ix = x.id, ib = bias.id;
  return x.graph->record("add_bias", sx, std::move(out), {ix, ib},
                         [ix, ib, rows, n](BasicGraph<T>& g, int self) {
                           const auto& d = g.node(self).grad;
                           accumulate(g.input_grad(ix), std::span<const T>(d));
                           auto gb = g.input_grad(ib);
                           if (gb.empty()) return;
                           for (std::size_t r = 0; r < rows; ++r) {
                             for (std::size_t j = 0; j < n; ++j) gb[j] += d[r * n + j];
                           }
                         });
}

template <typename T>
Var<T> activation(Var<T> x, Activation kind) {
  auto vx = x.value();
  std::vector<T> out(vx.size());
  const T slope = T(0.2);
  const char* name = "activation";
  switch (kind) {
    case Activation::kLeakyRelu:
      name = "leaky_relu";
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = vx[i] > T{0} ? vx[i] : slope * vx[i];
      break;
    case Activation::kRelu:
      name = "relu";
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = vx[i] > T{0} ? vx[i] : T{0};
      break;
    case Activation::kTanh:
      name = "tanh";
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(vx[i]);
      break;
    case Activation::kSigmoid:
      name = "sigmoid";
      for (std::size_t i = 0; i < out.size(); ++i) {
        // Split by sign so exp never overflows.
        if (vx[i] >= T{0}) {
          out[i] = T{1} / (T{1} + std::exp(-vx[i]));
        } else {
          const T e = std::exp(vx[i]);
          out[i] = e / (T{1} + e);
        }
      }
      break;
  }
  const int ix = x.id;
  return x.graph->record(name, x.shape(), std::move(out), {ix},
                         [ix, kind, slope](BasicGraph<T>& g, int self) {
                           const auto& node = g.node(self);
                           const auto& d = node.grad;
                           const auto& y = node.value;
                           const auto& in = g.node(ix).value;
                           auto gx = g.input_grad(ix);
                           for (std::size_t i = 0; i < gx.size(); ++i) {
                             T local;
                             switch (kind) {
                               case Activation::kLeakyRelu:
                                 local = in[i] > T{0} ? T{1} : slope;
                                 break;
                               case Activation::kRelu:
                                 local = in[i] > T{0} ? T{1} : T{0};
                                 break;
                               case Activation::kTanh:
                                 local = T{1} - y[i] * y[i];
                                 break;
                               default:
                                 local = y[i] * (T{1} - y[i]);
                                 break;
                             }
                             gx[i] += d[i] * local;
                           }
                         });
}

template <typename T>
Var<T> clamp(Var<T> x, T lo, T hi) {
  auto vx = x.value();
  std::vector<T> out(vx.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(vx[i], lo, hi);
  const int ix = x.id;
  return x.graph->record("clamp", x.shape(), std::move(out), {ix},
                         [ix, lo, hi](BasicGraph<T>& g, int self) {
                           const auto& d = g.node(self).grad;
                           const auto& in = g.node(ix).value;
                           auto gx = g.input_grad(ix);
                           for (std::size_t i = 0; i < gx.size(); ++i) {
                             if (in[i] >= lo && in[i] <= hi) gx[i] += d[i];
                           }
                         });
}

template <typename T>
Var<T> log(Var<T> x) {
  auto vx = x.value();
  std::vector<T> out(vx.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(vx[i]);
  const int ix = x.id;
  return x.graph->record("log", x.shape(), std::move(out), {ix}, [ix](BasicGraph<T>& g, int self) {
    const auto& d = g.node(self).grad;
    const auto& in = g.node(ix).value;
    auto gx = g.input_grad(ix);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += d[i] / in[i];
  });
}

template <typename T>
Var<T> sum(Var<T> x) {
  T total{0};
  for (T v : x.value()) total += v;
  const int ix = x.id;
  return x.graph->record("sum", {1}, {total}, {ix}, [ix](BasicGraph<T>& g, int self) {
    const T d = g.node(self).grad[0];
    auto gx = g.input_grad(ix);
    for (auto& v : gx) v += d;
  });
}

template <typename T>
Var<T> mean(Var<T> x) {
  const T n = static_cast<T>(x.numel());
  return affine(sum(x), T{1} / n, T{0});
}

template <typename T>
Var<T> dot(Var<T> a, Var<T> b) {
  return sum(mul(a, b));
}

template <typename T>
Var<T> reshape(Var<T> x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_to_string(x.shape()) + " as " +
                     shape_to_string(shape));
  }
  std::vector<T> out(x.value().begin(), x.value().end());
  const int ix = x.id;
  return x.graph->record("reshape", std::move(shape), std::move(out), {ix},
                         [ix](BasicGraph<T>& g, int self) {
                           accumulate(g.input_grad(ix), std::span<const T>(g.node(self).grad));
                         });
}

template <typename T>
Var<T> concat_axis1(Var<T> a, Var<T> b) {
  require_same_graph(a, b, "concat_axis1");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  bool ok = sa.size() >= 2 && sa.size() == sb.size() && sa[0] == sb[0];
  for (std::size_t i = 2; ok && i < sa.size(); ++i) ok = sa[i] == sb[i];
  if (!ok) {
    throw ShapeError("concat_axis1: incompatible shapes " + shape_to_string(sa) + " and " +
                     shape_to_string(sb));
  }
  const std::size_t batch = sa[0];
  const std::size_t block_a = a.numel() / batch;
  const std::size_t block_b = b.numel() / batch;
  Shape out_shape = sa;
  out_shape[1] = sa[1] + sb[1];
  std::vector<T> out(a.numel() + b.numel());
  auto va = a.value();
  auto vb = b.value();
  for (std::size_t n = 0; n < batch; ++n) {
    std::copy_n(va.data() + n * block_a, block_a, out.data() + n * (block_a + block_b));
    std::copy_n(vb.data() + n * block_b, block_b, out.data() + n * (block_a + block_b) + block_a);
  }
  const int ia = a.id, ib = b.id;
  return a.graph->record("concat_axis1", std::move(out_shape), std::move(out), {ia, ib},
                         [ia, ib, batch, block_a, block_b](BasicGraph<T>& g, int self) {
                           const auto& d = g.node(self).grad;
                           auto ga = g.input_grad(ia);
                           auto gb = g.input_grad(ib);
                           const std::size_t stride = block_a + block_b;
                           for (std::size_t n = 0; n < batch; ++n) {
                             for (std::size_t i = 0; i < ga.size() / batch; ++i) {
                               ga[n * block_a + i] += d[n * stride + i];
                             }
                             for (std::size_t i = 0; i < gb.size() / batch; ++i) {
                               gb[n * block_b + i] += d[n * stride + block_a + i];
                             }
                           }
                         });
}

template <typename T>
Var<T> slice_cols(Var<T> x, std::size_t start, std::size_t len) {
  const Shape& s = x.shape();
  if (s.size() != 2 || len == 0 || start + len > s[1]) {
    throw ShapeError("slice_cols: columns [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") out of range for " + shape_to_string(s));
  }
  const std::size_t rows = s[0], cols = s[1];
  auto vx = x.value();
  std::vector<T> out(rows * len);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(vx.data() + r * cols + start, len, out.data() + r * len);
  }
  const int ix = x.id;
  return x.graph->record("slice_cols", {rows, len}, std::move(out), {ix},
                         [ix, rows, cols, start, len](BasicGraph<T>& g, int self) {
                           const auto& d = g.node(self).grad;
                           auto gx = g.input_grad(ix);
                           if (gx.empty()) return;
                           for (std::size_t r = 0; r < rows; ++r) {
                             for (std::size_t j = 0; j < len; ++j) {
                               gx[r * cols + start + j] += d[r * len + j];
                             }
                           }
                         });
}

template <typename T>
Var<T> replicate_spatial(Var<T> x, std::size_t h, std::size_t w) {
  const Shape& s = x.shape();
  if (s.size() != 2 || h == 0 || w == 0) {
    throw ShapeError("replicate_spatial: expected [B x C], got " + shape_to_string(s));
  }
  const std::size_t batch = s[0], channels = s[1], plane = h * w;
  auto vx = x.value();
  std::vector<T> out(batch * channels * plane);
  for (std::size_t i = 0; i < batch * channels; ++i) {
    std::fill_n(out.data() + i * plane, plane, vx[i]);
  }
  const int ix = x.id;
  return x.graph->record("replicate_spatial", {batch, channels, h, w}, std::move(out), {ix},
                         [ix, plane](BasicGraph<T>& g, int self) {
                           const auto& d = g.node(self).grad;
                           auto gx = g.input_grad(ix);
                           for (std::size_t i = 0; i < gx.size(); ++i) {
                             T acc{0};
                             for (std::size_t p = 0; p < plane; ++p) acc += d[i * plane + p];
                             gx[i] += acc;
                           }
                         });
}

template <typename T>
Var<T> embedding(Var<T> table, std::span<const int> ids) {
  const Shape& s = table.shape();
  if (s.size() != 2) throw ShapeError("embedding: table must be [V x E], got " + shape_to_string(s));
  const std::size_t vocab = s[0], dim = s[1];
  if (ids.empty()) throw ShapeError("embedding: empty id list");
  std::vector<int> idx(ids.begin(), ids.end());
  for (int id : idx) {
    if (id >= static_cast<int>(vocab)) {
      throw std::out_of_range("embedding: token id " + std::to_string(id) +
                              " out of range for vocabulary of " + std::to_string(vocab));
    }
  }
  auto vt = table.value();
  std::vector<T> out(idx.size() * dim, T{0});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0) continue;
    std::copy_n(vt.data() + static_cast<std::size_t>(idx[r]) * dim, dim, out.data() + r * dim);
  }
  const int it = table.id;
  const std::size_t rows = idx.size();
  return table.graph->record("embedding", {rows, dim}, std::move(out), {it},
                             [it, idx = std::move(idx), dim](BasicGraph<T>& g, int self) {
                               const auto& d = g.node(self).grad;
                               auto gt = g.input_grad(it);
                               if (gt.empty()) return;
                               for (std::size_t r = 0; r < idx.size(); ++r) {
                                 if (idx[r] < 0) continue;
                                 T* dst = gt.data() + static_cast<std::size_t>(idx[r]) * dim;
                                 for (std::size_t j = 0; j < dim; ++j) dst[j] += d[r * dim + j];
                               }
                             });
}

template <typename T>
Var<T> cross_entropy_logits(Var<T> logits, std::span<const int> targets) {
  const Shape& s = logits.shape();
  std::size_t rows = 0, vocab = 0;
  if (s.size() == 1) {
    rows = 1;
    vocab = s[0];
  } else if (s.size() == 2) {
    rows = s[0];
    vocab = s[1];
  } else {
    throw ShapeError("cross_entropy_logits: expected [V] or [B x V], got " + shape_to_string(s));
  }
  if (targets.size() != rows) {
    throw ShapeError("cross_entropy_logits: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(rows) + " rows");
  }
  std::vector<int> tgt(targets.begin(), targets.end());
  for (int t : tgt) {
    if (t >= static_cast<int>(vocab)) {
      throw std::out_of_range("cross_entropy_logits: target " + std::to_string(t) +
                              " out of range for " + std::to_string(vocab) + " classes");
    }
  }
  auto x = logits.value();
  T total{0};
  for (std::size_t r = 0; r < rows; ++r) {
    if (tgt[r] < 0) continue;
    const T* row = x.data() + r * vocab;
    const T m = *std::max_element(row, row + vocab);
    T acc{0};
    for (std::size_t j = 0; j < vocab; ++j) acc += std::exp(row[j] - m);
    total += m + std::log(acc) - row[tgt[r]];
  }
  const int il = logits.id;
  return logits.graph->record(
      "cross_entropy_logits", {1}, {total}, {il},
      [il, rows, vocab, tgt = std::move(tgt)](BasicGraph<T>& g, int self) {
        const T d = g.node(self).grad[0];
        auto gl = g.input_grad(il);
        if (gl.empty()) return;
        const auto& x = g.node(il).value;
        for (std::size_t r = 0; r < rows; ++r) {
          if (tgt[r] < 0) continue;
          const T* row = x.data() + r * vocab;
          const T m = *std::max_element(row, row + vocab);
          T acc{0};
          for (std::size_t j = 0; j < vocab; ++j) acc += std::exp(row[j] - m);
          for (std::size_t j = 0; j < vocab; ++j) {
            const T p = std::exp(row[j] - m) / acc;
            gl[r * vocab + j] += d * (p - (static_cast<int>(j) == tgt[r] ? T{1} : T{0}));
          }
        }
      });
}

template <typename T>
Var<T> cross_entropy_logits(Var<T> logits, int target) {
  if (target < 0) throw std::out_of_range("cross_entropy_logits: negative target");
  const int t[1] = {target};
  return cross_entropy_logits(logits, std::span<const int>(t, 1));
}

template <typename T>
Var<T> conv2d(Var<T> input, Var<T> kernel, Var<T> bias, std::size_t stride, std::size_t pad) {
  require_same_graph(input, kernel, "conv2d");
  const ImageDims in = image_dims(input.shape(), "conv2d");
  const Shape& ks = kernel.shape();
  if (ks.size() != 4 || ks[1] != in.channels || ks[2] != ks[3]) {
    throw ShapeError("conv2d: kernel " + shape_to_string(ks) + " incompatible with input " +
                     shape_to_string(input.shape()));
  }
  const std::size_t c_out = ks[0], k = ks[2];
  if (has_bias(bias)) {
    require_same_graph(input, bias, "conv2d");
    if (bias.shape() != Shape{c_out}) {
      throw ShapeError("conv2d: bias must be [" + std::to_string(c_out) + "], got " +
                       shape_to_string(bias.shape()));
    }
  }
  const std::size_t oh = conv_output_size(in.height, k, stride, pad);
  const std::size_t ow = conv_output_size(in.width, k, stride, pad);
  const ConvGeometry geo{in.batch, in.channels, in.height, in.width, k, stride, pad, oh, ow};
  const std::size_t plane = oh * ow;

  std::vector<T> cols(geo.col_rows() * geo.col_cols());
  im2col(input.value().data(), geo, cols.data());
  std::vector<T> out_cm(c_out * geo.col_cols());
  detail::gemm(false, false, c_out, geo.col_cols(), geo.col_rows(), kernel.value().data(),
               cols.data(), out_cm.data(), false);
  std::vector<T> out(in.batch * c_out * plane);
  channel_major_to_batch(out_cm.data(), in.batch, c_out, plane, out.data(), false);
  if (has_bias(bias)) {
    auto vb = bias.value();
    for (std::size_t n = 0; n < in.batch; ++n) {
      for (std::size_t c = 0; c < c_out; ++c) {
        T* p = out.data() + (n * c_out + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] += vb[c];
      }
    }
  }
  const int ii = input.id, ik = kernel.id, ib = has_bias(bias) ? bias.id : -1;
  std::vector<int> inputs{ii, ik};
  if (ib >= 0) inputs.push_back(ib);
  return input.graph->record(
      "conv2d", image_shape(in, c_out, oh, ow), std::move(out), std::move(inputs),
      [ii, ik, ib, geo, c_out, plane](BasicGraph<T>& g, int self) {
        const auto& d = g.node(self).grad;
        std::vector<T> d_cm(c_out * geo.col_cols());
        batch_to_channel_major(d.data(), geo.batch, c_out, plane, d_cm.data());
        if (ib >= 0) {
          auto gb = g.input_grad(ib);
          for (std::size_t c = 0; c < gb.size(); ++c) {
            T acc{0};
            for (std::size_t j = 0; j < geo.col_cols(); ++j) acc += d_cm[c * geo.col_cols() + j];
            gb[c] += acc;
          }
        }
        auto gk = g.input_grad(ik);
        if (!gk.empty()) {
          std::vector<T> cols(geo.col_rows() * geo.col_cols());
          im2col(g.node(ii).value.data(), geo, cols.data());
          detail::gemm(false, true, c_out, geo.col_rows(), geo.col_cols(), d_cm.data(),
                       cols.data(), gk.data(), true);
        }
        auto gi = g.input_grad(ii);
        if (!gi.empty()) {
          std::vector<T> dcols(geo.col_rows() * geo.col_cols());
          detail::gemm(true, false, geo.col_rows(), geo.col_cols(), c_out,
                       g.node(ik).value.data(), d_cm.data(), dcols.data(), false);
          col2im(dcols.data(), geo, gi.data());
        }
      });
}

template <typename T>
Var<T> conv2d_transpose(Var<T> input, Var<T> kernel, Var<T> bias, std::size_t stride,
                        std::size_t pad) {
  require_same_graph(input, kernel, "conv2d_transpose");
  const ImageDims in = image_dims(input.shape(), "conv2d_transpose");
  const Shape& ks = kernel.shape();
  if (ks.size() != 4 || ks[0] != in.channels || ks[2] != ks[3]) {
    throw ShapeError("conv2d_transpose: kernel " + shape_to_string(ks) +
                     " incompatible with input " + shape_to_string(input.shape()));
  }
  const std::size_t c_out = ks[1], k = ks[2];
  if (has_bias(bias)) {
    require_same_graph(input, bias, "conv2d_transpose");
    if (bias.shape() != Shape{c_out}) {
      throw ShapeError("conv2d_transpose: bias must be [" + std::to_string(c_out) + "], got " +
                       shape_to_string(bias.shape()));
    }
  }
  const std::size_t oh = conv_transpose_output_size(in.height, k, stride, pad);
  const std::size_t ow = conv_transpose_output_size(in.width, k, stride, pad);
  // The equivalent forward conv maps the [c_out x oh x ow] output back onto the input grid.
  const ConvGeometry geo{in.batch, c_out, oh, ow, k, stride, pad, in.height, in.width};
  if (conv_output_size(oh, k, stride, pad) != in.height ||
      conv_output_size(ow, k, stride, pad) != in.width) {
    throw ShapeError("conv2d_transpose: geometry is not invertible");
  }
  const std::size_t in_plane = in.height * in.width;
  const std::size_t out_plane = oh * ow;

  std::vector<T> x_cm(in.channels * geo.col_cols());
  batch_to_channel_major(input.value().data(), in.batch, in.channels, in_plane, x_cm.data());
  std::vector<T> cols(geo.col_rows() * geo.col_cols());
  detail::gemm(true, false, geo.col_rows(), geo.col_cols(), in.channels, kernel.value().data(),
               x_cm.data(), cols.data(), false);
  std::vector<T> out(in.batch * c_out * out_plane, T{0});
  col2im(cols.data(), geo, out.data());
  if (has_bias(bias)) {
    auto vb = bias.value();
    for (std::size_t n = 0; n < in.batch; ++n) {
      for (std::size_t c = 0; c < c_out; ++c) {
        T* p = out.data() + (n * c_out + c) * out_plane;
        for (std::size_t i = 0; i < out_plane; ++i) p[i] += vb[c];
      }
    }
  }
  const int ii = input.id, ik = kernel.id, ib = has_bias(bias) ? bias.id : -1;
  std::vector<int> inputs{ii, ik};
  if (ib >= 0) inputs.push_back(ib);
  const std::size_t c_in = in.channels;
  return input.graph->record(
      "conv2d_transpose", image_shape(in, c_out, oh, ow), std::move(out), std::move(inputs),
      [ii, ik, ib, geo, c_in, c_out, in_plane, out_plane](BasicGraph<T>& g, int self) {
        const auto& d = g.node(self).grad;
        if (ib >= 0) {
          auto gb = g.input_grad(ib);
          for (std::size_t c = 0; c < gb.size(); ++c) {
            T acc{0};
            for (std::size_t n = 0; n < geo.batch; ++n) {
              const T* p = d.data() + (n * c_out + c) * out_plane;
              for (std::size_t i = 0; i < out_plane; ++i) acc += p[i];
            }
            gb[c] += acc;
          }
        }
        auto gk = g.input_grad(ik);
        auto gi = g.input_grad(ii);
        if (gk.empty() && gi.empty()) return;
        std::vector<T> dcols(geo.col_rows() * geo.col_cols());
        im2col(d.data(), geo, dcols.data());
        if (!gk.empty()) {
          std::vector<T> x_cm(c_in * geo.col_cols());
          batch_to_channel_major(g.node(ii).value.data(), geo.batch, c_in, in_plane, x_cm.data());
          detail::gemm(false, true, c_in, geo.col_rows(), geo.col_cols(), x_cm.data(),
                       dcols.data(), gk.data(), true);
        }
        if (!gi.empty()) {
          std::vector<T> dx_cm(c_in * geo.col_cols());
          detail::gemm(false, false, c_in, geo.col_cols(), geo.col_rows(),
                       g.node(ik).value.data(), dcols.data(), dx_cm.data(), false);
          channel_major_to_batch(dx_cm.data(), geo.batch, c_in, in_plane, gi.data(), true);
        }
      });
}

// ---- instantiation -----------------------------------------------------

#define PAIRFORGE_INSTANTIATE(T)                                                              \
  template struct Var<T>;                                                                     \
  template class BasicGraph<T>;                                                               \
  template Var<T> matmul(Var<T>, Var<T>);                                                     \
  template Var<T> add(Var<T>, Var<T>);                                                        \
  template Var<T> sub(Var<T>, Var<T>);                                                        \
  template Var<T> mul(Var<T>, Var<T>);                                                        \
  template Var<T> affine(Var<T>, T, T);                                                       \
  template Var<T> add_bias(Var<T>, Var<T>);                                                   \
  template Var<T> activation(Var<T>, Activation);                                             \
  template Var<T> clamp(Var<T>, T, T);                                                        \
  template Var<T> log(Var<T>);                                                                \
  template Var<T> sum(Var<T>);                                                                \
  template Var<T> mean(Var<T>);                                                               \
  template Var<T> dot(Var<T>, Var<T>);                                                        \
  template Var<T> reshape(Var<T>, Shape);                                                     \
  template Var<T> concat_axis1(Var<T>, Var<T>);                                               \
  template Var<T> slice_cols(Var<T>, std::size_t, std::size_t);                               \
  template Var<T> replicate_spatial(Var<T>, std::size_t, std::size_t);                        \
  template Var<T> embedding(Var<T>, std::span<const int>);                                    \
  template Var<T> cross_entropy_logits(Var<T>, std::span<const int>);                         \
  template Var<T> cross_entropy_logits(Var<T>, int);                                          \
  template Var<T> conv2d(Var<T>, Var<T>, Var<T>, std::size_t, std::size_t);                   \
  template Var<T> conv2d_transpose(Var<T>, Var<T>, Var<T>, std::size_t, std::size_t);

PAIRFORGE_INSTANTIATE(float)
PAIRFORGE_INSTANTIATE(double)

#undef PAIRFORGE_INSTANTIATE

}  // namespace pairforge
