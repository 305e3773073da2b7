// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Tape-based reverse-mode automatic differentiation over dense tensors.
//
// A BasicGraph records every forward operation in creation order, which is a
// topological order by construction. Leaves are either constants (no gradient)
// or bound parameters; backward() walks the tape in reverse and accumulates
// into each bound parameter's `grad` buffer. Calling backward() twice on the
// same graph accumulates twice.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pairforge/tensor.hpp"

namespace pairforge {

template <typename T>
class BasicGraph;

/// Handle to a node on a graph. Cheap to copy; only valid while its graph lives.
template <typename T>
struct Var {
  BasicGraph<T>* graph = nullptr;
  int id = -1;

  const Shape& shape() const;
  std::span<const T> value() const;
  std::span<const T> grad() const;
  T item() const;
  std::size_t numel() const { return value().size(); }
};

enum class Activation { kLeakyRelu, kRelu, kTanh, kSigmoid };

template <typename T>
class BasicGraph {
 public:
  using BackwardFn = std::function<void(BasicGraph&, int)>;

  struct Node {
    std::string op;
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    std::vector<int> inputs;
    BackwardFn backward;
    BasicTensor<T>* param = nullptr;
    bool needs_grad = false;
  };

  BasicGraph() = default;
  BasicGraph(const BasicGraph&) = delete;
  BasicGraph& operator=(const BasicGraph&) = delete;

  Var<T> constant(const BasicTensor<T>& t);
  Var<T> constant(Shape shape, std::vector<T> values);
  /// Binds a parameter; gradients flow into `t.grad` iff `t.requires_grad`.
  Var<T> parameter(BasicTensor<T>& t);

  /// Appends a node. `inputs` must already be on this graph.
  Var<T> record(std::string op, Shape shape, std::vector<T> value, std::vector<int> inputs,
                BackwardFn backward);

  void backward(Var<T> loss);

  std::size_t size() const { return nodes_.size(); }
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  /// Gradient buffer of an input node, or empty when it does not need one.
  std::span<T> input_grad(int id);

 private:
  std::vector<Node> nodes_;
};

using Graph = BasicGraph<float>;
using GraphD = BasicGraph<double>;

// ---- operations ---------------------------------------------------------

/// [m x k] x [k x n] -> [m x n].
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b);

/// Elementwise sum / difference / product of equal-shaped tensors.
template <typename T>
Var<T> add(Var<T> a, Var<T> b);
template <typename T>
Var<T> sub(Var<T> a, Var<T> b);
template <typename T>
Var<T> mul(Var<T> a, Var<T> b);

/// alpha * x + beta, elementwise.
template <typename T>
Var<T> affine(Var<T> x, T alpha, T beta);

/// x [B x n] + bias [n] broadcast over the leading batch axis.
template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias);

template <typename T>
Var<T> activation(Var<T> x, Activation kind);

/// Clamp into [lo, hi]; gradient is zero where clamped.
template <typename T>
Var<T> clamp(Var<T> x, T lo, T hi);

/// Natural log; input must be positive.
template <typename T>
Var<T> log(Var<T> x);

template <typename T>
Var<T> sum(Var<T> x);
template <typename T>
Var<T> mean(Var<T> x);
template <typename T>
Var<T> dot(Var<T> a, Var<T> b);

template <typename T>
Var<T> reshape(Var<T> x, Shape shape);

/// Concatenate along axis 1 (channels for [B x C x H x W], features for [B x n]).
template <typename T>
Var<T> concat_axis1(Var<T> a, Var<T> b);

/// Columns [start, start + len) of a [B x n] matrix.
template <typename T>
Var<T> slice_cols(Var<T> x, std::size_t start, std::size_t len);

/// [B x C] -> [B x C x h x w], every spatial cell a copy of the row.
template <typename T>
Var<T> replicate_spatial(Var<T> x, std::size_t h, std::size_t w);

/// Row lookup: table [V x E], ids -> [len(ids) x E]. Negative ids yield zero rows.
template <typename T>
Var<T> embedding(Var<T> table, std::span<const int> ids);

/// Summed cross entropy of logits [B x V] (or [V]) against targets; rows with
/// target < 0 are ignored. Uses max-subtraction for stability.
template <typename T>
Var<T> cross_entropy_logits(Var<T> logits, std::span<const int> targets);
template <typename T>
Var<T> cross_entropy_logits(Var<T> logits, int target);

/// Cross-correlation. input [C x H x W] or [N x C x H x W], kernel
/// [C_out x C_in x k x k], optional bias [C_out] (pass a default Var to omit).
template <typename T>
Var<T> conv2d(Var<T> input, Var<T> kernel, Var<T> bias, std::size_t stride, std::size_t pad);

/// Adjoint of conv2d w.r.t. its input. kernel [C_in x C_out x k x k].
template <typename T>
Var<T> conv2d_transpose(Var<T> input, Var<T> kernel, Var<T> bias, std::size_t stride,
                        std::size_t pad);

/// Output spatial extent of conv2d (floor); throws ShapeError when the kernel does not fit.
std::size_t conv_output_size(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad);
std::size_t conv_transpose_output_size(std::size_t in, std::size_t k, std::size_t stride,
                                       std::size_t pad);

/// Cap on worker threads for large matrix products (default 1). Results are
/// bit-identical for any value.
void set_num_threads(std::size_t n);
std::size_t num_threads();

}  // namespace pairforge
