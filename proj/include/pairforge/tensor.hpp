// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pairforge {

using Shape = std::vector<std::size_t>;

/// Thrown when operand shapes are incompatible with an operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a forward pass produces NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a caller violates a documented precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Thrown for invalid or inconsistent configuration (bad K, single-class corpus, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a required upstream artifact (checkpoint, model) is missing.
class DependencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

std::string shape_to_string(const Shape& shape);

/// Dense row-major tensor. Parameters carry their own gradient buffer; the
/// autodiff graph accumulates into it on backward.
template <typename T>
struct BasicTensor {
  Shape shape;
  std::vector<T> data;
  bool requires_grad = false;
  std::vector<T> grad;

  BasicTensor() = default;
  explicit BasicTensor(Shape s, bool trainable = false)
      : shape(std::move(s)), data(shape_numel(shape), T{0}), requires_grad(trainable) {
    validate_shape();
  }
  BasicTensor(Shape s, std::vector<T> values, bool trainable = false)
      : shape(std::move(s)), data(std::move(values)), requires_grad(trainable) {
    validate_shape();
    if (data.size() != shape_numel(shape)) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_to_string(shape));
    }
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  void zero_grad() {
    if (requires_grad) grad.assign(data.size(), T{0});
    else grad.clear();
  }

  template <typename U>
  BasicTensor<U> cast() const {
    BasicTensor<U> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    out.requires_grad = requires_grad;
    out.grad.assign(grad.begin(), grad.end());
    return out;
  }

 private:
  void validate_shape() const {
    for (auto d : shape) {
      if (d == 0) throw ShapeError("tensor dimensions must be positive: " + shape_to_string(shape));
    }
  }
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

/// A named, ordered view over a model's trainable tensors.
template <typename T>
using NamedParams = std::vector<std::pair<std::string, BasicTensor<T>*>>;

}  // namespace pairforge
