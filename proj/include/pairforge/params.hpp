// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Model parameter sets are declared once as a "slots" template,
//
//   template <class S> struct FooSlots {
//     S weight, bias;
//     template <class Self, class F> static void visit(Self& self, F&& f) {
//       f("weight", self.weight);
//       f("bias", self.bias);
//     }
//   };
//
// and instantiated with S = BasicTensor<T> for storage and S = Var<T> for a
// graph binding. The helpers below walk both in the same order.

#include <cmath>
#include <string>
#include <vector>

#include "pairforge/autograd.hpp"
#include "pairforge/rng.hpp"

namespace pairforge {

template <template <class> class Slots, typename T>
Slots<Var<T>> bind_trainable(BasicGraph<T>& g, Slots<BasicTensor<T>>& params) {
  std::vector<Var<T>> vars;
  Slots<BasicTensor<T>>::visit(params, [&](const char*, BasicTensor<T>& t) {
    vars.push_back(g.parameter(t));
  });
  Slots<Var<T>> out;
  std::size_t i = 0;
  Slots<Var<T>>::visit(out, [&](const char*, Var<T>& v) { v = vars[i++]; });
  return out;
}

/// Binds copies of the parameters as constants (no gradient flows back).
template <template <class> class Slots, typename T>
Slots<Var<T>> bind_frozen(BasicGraph<T>& g, const Slots<BasicTensor<T>>& params) {
  std::vector<Var<T>> vars;
  Slots<BasicTensor<T>>::visit(params, [&](const char*, const BasicTensor<T>& t) {
    vars.push_back(g.constant(t));
  });
  Slots<Var<T>> out;
  std::size_t i = 0;
  Slots<Var<T>>::visit(out, [&](const char*, Var<T>& v) { v = vars[i++]; });
  return out;
}

template <template <class> class Slots, typename T>
std::vector<BasicTensor<T>*> param_list(Slots<BasicTensor<T>>& params) {
  std::vector<BasicTensor<T>*> out;
  Slots<BasicTensor<T>>::visit(params, [&](const char*, BasicTensor<T>& t) { out.push_back(&t); });
  return out;
}

template <template <class> class Slots, typename T>
NamedParams<T> named_params(Slots<BasicTensor<T>>& params, const std::string& prefix) {
  NamedParams<T> out;
  Slots<BasicTensor<T>>::visit(params, [&](const char* name, BasicTensor<T>& t) {
    out.emplace_back(prefix + name, &t);
  });
  return out;
}

template <typename U, template <class> class Slots, typename T>
Slots<BasicTensor<U>> cast_params(const Slots<BasicTensor<T>>& params) {
  std::vector<BasicTensor<U>> tensors;
  Slots<BasicTensor<T>>::visit(params, [&](const char*, const BasicTensor<T>& t) {
    tensors.push_back(t.template cast<U>());
  });
  Slots<BasicTensor<U>> out;
  std::size_t i = 0;
  Slots<BasicTensor<U>>::visit(out, [&](const char*, BasicTensor<U>& t) { t = std::move(tensors[i++]); });
  return out;
}

template <template <class> class Slots, typename T>
void set_trainable(Slots<BasicTensor<T>>& params, bool trainable) {
  Slots<BasicTensor<T>>::visit(params, [&](const char*, BasicTensor<T>& t) {
    t.requires_grad = trainable;
    t.zero_grad();
  });
}

template <template <class> class Slots, typename T>
bool params_equal(const Slots<BasicTensor<T>>& a, const Slots<BasicTensor<T>>& b) {
  std::vector<const BasicTensor<T>*> lhs;
  Slots<BasicTensor<T>>::visit(a, [&](const char*, const BasicTensor<T>& t) { lhs.push_back(&t); });
  bool equal = true;
  std::size_t i = 0;
  Slots<BasicTensor<T>>::visit(b, [&](const char*, const BasicTensor<T>& t) {
    equal = equal && lhs[i]->shape == t.shape && lhs[i]->data == t.data;
    ++i;
  });
  return equal;
}

template <typename T>
BasicTensor<T> normal_init(Shape shape, double stddev, Rng& rng) {
  BasicTensor<T> t(std::move(shape), true);
  for (auto& v : t.data) v = static_cast<T>(stddev * rng.normal());
  return t;
}

template <typename T>
BasicTensor<T> uniform_init(Shape shape, double bound, Rng& rng) {
  BasicTensor<T> t(std::move(shape), true);
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

template <typename T>
BasicTensor<T> zeros_init(Shape shape) {
  return BasicTensor<T>(std::move(shape), true);
}

}  // namespace pairforge
