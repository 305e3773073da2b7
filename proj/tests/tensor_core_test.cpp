// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "pairforge/autograd.hpp"
#include "pairforge/grad_check.hpp"
#include "pairforge/optim.hpp"
#include "pairforge/rng.hpp"

using namespace pairforge;

namespace {

template <typename T>
BasicTensor<T> random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  BasicTensor<T> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(-scale, scale));
  return t;
}

// Direct nested-loop cross-correlation over a single image.
std::vector<double> conv_oracle(const TensorD& x, const TensorD& w, std::size_t stride,
                                std::size_t pad) {
  const std::size_t ci = x.shape[0], h = x.shape[1], wd = x.shape[2];
  const std::size_t co = w.shape[0], k = w.shape[2];
  const std::size_t oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
  std::vector<double> out(co * oh * ow, 0.0);
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        for (std::size_t c = 0; c < ci; ++c)
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
              const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd))
                continue;
              out[(o * oh + oy) * ow + ox] +=
                  w.data[((o * ci + c) * k + ky) * k + kx] *
                  x.data[(c * h + static_cast<std::size_t>(iy)) * wd + static_cast<std::size_t>(ix)];
            }
  return out;
}

}  // namespace

TEST(Matmul, IdentityAndBasisSelection) {
  Graph g;
  auto eye = g.constant({2, 2}, {1, 0, 0, 1});
  auto m = g.constant({2, 2}, {1, 2, 3, 4});
  auto r = matmul(eye, m);
  EXPECT_EQ(std::vector<float>(r.value().begin(), r.value().end()), (std::vector<float>{1, 2, 3, 4}));

  auto row = g.constant({1, 2}, {1, 0});
  auto col = g.constant({2, 1}, {5, 7});
  auto s = matmul(row, col);
  EXPECT_EQ(s.shape(), (Shape{1, 1}));
  EXPECT_EQ(s.item(), 5.0f);
}

TEST(Matmul, MatchesTripleLoop) {
  Rng rng(11);
  auto a = random_tensor<float>({3, 4}, rng);
  auto b = random_tensor<float>({4, 2}, rng);
  Graph g;
  auto c = matmul(g.constant(a), g.constant(b));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = 0;
      for (std::size_t k = 0; k < 4; ++k) acc += double(a.data[i * 4 + k]) * b.data[k * 2 + j];
      EXPECT_NEAR(c.value()[i * 2 + j], acc, 1e-6);
    }
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
  Graph g;
  auto a = g.constant(Tensor({2, 3}));
  auto b = g.constant(Tensor({4, 2}));
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos);
    EXPECT_NE(msg.find("[4x2]"), std::string::npos);
  }
}

TEST(Matmul, BitIdenticalAcrossThreadCounts) {
  Rng rng(5);
  auto a = random_tensor<float>({96, 160}, rng);
  auto b = random_tensor<float>({160, 128}, rng);
  set_num_threads(1);
  Graph g1;
  auto c1 = matmul(g1.constant(a), g1.constant(b));
  set_num_threads(4);
  Graph g4;
  auto c4 = matmul(g4.constant(a), g4.constant(b));
  set_num_threads(1);
  ASSERT_EQ(c1.numel(), c4.numel());
  for (std::size_t i = 0; i < c1.numel(); ++i) ASSERT_EQ(c1.value()[i], c4.value()[i]);
}

TEST(Conv2d, IdentityKernelAndSum) {
  Graph g;
  Rng rng(3);
  auto x = random_tensor<float>({1, 5, 5}, rng);
  auto y = conv2d(g.constant(x), g.constant({1, 1, 1, 1}, {1.0f}), Var<float>{}, 1, 0);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.value()[i], x.data[i]);

  auto s = conv2d(g.constant({1, 2, 2}, {1, 2, 3, 4}), g.constant({1, 1, 2, 2}, {1, 1, 1, 1}),
                  Var<float>{}, 1, 0);
  EXPECT_EQ(s.shape(), (Shape{1, 1, 1}));
  EXPECT_EQ(s.value()[0], 10.0f);
}

TEST(Conv2d, MatchesNestedLoopOracle) {
  Rng rng(17);
  auto x = random_tensor<double>({2, 8, 8}, rng);
  auto w = random_tensor<double>({4, 2, 3, 3}, rng);
  GraphD g;
  auto y = conv2d(g.constant(x), g.constant(w), Var<double>{}, 2, 1);
  ASSERT_EQ(y.shape(), (Shape{4, 4, 4}));
  const auto expected = conv_oracle(x, w, 2, 1);
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(y.value()[i], expected[i], 1e-5);
}

TEST(Conv2d, BatchedEqualsPerImage) {
  Rng rng(23);
  auto x = random_tensor<float>({3, 2, 6, 6}, rng);
  auto w = random_tensor<float>({4, 2, 4, 4}, rng);
  Graph g;
  auto y = conv2d(g.constant(x), g.constant(w), Var<float>{}, 2, 1);
  for (std::size_t n = 0; n < 3; ++n) {
    Tensor xi({2, 6, 6});
    std::copy_n(x.data.begin() + n * 72, 72, xi.data.begin());
    auto yi = conv2d(g.constant(xi), g.constant(w), Var<float>{}, 2, 1);
    for (std::size_t i = 0; i < yi.numel(); ++i) EXPECT_EQ(yi.value()[i], y.value()[n * yi.numel() + i]);
  }
}

TEST(Conv2d, NonIntegerOutputIsShapeError) {
  Graph g;
  auto x = g.constant(Tensor({1, 5, 5}));
  auto w = g.constant(Tensor({1, 1, 7, 7}));
  EXPECT_THROW(conv2d(x, w, Var<float>{}, 1, 0), ShapeError);
  EXPECT_THROW(conv2d_transpose(g.constant(Tensor({1, 1, 1})), g.constant(Tensor({1, 1, 1, 1})),
                                Var<float>{}, 1, 1),
               ShapeError);
}

TEST(Conv2dTranspose, UnitKernelAndBroadcast) {
  Graph g;
  Rng rng(2);
  auto x = random_tensor<float>({1, 4, 4}, rng);
  auto y = conv2d_transpose(g.constant(x), g.constant({1, 1, 1, 1}, {1.0f}), Var<float>{}, 1, 0);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.value()[i], x.data[i]);

  auto b = conv2d_transpose(g.constant({1, 1, 1}, {3.0f}), g.constant({1, 1, 2, 2}, {1, 1, 1, 1}),
                            Var<float>{}, 2, 0);
  EXPECT_EQ(b.shape(), (Shape{1, 2, 2}));
  for (float v : b.value()) EXPECT_EQ(v, 3.0f);
}

TEST(Conv2dTranspose, EqualsConvInputGradient) {
  Rng rng(29);
  auto x = random_tensor<double>({2, 3, 8, 8}, rng);
  auto w = random_tensor<double>({5, 3, 4, 4}, rng);
  GraphD probe;
  const Shape out_shape = conv2d(probe.constant(x), probe.constant(w), Var<double>{}, 2, 1).shape();
  auto upstream = random_tensor<double>(out_shape, rng);

  // Oracle: d<conv(x), u>/dx via autodiff of conv2d.
  TensorD xp = x;
  xp.requires_grad = true;
  GraphD g;
  auto y = conv2d(g.parameter(xp), g.constant(w), Var<double>{}, 2, 1);
  g.backward(dot(y, g.constant(upstream)));

  GraphD h;
  auto t = conv2d_transpose(h.constant(upstream), h.constant(w), Var<double>{}, 2, 1);
  ASSERT_EQ(t.shape(), x.shape);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(t.value()[i], xp.grad[i], 1e-5);
}

TEST(Conv2dTranspose, AdjointIdentityProperty) {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t stride = 1 + trial % 2;
    auto x = random_tensor<double>({2, 8, 8}, rng);
    auto w = random_tensor<double>({3, 2, 4, 4}, rng);
    GraphD g;
    auto cx = conv2d(g.constant(x), g.constant(w), Var<double>{}, stride, 1);
    auto y = random_tensor<double>(cx.shape(), rng);
    auto ty = conv2d_transpose(g.constant(y), g.constant(w), Var<double>{}, stride, 1);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < y.numel(); ++i) lhs += cx.value()[i] * y.data[i];
    for (std::size_t i = 0; i < x.numel(); ++i) rhs += x.data[i] * ty.value()[i];
    EXPECT_LT(std::abs(lhs - rhs), 1e-4 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(Activation, ReferenceValuesAndRanges) {
  Graph g;
  auto z = g.constant({1}, {0.0f});
  EXPECT_FLOAT_EQ(activation(z, Activation::kSigmoid).item(), 0.5f);
  EXPECT_FLOAT_EQ(activation(z, Activation::kTanh).item(), 0.0f);
  EXPECT_FLOAT_EQ(activation(g.constant({1}, {-1.0f}), Activation::kLeakyRelu).item(), -0.2f);
  EXPECT_FLOAT_EQ(activation(g.constant({1}, {-1.0f}), Activation::kRelu).item(), 0.0f);

  auto wide = g.constant({4}, {-30.0f, -3.0f, 3.0f, 30.0f});
  for (float v : activation(wide, Activation::kSigmoid).value()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  for (float v : activation(g.constant({2}, {-3.0f, 3.0f}), Activation::kTanh).value()) {
    EXPECT_GT(v, -1.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(CrossEntropy, ReferenceValues) {
  Graph g;
  auto uniform = g.constant(Tensor({30}));
  EXPECT_NEAR(cross_entropy_logits(uniform, 7).item(), std::log(30.0), 1e-5);

  GraphD gd;
  auto peaked = gd.constant({3}, {10.0, 0.0, 0.0});
  EXPECT_NEAR(cross_entropy_logits(peaked, 0).item(), std::log1p(2.0 * std::exp(-10.0)), 1e-12);
  EXPECT_NEAR(cross_entropy_logits(peaked, 0).item(), 9.08e-5, 1e-7);
  EXPECT_THROW(cross_entropy_logits(peaked, 3), std::out_of_range);
  EXPECT_THROW(cross_entropy_logits(peaked, -1), std::out_of_range);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  Rng rng(41);
  auto logits = random_tensor<double>({12}, rng, 3.0);
  const double err = grad_check(
      [](GraphD&, Var<double> x) { return cross_entropy_logits(x, 5); }, logits, 1e-6);
  EXPECT_LT(err, 1e-4);
}

TEST(Backward, SumAndQuadratic) {
  Tensor x({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  Graph g;
  g.backward(sum(g.parameter(x)));
  for (float v : x.grad) EXPECT_EQ(v, 1.0f);

  Tensor y({2}, {1, 2}, true);
  Graph h;
  auto vy = h.parameter(y);
  h.backward(dot(vy, vy));
  EXPECT_EQ(y.grad, (std::vector<float>{2, 4}));
}

TEST(Backward, NonScalarLossAndEmptyGraphAreContractViolations) {
  Tensor x({2}, {1, 2}, true);
  Graph g;
  auto v = g.parameter(x);
  EXPECT_THROW(g.backward(v), ContractError);
  Graph empty;
  EXPECT_THROW(empty.backward(Var<float>{&empty, 0}), ContractError);
}

TEST(Backward, TwiceAccumulatesDouble) {
  Rng rng(8);
  Tensor w = random_tensor<float>({3, 2}, rng);
  w.requires_grad = true;
  Graph g;
  auto x = g.constant(random_tensor<float>({4, 3}, rng));
  auto loss = sum(activation(matmul(x, g.parameter(w)), Activation::kTanh));
  g.backward(loss);
  const auto once = w.grad;
  g.backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(w.grad[i], 2.0f * once[i]);
}

TEST(Backward, UnusedParameterGradientIsZero) {
  Tensor used({2}, {1, 2}, true);
  Tensor unused({3}, {1, 2, 3}, true);
  unused.zero_grad();
  Graph g;
  auto u = g.parameter(used);
  g.parameter(unused);
  g.backward(sum(u));
  for (float v : unused.grad) EXPECT_EQ(v, 0.0f);
}

TEST(Backward, CompositeGraphMatchesFiniteDifferences) {
  Rng rng(99);
  auto img = random_tensor<double>({2, 6, 6}, rng);
  auto kernel = random_tensor<double>({3, 2, 3, 3}, rng, 0.5);
  auto bias = random_tensor<double>({3}, rng, 0.1);
  auto dense = random_tensor<double>({27, 5}, rng, 0.3);
  std::vector<TensorD*> params{&kernel, &bias, &dense};
  const double err = grad_check_params(
      [&](GraphD& g) {
        auto c = conv2d(g.constant(img), g.parameter(kernel), g.parameter(bias), 2, 1);
        auto a = activation(c, Activation::kLeakyRelu);
        auto logits = matmul(reshape(a, {1, 27}), g.parameter(dense));
        return cross_entropy_logits(reshape(logits, {5}), 2);
      },
      params, 1e-6, 0, rng);
  EXPECT_LT(err, 1e-4);
}

TEST(Forward, NonFiniteOutputRaises) {
  Graph g;
  EXPECT_THROW(log(g.constant({1}, {-1.0f})), NumericError);
  EXPECT_THROW(log(g.constant({1}, {0.0f})), NumericError);
  EXPECT_THROW(g.constant({1}, {std::nanf("")}), NumericError);
}

TEST(GradCheck, HarnessSelfTests) {
  Rng rng(4);
  auto p = random_tensor<double>({6}, rng);
  EXPECT_LT(grad_check([](GraphD&, Var<double> x) { return sum(x); }, p), 1e-10);

  auto w = random_tensor<double>({6}, rng);
  const double smooth = grad_check(
      [&](GraphD& g, Var<double> x) {
        return activation(dot(x, g.constant(w)), Activation::kSigmoid);
      },
      p);
  EXPECT_LT(smooth, 1e-6);

  // Square op with a deliberately wrong backward rule (3x instead of 2x).
  const double broken = grad_check(
      [](GraphD& g, Var<double> x) {
        std::vector<double> out;
        for (double v : x.value()) out.push_back(v * v);
        const int in = x.id;
        auto sq = g.record("bad_square", x.shape(), out, {in}, [in](GraphD& gg, int self) {
          auto gx = gg.input_grad(in);
          const auto& xv = gg.node(in).value;
          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gg.node(self).grad[i] * 3.0 * xv[i];
        });
        return sum(sq);
      },
      p);
  EXPECT_GT(broken, 1e-2);
}

TEST(GradCheck, EveryOpAtRandomPoints) {
  Rng rng(1234);
  auto check = [&](const char* name, Shape shape, const ScalarFn& f) {
    for (int i = 0; i < 10; ++i) {
      auto p = random_tensor<double>(shape, rng);
      EXPECT_LT(grad_check(f, p, 1e-6), 1e-4) << name << " trial " << i;
    }
  };
  auto w = random_tensor<double>({4, 3}, rng);
  auto u = random_tensor<double>({3, 4}, rng);
  auto k4 = random_tensor<double>({3, 2, 4, 4}, rng);
  auto kt = random_tensor<double>({2, 3, 4, 4}, rng);
  auto b3 = random_tensor<double>({3}, rng);
  auto w33 = random_tensor<double>({3, 3}, rng);
  auto x23 = random_tensor<double>({2, 3}, rng);
  auto w7 = random_tensor<double>({7}, rng);
  auto x22 = random_tensor<double>({2, 2}, rng);
  auto w2322 = random_tensor<double>({2, 3, 2, 2}, rng);
  auto w54 = random_tensor<double>({5, 4}, rng);
  auto img266 = random_tensor<double>({2, 6, 6}, rng);
  auto img2233 = random_tensor<double>({2, 2, 3, 3}, rng);
  const std::vector<int> ids{2, 0, 2, -1, 1};
  const std::vector<int> targets{1, -1, 3};

  check("matmul", {3, 4}, [&](GraphD& g, Var<double> x) { return sum(matmul(x, g.constant(w))); });
  check("matmul_rhs", {4, 3}, [&](GraphD& g, Var<double> x) {
    return dot(matmul(g.constant(u), x), g.constant(w33));
  });
  check("add_sub_mul", {3, 4}, [&](GraphD& g, Var<double> x) {
    auto c = g.constant(u);
    return sum(mul(sub(add(x, c), c), x));
  });
  check("affine", {5}, [](GraphD&, Var<double> x) { return dot(affine(x, -1.5, 0.25), x); });
  check("add_bias", {3}, [&](GraphD& g, Var<double> b) {
    auto x = g.constant(x23);
    return dot(add_bias(x, b), add_bias(x, b));
  });
  for (auto kind : {Activation::kLeakyRelu, Activation::kRelu, Activation::kTanh,
                    Activation::kSigmoid}) {
    check("activation", {7}, [&](GraphD& g, Var<double> x) {
      return dot(activation(x, kind), g.constant(w7));
    });
  }
  check("clamp_log", {5}, [](GraphD&, Var<double> x) {
    return sum(log(clamp(affine(x, 0.4, 0.5), 1e-7, 1.0 - 1e-7)));
  });
  check("mean", {6}, [](GraphD&, Var<double> x) { return mean(mul(x, x)); });
  check("reshape_concat", {2, 3}, [&](GraphD& g, Var<double> x) {
    auto c = concat_axis1(x, g.constant(x22));
    auto r = reshape(c, {10});
    return dot(r, r);
  });
  check("slice_cols", {3, 8}, [](GraphD&, Var<double> x) {
    auto s = slice_cols(x, 2, 4);
    return dot(s, s);
  });
  check("replicate_spatial", {2, 3}, [&](GraphD& g, Var<double> x) {
    return dot(replicate_spatial(x, 2, 2), g.constant(w2322));
  });
  check("embedding", {3, 4}, [&](GraphD& g, Var<double> t) {
    return dot(embedding(t, std::span<const int>(ids)),
               g.constant(w54));
  });
  check("cross_entropy_batch", {3, 5}, [&](GraphD&, Var<double> x) {
    return cross_entropy_logits(x, std::span<const int>(targets));
  });
  check("conv2d", {2, 2, 6, 6}, [&](GraphD& g, Var<double> x) {
    auto y = conv2d(x, g.constant(k4), g.constant(b3), 2, 1);
    return dot(y, y);
  });
  check("conv2d_kernel", {3, 2, 4, 4}, [&](GraphD& g, Var<double> k) {
    auto y = conv2d(g.constant(img266), k, Var<double>{}, 2, 1);
    return dot(y, y);
  });
  check("conv2d_transpose", {2, 3, 3}, [&](GraphD& g, Var<double> x) {
    auto y = conv2d_transpose(x, g.constant(kt), g.constant(b3), 2, 1);
    return dot(y, y);
  });
  check("conv2d_transpose_kernel", {2, 3, 4, 4}, [&](GraphD& g, Var<double> k) {
    auto y = conv2d_transpose(g.constant(img2233), k,
                              Var<double>{}, 2, 1);
    return dot(y, y);
  });
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Tensor p({3}, {1, -2, 3}, true);
  p.zero_grad();
  AdamState state;
  std::vector<Tensor*> params{&p};
  adam_step<float>(params, state);
  EXPECT_EQ(p.data, (std::vector<float>{1, -2, 3}));
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor p({2}, {0.5f, 0.5f}, true);
  p.grad = {0.3f, -7.0f};
  AdamState state;
  state.config.learning_rate = 0.01;
  std::vector<Tensor*> params{&p};
  adam_step<float>(params, state);
  EXPECT_NEAR(p.data[0], 0.5f - 0.01f, 1e-6);
  EXPECT_NEAR(p.data[1], 0.5f + 0.01f, 1e-6);
}

TEST(Adam, QuadraticDescentMatchesScalarRecurrence) {
  // Scalar oracle: the same recurrence written out in f64.
  double x = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 100; ++t) {
    const double g = 2.0 * x;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
  }
  ASSERT_LT(std::abs(x), 0.1);

  TensorD p({1}, {1.0}, true);
  BasicAdamState<double> state;
  state.config.learning_rate = 0.1;
  std::vector<TensorD*> params{&p};
  for (int t = 0; t < 100; ++t) {
    p.zero_grad();
    GraphD g;
    auto vp = g.parameter(p);
    g.backward(dot(vp, vp));
    adam_step<double>(params, state);
  }
  EXPECT_LT(std::abs(p.data[0]), 0.1);
  EXPECT_NEAR(p.data[0], x, 1e-12);
}

TEST(Adam, ShapeMismatchRejected) {
  Tensor p({2}, true);
  AdamState state;
  std::vector<Tensor*> params{&p};
  adam_step<float>(params, state);
  Tensor q({3}, true);
  std::vector<Tensor*> other{&q};
  EXPECT_THROW(adam_step<float>(other, state), ShapeError);
}
