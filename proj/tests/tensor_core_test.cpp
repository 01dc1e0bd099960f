// Copyright 2026 The slim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "slim/batchnorm.hpp"
#include "slim/conv.hpp"
#include "slim/gradcheck.hpp"
#include "slim/layers.hpp"
#include "slim/parallel.hpp"
#include "slim/sgd.hpp"

namespace slim {
namespace {

// Six nested loops, written independently of the library kernels.
Tensord conv_oracle(const Tensord& x, const Tensord& w, const Vector<double>& b, Index stride, Index pad) {
  const Index n_batch = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const Index cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const Index oh = (h + 2 * pad - kh) / stride + 1, ow = (wd + 2 * pad - kw) / stride + 1;
  Tensord y({n_batch, cout, oh, ow});
  for (Index n = 0; n < n_batch; ++n)
    for (Index o = 0; o < cout; ++o)
      for (Index i = 0; i < oh; ++i)
        for (Index j = 0; j < ow; ++j) {
          double acc = 0.0;
          for (Index c = 0; c < cin; ++c)
            for (Index p = 0; p < kh; ++p)
              for (Index q = 0; q < kw; ++q) {
                const Index r = i * stride - pad + p, s = j * stride - pad + q;
                if (r >= 0 && r < h && s >= 0 && s < wd) acc += x(n, c, r, s) * w(o, c, p, q);
              }
          y(n, o, i, j) = acc + b[o];
        }
  return y;
}

ConvParams<double> random_conv(std::mt19937_64& rng, Index out, Index in, Index k, Index stride, Index pad) {
  ConvParams<double> p;
  p.weight = Tensord::random_normal({out, in, k, k}, rng);
  p.bias = Tensord::random_normal({out}, rng).array();
  p.stride = stride;
  p.padding = pad;
  return p;
}

// ------------------------------------------------------------------ conv

TEST(Conv2dForward, SingleMultiplyAccumulate) {
  ConvParams<float> p{Tensorf::constant({1, 1, 1, 1}, 3.0f), Vector<float>::Constant(1, 0.5f), 1, 0};
  const Tensorf y = conv2d_forward(Tensorf::constant({1, 1, 1, 1}, 2.0f), p);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_FLOAT_EQ(y[0], 6.5f);
}

TEST(Conv2dForward, CenterDeltaKernelIsIdentity) {
  std::mt19937_64 rng(3);
  const Tensorf x = Tensorf::random_normal({2, 1, 5, 6}, rng);
  ConvParams<float> p{Tensorf({1, 1, 3, 3}), Vector<float>::Zero(1), 1, 1};
  p.weight(0, 0, 1, 1) = 1.0f;
  for (auto algo : {ConvAlgorithm::kDirect, ConvAlgorithm::kIm2col}) {
    EXPECT_EQ(conv2d_forward(x, p, algo), x);
  }
}

TEST(Conv2dForward, MatchesNestedLoopOracleBitForBit) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const Tensord x = Tensord::random_normal({1, 2, 4, 4}, rng);
    const auto p = random_conv(rng, 3, 2, 3, 1, 1);
    const Tensord expected = conv_oracle(x, p.weight, p.bias, 1, 1);
    EXPECT_EQ(conv2d_forward(x, p), expected) << "seed " << seed;
  }
  // Other geometries: stride 2, no padding, rectangular input.
  std::mt19937_64 rng(99);
  const Tensord x = Tensord::random_normal({2, 3, 7, 9}, rng);
  const auto p = random_conv(rng, 4, 3, 3, 2, 0);
  EXPECT_EQ(conv2d_forward(x, p), conv_oracle(x, p.weight, p.bias, 2, 0));
}

TEST(Conv2dForward, Im2colAgreesWithDirectInFloat) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const Tensorf x = Tensorf::random_normal({2, 4, 9, 9}, rng);
    const auto pd = random_conv(rng, 6, 4, 3, 1, 1);
    const ConvParams<float> p{pd.weight.cast<float>(), pd.bias.cast<float>(), 1, 1};
    const Tensorf a = conv2d_forward(x, p, ConvAlgorithm::kDirect);
    const Tensorf b = conv2d_forward(x, p, ConvAlgorithm::kIm2col);
    const float rel = (a.array() - b.array()).abs().maxCoeff() / a.array().abs().maxCoeff();
    EXPECT_LT(rel, 1e-4f);
  }
}

TEST(Conv2dForward, RejectsBadShapes) {
  std::mt19937_64 rng(1);
  auto p = random_conv(rng, 2, 3, 3, 2, 0);
  EXPECT_THROW(conv2d_forward(Tensord({1, 2, 5, 5}), p), ShapeError);  // channel mismatch
  EXPECT_THROW(conv2d_forward(Tensord({1, 3, 6, 6}), p), ShapeError);  // (6-3)/2 not integral
  EXPECT_NO_THROW(conv2d_forward(Tensord({1, 3, 7, 7}), p));
  EXPECT_THROW(conv_output_extent(2, 3, 1, 0), ShapeError);
}

TEST(Conv2dBackward, ZeroGradOutGivesZeroGradients) {
  std::mt19937_64 rng(5);
  const Tensord x = Tensord::random_normal({2, 2, 4, 4}, rng);
  const auto p = random_conv(rng, 3, 2, 3, 1, 1);
  const auto g = conv2d_backward(x, p, Tensord({2, 3, 4, 4}));
  EXPECT_TRUE((g.input.array() == 0).all());
  EXPECT_TRUE((g.weight.array() == 0).all());
  EXPECT_TRUE((g.bias == 0).all());
}

TEST(Conv2dBackward, ScalarChainRule) {
  ConvParams<double> p{Tensord::constant({1, 1, 1, 1}, 3.0), Vector<double>::Constant(1, 0.5), 1, 0};
  const auto g = conv2d_backward(Tensord::constant({1, 1, 1, 1}, 2.0), p, Tensord::constant({1, 1, 1, 1}, 1.5));
  EXPECT_DOUBLE_EQ(g.weight[0], 2.0 * 1.5);
  EXPECT_DOUBLE_EQ(g.input[0], 3.0 * 1.5);
  EXPECT_DOUBLE_EQ(g.bias[0], 1.5);
}

TEST(Conv2dBackward, LinearInGradOut) {
  std::mt19937_64 rng(8);
  const Tensord x = Tensord::random_normal({1, 2, 5, 5}, rng);
  const auto p = random_conv(rng, 2, 2, 3, 1, 1);
  const Tensord a = Tensord::random_normal({1, 2, 5, 5}, rng);
  const Tensord b = Tensord::random_normal({1, 2, 5, 5}, rng);
  const Tensord sum(a.shape(), 2.0 * a.array() + b.array());
  const auto ga = conv2d_backward(x, p, a), gb = conv2d_backward(x, p, b), gs = conv2d_backward(x, p, sum);
  EXPECT_TRUE(gs.weight.array().isApprox(2.0 * ga.weight.array() + gb.weight.array(), 1e-12));
  EXPECT_TRUE(gs.input.array().isApprox(2.0 * ga.input.array() + gb.input.array(), 1e-12));
}

TEST(Conv2dBackward, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ConvUnderTest padded(seed, 1, 1);
    EXPECT_LT(gradient_check(padded).max_relative_error, 1e-5) << "seed " << seed;
    ConvUnderTest strided(seed, 2, 0);
    EXPECT_LT(gradient_check(strided).max_relative_error, 1e-5) << "seed " << seed;
  }
}

TEST(Conv2dBackward, IndependentOfThreadCount) {
  std::mt19937_64 rng(11);
  const Tensord x = Tensord::random_normal({5, 3, 6, 6}, rng);
  const auto p = random_conv(rng, 4, 3, 3, 1, 1);
  const Tensord dy = Tensord::random_normal({5, 4, 6, 6}, rng);
  set_num_threads(1);
  const auto single = conv2d_backward(x, p, dy);
  const Tensord y1 = conv2d_forward(x, p, ConvAlgorithm::kIm2col);
  set_num_threads(3);
  const auto multi = conv2d_backward(x, p, dy);
  const Tensord y3 = conv2d_forward(x, p, ConvAlgorithm::kIm2col);
  set_num_threads(1);
  EXPECT_EQ(single.weight, multi.weight);
  EXPECT_EQ(single.input, multi.input);
  EXPECT_TRUE((single.bias == multi.bias).all());
  EXPECT_EQ(y1, y3);
}

// ------------------------------------------------------------------ batchnorm

TEST(BatchNormForward, IdentityNormalization) {
  // Per channel: values {-1, 1} over the batch, so mean 0 and variance 1.
  Tensord x({2, 2, 1, 1});
  x(0, 0, 0, 0) = -1;
  x(1, 0, 0, 0) = 1;
  x(0, 1, 0, 0) = 1;
  x(1, 1, 0, 0) = -1;
  auto bn = BNParams<double>::identity(2);
  bn.stabilizer = 1e-12;
  const auto out = batchnorm_forward(x, bn, Mode::kTrain).output;
  EXPECT_TRUE(out.array().isApprox(x.array(), 1e-9));
}

TEST(BatchNormForward, EvalDirectSubstitution) {
  auto bn = BNParams<double>::identity(1);
  bn.running_mean[0] = 1.0;
  bn.running_var[0] = 4.0;
  bn.stabilizer = 0.0;
  const auto out = batchnorm_forward(Tensord::constant({1, 1, 1, 1}, 3.0), bn, Mode::kEval).output;
  EXPECT_DOUBLE_EQ(out[0], 1.0);
  EXPECT_DOUBLE_EQ(bn.running_mean[0], 1.0);  // eval leaves running stats alone
}

TEST(BatchNormForward, TrainModeHandEvaluation) {
  Tensord x({3, 1, 1, 1});
  x[0] = 2;
  x[1] = 4;
  x[2] = 6;
  auto bn = BNParams<double>::identity(1);
  bn.scale[0] = 2.0;
  bn.shift[0] = 1.0;
  const double var = 8.0 / 3.0, tau = bn.stabilizer;
  const auto out = batchnorm_forward(x, bn, Mode::kTrain).output;
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(out[i], 2.0 * (x[i] - 4.0) / std::sqrt(var + tau) + 1.0, 1e-12);
  }
  // Running statistics move 10% toward the batch statistics.
  EXPECT_NEAR(bn.running_mean[0], 0.1 * 4.0, 1e-12);
  EXPECT_NEAR(bn.running_var[0], 0.9 + 0.1 * var, 1e-12);
}

TEST(BatchNormForward, OutputMomentsProperty) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const Tensord x = Tensord::random_normal({4, 3, 5, 5}, rng, 3.0);
    auto bn = BNParams<double>::identity(3);
    bn.scale = Tensord::random_normal({3}, rng).array();
    bn.shift = Tensord::random_normal({3}, rng).array();
    bn.stabilizer = 1e-2;
    const Tensord y = batchnorm_forward(x, bn, Mode::kTrain).output;
    for (Index c = 0; c < 3; ++c) {
      double sx = 0, sxx = 0, sy = 0, syy = 0;
      const double m = 4 * 25;
      for (Index n = 0; n < 4; ++n)
        for (Index i = 0; i < 25; ++i) {
          const double a = x[(n * 3 + c) * 25 + i], b = y[(n * 3 + c) * 25 + i];
          sx += a, sxx += a * a, sy += b, syy += b * b;
        }
      const double var_x = sxx / m - (sx / m) * (sx / m);
      const double var_y = syy / m - (sy / m) * (sy / m);
      EXPECT_NEAR(sy / m, bn.shift[c], 1e-6);
      EXPECT_NEAR(var_y, bn.scale[c] * bn.scale[c] * var_x / (var_x + 1e-2), 1e-6);
    }
  }
}

TEST(BatchNormForward, Errors) {
  auto bn = BNParams<double>::identity(2);
  EXPECT_THROW(batchnorm_forward(Tensord({2, 3, 2, 2}), bn, Mode::kTrain), ShapeError);
  EXPECT_THROW(batchnorm_forward(Tensord({1, 2, 1, 1}), bn, Mode::kTrain), ArgumentError);
  EXPECT_NO_THROW(batchnorm_forward(Tensord({1, 2, 1, 1}), bn, Mode::kEval));
}

TEST(BatchNormBackward, L1SignRule) {
  std::mt19937_64 rng(4);
  auto bn = BNParams<double>::identity(3);
  bn.scale << -0.5, 0.0, 0.25;
  const Tensord x = Tensord::random_normal({2, 3, 2, 2}, rng);
  const auto fwd = batchnorm_forward(x, bn, Mode::kTrain);
  const auto g = batchnorm_backward(fwd.cache, Tensord(x.shape()), 0.1);
  EXPECT_DOUBLE_EQ(g.scale[0], -0.1);
  EXPECT_DOUBLE_EQ(g.scale[1], 0.0);
  EXPECT_DOUBLE_EQ(g.scale[2], 0.1);
}

TEST(BatchNormBackward, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    BatchNormUnderTest plain(seed, 0.0);
    EXPECT_LT(gradient_check(plain).max_relative_error, 1e-5) << "seed " << seed;
  }
}

TEST(BatchNormBackward, MatchesFiniteDifferencesWithPenalty) {
  // |scale| is smooth away from zero, and the random scales are nonzero.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    BatchNormUnderTest penalized(seed, 0.05);
    EXPECT_LT(gradient_check(penalized).max_relative_error, 1e-5) << "seed " << seed;
  }
}

TEST(BatchNormBackward, RejectsEvalCacheAndShapeMismatch) {
  EXPECT_THROW(batchnorm_backward(BatchNormCache<double>{}, Tensord({1, 1, 1, 1}), 0.0), ArgumentError);
  auto bn = BNParams<double>::identity(1);
  const auto fwd = batchnorm_forward(Tensord::constant({2, 1, 1, 2}, 1.0), bn, Mode::kTrain);
  EXPECT_THROW(batchnorm_backward(fwd.cache, Tensord({2, 1, 2, 1}), 0.0), ShapeError);
}

// ------------------------------------------------------------------ relu, pools, linear, loss

TEST(Relu, Definition) {
  Tensorf x({3});
  x.array() << -1, 0, 2;
  EXPECT_TRUE((relu_forward(x).array() == Vector<float>{{0, 0, 2}}).all());
  std::mt19937_64 rng(2);
  const Tensorf pos(Shape{10}, Tensorf::random_uniform({10}, rng, 0.1f, 5.0f).array());
  EXPECT_EQ(relu_forward(pos), pos);
}

TEST(Relu, Idempotent) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const Tensord x = Tensord::random_normal({2, 3, 4, 4}, rng);
    EXPECT_EQ(relu_forward(relu_forward(x)), relu_forward(x));
  }
}

TEST(Relu, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ReluUnderTest layer(seed);
    EXPECT_LT(gradient_check(layer).max_relative_error, 1e-5);
  }
}

TEST(MaxPool, ForwardPicksWindowMaximum) {
  Tensorf x({1, 1, 2, 4});
  x.array() << 1, 5, 2, 0, 3, 4, 8, 7;
  const auto fwd = maxpool_forward(x, 2);
  ASSERT_EQ(fwd.output.shape(), (Shape{1, 1, 1, 2}));
  EXPECT_EQ(fwd.output[0], 5.0f);
  EXPECT_EQ(fwd.output[1], 8.0f);
}

TEST(MaxPool, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    MaxPoolUnderTest layer(seed);
    EXPECT_LT(gradient_check(layer).max_relative_error, 1e-5);
  }
}

TEST(GlobalAvgPool, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GlobalAvgPoolUnderTest layer(seed);
    EXPECT_LT(gradient_check(layer).max_relative_error, 1e-5);
  }
}

TEST(Linear, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    LinearUnderTest layer(seed);
    EXPECT_LT(gradient_check(layer).max_relative_error, 1e-6);
  }
}

TEST(SoftmaxCrossEntropy, GradientIsSoftmaxMinusOneHot) {
  Tensord logits({1, 3});
  logits.array() << 1.0, 2.0, 0.5;
  const int label = 1;
  const auto r = softmax_cross_entropy(logits, std::span<const int>(&label, 1));
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(0.5);
  EXPECT_NEAR(r.gradient[0], std::exp(1.0) / z, 1e-15);
  EXPECT_NEAR(r.gradient[1], std::exp(2.0) / z - 1.0, 1e-15);
  EXPECT_NEAR(r.gradient[2], std::exp(0.5) / z, 1e-15);
  EXPECT_NEAR(r.loss, -std::log(std::exp(2.0) / z), 1e-12);
}

TEST(SoftmaxCrossEntropy, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SoftmaxCrossEntropyUnderTest layer(seed);
    EXPECT_LT(gradient_check(layer).max_relative_error, 1e-5);
  }
}

TEST(GradientCheck, ReportsAnalyticMistakes) {
  struct Wrong {
    Vector<double> x = Vector<double>::Constant(3, 2.0);
    double loss() const { return x.square().sum(); }
    std::vector<std::span<double>> parameters() { return {{x.data(), 3}}; }
    std::vector<Vector<double>> analytic_gradients() const { return {x}; }  // missing factor 2
  } wrong;
  EXPECT_NEAR(gradient_check(wrong).max_relative_error, 0.5, 1e-6);
}

TEST(OpsStayFinite, RandomInputs) {
  std::mt19937_64 rng(17);
  const Tensorf x = Tensorf::random_normal({2, 3, 6, 6}, rng, 10.0f);
  const ConvParams<float> p{Tensorf::random_normal({4, 3, 3, 3}, rng), Vector<float>::Zero(4), 1, 1};
  auto bn = BNParams<float>::identity(4);
  const Tensorf y = relu_forward(batchnorm_forward(conv2d_forward(x, p), bn, Mode::kTrain).output);
  EXPECT_TRUE(y.all_finite());
  EXPECT_TRUE(conv2d_backward(x, p, y).input.all_finite());
}

// ------------------------------------------------------------------ sgd

TEST(Sgd, PlainStep) {
  Vector<double> p{{1.0}}, g{{2.0}}, v{{0.0}};
  sgd_step<double>(p, g, v, 0.1, 0.0);
  EXPECT_DOUBLE_EQ(p[0], 0.8);
  const Vector<double> before = p;
  sgd_step<double>(p, Vector<double>::Zero(1), v, 0.1, 0.0);
  EXPECT_DOUBLE_EQ(p[0], before[0]);
}

TEST(Sgd, MomentumTwoSteps) {
  Vector<double> p{{0.0}}, g{{1.0}}, v{{0.0}};
  sgd_step<double>(p, g, v, 0.1, 0.9);
  sgd_step<double>(p, g, v, 0.1, 0.9);
  EXPECT_NEAR(p[0], -0.29, 1e-15);
}

TEST(Sgd, Errors) {
  Vector<double> p{{0.0}}, g{{1.0, 2.0}}, v{{0.0}};
  EXPECT_THROW(sgd_step<double>(p, g, v, 0.1, 0.0), ShapeError);
  Vector<double> g1{{1.0}};
  EXPECT_THROW(sgd_step<double>(p, g1, v, 0.0, 0.0), ArgumentError);
  EXPECT_THROW(sgd_step<double>(p, g1, v, 0.1, 1.0), ArgumentError);
}

}  // namespace
}  // namespace slim
