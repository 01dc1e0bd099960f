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

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "slim/batchnorm.hpp"
#include "slim/conv.hpp"
#include "slim/layers.hpp"
#include "slim/tensor.hpp"

namespace slim {

/// |a - n| / max(|a|, |n|, 1e-8).
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

/// A layer wired to a scalar loss. `parameters()` exposes every perturbable
/// array (input included) and `analytic_gradients()` returns the matching
/// backward-pass gradients at the current values.
template <typename L>
concept GradientCheckable = requires(L& layer) {
  { layer.loss() } -> std::convertible_to<double>;
  { layer.parameters() } -> std::same_as<std::vector<std::span<double>>>;
  { layer.analytic_gradients() } -> std::same_as<std::vector<Vector<double>>>;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_array = 0;
  Index worst_index = 0;
  Index checked = 0;

  bool passed(double tolerance) const { return max_relative_error < tolerance; }
};

/// Compares backward-pass gradients with central differences of step `step`
/// over every entry of every parameter array.
template <GradientCheckable L>
GradientCheckResult gradient_check(L& layer, double step = 1e-5) {
  const std::vector<Vector<double>> analytic = layer.analytic_gradients();
  std::vector<std::span<double>> params = layer.parameters();
  if (analytic.size() != params.size()) throw ShapeError("gradient check: gradient/parameter count mismatch");
  GradientCheckResult result;
  for (std::size_t a = 0; a < params.size(); ++a) {
    if (static_cast<Index>(params[a].size()) != analytic[a].size()) {
      throw ShapeError("gradient check: gradient shape differs from parameter shape");
    }
    for (std::size_t i = 0; i < params[a].size(); ++i) {
      const double saved = params[a][i];
      params[a][i] = saved + step;
      const double plus = layer.loss();
      params[a][i] = saved - step;
      const double minus = layer.loss();
      params[a][i] = saved;
      const double err = relative_error(analytic[a][static_cast<Index>(i)], (plus - minus) / (2.0 * step));
      ++result.checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_array = a;
        result.worst_index = static_cast<Index>(i);
      }
    }
  }
  return result;
}

// Ready-made harnesses: random input and parameters from a seed, loss =
// sum(projection * output) with a fixed random projection.

namespace detail {
inline std::span<double> span_of(Tensord& t) { return t.span(); }
inline std::span<double> span_of(Vector<double>& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
inline double project(const Tensord& y, const Tensord& r) { return (y.array() * r.array()).sum(); }
}  // namespace detail

class ConvUnderTest {
 public:
  ConvUnderTest(std::uint64_t seed, Index stride = 1, Index padding = 1) {
    std::mt19937_64 rng(seed);
    input_ = Tensord::random_normal({2, 3, 5, 5}, rng);
    params_.weight = Tensord::random_normal({4, 3, 3, 3}, rng, 0.5);
    params_.bias = Tensord::random_normal({4}, rng).array();
    params_.stride = stride;
    params_.padding = padding;
    projection_ = Tensord::random_normal(conv2d_forward(input_, params_).shape(), rng);
  }
  double loss() const { return detail::project(conv2d_forward(input_, params_), projection_); }
  std::vector<std::span<double>> parameters() {
    return {detail::span_of(input_), detail::span_of(params_.weight), detail::span_of(params_.bias)};
  }
  std::vector<Vector<double>> analytic_gradients() const {
    auto g = conv2d_backward(input_, params_, projection_);
    return {g.input.array(), g.weight.array(), g.bias};
  }

 private:
  Tensord input_;
  ConvParams<double> params_;
  Tensord projection_;
};

class BatchNormUnderTest {
 public:
  explicit BatchNormUnderTest(std::uint64_t seed, double l1_coeff = 0.0) : l1_(l1_coeff) {
    std::mt19937_64 rng(seed);
    input_ = Tensord::random_normal({3, 2, 3, 3}, rng, 2.0);
    params_ = BNParams<double>::identity(2);
    params_.scale = Tensord::random_normal({2}, rng).array();
    params_.shift = Tensord::random_normal({2}, rng).array();
    projection_ = Tensord::random_normal(input_.shape(), rng);
  }
  double loss() const {
    BNParams<double> bn = params_;
    const double task = detail::project(batchnorm_forward(input_, bn, Mode::kTrain).output, projection_);
    return task + l1_ * params_.scale.abs().sum();
  }
  std::vector<std::span<double>> parameters() {
    return {detail::span_of(input_), detail::span_of(params_.scale), detail::span_of(params_.shift)};
  }
  std::vector<Vector<double>> analytic_gradients() const {
    BNParams<double> bn = params_;
    auto fwd = batchnorm_forward(input_, bn, Mode::kTrain);
    auto g = batchnorm_backward(fwd.cache, projection_, l1_);
    return {g.input.array(), g.scale, g.shift};
  }

 private:
  double l1_;
  Tensord input_;
  BNParams<double> params_;
  Tensord projection_;
};

class ReluUnderTest {
 public:
  explicit ReluUnderTest(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    input_ = Tensord::random_normal({2, 3, 4, 4}, rng);
    // Keep inputs away from the kink so central differences are valid.
    input_.array() = input_.array().unaryExpr([](double x) { return x >= 0 ? x + 0.1 : x - 0.1; });
    projection_ = Tensord::random_normal(input_.shape(), rng);
  }
  double loss() const { return detail::project(relu_forward(input_), projection_); }
  std::vector<std::span<double>> parameters() { return {detail::span_of(input_)}; }
  std::vector<Vector<double>> analytic_gradients() const {
    return {relu_backward(input_, projection_).array()};
  }

 private:
  Tensord input_;
  Tensord projection_;
};

class MaxPoolUnderTest {
 public:
  explicit MaxPoolUnderTest(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    input_ = Tensord::random_normal({2, 2, 4, 4}, rng);
    projection_ = Tensord::random_normal({2, 2, 2, 2}, rng);
  }
  double loss() const { return detail::project(maxpool_forward(input_, 2).output, projection_); }
  std::vector<std::span<double>> parameters() { return {detail::span_of(input_)}; }
  std::vector<Vector<double>> analytic_gradients() const {
    auto fwd = maxpool_forward(input_, 2);
    return {maxpool_backward<double>(input_.shape(), fwd.argmax, projection_).array()};
  }

 private:
  Tensord input_;
  Tensord projection_;
};

class GlobalAvgPoolUnderTest {
 public:
  explicit GlobalAvgPoolUnderTest(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    input_ = Tensord::random_normal({2, 3, 3, 4}, rng);
    projection_ = Tensord::random_normal({2, 3}, rng);
  }
  double loss() const { return detail::project(global_avg_pool_forward(input_), projection_); }
  std::vector<std::span<double>> parameters() { return {detail::span_of(input_)}; }
  std::vector<Vector<double>> analytic_gradients() const {
    return {global_avg_pool_backward(input_.shape(), projection_).array()};
  }

 private:
  Tensord input_;
  Tensord projection_;
};

class LinearUnderTest {
 public:
  explicit LinearUnderTest(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    input_ = Tensord::random_normal({3, 5}, rng);
    params_.weight = Tensord::random_normal({4, 5}, rng);
    params_.bias = Tensord::random_normal({4}, rng).array();
    projection_ = Tensord::random_normal({3, 4}, rng);
  }
  double loss() const { return detail::project(linear_forward(input_, params_), projection_); }
  std::vector<std::span<double>> parameters() {
    return {detail::span_of(input_), detail::span_of(params_.weight), detail::span_of(params_.bias)};
  }
  std::vector<Vector<double>> analytic_gradients() const {
    auto g = linear_backward(input_, params_, projection_);
    return {g.input.array(), g.weight.array(), g.bias};
  }

 private:
  Tensord input_;
  LinearParams<double> params_;
  Tensord projection_;
};

class SoftmaxCrossEntropyUnderTest {
 public:
  explicit SoftmaxCrossEntropyUnderTest(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    logits_ = Tensord::random_normal({4, 5}, rng, 2.0);
    std::uniform_int_distribution<int> pick(0, 4);
    for (int i = 0; i < 4; ++i) labels_.push_back(pick(rng));
  }
  double loss() const { return softmax_cross_entropy(logits_, std::span<const int>(labels_)).loss; }
  std::vector<std::span<double>> parameters() { return {detail::span_of(logits_)}; }
  std::vector<Vector<double>> analytic_gradients() const {
    return {softmax_cross_entropy(logits_, std::span<const int>(labels_)).gradient.array()};
  }

 private:
  Tensord logits_;
  std::vector<int> labels_;
};

}  // namespace slim
