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

#include <cmath>
#include <string>

#include "slim/tensor.hpp"

namespace slim {

enum class Mode { kTrain, kEval };

/// Per-channel batch-norm state. `scale` is the channel-importance score
/// that sparsity training drives toward zero and the pruner ranks.
template <typename Scalar>
struct BNParams {
  Vector<Scalar> scale;         // learnable, multiplies the normalized input
  Vector<Scalar> shift;         // learnable, added after scaling
  Vector<Scalar> running_mean;  // eval-time mean
  Vector<Scalar> running_var;   // eval-time variance, >= 0
  Scalar stabilizer = Scalar(1e-5);
  Scalar momentum = Scalar(0.1);  // running-stat EMA weight of the current batch

  static BNParams identity(Index channels, Scalar scale_init = Scalar(1)) {
    BNParams p;
    p.scale = Vector<Scalar>::Constant(channels, scale_init);
    p.shift = Vector<Scalar>::Zero(channels);
    p.running_mean = Vector<Scalar>::Zero(channels);
    p.running_var = Vector<Scalar>::Ones(channels);
    return p;
  }

  Index channels() const { return scale.size(); }

  void validate() const {
    const Index c = channels();
    if (c < 1) throw ShapeError("batchnorm needs at least one channel");
    if (shift.size() != c || running_mean.size() != c || running_var.size() != c) {
      throw ShapeError("batchnorm parameter vectors differ in length");
    }
    if ((running_var < Scalar(0)).any()) throw ArgumentError("batchnorm running variance must be >= 0");
    // Zero is accepted so the bare normalization formula can be exercised;
    // division by zero is caught per call.
    if (!(stabilizer >= Scalar(0))) throw ArgumentError("batchnorm stabilizer must be >= 0");
    if (!(momentum >= Scalar(0) && momentum <= Scalar(1))) throw ArgumentError("batchnorm momentum must lie in [0, 1]");
  }
};

template <typename Scalar>
struct BatchNormCache {
  Tensor<Scalar> normalized;  // (x - mean) / sqrt(var + stabilizer)
  Vector<Scalar> inv_std;
  Vector<Scalar> scale;
};

template <typename Scalar>
struct BatchNormForward {
  Tensor<Scalar> output;
  BatchNormCache<Scalar> cache;  // empty in eval mode
};

template <typename Scalar>
struct BatchNormGrads {
  Tensor<Scalar> input;
  Vector<Scalar> scale;
  Vector<Scalar> shift;
};

namespace detail {

template <typename Scalar>
void check_bn_input(const Tensor<Scalar>& input, const BNParams<Scalar>& bn) {
  bn.validate();
  require_rank(input.shape(), 4, "batchnorm input");
  if (input.dim(1) != bn.channels()) {
    throw ShapeError("batchnorm input has " + std::to_string(input.dim(1)) + " channels, parameters have " +
                     std::to_string(bn.channels()));
  }
}

/// Applies out = scale * (x - mean) * inv_std + shift channelwise.
template <typename Scalar>
Tensor<Scalar> bn_affine(const Tensor<Scalar>& input, const Vector<Scalar>& mean, const Vector<Scalar>& inv_std,
                         const Vector<Scalar>& scale, const Vector<Scalar>& shift, Tensor<Scalar>* normalized) {
  const Index n_batch = input.dim(0), channels = input.dim(1), plane = input.dim(2) * input.dim(3);
  Tensor<Scalar> out(input.shape());
  for (Index n = 0; n < n_batch; ++n) {
    for (Index c = 0; c < channels; ++c) {
      const Index base = (n * channels + c) * plane;
      const auto x = input.array().segment(base, plane);
      const Vector<Scalar> xhat = (x - mean[c]) * inv_std[c];
      if (normalized) normalized->array().segment(base, plane) = xhat;
      out.array().segment(base, plane) = scale[c] * xhat + shift[c];
    }
  }
  return out;
}

}  // namespace detail

/// Batch normalization over NCHW input.
///
/// Train mode normalizes with the current batch's per-channel mean and
/// biased variance, then folds them into the running statistics with an
/// exponential moving average (`bn.momentum`). Eval mode reads the running
/// statistics and leaves `bn` untouched.
template <typename Scalar>
BatchNormForward<Scalar> batchnorm_forward(const Tensor<Scalar>& input, BNParams<Scalar>& bn, Mode mode) {
  detail::check_bn_input(input, bn);
  const Index n_batch = input.dim(0), channels = input.dim(1), plane = input.dim(2) * input.dim(3);

  if (mode == Mode::kEval) {
    const Vector<Scalar> denom = (bn.running_var + bn.stabilizer).sqrt();
    if ((denom == Scalar(0)).any()) throw ArgumentError("batchnorm eval: zero variance with zero stabilizer");
    const Vector<Scalar> inv_std = denom.inverse();
    return {detail::bn_affine<Scalar>(input, bn.running_mean, inv_std, bn.scale, bn.shift, nullptr), {}};
  }

  const Index count = n_batch * plane;
  if (count < 2) {
    throw ArgumentError("batchnorm train mode needs >= 2 values per channel, got " + std::to_string(count));
  }
  Vector<Scalar> mean = Vector<Scalar>::Zero(channels);
  Vector<Scalar> var = Vector<Scalar>::Zero(channels);
  for (Index n = 0; n < n_batch; ++n) {
    for (Index c = 0; c < channels; ++c) mean[c] += input.array().segment((n * channels + c) * plane, plane).sum();
  }
  mean /= Scalar(count);
  for (Index n = 0; n < n_batch; ++n) {
    for (Index c = 0; c < channels; ++c) {
      var[c] += (input.array().segment((n * channels + c) * plane, plane) - mean[c]).square().sum();
    }
  }
  var /= Scalar(count);
  const Vector<Scalar> denom = (var + bn.stabilizer).sqrt();
  if ((denom == Scalar(0)).any()) throw ArgumentError("batchnorm train: constant channel with zero stabilizer");

  BatchNormForward<Scalar> result;
  result.cache.normalized = Tensor<Scalar>(input.shape());
  result.cache.inv_std = denom.inverse();
  result.cache.scale = bn.scale;
  result.output = detail::bn_affine<Scalar>(input, mean, result.cache.inv_std, bn.scale, bn.shift,
                                            &result.cache.normalized);

  bn.running_mean = (Scalar(1) - bn.momentum) * bn.running_mean + bn.momentum * mean;
  bn.running_var = (Scalar(1) - bn.momentum) * bn.running_var + bn.momentum * var;
  return result;
}

/// Eval-mode forward over const parameters.
template <typename Scalar>
Tensor<Scalar> batchnorm_eval(const Tensor<Scalar>& input, const BNParams<Scalar>& bn) {
  BNParams<Scalar> copy = bn;
  return batchnorm_forward(input, copy, Mode::kEval).output;
}

/// L1 subgradient with sign(0) = 0.
template <typename Scalar>
Vector<Scalar> l1_subgradient(const Vector<Scalar>& v) {
  return v.unaryExpr([](Scalar x) { return x > Scalar(0) ? Scalar(1) : (x < Scalar(0) ? Scalar(-1) : Scalar(0)); });
}

/// Exact train-mode gradients. `l1_coeff` adds l1_coeff * sign(scale) to the
/// scale gradient, the subgradient of l1_coeff * sum |scale|.
template <typename Scalar>
BatchNormGrads<Scalar> batchnorm_backward(const BatchNormCache<Scalar>& cache, const Tensor<Scalar>& grad_out,
                                          Scalar l1_coeff = Scalar(0)) {
  if (cache.normalized.size() == 0) throw ArgumentError("batchnorm backward needs a train-mode cache");
  if (grad_out.shape() != cache.normalized.shape()) {
    throw ShapeError("batchnorm grad_out " + shape_string(grad_out.shape()) + " != cached " +
                     shape_string(cache.normalized.shape()));
  }
  if (!(l1_coeff >= Scalar(0))) throw ArgumentError("l1 coefficient must be >= 0");
  const auto& xhat = cache.normalized;
  const Index n_batch = xhat.dim(0), channels = xhat.dim(1), plane = xhat.dim(2) * xhat.dim(3);
  const Scalar count = Scalar(n_batch * plane);

  Vector<Scalar> sum_g = Vector<Scalar>::Zero(channels);
  Vector<Scalar> sum_gx = Vector<Scalar>::Zero(channels);
  for (Index n = 0; n < n_batch; ++n) {
    for (Index c = 0; c < channels; ++c) {
      const Index base = (n * channels + c) * plane;
      const auto g = grad_out.array().segment(base, plane);
      sum_g[c] += g.sum();
      sum_gx[c] += (g * xhat.array().segment(base, plane)).sum();
    }
  }

  BatchNormGrads<Scalar> grads{Tensor<Scalar>(xhat.shape()), sum_gx + l1_coeff * l1_subgradient(cache.scale), sum_g};
  for (Index n = 0; n < n_batch; ++n) {
    for (Index c = 0; c < channels; ++c) {
      const Index base = (n * channels + c) * plane;
      const Scalar k = cache.scale[c] * cache.inv_std[c] / count;
      grads.input.array().segment(base, plane) =
          k * (count * grad_out.array().segment(base, plane) - sum_g[c] - xhat.array().segment(base, plane) * sum_gx[c]);
    }
  }
  return grads;
}

}  // namespace slim
