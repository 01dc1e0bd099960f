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
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "slim/tensor.hpp"

namespace slim {

// ---------------------------------------------------------------- relu

template <typename Scalar>
Tensor<Scalar> relu_forward(const Tensor<Scalar>& input) {
  return Tensor<Scalar>(input.shape(), input.array().max(Scalar(0)));
}

/// Passes the gradient where input > 0.
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& grad_out) {
  if (input.shape() != grad_out.shape()) throw ShapeError("relu grad_out shape mismatch");
  return Tensor<Scalar>(input.shape(), (input.array() > Scalar(0)).select(grad_out.array(), Scalar(0)));
}

// ---------------------------------------------------------------- max pool

template <typename Scalar>
struct MaxPoolForward {
  Tensor<Scalar> output;
  std::vector<Index> argmax;  // flat input offset of each output's winner
};

/// Non-overlapping max pooling with a square window of side `extent`
/// (stride = extent). Trailing rows/columns that do not fill a window are
/// dropped. Ties go to the first element in row-major window order.
template <typename Scalar>
MaxPoolForward<Scalar> maxpool_forward(const Tensor<Scalar>& input, Index extent) {
  require_rank(input.shape(), 4, "maxpool input");
  if (extent < 1) throw ArgumentError("maxpool extent must be positive");
  const Index n_batch = input.dim(0), channels = input.dim(1);
  const Index out_h = input.dim(2) / extent, out_w = input.dim(3) / extent;
  if (out_h < 1 || out_w < 1) {
    throw ShapeError("maxpool extent " + std::to_string(extent) + " exceeds input " + shape_string(input.shape()));
  }
  MaxPoolForward<Scalar> r{Tensor<Scalar>({n_batch, channels, out_h, out_w}), {}};
  r.argmax.resize(static_cast<std::size_t>(r.output.size()));
  Index k = 0;
  for (Index n = 0; n < n_batch; ++n) {
    for (Index c = 0; c < channels; ++c) {
      for (Index oh = 0; oh < out_h; ++oh) {
        for (Index ow = 0; ow < out_w; ++ow, ++k) {
          Index best = input.offset(n, c, oh * extent, ow * extent);
          for (Index dh = 0; dh < extent; ++dh) {
            for (Index dw = 0; dw < extent; ++dw) {
              const Index at = input.offset(n, c, oh * extent + dh, ow * extent + dw);
              if (input[at] > input[best]) best = at;
            }
          }
          r.output[k] = input[best];
          r.argmax[static_cast<std::size_t>(k)] = best;
        }
      }
    }
  }
  return r;
}

template <typename Scalar>
Tensor<Scalar> maxpool_backward(const Shape& input_shape, std::span<const Index> argmax,
                                const Tensor<Scalar>& grad_out) {
  if (static_cast<Index>(argmax.size()) != grad_out.size()) throw ShapeError("maxpool grad_out shape mismatch");
  Tensor<Scalar> grad(input_shape);
  for (Index k = 0; k < grad_out.size(); ++k) grad[argmax[static_cast<std::size_t>(k)]] += grad_out[k];
  return grad;
}

// ---------------------------------------------------------------- global average pool

/// N x C x H x W -> N x C.
template <typename Scalar>
Tensor<Scalar> global_avg_pool_forward(const Tensor<Scalar>& input) {
  require_rank(input.shape(), 4, "global average pool input");
  const Index rows = input.dim(0) * input.dim(1), plane = input.dim(2) * input.dim(3);
  Tensor<Scalar> out({input.dim(0), input.dim(1)});
  out.matrix(rows, 1) = input.matrix(rows, plane).rowwise().mean();
  return out;
}

template <typename Scalar>
Tensor<Scalar> global_avg_pool_backward(const Shape& input_shape, const Tensor<Scalar>& grad_out) {
  require_rank(input_shape, 4, "global average pool input");
  const Index rows = input_shape[0] * input_shape[1], plane = input_shape[2] * input_shape[3];
  if (grad_out.size() != rows) throw ShapeError("global average pool grad_out shape mismatch");
  Tensor<Scalar> grad(input_shape);
  grad.matrix(rows, plane) = grad_out.matrix(rows, 1).replicate(1, plane) / Scalar(plane);
  return grad;
}

// ---------------------------------------------------------------- linear

template <typename Scalar>
struct LinearParams {
  Tensor<Scalar> weight;  // out x in
  Vector<Scalar> bias;    // out

  Index out_features() const { return weight.dim(0); }
  Index in_features() const { return weight.dim(1); }

  void validate() const {
    require_rank(weight.shape(), 2, "linear weight");
    if (out_features() < 1 || in_features() < 1) throw ShapeError("linear extents must be positive");
    if (bias.size() != out_features()) throw ShapeError("linear bias length mismatch");
  }
};

template <typename Scalar>
struct LinearGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> weight;
  Vector<Scalar> bias;
};

/// y = x W^T + b for x of shape N x in.
template <typename Scalar>
Tensor<Scalar> linear_forward(const Tensor<Scalar>& input, const LinearParams<Scalar>& p) {
  p.validate();
  require_rank(input.shape(), 2, "linear input");
  if (input.dim(1) != p.in_features()) {
    throw ShapeError("linear input has " + std::to_string(input.dim(1)) + " features, expected " +
                     std::to_string(p.in_features()));
  }
  const Index n = input.dim(0);
  Tensor<Scalar> out({n, p.out_features()});
  auto y = out.matrix(n, p.out_features());
  y.noalias() = input.matrix(n, p.in_features()) * p.weight.matrix(p.out_features(), p.in_features()).transpose();
  y.rowwise() += p.bias.matrix().transpose();
  return out;
}

template <typename Scalar>
LinearGrads<Scalar> linear_backward(const Tensor<Scalar>& input, const LinearParams<Scalar>& p,
                                    const Tensor<Scalar>& grad_out) {
  const Index n = input.dim(0), in = p.in_features(), out = p.out_features();
  if (grad_out.shape() != Shape{n, out}) throw ShapeError("linear grad_out shape mismatch");
  LinearGrads<Scalar> g{Tensor<Scalar>({n, in}), Tensor<Scalar>(p.weight.shape()), Vector<Scalar>(out)};
  const auto dy = grad_out.matrix(n, out);
  g.input.matrix(n, in).noalias() = dy * p.weight.matrix(out, in);
  g.weight.matrix(out, in).noalias() = dy.transpose() * input.matrix(n, in);
  g.bias = dy.colwise().sum().transpose().array();
  return g;
}

// ---------------------------------------------------------------- softmax cross-entropy

template <typename Scalar>
struct CrossEntropy {
  Scalar loss;               // mean over the batch
  Tensor<Scalar> gradient;   // d loss / d logits = (softmax - one_hot) / N
  Tensor<Scalar> probabilities;
};

template <typename Scalar>
CrossEntropy<Scalar> softmax_cross_entropy(const Tensor<Scalar>& logits, std::span<const int> labels) {
  require_rank(logits.shape(), 2, "logits");
  const Index n = logits.dim(0), k = logits.dim(1);
  if (static_cast<Index>(labels.size()) != n) throw ShapeError("label count != batch size");
  CrossEntropy<Scalar> r{Scalar(0), Tensor<Scalar>({n, k}), Tensor<Scalar>({n, k})};
  const auto z = logits.matrix(n, k);
  auto prob = r.probabilities.matrix(n, k);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= k) throw ArgumentError("label " + std::to_string(label) + " out of range");
    const Scalar top = z.row(i).maxCoeff();
    const auto shifted = (z.row(i).array() - top).eval();
    const Scalar log_sum = std::log(shifted.exp().sum());
    prob.row(i) = (shifted - log_sum).exp().matrix();
    total -= static_cast<double>(shifted[label] - log_sum);
  }
  r.loss = static_cast<Scalar>(total / static_cast<double>(n));
  auto grad = r.gradient.matrix(n, k);
  grad = prob;
  for (Index i = 0; i < n; ++i) grad(i, labels[static_cast<std::size_t>(i)]) -= Scalar(1);
  grad /= Scalar(n);
  return r;
}

}  // namespace slim
