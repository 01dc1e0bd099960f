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

#include <string>
#include <type_traits>

#include "slim/parallel.hpp"
#include "slim/tensor.hpp"

namespace slim {

template <typename Scalar>
struct ConvParams {
  Tensor<Scalar> weight;  // out_ch x in_ch x kH x kW
  Vector<Scalar> bias;    // out_ch
  Index stride = 1;
  Index padding = 0;

  Index out_channels() const { return weight.dim(0); }
  Index in_channels() const { return weight.dim(1); }
  Index kernel_h() const { return weight.dim(2); }
  Index kernel_w() const { return weight.dim(3); }

  void validate() const {
    require_rank(weight.shape(), 4, "conv weight");
    if (out_channels() < 1 || in_channels() < 1 || kernel_h() < 1 || kernel_w() < 1) {
      throw ShapeError("conv weight extents must be positive, got " + shape_string(weight.shape()));
    }
    if (bias.size() != out_channels()) {
      throw ShapeError("conv bias length " + std::to_string(bias.size()) + " != out channels " +
                       std::to_string(out_channels()));
    }
    if (stride < 1) throw ArgumentError("conv stride must be positive");
    if (padding < 0) throw ArgumentError("conv padding must be non-negative");
  }
};

/// (in + 2*pad - kernel) / stride + 1, requiring exact division.
inline Index conv_output_extent(Index in, Index kernel, Index stride, Index pad) {
  const Index span = in + 2 * pad - kernel;
  if (span < 0) {
    throw ShapeError("kernel " + std::to_string(kernel) + " larger than padded input " + std::to_string(in + 2 * pad));
  }
  if (span % stride != 0) {
    throw ShapeError("non-integral conv output extent: (" + std::to_string(in) + " + 2*" + std::to_string(pad) +
                     " - " + std::to_string(kernel) + ") / " + std::to_string(stride));
  }
  return span / stride + 1;
}

enum class ConvAlgorithm {
  kAuto,    // direct loops for double, patch-matrix GEMM for float
  kDirect,  // nested-loop reference kernel
  kIm2col,  // patch-matrix reformulation backed by Eigen GEMM
};

namespace detail {

struct ConvGeometry {
  Index batch, in_ch, in_h, in_w;
  Index out_ch, k_h, k_w, stride, pad;
  Index out_h, out_w;

  Index patch_rows() const { return in_ch * k_h * k_w; }
  Index patch_cols() const { return out_h * out_w; }
};

template <typename Scalar>
ConvGeometry conv_geometry(const Tensor<Scalar>& input, const ConvParams<Scalar>& p) {
  p.validate();
  require_rank(input.shape(), 4, "conv input");
  if (input.dim(1) != p.in_channels()) {
    throw ShapeError("conv input has " + std::to_string(input.dim(1)) + " channels, weights expect " +
                     std::to_string(p.in_channels()));
  }
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), p.out_channels(), p.kernel_h(),
                 p.kernel_w(), p.stride, p.padding, 0, 0};
  g.out_h = conv_output_extent(g.in_h, g.k_h, g.stride, g.pad);
  g.out_w = conv_output_extent(g.in_w, g.k_w, g.stride, g.pad);
  return g;
}

/// Patch matrix for one image: row (c, kh, kw), column (oh, ow).
template <typename Scalar>
RowMajorMatrix<Scalar> im2col(const Scalar* image, const ConvGeometry& g) {
  RowMajorMatrix<Scalar> cols(g.patch_rows(), g.patch_cols());
  for (Index c = 0; c < g.in_ch; ++c) {
    for (Index kh = 0; kh < g.k_h; ++kh) {
      for (Index kw = 0; kw < g.k_w; ++kw) {
        const Index row = (c * g.k_h + kh) * g.k_w + kw;
        Scalar* out = cols.row(row).data();
        for (Index oh = 0; oh < g.out_h; ++oh) {
          const Index ih = oh * g.stride - g.pad + kh;
          for (Index ow = 0; ow < g.out_w; ++ow) {
            const Index iw = ow * g.stride - g.pad + kw;
            const bool inside = ih >= 0 && ih < g.in_h && iw >= 0 && iw < g.in_w;
            out[oh * g.out_w + ow] = inside ? image[(c * g.in_h + ih) * g.in_w + iw] : Scalar(0);
          }
        }
      }
    }
  }
  return cols;
}

/// Scatter-add of a patch-matrix gradient back onto one image.
template <typename Scalar>
void col2im(const RowMajorMatrix<Scalar>& cols, const ConvGeometry& g, Scalar* image) {
  for (Index c = 0; c < g.in_ch; ++c) {
    for (Index kh = 0; kh < g.k_h; ++kh) {
      for (Index kw = 0; kw < g.k_w; ++kw) {
        const Scalar* src = cols.row((c * g.k_h + kh) * g.k_w + kw).data();
        for (Index oh = 0; oh < g.out_h; ++oh) {
          const Index ih = oh * g.stride - g.pad + kh;
          if (ih < 0 || ih >= g.in_h) continue;
          for (Index ow = 0; ow < g.out_w; ++ow) {
            const Index iw = ow * g.stride - g.pad + kw;
            if (iw < 0 || iw >= g.in_w) continue;
            image[(c * g.in_h + ih) * g.in_w + iw] += src[oh * g.out_w + ow];
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Reference kernel. Each output is the sum over (in_ch, kh, kw) in that
/// order, then the bias is added.
template <typename Scalar>
Tensor<Scalar> conv2d_forward_direct(const Tensor<Scalar>& input, const ConvParams<Scalar>& p) {
  const auto g = detail::conv_geometry(input, p);
  Tensor<Scalar> out({g.batch, g.out_ch, g.out_h, g.out_w});
  parallel_for(g.batch, [&](Index n) {
    for (Index o = 0; o < g.out_ch; ++o) {
      for (Index oh = 0; oh < g.out_h; ++oh) {
        for (Index ow = 0; ow < g.out_w; ++ow) {
          Scalar acc(0);
          for (Index c = 0; c < g.in_ch; ++c) {
            for (Index kh = 0; kh < g.k_h; ++kh) {
              const Index ih = oh * g.stride - g.pad + kh;
              if (ih < 0 || ih >= g.in_h) continue;
              for (Index kw = 0; kw < g.k_w; ++kw) {
                const Index iw = ow * g.stride - g.pad + kw;
                if (iw < 0 || iw >= g.in_w) continue;
                acc += input(n, c, ih, iw) * p.weight(o, c, kh, kw);
              }
            }
          }
          out(n, o, oh, ow) = acc + p.bias[o];
        }
      }
    }
  });
  return out;
}

template <typename Scalar>
Tensor<Scalar> conv2d_forward_im2col(const Tensor<Scalar>& input, const ConvParams<Scalar>& p) {
  const auto g = detail::conv_geometry(input, p);
  Tensor<Scalar> out({g.batch, g.out_ch, g.out_h, g.out_w});
  const auto weights = p.weight.matrix(g.out_ch, g.patch_rows());
  const Index in_stride = g.in_ch * g.in_h * g.in_w;
  const Index out_stride = g.out_ch * g.patch_cols();
  parallel_for(g.batch, [&](Index n) {
    const RowMajorMatrix<Scalar> cols = detail::im2col(input.data() + n * in_stride, g);
    Eigen::Map<RowMajorMatrix<Scalar>> y(out.data() + n * out_stride, g.out_ch, g.patch_cols());
    y.noalias() = weights * cols;
    y.colwise() += p.bias.matrix();
  });
  return out;
}

/// NCHW convolution with zero padding.
template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& input, const ConvParams<Scalar>& p,
                              ConvAlgorithm algo = ConvAlgorithm::kAuto) {
  if (algo == ConvAlgorithm::kAuto) {
    algo = std::is_same_v<Scalar, double> ? ConvAlgorithm::kDirect : ConvAlgorithm::kIm2col;
  }
  return algo == ConvAlgorithm::kDirect ? conv2d_forward_direct(input, p) : conv2d_forward_im2col(input, p);
}

template <typename Scalar>
struct ConvGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> weight;
  Vector<Scalar> bias;
};

template <typename Scalar>
ConvGrads<Scalar> conv2d_backward(const Tensor<Scalar>& input, const ConvParams<Scalar>& p,
                                  const Tensor<Scalar>& grad_out) {
  const auto g = detail::conv_geometry(input, p);
  const Shape expected{g.batch, g.out_ch, g.out_h, g.out_w};
  if (grad_out.shape() != expected) {
    throw ShapeError("conv grad_out shape " + shape_string(grad_out.shape()) + " != forward output " +
                     shape_string(expected));
  }
  const Index in_stride = g.in_ch * g.in_h * g.in_w;
  const Index out_stride = g.out_ch * g.patch_cols();
  const auto weights = p.weight.matrix(g.out_ch, g.patch_rows());

  ConvGrads<Scalar> grads{Tensor<Scalar>(input.shape()), Tensor<Scalar>(p.weight.shape()),
                          Vector<Scalar>::Zero(g.out_ch)};
  // Per-item partials, reduced in batch order below.
  std::vector<RowMajorMatrix<Scalar>> weight_parts(static_cast<std::size_t>(g.batch));
  std::vector<Vector<Scalar>> bias_parts(static_cast<std::size_t>(g.batch));
  parallel_for(g.batch, [&](Index n) {
    const RowMajorMatrix<Scalar> cols = detail::im2col(input.data() + n * in_stride, g);
    Eigen::Map<const RowMajorMatrix<Scalar>> dy(grad_out.data() + n * out_stride, g.out_ch, g.patch_cols());
    weight_parts[static_cast<std::size_t>(n)].noalias() = dy * cols.transpose();
    bias_parts[static_cast<std::size_t>(n)] = dy.rowwise().sum().array();
    const RowMajorMatrix<Scalar> dcols = weights.transpose() * dy;
    detail::col2im(dcols, g, grads.input.data() + n * in_stride);
  });
  auto dw = grads.weight.matrix(g.out_ch, g.patch_rows());
  for (Index n = 0; n < g.batch; ++n) {
    dw += weight_parts[static_cast<std::size_t>(n)];
    grads.bias += bias_parts[static_cast<std::size_t>(n)];
  }
  return grads;
}

}  // namespace slim
