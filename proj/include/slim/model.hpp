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

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "slim/batchnorm.hpp"
#include "slim/conv.hpp"
#include "slim/layers.hpp"
#include "slim/tensor.hpp"

namespace slim {

inline constexpr std::uint32_t kModelFormatVersion = 1;

enum class LayerKind : std::uint32_t {
  kConv = 1,
  kBatchNorm = 2,
  kRelu = 3,
  kMaxPool = 4,
  kGlobalAvgPool = 5,
  kLinear = 6,
};

const char* to_string(LayerKind kind);

struct ConvLayer {
  ConvParams<float> params;
};
struct BatchNormLayer {
  BNParams<float> params;
};
struct ReluLayer {
  Index channels = 0;
};
struct MaxPoolLayer {
  Index extent = 2;
  Index channels = 0;
};
struct GlobalAvgPoolLayer {
  Index channels = 0;
};
struct LinearLayer {
  LinearParams<float> params;
};

using Layer = std::variant<ConvLayer, BatchNormLayer, ReluLayer, MaxPoolLayer, GlobalAvgPoolLayer, LinearLayer>;

LayerKind kind_of(const Layer& layer);
Index in_channels(const Layer& layer);
Index out_channels(const Layer& layer);

struct InputShape {
  Index channels = 0;
  Index height = 0;
  Index width = 0;

  friend bool operator==(const InputShape&, const InputShape&) = default;
};

/// Sequential network. Spatial layers (conv, batchnorm, relu, maxpool) come
/// first, a global average pool turns feature maps into vectors, then linear
/// (and relu) layers produce `num_classes` logits. Every batchnorm directly
/// follows a conv.
struct ModelGraph {
  std::vector<Layer> layers;
  InputShape input;
  Index num_classes = 0;
  std::uint32_t format_version = kModelFormatVersion;

  /// Throws ConfigError naming the first broken link.
  void validate() const;

  /// Layer indices of every batchnorm, in declaration order.
  std::vector<std::size_t> batchnorm_layers() const;
};

// ---------------------------------------------------------------- description

struct LayerDescription {
  LayerKind kind = LayerKind::kConv;
  bool cbr = false;  // conv expands to conv -> batchnorm -> relu
  Index out = 0;     // conv out channels / linear out features
  Index kernel = 3;
  Index stride = 1;
  Index padding = 0;
  Index extent = 2;  // maxpool window
};

struct ModelDescription {
  InputShape input;
  Index num_classes = 0;
  std::vector<LayerDescription> layers;
  float bn_stabilizer = 1e-5f;
  float bn_momentum = 0.1f;
};

/// Parses the key-value model description:
///
///     input = 3x32x32
///     classes = 10
///     layer = cbr out=8 kernel=3 pad=1
///     layer = maxpool size=2
///     layer = globalavgpool
///     layer = linear out=10
///
/// Layer kinds: cbr, conv, batchnorm, relu, maxpool, globalavgpool, linear.
ModelDescription parse_model_description(std::string_view text);
ModelDescription load_model_description(const std::filesystem::path& path);

/// Validated model with He-normal conv weights (stddev sqrt(2 / fan_in)),
/// zero conv bias, batchnorm scale 0.5 and shift 0, unit running variance,
/// and PyTorch-style uniform(+-1/sqrt(in)) linear layers.
ModelGraph build_model(const ModelDescription& description, std::uint64_t seed);

// ---------------------------------------------------------------- execution

/// Eval-mode forward: N x C x H x W -> N x num_classes. Spatial extents may
/// differ from the nominal input as long as every layer accepts them.
Tensorf forward(const ModelGraph& model, const Tensorf& batch);

struct ForwardTrace {
  std::vector<Tensorf> inputs;  // input seen by each layer
  std::vector<BatchNormCache<float>> bn_caches;
  std::vector<std::vector<Index>> pool_argmax;
  Tensorf logits;
};

/// Train-mode forward; batch statistics feed batchnorm and running
/// statistics are updated in `model`.
ForwardTrace forward_train(ModelGraph& model, const Tensorf& batch);

/// Flat views of every trainable array, in layer order: conv weight, conv
/// bias, batchnorm scale, batchnorm shift, linear weight, linear bias.
std::vector<Eigen::Map<Vector<float>>> parameter_views(ModelGraph& model);

/// Gradients aligned with parameter_views(). `l1_coeff` adds the L1
/// subgradient to every batchnorm scale.
std::vector<Vector<float>> backward(const ModelGraph& model, const ForwardTrace& trace, const Tensorf& grad_logits,
                                    float l1_coeff);

/// Sum of |scale| over every batchnorm channel.
double sum_abs_bn_scale(const ModelGraph& model);

// ---------------------------------------------------------------- counters

/// Stored reals: conv weight+bias, batchnorm's four vectors, linear weight+bias.
std::int64_t count_params(const ModelGraph& model);

/// Per-image operation count: conv 2*in*kH*kW*out*H'*W' + out*H'*W',
/// batchnorm 2 per element, relu 1 per element, linear 2*in*out + out.
/// Pooling layers count zero.
std::int64_t count_flops(const ModelGraph& model, const InputShape& input);

struct LayerCost {
  std::size_t layer = 0;
  LayerKind kind = LayerKind::kConv;
  std::int64_t params = 0;
  std::int64_t flops = 0;
};
std::vector<LayerCost> layer_costs(const ModelGraph& model, const InputShape& input);

}  // namespace slim
