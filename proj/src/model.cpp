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

#include "slim/model.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "slim/config.hpp"

namespace slim {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string where(std::size_t i, const Layer& layer) {
  return "layer " + std::to_string(i) + " (" + to_string(kind_of(layer)) + ")";
}

/// Feature extents flowing between layers.
struct FlowShape {
  Index channels = 0;
  Index height = 0;
  Index width = 0;
  bool spatial = true;

  Index elements() const { return spatial ? channels * height * width : channels; }
};

/// Shape after `layer`; throws ConfigError when `layer` cannot consume `in`.
FlowShape propagate(const Layer& layer, const FlowShape& in, std::size_t index) {
  FlowShape out = in;
  const auto fail = [&](const std::string& msg) { throw ConfigError(where(index, layer) + ": " + msg); };
  const Index expected = in_channels(layer);
  if (expected != in.channels) {
    fail("expects " + std::to_string(expected) + " input channels but receives " + std::to_string(in.channels));
  }
  std::visit(Overloaded{
                 [&](const ConvLayer& l) {
                   if (!in.spatial) fail("conv after global pooling");
                   try {
                     out.height = conv_output_extent(in.height, l.params.kernel_h(), l.params.stride, l.params.padding);
                     out.width = conv_output_extent(in.width, l.params.kernel_w(), l.params.stride, l.params.padding);
                   } catch (const ShapeError& e) {
                     fail(e.what());
                   }
                   out.channels = l.params.out_channels();
                 },
                 [&](const BatchNormLayer&) {
                   if (!in.spatial) fail("batchnorm after global pooling");
                 },
                 [&](const ReluLayer&) {},
                 [&](const MaxPoolLayer& l) {
                   if (!in.spatial) fail("maxpool after global pooling");
                   out.height = in.height / l.extent;
                   out.width = in.width / l.extent;
                   if (out.height < 1 || out.width < 1) fail("pool window larger than feature map");
                 },
                 [&](const GlobalAvgPoolLayer&) {
                   if (!in.spatial) fail("second global pooling");
                   out.spatial = false;
                   out.height = out.width = 1;
                 },
                 [&](const LinearLayer& l) {
                   if (in.spatial) fail("linear layer needs a preceding globalavgpool");
                   out.channels = l.params.out_features();
                 },
             },
             layer);
  return out;
}

}  // namespace

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kGlobalAvgPool: return "globalavgpool";
    case LayerKind::kLinear: return "linear";
  }
  return "unknown";
}

LayerKind kind_of(const Layer& layer) {
  return std::visit(Overloaded{
                        [](const ConvLayer&) { return LayerKind::kConv; },
                        [](const BatchNormLayer&) { return LayerKind::kBatchNorm; },
                        [](const ReluLayer&) { return LayerKind::kRelu; },
                        [](const MaxPoolLayer&) { return LayerKind::kMaxPool; },
                        [](const GlobalAvgPoolLayer&) { return LayerKind::kGlobalAvgPool; },
                        [](const LinearLayer&) { return LayerKind::kLinear; },
                    },
                    layer);
}

Index in_channels(const Layer& layer) {
  return std::visit(Overloaded{
                        [](const ConvLayer& l) { return l.params.in_channels(); },
                        [](const BatchNormLayer& l) { return l.params.channels(); },
                        [](const ReluLayer& l) { return l.channels; },
                        [](const MaxPoolLayer& l) { return l.channels; },
                        [](const GlobalAvgPoolLayer& l) { return l.channels; },
                        [](const LinearLayer& l) { return l.params.in_features(); },
                    },
                    layer);
}

Index out_channels(const Layer& layer) {
  return std::visit(Overloaded{
                        [](const ConvLayer& l) { return l.params.out_channels(); },
                        [](const LinearLayer& l) { return l.params.out_features(); },
                        [&](const auto&) { return in_channels(layer); },
                    },
                    layer);
}

void ModelGraph::validate() const {
  if (layers.empty()) throw ConfigError("model has no layers");
  if (input.channels < 1 || input.height < 1 || input.width < 1) throw ConfigError("input extents must be positive");
  if (num_classes < 1) throw ConfigError("class count must be positive");
  FlowShape shape{input.channels, input.height, input.width, true};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& layer = layers[i];
    try {
      std::visit(Overloaded{
                     [](const ConvLayer& l) { l.params.validate(); },
                     [](const BatchNormLayer& l) { l.params.validate(); },
                     [](const LinearLayer& l) { l.params.validate(); },
                     [](const MaxPoolLayer& l) {
                       if (l.extent < 1) throw ConfigError("maxpool extent must be positive");
                     },
                     [](const auto&) {},
                 },
                 layer);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(where(i, layer) + ": " + e.what());
    }
    if (in_channels(layer) < 1) throw ConfigError(where(i, layer) + ": channel count must be positive");
    if (kind_of(layer) == LayerKind::kBatchNorm && (i == 0 || kind_of(layers[i - 1]) != LayerKind::kConv)) {
      throw ConfigError(where(i, layer) + ": batchnorm must directly follow a conv");
    }
    shape = propagate(layer, shape, i);
  }
  if (shape.spatial) throw ConfigError("model output is still a feature map; add globalavgpool and linear");
  if (shape.channels != num_classes) {
    throw ConfigError("model emits " + std::to_string(shape.channels) + " outputs but declares " +
                      std::to_string(num_classes) + " classes");
  }
}

std::vector<std::size_t> ModelGraph::batchnorm_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (kind_of(layers[i]) == LayerKind::kBatchNorm) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------- description

ModelDescription parse_model_description(std::string_view text) {
  const KeyValueFile kv = KeyValueFile::parse(text);
  ModelDescription d;
  const auto input = kv.get("", "input");
  if (!input) throw ConfigError("model description: missing 'input = CxHxW'");
  const auto dims = split(*input, 'x');
  if (dims.size() != 3) throw ConfigError("model description: input must be CxHxW, got '" + *input + "'");
  d.input = {parse_int(dims[0], "input channels"), parse_int(dims[1], "input height"),
             parse_int(dims[2], "input width")};
  d.num_classes = kv.get_int("", "classes", 0);
  d.bn_stabilizer = static_cast<float>(kv.get_double("", "bn_stabilizer", 1e-5));
  d.bn_momentum = static_cast<float>(kv.get_double("", "bn_momentum", 0.1));

  for (const std::string& line : kv.get_all("", "layer")) {
    std::istringstream in(line);
    std::string kind;
    in >> kind;
    std::string rest;
    std::getline(in, rest);
    LayerDescription l;
    if (kind == "cbr") {
      l.kind = LayerKind::kConv;
      l.cbr = true;
    } else if (kind == "conv") {
      l.kind = LayerKind::kConv;
    } else if (kind == "batchnorm") {
      l.kind = LayerKind::kBatchNorm;
    } else if (kind == "relu") {
      l.kind = LayerKind::kRelu;
    } else if (kind == "maxpool") {
      l.kind = LayerKind::kMaxPool;
    } else if (kind == "globalavgpool") {
      l.kind = LayerKind::kGlobalAvgPool;
    } else if (kind == "linear") {
      l.kind = LayerKind::kLinear;
    } else {
      throw ConfigError("model description: unknown layer kind '" + kind + "'");
    }
    for (const auto& [key, value] : parse_attributes(rest)) {
      const Index v = parse_int(value, kind + "." + key);
      if (key == "out") {
        l.out = v;
      } else if (key == "kernel") {
        l.kernel = v;
      } else if (key == "stride") {
        l.stride = v;
      } else if (key == "pad") {
        l.padding = v;
      } else if (key == "size") {
        l.extent = v;
      } else {
        throw ConfigError("model description: unknown attribute '" + key + "' for " + kind);
      }
    }
    d.layers.push_back(l);
  }
  return d;
}

ModelDescription load_model_description(const std::filesystem::path& path) {
  std::ifstream probe(path);
  if (!probe) throw IoError("cannot read model description " + path.string());
  std::ostringstream ss;
  ss << probe.rdbuf();
  return parse_model_description(ss.str());
}

ModelGraph build_model(const ModelDescription& d, std::uint64_t seed) {
  if (d.layers.empty()) throw ConfigError("model description lists no layers");
  std::mt19937_64 rng(seed);
  ModelGraph m;
  m.input = d.input;
  m.num_classes = d.num_classes;
  Index channels = d.input.channels;
  const auto positive = [](Index v, const char* what) {
    if (v < 1) throw ConfigError(std::string("model description: ") + what + " must be positive");
  };
  for (const LayerDescription& l : d.layers) {
    switch (l.kind) {
      case LayerKind::kConv: {
        positive(l.out, "conv out");
        positive(l.kernel, "conv kernel");
        positive(l.stride, "conv stride");
        positive(channels, "conv input channels");
        if (l.padding < 0) throw ConfigError("model description: conv pad must be non-negative");
        ConvParams<float> p;
        const float stddev = std::sqrt(2.0f / static_cast<float>(channels * l.kernel * l.kernel));
        p.weight = Tensorf::random_normal({l.out, channels, l.kernel, l.kernel}, rng, stddev);
        p.bias = Vector<float>::Zero(l.out);
        p.stride = l.stride;
        p.padding = l.padding;
        m.layers.emplace_back(ConvLayer{std::move(p)});
        channels = l.out;
        if (l.cbr) {
          auto bn = BNParams<float>::identity(channels, 0.5f);
          bn.stabilizer = d.bn_stabilizer;
          bn.momentum = d.bn_momentum;
          m.layers.emplace_back(BatchNormLayer{std::move(bn)});
          m.layers.emplace_back(ReluLayer{channels});
        }
        break;
      }
      case LayerKind::kBatchNorm: {
        auto bn = BNParams<float>::identity(channels, 0.5f);
        bn.stabilizer = d.bn_stabilizer;
        bn.momentum = d.bn_momentum;
        m.layers.emplace_back(BatchNormLayer{std::move(bn)});
        break;
      }
      case LayerKind::kRelu: m.layers.emplace_back(ReluLayer{channels}); break;
      case LayerKind::kMaxPool:
        positive(l.extent, "maxpool size");
        m.layers.emplace_back(MaxPoolLayer{l.extent, channels});
        break;
      case LayerKind::kGlobalAvgPool: m.layers.emplace_back(GlobalAvgPoolLayer{channels}); break;
      case LayerKind::kLinear: {
        positive(l.out, "linear out");
        positive(channels, "linear input features");
        LinearParams<float> p;
        const float bound = 1.0f / std::sqrt(static_cast<float>(channels));
        p.weight = Tensorf::random_uniform({l.out, channels}, rng, -bound, bound);
        p.bias = Tensorf::random_uniform({l.out}, rng, -bound, bound).array();
        m.layers.emplace_back(LinearLayer{std::move(p)});
        channels = l.out;
        break;
      }
    }
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------- execution

namespace {

void check_batch(const ModelGraph& model, const Tensorf& batch) {
  require_rank(batch.shape(), 4, "model input");
  if (batch.dim(1) != model.input.channels) {
    throw ShapeError("model expects " + std::to_string(model.input.channels) + " input channels, batch has " +
                     std::to_string(batch.dim(1)));
  }
  if (batch.dim(0) < 1) throw ShapeError("empty batch");
}

}  // namespace

Tensorf forward(const ModelGraph& model, const Tensorf& batch) {
  check_batch(model, batch);
  Tensorf x = batch;
  for (const Layer& layer : model.layers) {
    x = std::visit(Overloaded{
                       [&](const ConvLayer& l) { return conv2d_forward(x, l.params); },
                       [&](const BatchNormLayer& l) { return batchnorm_eval(x, l.params); },
                       [&](const ReluLayer&) { return relu_forward(x); },
                       [&](const MaxPoolLayer& l) { return maxpool_forward(x, l.extent).output; },
                       [&](const GlobalAvgPoolLayer&) { return global_avg_pool_forward(x); },
                       [&](const LinearLayer& l) { return linear_forward(x, l.params); },
                   },
                   layer);
  }
  return x;
}

ForwardTrace forward_train(ModelGraph& model, const Tensorf& batch) {
  check_batch(model, batch);
  ForwardTrace trace;
  const std::size_t n = model.layers.size();
  trace.inputs.reserve(n);
  trace.bn_caches.resize(n);
  trace.pool_argmax.resize(n);
  Tensorf x = batch;
  for (std::size_t i = 0; i < n; ++i) {
    trace.inputs.push_back(x);
    x = std::visit(Overloaded{
                       [&](ConvLayer& l) { return conv2d_forward(x, l.params); },
                       [&](BatchNormLayer& l) {
                         auto fwd = batchnorm_forward(x, l.params, Mode::kTrain);
                         trace.bn_caches[i] = std::move(fwd.cache);
                         return std::move(fwd.output);
                       },
                       [&](ReluLayer&) { return relu_forward(x); },
                       [&](MaxPoolLayer& l) {
                         auto fwd = maxpool_forward(x, l.extent);
                         trace.pool_argmax[i] = std::move(fwd.argmax);
                         return std::move(fwd.output);
                       },
                       [&](GlobalAvgPoolLayer&) { return global_avg_pool_forward(x); },
                       [&](LinearLayer& l) { return linear_forward(x, l.params); },
                   },
                   model.layers[i]);
  }
  trace.logits = std::move(x);
  return trace;
}

std::vector<Eigen::Map<Vector<float>>> parameter_views(ModelGraph& model) {
  std::vector<Eigen::Map<Vector<float>>> views;
  const auto add = [&](float* data, Index size) { views.emplace_back(data, size); };
  for (Layer& layer : model.layers) {
    std::visit(Overloaded{
                   [&](ConvLayer& l) {
                     add(l.params.weight.data(), l.params.weight.size());
                     add(l.params.bias.data(), l.params.bias.size());
                   },
                   [&](BatchNormLayer& l) {
                     add(l.params.scale.data(), l.params.scale.size());
                     add(l.params.shift.data(), l.params.shift.size());
                   },
                   [&](LinearLayer& l) {
                     add(l.params.weight.data(), l.params.weight.size());
                     add(l.params.bias.data(), l.params.bias.size());
                   },
                   [](auto&) {},
               },
               layer);
  }
  return views;
}

std::vector<Vector<float>> backward(const ModelGraph& model, const ForwardTrace& trace, const Tensorf& grad_logits,
                                    float l1_coeff) {
  const std::size_t n = model.layers.size();
  if (trace.inputs.size() != n) throw ShapeError("forward trace does not match model");
  // Collected back to front, reversed at the end.
  std::vector<Vector<float>> reversed;
  Tensorf grad = grad_logits;
  for (std::size_t k = n; k-- > 0;) {
    const Tensorf& x = trace.inputs[k];
    std::visit(Overloaded{
                   [&](const ConvLayer& l) {
                     auto g = conv2d_backward(x, l.params, grad);
                     reversed.push_back(std::move(g.bias));
                     reversed.push_back(std::move(g.weight.array()));
                     grad = std::move(g.input);
                   },
                   [&](const BatchNormLayer&) {
                     auto g = batchnorm_backward(trace.bn_caches[k], grad, l1_coeff);
                     reversed.push_back(std::move(g.shift));
                     reversed.push_back(std::move(g.scale));
                     grad = std::move(g.input);
                   },
                   [&](const ReluLayer&) { grad = relu_backward(x, grad); },
                   [&](const MaxPoolLayer&) { grad = maxpool_backward<float>(x.shape(), trace.pool_argmax[k], grad); },
                   [&](const GlobalAvgPoolLayer&) { grad = global_avg_pool_backward(x.shape(), grad); },
                   [&](const LinearLayer& l) {
                     auto g = linear_backward(x, l.params, grad);
                     reversed.push_back(std::move(g.bias));
                     reversed.push_back(std::move(g.weight.array()));
                     grad = std::move(g.input);
                   },
               },
               model.layers[k]);
  }
  return {std::make_move_iterator(reversed.rbegin()), std::make_move_iterator(reversed.rend())};
}

double sum_abs_bn_scale(const ModelGraph& model) {
  double total = 0.0;
  for (const Layer& layer : model.layers) {
    if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) total += bn->params.scale.cast<double>().abs().sum();
  }
  return total;
}

// ---------------------------------------------------------------- counters

std::vector<LayerCost> layer_costs(const ModelGraph& model, const InputShape& input) {
  model.validate();
  if (input.channels != model.input.channels) throw ShapeError("input channel count does not match model");
  std::vector<LayerCost> costs;
  FlowShape shape{input.channels, input.height, input.width, true};
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& layer = model.layers[i];
    FlowShape out;
    try {
      out = propagate(layer, shape, i);
    } catch (const ConfigError& e) {
      throw ShapeError(e.what());
    }
    LayerCost c{i, kind_of(layer), 0, 0};
    std::visit(Overloaded{
                   [&](const ConvLayer& l) {
                     const std::int64_t plane = out.height * out.width;
                     c.params = l.params.weight.size() + l.params.bias.size();
                     c.flops = 2 * l.params.in_channels() * l.params.kernel_h() * l.params.kernel_w() *
                                   l.params.out_channels() * plane +
                               l.params.out_channels() * plane;
                   },
                   [&](const BatchNormLayer& l) {
                     c.params = 4 * l.params.channels();
                     c.flops = 2 * shape.elements();
                   },
                   [&](const ReluLayer&) { c.flops = shape.elements(); },
                   [&](const LinearLayer& l) {
                     c.params = l.params.weight.size() + l.params.bias.size();
                     c.flops = 2 * l.params.in_features() * l.params.out_features() + l.params.out_features();
                   },
                   [](const auto&) {},
               },
               layer);
    costs.push_back(c);
    shape = out;
  }
  return costs;
}

std::int64_t count_params(const ModelGraph& model) {
  std::int64_t total = 0;
  for (const auto& c : layer_costs(model, model.input)) total += c.params;
  return total;
}

std::int64_t count_flops(const ModelGraph& model, const InputShape& input) {
  std::int64_t total = 0;
  for (const auto& c : layer_costs(model, input)) total += c.flops;
  return total;
}

}  // namespace slim
