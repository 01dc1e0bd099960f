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

#include "slim/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "slim/errors.hpp"
#include "slim/metrics.hpp"
#include "slim/model_io.hpp"

namespace slim {

namespace {

// Where a batchnorm's channels are consumed and whether a relu sits between.
struct Consumer {
  std::size_t layer = 0;
  bool relu = false;
};

Consumer find_consumer(const ModelGraph& model, std::size_t bn) {
  bool relu = false;
  for (std::size_t i = bn + 1; i < model.layers.size(); ++i) {
    switch (kind_of(model.layers[i])) {
      case LayerKind::kConv:
      case LayerKind::kLinear: return {i, relu};
      case LayerKind::kRelu: relu = true; break;
      case LayerKind::kMaxPool:
      case LayerKind::kGlobalAvgPool: break;
      case LayerKind::kBatchNorm:
        throw ConfigError("layer " + std::to_string(i) + ": batchnorm without a producing conv");
    }
  }
  throw ConfigError("batchnorm layer " + std::to_string(bn) + " has no consuming conv or linear layer");
}

std::vector<Index> kept_indices(const std::vector<bool>& keep) {
  std::vector<Index> out;
  for (std::size_t c = 0; c < keep.size(); ++c)
    if (keep[c]) out.push_back(static_cast<Index>(c));
  return out;
}

template <typename S>
Vector<S> select(const Vector<S>& v, const std::vector<Index>& idx) {
  Vector<S> out(static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Index>(k)] = v[idx[k]];
  return out;
}

// Keeps rows `idx` along dimension `dim` (0 or 1) of a rank-4 tensor.
Tensorf select_dim(const Tensorf& t, int dim, const std::vector<Index>& idx) {
  Shape shape = t.shape();
  shape[static_cast<std::size_t>(dim)] = static_cast<Index>(idx.size());
  Tensorf out(shape);
  const Index plane = t.dim(2) * t.dim(3);
  for (Index o = 0; o < shape[0]; ++o)
    for (Index i = 0; i < shape[1]; ++i) {
      const Index so = dim == 0 ? idx[static_cast<std::size_t>(o)] : o;
      const Index si = dim == 1 ? idx[static_cast<std::size_t>(i)] : i;
      out.array().segment((o * shape[1] + i) * plane, plane) =
          t.array().segment((so * t.dim(1) + si) * plane, plane);
    }
  return out;
}

void set_channels(Layer& layer, Index channels) {
  std::visit(
      [channels](auto& l) {
        if constexpr (requires { l.channels; }) l.channels = channels;
      },
      layer);
}

}  // namespace

std::vector<ScaleEntry> collect_scales(const ModelGraph& model) {
  std::vector<ScaleEntry> out;
  for (std::size_t i : model.batchnorm_layers()) {
    const auto& bn = std::get<BatchNormLayer>(model.layers[i]).params;
    for (Index c = 0; c < bn.channels(); ++c) out.push_back({i, c, std::abs(static_cast<double>(bn.scale[c]))});
  }
  if (out.empty()) throw ArgumentError("model has no batchnorm layers to rank");
  std::stable_sort(out.begin(), out.end(),
                   [](const ScaleEntry& a, const ScaleEntry& b) { return a.magnitude < b.magnitude; });
  return out;
}

const char* to_string(PruneMethod method) { return method == PruneMethod::kNormal ? "normal" : "regular"; }

PruneMethod parse_prune_method(const std::string& text) {
  if (text == "normal") return PruneMethod::kNormal;
  if (text == "regular") return PruneMethod::kRegular;
  throw ConfigError("unknown prune method '" + text + "' (expected normal or regular)");
}

Index LayerPlan::survivors() const { return static_cast<Index>(std::count(keep.begin(), keep.end(), true)); }

PrunePlan plan_prune(const ModelGraph& model, double ratio, PruneMethod method) {
  return plan_prune(collect_scales(model), ratio, method, model);
}

PrunePlan plan_prune(const std::vector<ScaleEntry>& scales, double ratio, PruneMethod method,
                     const ModelGraph& model) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw ArgumentError("prune ratio must lie in [0, 1)");
  if (scales.empty()) throw ArgumentError("no batchnorm scales to prune");
  model.validate();

  PrunePlan plan;
  plan.method = method;
  plan.ratio = ratio;
  plan.model_hash = model_hash(model);
  plan.total_channels = static_cast<Index>(scales.size());
  plan.requested = static_cast<Index>(std::floor(ratio * static_cast<double>(scales.size()) + 1e-9));

  const auto bn_layers = model.batchnorm_layers();
  std::vector<std::size_t> slot(model.layers.size(), 0);
  for (std::size_t k = 0; k < bn_layers.size(); ++k) {
    slot[bn_layers[k]] = k;
    const auto channels = std::get<BatchNormLayer>(model.layers[bn_layers[k]]).params.channels();
    plan.layers.push_back({bn_layers[k], std::vector<bool>(static_cast<std::size_t>(channels), true), {}});
  }
  std::size_t listed = 0;
  for (const auto& lp : plan.layers) listed += lp.keep.size();
  if (listed != scales.size()) throw ArgumentError("scale list does not match the model's batchnorm channels");

  // Removed entries per layer, ascending by magnitude.
  std::vector<std::vector<ScaleEntry>> victims(plan.layers.size());
  for (Index k = 0; k < plan.requested; ++k) {
    const ScaleEntry& e = scales[static_cast<std::size_t>(k)];
    auto& lp = plan.layers[slot.at(e.layer)];
    if (lp.layer != e.layer || e.channel < 0 || e.channel >= lp.original()) {
      throw ArgumentError("scale entry does not name a batchnorm channel of this model");
    }
    lp.keep[static_cast<std::size_t>(e.channel)] = false;
    victims[slot[e.layer]].push_back(e);
  }
  auto restore_largest = [&](std::size_t k) {
    plan.layers[k].keep[static_cast<std::size_t>(victims[k].back().channel)] = true;
    victims[k].pop_back();
  };
  for (std::size_t k = 0; k < plan.layers.size(); ++k) {
    if (plan.layers[k].survivors() == 0) {
      restore_largest(k);
      ++plan.guard_restored;
    }
  }
  if (method == PruneMethod::kRegular) {
    for (std::size_t k = 0; k < plan.layers.size(); ++k) {
      auto& lp = plan.layers[k];
      const Index n = lp.original();
      Index target = (lp.survivors() + 7) / 8 * 8;
      if (target > n) target = n < 8 ? n : n / 8 * 8;
      while (lp.survivors() < target) restore_largest(k);
      for (auto it = scales.begin(); lp.survivors() > target; ++it) {
        if (it->layer == lp.layer && lp.keep[static_cast<std::size_t>(it->channel)]) {
          lp.keep[static_cast<std::size_t>(it->channel)] = false;
        }
      }
    }
  }

  for (std::size_t k = 0; k < plan.layers.size(); ++k) {
    auto& lp = plan.layers[k];
    const auto& bn = std::get<BatchNormLayer>(model.layers[lp.layer]).params;
    const bool relu = find_consumer(model, lp.layer).relu;
    for (Index c = 0; c < lp.original(); ++c) {
      if (lp.keep[static_cast<std::size_t>(c)]) continue;
      const double shift = bn.shift[c];
      lp.compensation.push_back(relu ? std::max(shift, 0.0) : shift);
      plan.threshold = std::max(plan.threshold, std::abs(static_cast<double>(bn.scale[c])));
      ++plan.removed;
    }
  }
  plan.realized_fraction = static_cast<double>(plan.removed) / static_cast<double>(plan.total_channels);
  return plan;
}

ModelGraph apply_prune(const ModelGraph& model, const PrunePlan& plan) {
  model.validate();
  if (model_hash(model) != plan.model_hash) throw ArgumentError("prune plan was built for a different model");
  ModelGraph out = model;
  auto layers = plan.layers;
  std::sort(layers.begin(), layers.end(), [](const LayerPlan& a, const LayerPlan& b) { return a.layer < b.layer; });

  for (const LayerPlan& lp : layers) {
    if (lp.layer == 0 || lp.layer >= out.layers.size() || kind_of(out.layers[lp.layer]) != LayerKind::kBatchNorm) {
      throw ArgumentError("prune plan names layer " + std::to_string(lp.layer) + ", which is not a batchnorm");
    }
    auto& bn = std::get<BatchNormLayer>(out.layers[lp.layer]).params;
    if (lp.original() != bn.channels()) throw ArgumentError("prune plan keep mask does not match layer channels");
    const auto keep = kept_indices(lp.keep);
    if (keep.empty()) throw ArgumentError("prune plan would empty layer " + std::to_string(lp.layer));
    if (keep.size() == lp.keep.size()) continue;
    std::vector<Index> removed;
    for (Index c = 0; c < lp.original(); ++c)
      if (!lp.keep[static_cast<std::size_t>(c)]) removed.push_back(c);
    if (lp.compensation.size() != removed.size()) throw ArgumentError("prune plan compensation count mismatch");

    auto& conv = std::get<ConvLayer>(out.layers[lp.layer - 1]).params;
    conv.weight = select_dim(conv.weight, 0, keep);
    conv.bias = select(conv.bias, keep);
    bn.scale = select(bn.scale, keep);
    bn.shift = select(bn.shift, keep);
    bn.running_mean = select(bn.running_mean, keep);
    bn.running_var = select(bn.running_var, keep);

    const Consumer consumer = find_consumer(out, lp.layer);
    for (std::size_t i = lp.layer + 1; i < consumer.layer; ++i) set_channels(out.layers[i], static_cast<Index>(keep.size()));
    if (auto* next = std::get_if<ConvLayer>(&out.layers[consumer.layer])) {
      auto& p = next->params;
      const Index plane = p.weight.dim(2) * p.weight.dim(3);
      for (Index j = 0; j < p.weight.dim(0); ++j) {
        double add = 0.0;
        for (std::size_t r = 0; r < removed.size(); ++r) {
          const double kernel_sum =
              p.weight.array().segment((j * p.weight.dim(1) + removed[r]) * plane, plane).cast<double>().sum();
          add += lp.compensation[r] * kernel_sum;
        }
        p.bias[j] = static_cast<float>(p.bias[j] + add);
      }
      p.weight = select_dim(p.weight, 1, keep);
    } else {
      auto& p = std::get<LinearLayer>(out.layers[consumer.layer]).params;
      const Index n_out = p.weight.dim(0), n_in = p.weight.dim(1);
      const auto w = p.weight.matrix(n_out, n_in);
      for (Index j = 0; j < n_out; ++j) {
        double add = 0.0;
        for (std::size_t r = 0; r < removed.size(); ++r) add += lp.compensation[r] * w(j, removed[r]);
        p.bias[j] = static_cast<float>(p.bias[j] + add);
      }
      Tensorf reduced({n_out, static_cast<Index>(keep.size())});
      auto rw = reduced.matrix(n_out, static_cast<Index>(keep.size()));
      for (std::size_t k = 0; k < keep.size(); ++k) rw.col(static_cast<Index>(k)) = w.col(keep[k]);
      p.weight = std::move(reduced);
    }
  }
  out.validate();
  return out;
}

TrainResult finetune(const ModelGraph& model, const LabeledImages& data, TrainConfig config,
                     const BatchTransform& transform) {
  config.l1_coeff = 0.0;
  config.validate(true);
  if (config.epochs == 0) return {model, {}, {}};
  return train(model, data, config, transform);
}

double compression_ratio(std::uintmax_t before_bytes, std::uintmax_t after_bytes) {
  if (before_bytes == 0) throw ArgumentError("compression ratio needs a nonempty original model");
  return static_cast<double>(after_bytes) / static_cast<double>(before_bytes);
}

CompressionReport compression_report(const ModelGraph& before, const std::filesystem::path& before_file,
                                     const ModelGraph& after, const std::filesystem::path& after_file) {
  if (before.layers.size() != after.layers.size()) throw ArgumentError("models differ in layer count");
  CompressionReport r;
  r.before = {count_params(before), count_flops(before, before.input), model_volume(before_file)};
  r.after = {count_params(after), count_flops(after, after.input), model_volume(after_file)};
  r.ratio = compression_ratio(r.before.bytes, r.after.bytes);
  for (std::size_t i : before.batchnorm_layers()) {
    r.channels.push_back({i, out_channels(before.layers[i]), out_channels(after.layers[i])});
  }
  return r;
}

void write_plan(std::ostream& out, const PrunePlan& plan) {
  const auto old = out.precision(9);
  out << "method = " << to_string(plan.method) << "\nratio = " << plan.ratio << "\nthreshold = " << plan.threshold
      << "\ntotal_channels = " << plan.total_channels << "\nrequested = " << plan.requested
      << "\nguard_restored = " << plan.guard_restored << "\nremoved = " << plan.removed
      << "\nrealized_fraction = " << plan.realized_fraction << "\nmodel_hash = " << std::hex << std::setw(8)
      << std::setfill('0') << plan.model_hash << std::dec << std::setfill(' ') << '\n';
  for (const auto& lp : plan.layers) {
    out << "\n[layer " << lp.layer << "]\nchannels = " << lp.original() << "\nsurvivors = " << lp.survivors()
        << "\nkeep = ";
    for (bool k : lp.keep) out << (k ? '1' : '0');
    out << "\ncompensation =";
    for (double v : lp.compensation) out << ' ' << v;
    out << '\n';
  }
  out.precision(old);
}

void write_report(std::ostream& out, const CompressionReport& report) {
  out << "metric,before,after\n"
      << "params," << report.before.params << ',' << report.after.params << '\n'
      << "flops," << report.before.flops << ',' << report.after.flops << '\n'
      << "bytes," << report.before.bytes << ',' << report.after.bytes << '\n'
      << std::fixed << std::setprecision(2) << "compressing_ratio_percent,100.00," << report.ratio * 100.0 << '\n'
      << std::defaultfloat;
  for (const auto& row : report.channels) {
    out << "channels_layer_" << row.layer << ',' << row.before << ',' << row.after << '\n';
  }
}

}  // namespace slim
