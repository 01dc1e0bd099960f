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
#include <iosfwd>
#include <string>
#include <vector>

#include "slim/dataset.hpp"
#include "slim/model.hpp"
#include "slim/trainer.hpp"

namespace slim {

struct ScaleEntry {
  std::size_t layer = 0;  // model layer index of the batchnorm
  Index channel = 0;
  double magnitude = 0;   // |scale|

  friend bool operator==(const ScaleEntry&, const ScaleEntry&) = default;
};

/// Every batchnorm channel in the network, ascending by magnitude; ties keep
/// (layer, channel) order.
std::vector<ScaleEntry> collect_scales(const ModelGraph& model);

enum class PruneMethod { kNormal, kRegular };

const char* to_string(PruneMethod method);
PruneMethod parse_prune_method(const std::string& text);

struct LayerPlan {
  std::size_t layer = 0;  // batchnorm layer index
  std::vector<bool> keep;
  /// Post-activation constant folded into the consumer per removed channel,
  /// in channel order.
  std::vector<double> compensation;

  Index original() const { return static_cast<Index>(keep.size()); }
  Index survivors() const;
};

struct PrunePlan {
  PruneMethod method = PruneMethod::kNormal;
  double ratio = 0;
  double threshold = 0;  // largest removed magnitude, 0 for an empty plan
  std::vector<LayerPlan> layers;
  Index total_channels = 0;
  Index requested = 0;       // floor(ratio * total)
  Index guard_restored = 0;  // channels restored so no layer empties
  Index removed = 0;
  double realized_fraction = 0;  // removed / total
  std::uint32_t model_hash = 0;
};

/// Marks the floor(ratio * total) smallest-magnitude channels network-wide.
/// A layer that would lose every channel gets its largest-magnitude channel
/// back. Regular mode then restores the largest-magnitude removed channels of
/// each layer until its survivor count is a multiple of 8. When that would
/// exceed the original count, a layer of 8 or more channels keeps the largest
/// multiple of 8 that fits (dropping its smallest survivors) and a smaller
/// layer stays whole.
PrunePlan plan_prune(const ModelGraph& model, double ratio, PruneMethod method);
PrunePlan plan_prune(const std::vector<ScaleEntry>& scales, double ratio, PruneMethod method,
                     const ModelGraph& model);

/// Removes every unkept channel: the producing conv's output row and bias,
/// the batchnorm entries and the consumer's input slice. The consumer (the
/// next conv, or the linear layer after global pooling) absorbs the removed
/// channel's constant output act(shift) into its bias, where act is relu when
/// a relu lies between and identity otherwise.
ModelGraph apply_prune(const ModelGraph& model, const PrunePlan& plan);

/// Training with the sparsity penalty off. Zero epochs returns the model as is.
TrainResult finetune(const ModelGraph& model, const LabeledImages& data, TrainConfig config,
                     const BatchTransform& transform = {});

struct ModelStats {
  std::int64_t params = 0;
  std::int64_t flops = 0;
  std::uintmax_t bytes = 0;
};

struct ChannelRow {
  std::size_t layer = 0;
  Index before = 0;
  Index after = 0;
};

struct CompressionReport {
  ModelStats before;
  ModelStats after;
  double ratio = 1.0;  // after.bytes / before.bytes
  std::vector<ChannelRow> channels;
};

double compression_ratio(std::uintmax_t before_bytes, std::uintmax_t after_bytes);

/// Layers are matched by position, so `after` must be a pruned `before`.
CompressionReport compression_report(const ModelGraph& before, const std::filesystem::path& before_file,
                                     const ModelGraph& after, const std::filesystem::path& after_file);

/// Key-value text: plan scalars, then one [layer N] section per batchnorm
/// with its keep mask as a 0/1 string and the compensation constants.
void write_plan(std::ostream& out, const PrunePlan& plan);
void write_report(std::ostream& out, const CompressionReport& report);

}  // namespace slim
