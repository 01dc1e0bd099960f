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
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "slim/dataset.hpp"
#include "slim/model.hpp"

namespace slim {

enum class LrSchedule { kConstant, kStepDecay };

struct TrainConfig {
  int epochs = 10;
  Index batch_size = 32;
  double lr = 0.05;
  double momentum = 0.9;
  double l1_coeff = 0.0;  // penalty weight on sum |batchnorm scale|
  std::uint64_t seed = 0;
  LrSchedule schedule = LrSchedule::kConstant;
  int step_epochs = 5;       // step decay period
  double decay_factor = 0.1;  // step decay multiplier

  /// `allow_zero_epochs` admits the 0-epoch no-op used by fine-tuning.
  void validate(bool allow_zero_epochs = false) const;
  double learning_rate(int epoch) const;
};

struct StepRecord {
  int epoch = 0;
  Index step = 0;
  double task_loss = 0;
  double penalty = 0;  // l1_coeff * sum |scale| at the forward pass
  double total_loss = 0;
};

struct EpochMetrics {
  int epoch = 0;
  double task_loss = 0;  // means over the epoch's steps
  double penalty = 0;
  double total_loss = 0;
  double accuracy = 0;       // training-batch accuracy
  double sum_abs_scale = 0;  // at epoch end
};

struct TrainResult {
  ModelGraph model;
  std::vector<EpochMetrics> epochs;
  std::vector<StepRecord> steps;
};

/// Per-batch image transform (augmentation), called with the batch's images
/// and a global batch counter.
using BatchTransform = std::function<std::vector<Image>(std::span<const Image>, std::uint64_t)>;

/// Sample order for `epoch`: a permutation of [0, n) drawn from the run seed.
std::vector<std::size_t> epoch_order(std::uint64_t seed, int epoch, std::size_t n);

/// Mini-batch SGD on softmax cross-entropy + l1_coeff * sum |scale| over all
/// batchnorm channels. The last partial batch of each epoch is dropped.
/// Deterministic given the config (and transform).
TrainResult train(ModelGraph model, const LabeledImages& data, const TrainConfig& config,
                  const BatchTransform& transform = {});

struct ScaleHistogram {
  std::vector<double> edges;
  std::vector<std::int64_t> counts;  // counts[i] covers [edges[i], edges[i+1])
  std::int64_t underflow = 0;        // |scale| < edges.front()
  std::int64_t overflow = 0;         // |scale| >= edges.back()

  std::int64_t total() const;
};

/// Histogram of |scale| over every batchnorm channel.
ScaleHistogram scale_histogram(const ModelGraph& model, std::span<const double> edges);

/// All |scale| values, layer by layer.
std::vector<double> abs_bn_scales(const ModelGraph& model);
double median_abs_scale(const ModelGraph& model);
/// Fraction of batchnorm channels with |scale| < threshold.
double fraction_below(const ModelGraph& model, double threshold);

/// CSV with header epoch,task_loss,penalty,total_loss,accuracy,sum_abs_scale.
void write_metrics_csv(std::ostream& out, std::span<const EpochMetrics> epochs);

}  // namespace slim
