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

#include "slim/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "slim/errors.hpp"
#include "slim/layers.hpp"
#include "slim/sgd.hpp"

namespace slim {

void TrainConfig::validate(bool allow_zero_epochs) const {
  if (epochs < (allow_zero_epochs ? 0 : 1)) throw ConfigError("epochs must be >= 1");
  if (batch_size < 2) throw ConfigError("batch size must be >= 2 for batchnorm statistics");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(l1_coeff >= 0.0) || !std::isfinite(l1_coeff)) throw ConfigError("l1 coefficient must be finite and >= 0");
  if (schedule == LrSchedule::kStepDecay && (step_epochs < 1 || !(decay_factor > 0.0))) {
    throw ConfigError("step decay needs step_epochs >= 1 and a positive decay factor");
  }
}

double TrainConfig::learning_rate(int epoch) const {
  if (schedule == LrSchedule::kConstant) return lr;
  return lr * std::pow(decay_factor, epoch / step_epochs);
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, int epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

TrainResult train(ModelGraph model, const LabeledImages& data, const TrainConfig& config,
                  const BatchTransform& transform) {
  config.validate(true);
  model.validate();
  if (data.empty()) throw ArgumentError("training set is empty");
  if (data.labels.size() != data.size()) throw ShapeError("label count != image count");
  const auto n = data.size();
  const auto batch = static_cast<std::size_t>(config.batch_size);
  if (config.epochs > 0 && n < batch) {
    throw ArgumentError("training set of " + std::to_string(n) + " images is smaller than one batch");
  }

  TrainResult result;
  auto params = parameter_views(model);
  std::vector<Vector<float>> velocity;
  for (const auto& p : params) velocity.push_back(Vector<float>::Zero(p.size()));
  const auto l1 = static_cast<float>(config.l1_coeff);
  std::uint64_t batch_counter = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = epoch_order(config.seed, epoch, n);
    const auto lr = static_cast<float>(config.learning_rate(epoch));
    const auto momentum = static_cast<float>(config.momentum);
    double task_sum = 0, penalty_sum = 0;
    std::size_t correct = 0, seen = 0;
    Index step = 0;
    for (std::size_t start = 0; start + batch <= n; start += batch, ++step, ++batch_counter) {
      const std::span<const std::size_t> idx(order.data() + start, batch);
      std::vector<int> labels;
      labels.reserve(batch);
      for (std::size_t i : idx) labels.push_back(data.labels[i]);
      Tensorf x;
      if (transform) {
        std::vector<Image> picked;
        picked.reserve(batch);
        for (std::size_t i : idx) picked.push_back(data.images[i]);
        x = images_to_tensor(transform(picked, batch_counter));
      } else {
        x = batch_tensor(data, idx);
      }

      const double penalty = config.l1_coeff * sum_abs_bn_scale(model);
      ForwardTrace trace = forward_train(model, x);
      const auto ce = softmax_cross_entropy(trace.logits, std::span<const int>(labels));
      const double total = static_cast<double>(ce.loss) + penalty;
      if (!std::isfinite(total)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + " step " + std::to_string(step) +
                            " (task " + std::to_string(ce.loss) + ", penalty " + std::to_string(penalty) +
                            "); lower the learning rate");
      }
      result.steps.push_back({epoch, step, ce.loss, penalty, total});
      task_sum += ce.loss;
      penalty_sum += penalty;
      for (std::size_t i = 0; i < batch; ++i) {
        Index arg = 0;
        ce.probabilities.matrix(static_cast<Index>(batch), ce.probabilities.dim(1))
            .row(static_cast<Index>(i))
            .maxCoeff(&arg);
        correct += arg == labels[i];
      }
      seen += batch;

      const auto grads = backward(model, trace, ce.gradient, l1);
      for (std::size_t k = 0; k < params.size(); ++k) sgd_step<float>(params[k], grads[k], velocity[k], lr, momentum);
    }
    const double steps = std::max<double>(1.0, static_cast<double>(step));
    result.epochs.push_back({epoch, task_sum / steps, penalty_sum / steps, (task_sum + penalty_sum) / steps,
                             seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0,
                             sum_abs_bn_scale(model)});
  }
  result.model = std::move(model);
  return result;
}

std::int64_t ScaleHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0}) + underflow + overflow;
}

std::vector<double> abs_bn_scales(const ModelGraph& model) {
  std::vector<double> out;
  for (const Layer& layer : model.layers) {
    if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) {
      for (Index c = 0; c < bn->params.channels(); ++c) out.push_back(std::abs(static_cast<double>(bn->params.scale[c])));
    }
  }
  return out;
}

ScaleHistogram scale_histogram(const ModelGraph& model, std::span<const double> edges) {
  if (edges.size() < 2) throw ArgumentError("histogram needs at least two edges");
  if (!std::is_sorted(edges.begin(), edges.end()) ||
      std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
    throw ArgumentError("histogram edges must be strictly increasing");
  }
  const auto values = abs_bn_scales(model);
  if (values.empty()) throw ArgumentError("model has no batchnorm layers");
  ScaleHistogram h{{edges.begin(), edges.end()}, std::vector<std::int64_t>(edges.size() - 1, 0), 0, 0};
  for (double v : values) {
    if (v < edges.front()) {
      ++h.underflow;
    } else if (v >= edges.back()) {
      ++h.overflow;
    } else {
      const auto bin = std::upper_bound(edges.begin(), edges.end(), v) - edges.begin() - 1;
      ++h.counts[static_cast<std::size_t>(bin)];
    }
  }
  return h;
}

double median_abs_scale(const ModelGraph& model) {
  auto values = abs_bn_scales(model);
  if (values.empty()) throw ArgumentError("model has no batchnorm layers");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

double fraction_below(const ModelGraph& model, double threshold) {
  const auto values = abs_bn_scales(model);
  if (values.empty()) throw ArgumentError("model has no batchnorm layers");
  return static_cast<double>(std::count_if(values.begin(), values.end(), [&](double v) { return v < threshold; })) /
         static_cast<double>(values.size());
}

void write_metrics_csv(std::ostream& out, std::span<const EpochMetrics> epochs) {
  out << "epoch,task_loss,penalty,total_loss,accuracy,sum_abs_scale\n";
  const auto old = out.precision(9);
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.task_loss << ',' << e.penalty << ',' << e.total_loss << ',' << e.accuracy << ','
        << e.sum_abs_scale << '\n';
  }
  out.precision(old);
}

}  // namespace slim
