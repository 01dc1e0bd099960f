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

#include "slim/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "slim/errors.hpp"
#include "slim/parallel.hpp"

namespace slim {

Tensorf predict_logits(const ModelGraph& model, const LabeledImages& data, Index batch) {
  if (data.empty()) throw ArgumentError("cannot evaluate on an empty dataset");
  if (batch < 1) throw ArgumentError("evaluation batch must be >= 1");
  const auto n = static_cast<Index>(data.size());
  Tensorf logits({n, model.num_classes});
  for (Index start = 0; start < n; start += batch) {
    const Index count = std::min(batch, n - start);
    std::vector<std::size_t> idx(static_cast<std::size_t>(count));
    std::iota(idx.begin(), idx.end(), static_cast<std::size_t>(start));
    const Tensorf out = forward(model, batch_tensor(data, idx));
    logits.array().segment(start * model.num_classes, count * model.num_classes) = out.array();
  }
  return logits;
}

double classify_accuracy(const ModelGraph& model, const LabeledImages& data, Index batch) {
  const Tensorf logits = predict_logits(model, data, batch);
  const auto n = static_cast<Index>(data.size());
  const auto m = logits.matrix(n, model.num_classes);
  std::size_t correct = 0;
  for (Index i = 0; i < n; ++i) {
    Index arg = 0;
    m.row(i).maxCoeff(&arg);
    correct += arg == data.labels[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

double iou(const Box& a, const Box& b) {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  const double inter = w * h;
  return inter / (a.area() + b.area() - inter);
}

MapResult mean_average_precision(std::span<const std::vector<Box>> predictions,
                                 std::span<const std::vector<Box>> ground_truth, double iou_threshold) {
  if (predictions.size() != ground_truth.size()) {
    throw ArgumentError("prediction and ground-truth image counts differ");
  }
  std::map<int, std::size_t> gt_count;
  for (const auto& image : ground_truth)
    for (const Box& b : image) ++gt_count[b.class_id];

  struct Ranked {
    double confidence;
    std::size_t image;
    const Box* box;
  };
  MapResult result;
  for (const auto& [cls, total] : gt_count) {
    std::vector<Ranked> ranked;
    for (std::size_t i = 0; i < predictions.size(); ++i)
      for (const Box& p : predictions[i])
        if (p.class_id == cls) ranked.push_back({p.confidence, i, &p});
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const Ranked& a, const Ranked& b) { return a.confidence > b.confidence; });

    std::vector<std::vector<char>> used(ground_truth.size());
    for (std::size_t i = 0; i < ground_truth.size(); ++i) used[i].assign(ground_truth[i].size(), 0);
    std::vector<double> precision, recall;
    std::size_t tp = 0;
    for (std::size_t k = 0; k < ranked.size(); ++k) {
      const auto& gts = ground_truth[ranked[k].image];
      double best = -1.0;
      std::size_t best_j = 0;
      for (std::size_t j = 0; j < gts.size(); ++j) {
        if (gts[j].class_id != cls || used[ranked[k].image][j]) continue;
        const double o = iou(*ranked[k].box, gts[j]);
        if (o > best) best = o, best_j = j;
      }
      if (best >= iou_threshold) {
        used[ranked[k].image][best_j] = 1;
        ++tp;
      }
      precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
      recall.push_back(static_cast<double>(tp) / static_cast<double>(total));
    }
    // Monotone envelope from the right, then area over recall steps.
    for (std::size_t k = precision.size(); k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
    double ap = 0.0, prev_recall = 0.0;
    for (std::size_t k = 0; k < precision.size(); ++k) {
      ap += (recall[k] - prev_recall) * precision[k];
      prev_recall = recall[k];
    }
    result.class_ap[cls] = ap;
  }
  if (!result.class_ap.empty()) {
    double sum = 0.0;
    for (const auto& [cls, ap] : result.class_ap) sum += ap;
    result.map = sum / static_cast<double>(result.class_ap.size());
  }
  return result;
}

std::vector<std::vector<Box>> classifier_detections(const ModelGraph& model, const LabeledImages& data) {
  const Tensorf logits = predict_logits(model, data);
  const auto n = static_cast<Index>(data.size());
  const auto m = logits.matrix(n, model.num_classes);
  std::vector<std::vector<Box>> out(data.size());
  for (Index i = 0; i < n; ++i) {
    const Eigen::ArrayXd row = m.row(i).cast<double>().array();
    const Eigen::ArrayXd e = (row - row.maxCoeff()).exp();
    Index arg = 0;
    e.maxCoeff(&arg);
    Box b = data.boxes.at(static_cast<std::size_t>(i));
    b.class_id = static_cast<int>(arg);
    b.confidence = e[arg] / e.sum();
    out[static_cast<std::size_t>(i)].push_back(b);
  }
  return out;
}

std::vector<std::vector<Box>> ground_truth_boxes(const LabeledImages& data) {
  std::vector<std::vector<Box>> out;
  out.reserve(data.size());
  for (const Box& b : data.boxes) out.push_back({b});
  return out;
}

LatencyStats measure_latency(const ModelGraph& model, const InputShape& input, int reps, int warmup) {
  if (reps < 1) throw ArgumentError("latency needs reps >= 1");
  if (warmup < 0) throw ArgumentError("warmup must be >= 0");
  std::mt19937_64 rng(0x1a7e);
  const Tensorf x = Tensorf::random_uniform({1, input.channels, input.height, input.width}, rng, 0.0f, 1.0f);
  LatencyStats stats;
  stats.warmup = warmup;
  stats.threads = num_threads();
  for (int i = 0; i < warmup; ++i) (void)forward(model, x);
  using clock = std::chrono::steady_clock;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = clock::now();
    const Tensorf out = forward(model, x);
    const auto t1 = clock::now();
    if (!out.all_finite()) throw Error("non-finite model output during latency measurement");
    stats.samples.push_back(std::max(std::chrono::duration<double>(t1 - t0).count(), 1e-9));
  }
  const Eigen::Map<const Eigen::ArrayXd> s(stats.samples.data(), reps);
  stats.min = s.minCoeff();
  stats.max = s.maxCoeff();
  stats.mean = std::clamp(s.mean(), stats.min, stats.max);
  stats.stddev = reps > 1 ? std::sqrt((s - stats.mean).square().sum() / (reps - 1)) : 0.0;
  return stats;
}

std::uintmax_t model_volume(const std::filesystem::path& path) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat " + path.string() + ": " + ec.message());
  return size;
}

}  // namespace slim
