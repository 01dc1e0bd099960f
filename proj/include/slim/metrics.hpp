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

#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "slim/dataset.hpp"
#include "slim/model.hpp"

namespace slim {

/// Argmax-of-logits accuracy with eval-mode forward, in batches of `batch`.
double classify_accuracy(const ModelGraph& model, const LabeledImages& data, Index batch = 64);

/// Eval-mode logits for every image, N x classes.
Tensorf predict_logits(const ModelGraph& model, const LabeledImages& data, Index batch = 64);

double iou(const Box& a, const Box& b);

struct MapResult {
  double map = 0;                 // mean over classes with ground truth
  std::map<int, double> class_ap;  // classes with ground truth only
};

/// Detection mAP at `iou_threshold`. Per class, predictions are ranked by
/// confidence (ties keep input order: image order, then list order), each
/// matched greedily to the highest-IoU unmatched ground truth of its image
/// with IoU >= threshold. AP is the area under the all-point interpolated
/// precision envelope. Predictions of classes without ground truth are ignored.
MapResult mean_average_precision(std::span<const std::vector<Box>> predictions,
                                 std::span<const std::vector<Box>> ground_truth, double iou_threshold = 0.5);

/// One predicted box per image: the annotated box, labeled with the argmax
/// class and its softmax probability as confidence.
std::vector<std::vector<Box>> classifier_detections(const ModelGraph& model, const LabeledImages& data);
std::vector<std::vector<Box>> ground_truth_boxes(const LabeledImages& data);

struct LatencyStats {
  std::vector<double> samples;  // seconds per single-image forward
  double mean = 0;
  double stddev = 0;
  double min = 0;
  double max = 0;
  int warmup = 0;
  int threads = 1;
};

/// Times `reps` batch-1 eval forwards on a fixed random image after `warmup`
/// untimed ones, on the monotonic clock.
LatencyStats measure_latency(const ModelGraph& model, const InputShape& input, int reps, int warmup = 3);

/// On-disk byte size of `path`.
std::uintmax_t model_volume(const std::filesystem::path& path);

}  // namespace slim
