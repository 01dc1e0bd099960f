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
#include <span>
#include <vector>

#include "slim/image.hpp"

namespace slim {

/// Axis-aligned box in pixel coordinates. `confidence` is meaningful for
/// predictions only.
struct Box {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
  int class_id = 0;
  double confidence = 1.0;

  double area() const { return (x_max - x_min) * (y_max - y_min); }
  bool valid() const { return x_max > x_min && y_max > y_min; }
};

/// One labeled object per image: `labels[i]` is the class of `boxes[i]`.
struct LabeledImages {
  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<Box> boxes;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
};

struct SyntheticDataset {
  LabeledImages train;
  LabeledImages test;
  int num_classes = 0;
  Index image_size = 0;
};

/// Nuisance ranges for rendering: object half-extent as a fraction of the
/// image side, and the scene brightness multiplier.
struct RenderOptions {
  double radius_min = 0.24, radius_max = 0.36;
  double light_min = 0.85, light_max = 1.10;

  void validate() const;
};

/// Largest class count the generator supports (shape x color combinations).
int max_synthetic_classes();

/// Class-balanced images of one colored geometric shape on a textured
/// background. Class k is shape (k mod 5) painted in color (k div 5); object
/// size, position and scene brightness vary per image. Deterministic in `seed`.
SyntheticDataset generate_dataset(std::uint64_t seed, Index n_train, Index n_test, Index image_size, int n_classes,
                                  const RenderOptions& train_options = {}, const RenderOptions& test_options = {});

/// Directory layout: dataset.cfg (classes, image_size), and train/ and test/
/// subdirectories each holding NNNNNN.ppm images plus annotations.txt with
/// one "image_id class x_min y_min x_max y_max" line per object.
void write_dataset(const SyntheticDataset& dataset, const std::filesystem::path& dir);
SyntheticDataset read_dataset(const std::filesystem::path& dir);

/// Images at `indices` stacked into an N x 3 x H x W tensor.
Tensorf batch_tensor(const LabeledImages& data, std::span<const std::size_t> indices);

}  // namespace slim
