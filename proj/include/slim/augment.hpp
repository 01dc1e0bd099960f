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
#include <random>
#include <span>
#include <vector>

#include "slim/image.hpp"

namespace slim {

/// Hue, saturation and value planes, each in [0, 1]; hue is cyclic in [0, 1).
struct HsvImage {
  Index height = 0;
  Index width = 0;
  Vector<float> hue;
  Vector<float> saturation;
  Vector<float> value;
};

HsvImage rgb_to_hsv(const Image& image);
Image hsv_to_rgb(const HsvImage& hsv);

enum class HsvComponent { kExposure, kSaturation, kHue };

/// Multiplies V (exposure), S (saturation) or H (hue, wrapped modulo 1) by
/// `factor`, clamping S and V to [0, 1]. The other two planes are untouched.
void adjust_hsv_planes(HsvImage& hsv, HsvComponent component, double factor);
Image adjust_hsv(const Image& image, HsvComponent component, double factor);

/// Rotation about the image center with bilinear sampling; samples that
/// fall outside the source are black.
Image rotate(const Image& image, double angle_deg);

struct RotatedImage {
  Image image;
  double angle_deg = 0.0;
};
/// Angle drawn uniformly from [-range, +range] degrees.
RotatedImage random_rotate(const Image& image, double angle_range_deg, std::mt19937_64& rng);

/// Bilinear resize with half-pixel centers and edge replication.
Image resize_bilinear(const Image& image, Index height, Index width);

/// Aspect-preserving resize into a size x size canvas, centered, black bars.
Image letterbox(const Image& image, Index size);

struct ResizedBatch {
  std::vector<Image> images;
  Index size = 0;
};
/// One size drawn uniformly from `sizes` for the whole batch.
ResizedBatch random_shape_resize(std::span<const Image> batch, std::span<const Index> sizes, std::mt19937_64& rng);

struct AugmentConfig {
  double exposure_factor = 1.5;
  double saturation_factor = 1.5;
  double hue_factor = 0.1;
  double angle_range_deg = 5.0;
  std::vector<Index> scale_set{320, 352, 384, 416, 448, 480, 512};
  bool shape = false;
  bool rotate = false;
  bool saturation = false;
  bool exposure = false;
  bool hue = false;
  std::uint64_t seed = 0;

  void validate() const;
  bool any_enabled() const { return shape || rotate || saturation || exposure || hue; }
};

/// Applies the enabled methods in the fixed order
/// shape -> rotate -> saturation -> exposure -> hue.
/// Each color method applies its exact factor to an image with probability
/// 1/2.
///
/// Output is a pure function of (config, batch_index, input): the batch size
/// draw uses a stream keyed by (seed, batch_index) and each image gets its
/// own stream keyed by (seed, batch_index, image index).
class Augmenter {
 public:
  explicit Augmenter(AugmentConfig config);

  std::vector<Image> operator()(std::span<const Image> batch, std::uint64_t batch_index) const;

  const AugmentConfig& config() const noexcept { return config_; }

 private:
  AugmentConfig config_;
};

Augmenter make_pipeline(const AugmentConfig& config);

/// Independent stream for (seed, a, b).
std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

}  // namespace slim
