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

#include "slim/tensor.hpp"

namespace slim {

/// RGB image with interleaved channels (row, column, channel) and values in [0, 1].
class Image {
 public:
  static constexpr Index kChannels = 3;

  Image() = default;
  Image(Index height, Index width);  // black

  Index height() const noexcept { return height_; }
  Index width() const noexcept { return width_; }
  bool empty() const noexcept { return pixels_.size() == 0; }

  float& at(Index y, Index x, Index c) { return pixels_[(y * width_ + x) * kChannels + c]; }
  float at(Index y, Index x, Index c) const { return pixels_[(y * width_ + x) * kChannels + c]; }

  Vector<float>& pixels() noexcept { return pixels_; }
  const Vector<float>& pixels() const noexcept { return pixels_; }

  void clamp() { pixels_ = pixels_.max(0.0f).min(1.0f); }

  friend bool operator==(const Image& a, const Image& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ && (a.pixels_ == b.pixels_).all();
  }

 private:
  Index height_ = 0;
  Index width_ = 0;
  Vector<float> pixels_;
};

/// Binary 8-bit PPM (P6). Values are quantized with round(v * 255).
std::vector<std::uint8_t> encode_ppm(const Image& image);
Image decode_ppm(std::span<const std::uint8_t> bytes);
void write_ppm(const Image& image, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

/// Stacks equally sized images into an N x 3 x H x W tensor.
Tensorf images_to_tensor(std::span<const Image> images);

}  // namespace slim
