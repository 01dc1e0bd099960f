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

#include "slim/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "slim/errors.hpp"

namespace slim {

HsvImage rgb_to_hsv(const Image& image) {
  const Index n = image.height() * image.width();
  HsvImage hsv{image.height(), image.width(), Vector<float>(n), Vector<float>(n), Vector<float>(n)};
  for (Index i = 0; i < n; ++i) {
    const double r = image.pixels()[3 * i], g = image.pixels()[3 * i + 1], b = image.pixels()[3 * i + 2];
    const double hi = std::max({r, g, b}), lo = std::min({r, g, b}), delta = hi - lo;
    double h = 0.0;
    if (delta > 0.0) {
      if (hi == r) {
        h = (g - b) / delta;
      } else if (hi == g) {
        h = (b - r) / delta + 2.0;
      } else {
        h = (r - g) / delta + 4.0;
      }
      h /= 6.0;
      if (h < 0.0) h += 1.0;
      if (h >= 1.0) h -= 1.0;
    }
    hsv.hue[i] = static_cast<float>(h);
    hsv.saturation[i] = static_cast<float>(hi > 0.0 ? delta / hi : 0.0);
    hsv.value[i] = static_cast<float>(hi);
  }
  return hsv;
}

Image hsv_to_rgb(const HsvImage& hsv) {
  Image image(hsv.height, hsv.width);
  const Index n = hsv.height * hsv.width;
  for (Index i = 0; i < n; ++i) {
    const double s = hsv.saturation[i], v = hsv.value[i];
    const double h6 = static_cast<double>(hsv.hue[i]) * 6.0;
    const double sector = std::floor(h6);
    const double f = h6 - sector;
    const double p = v * (1.0 - s), q = v * (1.0 - s * f), t = v * (1.0 - s * (1.0 - f));
    double r = v, g = v, b = v;
    switch (static_cast<int>(sector) % 6) {
      case 0: r = v, g = t, b = p; break;
      case 1: r = q, g = v, b = p; break;
      case 2: r = p, g = v, b = t; break;
      case 3: r = p, g = q, b = v; break;
      case 4: r = t, g = p, b = v; break;
      default: r = v, g = p, b = q; break;
    }
    image.pixels()[3 * i] = static_cast<float>(r);
    image.pixels()[3 * i + 1] = static_cast<float>(g);
    image.pixels()[3 * i + 2] = static_cast<float>(b);
  }
  image.clamp();
  return image;
}

void adjust_hsv_planes(HsvImage& hsv, HsvComponent component, double factor) {
  if (!(factor > 0.0)) throw ArgumentError("hsv adjustment factor must be positive");
  const auto f = static_cast<float>(factor);
  switch (component) {
    case HsvComponent::kExposure: hsv.value = (hsv.value * f).min(1.0f).max(0.0f); break;
    case HsvComponent::kSaturation: hsv.saturation = (hsv.saturation * f).min(1.0f).max(0.0f); break;
    case HsvComponent::kHue:
      hsv.hue = hsv.hue.unaryExpr([factor](float h) {
        double scaled = std::fmod(static_cast<double>(h) * factor, 1.0);
        if (scaled < 0.0) scaled += 1.0;
        return static_cast<float>(scaled);
      });
      break;
  }
}

Image adjust_hsv(const Image& image, HsvComponent component, double factor) {
  HsvImage hsv = rgb_to_hsv(image);
  adjust_hsv_planes(hsv, component, factor);
  return hsv_to_rgb(hsv);
}

namespace {

// Bilinear sample with black outside the frame.
float sample_black(const Image& img, double y, double x, Index c) {
  const double fy = std::floor(y), fx = std::floor(x);
  const auto y0 = static_cast<Index>(fy), x0 = static_cast<Index>(fx);
  const double wy = y - fy, wx = x - fx;
  const auto px = [&](Index yy, Index xx) -> double {
    if (yy < 0 || yy >= img.height() || xx < 0 || xx >= img.width()) return 0.0;
    return img.at(yy, xx, c);
  };
  const double top = (1.0 - wx) * px(y0, x0) + (wx > 0.0 ? wx * px(y0, x0 + 1) : 0.0);
  if (wy == 0.0) return static_cast<float>(top);
  const double bottom = (1.0 - wx) * px(y0 + 1, x0) + (wx > 0.0 ? wx * px(y0 + 1, x0 + 1) : 0.0);
  return static_cast<float>((1.0 - wy) * top + wy * bottom);
}

}  // namespace

Image rotate(const Image& image, double angle_deg) {
  Image out(image.height(), image.width());
  const double theta = angle_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double cy = (image.height() - 1) / 2.0, cx = (image.width() - 1) / 2.0;
  for (Index y = 0; y < image.height(); ++y) {
    for (Index x = 0; x < image.width(); ++x) {
      // Inverse map: rotate the destination offset by -theta.
      const double dx = x - cx, dy = y - cy;
      const double sx = cx + cs * dx + sn * dy;
      const double sy = cy - sn * dx + cs * dy;
      for (Index c = 0; c < Image::kChannels; ++c) out.at(y, x, c) = sample_black(image, sy, sx, c);
    }
  }
  out.clamp();
  return out;
}

RotatedImage random_rotate(const Image& image, double angle_range_deg, std::mt19937_64& rng) {
  if (!(angle_range_deg >= 0.0)) throw ArgumentError("rotation range must be >= 0");
  std::uniform_real_distribution<double> dist(-angle_range_deg, angle_range_deg);
  const double angle = angle_range_deg > 0.0 ? dist(rng) : 0.0;
  return {rotate(image, angle), angle};
}

Image resize_bilinear(const Image& image, Index height, Index width) {
  Image out(height, width);
  const double sy = static_cast<double>(image.height()) / height;
  const double sx = static_cast<double>(image.width()) / width;
  const Index max_y = image.height() - 1, max_x = image.width() - 1;
  for (Index y = 0; y < height; ++y) {
    const double src_y = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(max_y));
    const auto y0 = static_cast<Index>(std::floor(src_y));
    const Index y1 = std::min(y0 + 1, max_y);
    const double wy = src_y - y0;
    for (Index x = 0; x < width; ++x) {
      const double src_x = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(max_x));
      const auto x0 = static_cast<Index>(std::floor(src_x));
      const Index x1 = std::min(x0 + 1, max_x);
      const double wx = src_x - x0;
      for (Index c = 0; c < Image::kChannels; ++c) {
        const double top = (1.0 - wx) * image.at(y0, x0, c) + wx * image.at(y0, x1, c);
        const double bottom = (1.0 - wx) * image.at(y1, x0, c) + wx * image.at(y1, x1, c);
        out.at(y, x, c) = static_cast<float>((1.0 - wy) * top + wy * bottom);
      }
    }
  }
  out.clamp();
  return out;
}

Image letterbox(const Image& image, Index size) {
  if (size < 1) throw ArgumentError("letterbox size must be positive");
  const Index h = image.height(), w = image.width();
  Index content_h = size, content_w = size;
  if (w >= h) {
    content_h = std::max<Index>(1, std::lround(static_cast<double>(h) * size / w));
  } else {
    content_w = std::max<Index>(1, std::lround(static_cast<double>(w) * size / h));
  }
  const Image content = (content_h == h && content_w == w) ? image : resize_bilinear(image, content_h, content_w);
  if (content_h == size && content_w == size) return content;
  Image out(size, size);
  const Index top = (size - content_h) / 2, left = (size - content_w) / 2;
  for (Index y = 0; y < content_h; ++y)
    for (Index x = 0; x < content_w; ++x)
      for (Index c = 0; c < Image::kChannels; ++c) out.at(top + y, left + x, c) = content.at(y, x, c);
  return out;
}

ResizedBatch random_shape_resize(std::span<const Image> batch, std::span<const Index> sizes, std::mt19937_64& rng) {
  if (sizes.empty()) throw ArgumentError("random shape resize needs a nonempty size set");
  std::uniform_int_distribution<std::size_t> pick(0, sizes.size() - 1);
  ResizedBatch out;
  out.size = sizes[pick(rng)];
  out.images.reserve(batch.size());
  for (const Image& img : batch) out.images.push_back(letterbox(img, out.size));
  return out;
}

void AugmentConfig::validate() const {
  if (!(exposure_factor > 0.0) || !(saturation_factor > 0.0) || !(hue_factor > 0.0)) {
    throw ConfigError("augment factors must be positive");
  }
  if (!(angle_range_deg >= 0.0)) throw ConfigError("augment angle range must be >= 0");
  if (scale_set.empty()) throw ConfigError("augment scale set must be nonempty");
  for (Index s : scale_set) {
    if (s < 1) throw ConfigError("augment scale set entries must be positive");
  }
}

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a),    static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b),    static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

Augmenter::Augmenter(AugmentConfig config) : config_(std::move(config)) { config_.validate(); }

std::vector<Image> Augmenter::operator()(std::span<const Image> batch, std::uint64_t batch_index) const {
  std::vector<Image> images(batch.begin(), batch.end());
  if (config_.shape) {
    auto rng = derived_rng(config_.seed, batch_index, ~std::uint64_t{0});
    images = random_shape_resize(images, config_.scale_set, rng).images;
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto rng = derived_rng(config_.seed, batch_index, i);
    Image& img = images[i];
    // Color methods fire on per-image coin flips, drawn whether or not a
    // method is enabled so every configuration sees the same flips.
    std::bernoulli_distribution coin(0.5);
    const bool sat = coin(rng), exp = coin(rng), hue = coin(rng);
    if (config_.rotate) img = random_rotate(img, config_.angle_range_deg, rng).image;
    if (config_.saturation && sat) img = adjust_hsv(img, HsvComponent::kSaturation, config_.saturation_factor);
    if (config_.exposure && exp) img = adjust_hsv(img, HsvComponent::kExposure, config_.exposure_factor);
    if (config_.hue && hue) img = adjust_hsv(img, HsvComponent::kHue, config_.hue_factor);
  }
  return images;
}

Augmenter make_pipeline(const AugmentConfig& config) { return Augmenter(config); }

}  // namespace slim
