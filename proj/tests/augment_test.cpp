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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "slim/augment.hpp"
#include "slim/errors.hpp"
#include "support.hpp"

namespace slim {
namespace {

Image random_image(Index h, Index w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  Image img(h, w);
  for (Index i = 0; i < img.pixels().size(); ++i) img.pixels()[i] = unit(rng);
  return img;
}

Image solid(Index h, Index w, float r, float g, float b) {
  Image img(h, w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) img.at(y, x, 0) = r, img.at(y, x, 1) = g, img.at(y, x, 2) = b;
  return img;
}

float max_abs_diff(const Image& a, const Image& b) { return (a.pixels() - b.pixels()).abs().maxCoeff(); }

bool in_unit_range(const Image& img) { return (img.pixels() >= 0.0f).all() && (img.pixels() <= 1.0f).all(); }

// -------------------------------------------------------------------- hsv

TEST(Hsv, PrimaryAndGray) {
  const HsvImage red = rgb_to_hsv(solid(1, 1, 1, 0, 0));
  EXPECT_EQ(red.hue[0], 0.0f);
  EXPECT_EQ(red.saturation[0], 1.0f);
  EXPECT_EQ(red.value[0], 1.0f);
  const HsvImage gray = rgb_to_hsv(solid(1, 1, 0.5f, 0.5f, 0.5f));
  EXPECT_EQ(gray.saturation[0], 0.0f);
  EXPECT_EQ(gray.value[0], 0.5f);
  EXPECT_NEAR(rgb_to_hsv(solid(1, 1, 0, 1, 0)).hue[0], 1.0 / 3.0, 1e-7);
  EXPECT_NEAR(rgb_to_hsv(solid(1, 1, 0, 0, 1)).hue[0], 2.0 / 3.0, 1e-7);
}

TEST(Hsv, RoundTripWithinTolerance) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Image img = random_image(9, 7, seed);
    const HsvImage hsv = rgb_to_hsv(img);
    EXPECT_TRUE((hsv.hue >= 0.0f).all() && (hsv.hue < 1.0f).all());
    EXPECT_TRUE((hsv.saturation >= 0.0f).all() && (hsv.saturation <= 1.0f).all());
    EXPECT_LE(max_abs_diff(hsv_to_rgb(hsv), img), 1e-5f);
  }
}

TEST(AdjustHsv, UnitFactorIsIdentity) {
  const Image img = random_image(8, 8, 3);
  for (auto c : {HsvComponent::kExposure, HsvComponent::kSaturation, HsvComponent::kHue}) {
    EXPECT_LE(max_abs_diff(adjust_hsv(img, c, 1.0), img), 1e-6f);
  }
}

TEST(AdjustHsv, ExposureMultipliesAndClampsValue) {
  HsvImage hsv = rgb_to_hsv(solid(1, 2, 0.4f, 0.2f, 0.1f));
  hsv.value[1] = 0.8f;
  adjust_hsv_planes(hsv, HsvComponent::kExposure, 1.5);
  EXPECT_NEAR(hsv.value[0], 0.6f, 1e-6);
  EXPECT_EQ(hsv.value[1], 1.0f);

  const Image out = adjust_hsv(solid(1, 1, 0.4f, 0.4f, 0.4f), HsvComponent::kExposure, 1.5);
  EXPECT_NEAR(out.at(0, 0, 0), 0.6f, 1e-6);
}

TEST(AdjustHsv, GrayIsSaturationFixedPoint) {
  const Image gray = solid(3, 3, 0.3f, 0.3f, 0.3f);
  for (double f : {0.2, 1.5, 7.0}) EXPECT_EQ(adjust_hsv(gray, HsvComponent::kSaturation, f), gray);
}

TEST(AdjustHsv, HueWrapsAndPreservesSaturationAndValue) {
  HsvImage hsv = rgb_to_hsv(random_image(6, 6, 9));
  const HsvImage before = hsv;
  adjust_hsv_planes(hsv, HsvComponent::kHue, 3.7);
  EXPECT_TRUE((hsv.saturation == before.saturation).all());
  EXPECT_TRUE((hsv.value == before.value).all());
  EXPECT_TRUE((hsv.hue >= 0.0f).all() && (hsv.hue < 1.0f).all());

  HsvImage one = rgb_to_hsv(solid(1, 1, 0, 1, 0));  // hue 1/3
  adjust_hsv_planes(one, HsvComponent::kHue, 0.1);
  EXPECT_NEAR(one.hue[0], 1.0 / 30.0, 1e-6);
}

TEST(AdjustHsv, RejectsNonPositiveFactor) {
  const Image img = random_image(2, 2, 1);
  EXPECT_THROW(adjust_hsv(img, HsvComponent::kExposure, 0.0), ArgumentError);
  EXPECT_THROW(adjust_hsv(img, HsvComponent::kHue, -1.0), ArgumentError);
}

// ---------------------------------------------------------------- geometry

TEST(Rotate, ZeroAngleIsIdentity) {
  const Image img = random_image(11, 8, 4);
  EXPECT_LE(max_abs_diff(rotate(img, 0.0), img), 1e-6f);
  std::mt19937_64 rng(1);
  const RotatedImage r = random_rotate(img, 0.0, rng);
  EXPECT_EQ(r.angle_deg, 0.0);
  EXPECT_LE(max_abs_diff(r.image, img), 1e-6f);
}

TEST(Rotate, KeepsExtentsAndFillsCornersBlack) {
  const Image img = solid(10, 14, 1, 1, 1);
  const Image out = rotate(img, 45.0);
  EXPECT_EQ(out.height(), 10);
  EXPECT_EQ(out.width(), 14);
  EXPECT_EQ(out.at(0, 0, 0), 0.0f);
  EXPECT_NEAR(out.at(5, 7, 1), 1.0f, 1e-6);
  EXPECT_TRUE(in_unit_range(out));
}

TEST(Rotate, QuarterTurnMovesPixels) {
  Image img(5, 5);
  img.at(2, 4, 0) = 1.0f;  // right of center
  const Image out = rotate(img, 90.0);
  float best = 0.0f;
  Index by = 0, bx = 0;
  for (Index y = 0; y < 5; ++y)
    for (Index x = 0; x < 5; ++x)
      if (out.at(y, x, 0) > best) best = out.at(y, x, 0), by = y, bx = x;
  EXPECT_NEAR(best, 1.0f, 1e-6);
  EXPECT_EQ(bx, 2);
  EXPECT_TRUE(by == 0 || by == 4);
}

TEST(RandomRotate, AnglesStayInRange) {
  const Image img = random_image(4, 4, 2);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 rng(seed);
    const double a = random_rotate(img, 5.0, rng).angle_deg;
    EXPECT_GE(a, -5.0);
    EXPECT_LE(a, 5.0);
  }
}

TEST(Letterbox, WideSourceGeometry) {
  const Image src = solid(540, 960, 0.8f, 0.6f, 0.4f);
  const Image out = letterbox(src, 416);
  ASSERT_EQ(out.height(), 416);
  ASSERT_EQ(out.width(), 416);
  const Index top = (416 - 234) / 2;
  for (Index y : {Index{0}, top - 1, top + 234, Index{415}}) EXPECT_EQ(out.at(y, 200, 0), 0.0f) << y;
  for (Index y : {top, top + 117, top + 233}) EXPECT_NEAR(out.at(y, 200, 0), 0.8f, 1e-6) << y;
  EXPECT_NEAR(out.at(top, 0, 2), 0.4f, 1e-6);
  EXPECT_NEAR(out.at(top, 415, 2), 0.4f, 1e-6);
}

TEST(Letterbox, TallSourceAndSquareIdentity) {
  const Image out = letterbox(solid(20, 10, 1, 0, 0), 8);
  EXPECT_EQ(out.at(4, 0, 0), 0.0f);
  EXPECT_EQ(out.at(4, 4, 0), 1.0f);
  const Image sq = random_image(12, 12, 5);
  EXPECT_EQ(letterbox(sq, 12), sq);
}

TEST(RandomShapeResize, SizesComeFromSet) {
  const std::vector<Index> sizes{320, 352, 384, 416, 448, 480, 512};
  const std::vector<Image> batch{random_image(6, 9, 1), random_image(6, 9, 2)};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(seed);
    const ResizedBatch r = random_shape_resize(batch, sizes, rng);
    EXPECT_NE(std::find(sizes.begin(), sizes.end(), r.size), sizes.end());
    for (const Image& img : r.images) {
      EXPECT_EQ(img.height(), r.size);
      EXPECT_EQ(img.width(), r.size);
    }
  }
}

TEST(RandomShapeResize, SingletonSetAndEmptySet) {
  const std::vector<Image> batch{random_image(54, 96, 1)};
  std::mt19937_64 rng(0);
  const std::vector<Index> one{416};
  const ResizedBatch r = random_shape_resize(batch, one, rng);
  EXPECT_EQ(r.size, 416);
  EXPECT_EQ(r.images[0], letterbox(batch[0], 416));
  EXPECT_THROW(random_shape_resize(batch, std::span<const Index>{}, rng), ArgumentError);
}

// ---------------------------------------------------------------- pipeline

std::vector<Image> sample_batch() {
  std::vector<Image> batch;
  for (std::uint64_t i = 0; i < 4; ++i) batch.push_back(random_image(12, 12, 100 + i));
  return batch;
}

TEST(Pipeline, DefaultsMatchPublishedParameters) {
  const AugmentConfig c;
  EXPECT_EQ(c.exposure_factor, 1.5);
  EXPECT_EQ(c.saturation_factor, 1.5);
  EXPECT_EQ(c.hue_factor, 0.1);
  EXPECT_EQ(c.angle_range_deg, 5.0);
  EXPECT_EQ(c.scale_set, (std::vector<Index>{320, 352, 384, 416, 448, 480, 512}));
  EXPECT_FALSE(c.any_enabled());
}

TEST(Pipeline, AllDisabledIsIdentity) {
  const auto batch = sample_batch();
  const auto out = make_pipeline(AugmentConfig{})(batch, 3);
  ASSERT_EQ(out.size(), batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) EXPECT_EQ(out[i], batch[i]);
}

TEST(Pipeline, SameSeedIsBitIdenticalAndOutputsClamped) {
  AugmentConfig c;
  c.shape = c.rotate = c.saturation = c.exposure = c.hue = true;
  c.scale_set = {8, 12, 16};
  c.seed = 42;
  const auto batch = sample_batch();
  for (std::uint64_t b = 0; b < 10; ++b) {
    const auto x = make_pipeline(c)(batch, b), y = make_pipeline(c)(batch, b);
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      EXPECT_EQ(x[i], y[i]);
      EXPECT_TRUE(in_unit_range(x[i]));
    }
  }
  AugmentConfig other = c;
  other.seed = 43;
  bool differs = false;
  for (std::uint64_t b = 0; b < 10 && !differs; ++b) differs = make_pipeline(c)(batch, b)[0] != make_pipeline(other)(batch, b)[0];
  EXPECT_TRUE(differs);
}

TEST(Pipeline, ShapeOnlyWithSingletonSetIsLetterbox) {
  AugmentConfig c;
  c.shape = true;
  c.scale_set = {20};
  const auto batch = sample_batch();
  const auto out = make_pipeline(c)(batch, 0);
  for (std::size_t i = 0; i < batch.size(); ++i) EXPECT_EQ(out[i], letterbox(batch[i], 20));
}

TEST(Pipeline, ColorMethodsApplyExactFactorOrNothing) {
  AugmentConfig c;
  c.exposure = true;
  c.seed = 5;
  const auto batch = sample_batch();
  int changed = 0;
  for (std::uint64_t b = 0; b < 8; ++b) {
    const auto out = make_pipeline(c)(batch, b);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (out[i] == batch[i]) continue;
      ++changed;
      EXPECT_EQ(out[i], adjust_hsv(batch[i], HsvComponent::kExposure, 1.5));
    }
  }
  EXPECT_GT(changed, 0);
  EXPECT_LT(changed, 32);
}

TEST(AugmentConfig, RejectsInvalidValues) {
  AugmentConfig c;
  c.hue_factor = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.angle_range_deg = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.scale_set.clear();
  EXPECT_THROW(make_pipeline(c), ConfigError);
  c = {};
  c.scale_set = {16, 0};
  EXPECT_THROW(c.validate(), ConfigError);
}

// -------------------------------------------------------------------- ppm

TEST(Ppm, RoundTripOfQuantizedImage) {
  Image img = random_image(5, 7, 8);
  img.pixels() = (img.pixels() * 255.0f).round() / 255.0f;
  const Image back = decode_ppm(encode_ppm(img));
  EXPECT_LE(max_abs_diff(back, img), 1e-6f);
  testing::TempDir dir("ppm");
  write_ppm(img, dir / "x.ppm");
  EXPECT_EQ(read_ppm(dir / "x.ppm"), back);
}

TEST(Ppm, RejectsGarbage) {
  const std::vector<std::uint8_t> junk{'P', '3', '\n', '1', ' ', '1', '\n'};
  EXPECT_THROW(decode_ppm(junk), Error);
  auto good = encode_ppm(random_image(3, 3, 1));
  good.resize(good.size() - 4);
  EXPECT_THROW(decode_ppm(good), Error);
}

}  // namespace
}  // namespace slim
