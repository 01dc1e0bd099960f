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

#include "slim/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "slim/errors.hpp"

namespace slim {

Image::Image(Index height, Index width) : height_(height), width_(width) {
  if (height < 1 || width < 1) throw ShapeError("image extents must be positive");
  pixels_ = Vector<float>::Zero(height * width * kChannels);
}

std::vector<std::uint8_t> encode_ppm(const Image& image) {
  const std::string header =
      "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.reserve(header.size() + static_cast<std::size_t>(image.pixels().size()));
  for (Index i = 0; i < image.pixels().size(); ++i) {
    const float v = std::clamp(image.pixels()[i], 0.0f, 1.0f);
    bytes.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
  }
  return bytes;
}

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string token;
  while (pos < bytes.size() && !std::isspace(bytes[pos])) token.push_back(static_cast<char>(bytes[pos++]));
  if (token.empty()) throw IoError("ppm: truncated header");
  return token;
}

}  // namespace

Image decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  if (header_token(bytes, pos) != "P6") throw IoError("ppm: only binary P6 is supported");
  Index width = 0, height = 0, maxval = 0;
  try {
    width = std::stol(header_token(bytes, pos));
    height = std::stol(header_token(bytes, pos));
    maxval = std::stol(header_token(bytes, pos));
  } catch (const std::logic_error&) {
    throw IoError("ppm: malformed header");
  }
  if (width < 1 || height < 1 || maxval != 255) throw IoError("ppm: need positive extents and maxval 255");
  ++pos;  // single whitespace byte after maxval
  const auto count = static_cast<std::size_t>(width * height * Image::kChannels);
  if (bytes.size() < pos + count) throw IoError("ppm: pixel data truncated");
  Image image(height, width);
  for (std::size_t i = 0; i < count; ++i) image.pixels()[static_cast<Index>(i)] = bytes[pos + i] / 255.0f;
  return image;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
  const auto bytes = encode_ppm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return decode_ppm(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

Tensorf images_to_tensor(std::span<const Image> images) {
  if (images.empty()) throw ShapeError("no images to stack");
  const Index h = images.front().height(), w = images.front().width();
  Tensorf t({static_cast<Index>(images.size()), Image::kChannels, h, w});
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = images[n];
    if (img.height() != h || img.width() != w) throw ShapeError("images in a batch must share extents");
    const auto n_i = static_cast<Index>(n);
    for (Index c = 0; c < Image::kChannels; ++c)
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) t(n_i, c, y, x) = img.at(y, x, c);
  }
  return t;
}

}  // namespace slim
