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

#include "slim/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include "slim/config.hpp"
#include "slim/errors.hpp"

namespace slim {

namespace {

constexpr int kShapes = 5;
constexpr std::array<std::array<float, 3>, 3> kColors{{
    {0.90f, 0.20f, 0.15f},  // red
    {0.20f, 0.80f, 0.25f},  // green
    {0.20f, 0.35f, 0.95f},  // blue
}};

// Membership of offset (dx, dy) from the object center in a shape of half-extent r.
bool inside_shape(int shape, double dx, double dy, double r) {
  switch (shape) {
    case 0: return std::abs(dx) <= r && std::abs(dy) <= r;  // square
    case 1: return dx * dx + dy * dy <= r * r;             // disc
    case 2:                                                // upward triangle
      return dy >= -r && dy <= r && std::abs(dx) <= (dy + r) / 2.0;
    case 3: {  // plus sign
      const double arm = r / 3.0;
      return (std::abs(dx) <= arm && std::abs(dy) <= r) || (std::abs(dy) <= arm && std::abs(dx) <= r);
    }
    default: {  // ring
      const double d2 = dx * dx + dy * dy;
      return d2 <= r * r && d2 >= 0.3 * r * r;
    }
  }
}

struct Scene {
  Image image;
  Box box;
};

Scene render(int label, Index size, const RenderOptions& opt, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int shape = label % kShapes;
  const auto& color = kColors[static_cast<std::size_t>(label / kShapes)];

  Image img(size, size);
  // Background: gray level with a linear gradient and per-pixel grain.
  const double base = 0.30 + 0.25 * unit(rng);
  const double gx = 0.15 * (unit(rng) - 0.5), gy = 0.15 * (unit(rng) - 0.5);
  for (Index y = 0; y < size; ++y)
    for (Index x = 0; x < size; ++x) {
      const double level = base + gx * (x / double(size) - 0.5) + gy * (y / double(size) - 0.5);
      for (Index c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(level + 0.06 * (unit(rng) - 0.5));
    }

  const double r = size * (opt.radius_min + (opt.radius_max - opt.radius_min) * unit(rng));
  const double cx = r + (size - 2 * r) * unit(rng);
  const double cy = r + (size - 2 * r) * unit(rng);
  double x_min = size, y_min = size, x_max = -1, y_max = -1;
  for (Index y = 0; y < size; ++y)
    for (Index x = 0; x < size; ++x) {
      if (!inside_shape(shape, x + 0.5 - cx, y + 0.5 - cy, r)) continue;
      for (Index c = 0; c < 3; ++c) img.at(y, x, c) = color[static_cast<std::size_t>(c)];
      x_min = std::min<double>(x_min, x), y_min = std::min<double>(y_min, y);
      x_max = std::max<double>(x_max, x + 1), y_max = std::max<double>(y_max, y + 1);
    }
  // Scene brightness.
  const float light = static_cast<float>(opt.light_min + (opt.light_max - opt.light_min) * unit(rng));
  img.pixels() *= light;
  img.clamp();
  return {std::move(img), Box{x_min, y_min, x_max, y_max, label, 1.0}};
}

LabeledImages render_split(std::mt19937_64& rng, Index count, Index size, int n_classes, const RenderOptions& opt) {
  std::vector<int> labels(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(i % n_classes);
  std::shuffle(labels.begin(), labels.end(), rng);
  LabeledImages out;
  for (int label : labels) {
    Scene s = render(label, size, opt, rng);
    out.images.push_back(std::move(s.image));
    out.labels.push_back(label);
    out.boxes.push_back(s.box);
  }
  return out;
}

std::string image_id(std::size_t i) {
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << i;
  return os.str();
}

void write_split(const LabeledImages& split, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream ann(dir / "annotations.txt");
  if (!ann) throw IoError("cannot write " + (dir / "annotations.txt").string());
  for (std::size_t i = 0; i < split.size(); ++i) {
    const std::string id = image_id(i);
    write_ppm(split.images[i], dir / (id + ".ppm"));
    const Box& b = split.boxes[i];
    ann << id << ' ' << split.labels[i] << ' ' << b.x_min << ' ' << b.y_min << ' ' << b.x_max << ' ' << b.y_max
        << '\n';
  }
}

LabeledImages read_split(const std::filesystem::path& dir) {
  std::ifstream ann(dir / "annotations.txt");
  if (!ann) throw IoError("missing annotations file " + (dir / "annotations.txt").string());
  // First box of each image carries its label.
  std::map<std::string, Box> first_box;
  std::string line;
  int line_no = 0;
  while (std::getline(ann, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream in(line);
    std::string id;
    Box b;
    if (!(in >> id >> b.class_id >> b.x_min >> b.y_min >> b.x_max >> b.y_max)) {
      throw ConfigError((dir / "annotations.txt").string() + ":" + std::to_string(line_no) + ": malformed line");
    }
    first_box.try_emplace(id, b);
  }
  LabeledImages out;
  for (const auto& [id, box] : first_box) {
    out.images.push_back(read_ppm(dir / (id + ".ppm")));
    out.labels.push_back(box.class_id);
    out.boxes.push_back(box);
  }
  return out;
}

}  // namespace

void RenderOptions::validate() const {
  if (!(radius_min > 0.0 && radius_min <= radius_max && radius_max < 0.5)) {
    throw ArgumentError("object radius range must satisfy 0 < min <= max < 0.5");
  }
  if (!(light_min > 0.0 && light_min <= light_max)) throw ArgumentError("brightness range must satisfy 0 < min <= max");
}

int max_synthetic_classes() { return kShapes * static_cast<int>(kColors.size()); }

SyntheticDataset generate_dataset(std::uint64_t seed, Index n_train, Index n_test, Index image_size, int n_classes,
                                  const RenderOptions& train_options, const RenderOptions& test_options) {
  train_options.validate();
  test_options.validate();
  if (n_classes < 1 || n_classes > max_synthetic_classes()) {
    throw ArgumentError("class count must lie in [1, " + std::to_string(max_synthetic_classes()) + "]");
  }
  if (n_train < n_classes || n_test < n_classes) throw ArgumentError("each split needs at least one image per class");
  if (image_size < 16) throw ArgumentError("image size must be at least 16");
  std::mt19937_64 rng(seed);
  SyntheticDataset ds;
  ds.num_classes = n_classes;
  ds.image_size = image_size;
  ds.train = render_split(rng, n_train, image_size, n_classes, train_options);
  ds.test = render_split(rng, n_test, image_size, n_classes, test_options);
  return ds;
}

void write_dataset(const SyntheticDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream cfg(dir / "dataset.cfg");
  if (!cfg) throw IoError("cannot write dataset in " + dir.string());
  cfg << "classes = " << dataset.num_classes << "\nimage_size = " << dataset.image_size << '\n';
  write_split(dataset.train, dir / "train");
  write_split(dataset.test, dir / "test");
}

SyntheticDataset read_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("dataset directory not found: " + dir.string());
  const KeyValueFile cfg = KeyValueFile::load(dir / "dataset.cfg");
  SyntheticDataset ds;
  ds.num_classes = static_cast<int>(cfg.get_int("", "classes", 0));
  ds.image_size = cfg.get_int("", "image_size", 0);
  if (ds.num_classes < 1) throw ConfigError(dir.string() + ": dataset.cfg lacks a positive class count");
  ds.train = read_split(dir / "train");
  ds.test = read_split(dir / "test");
  return ds;
}

Tensorf batch_tensor(const LabeledImages& data, std::span<const std::size_t> indices) {
  std::vector<Image> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) picked.push_back(data.images.at(i));
  return images_to_tensor(picked);
}

}  // namespace slim
