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
#include <random>
#include <string>

#include "slim/model.hpp"

namespace slim::testing {

/// Directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("slim-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string toy_description(Index size = 16, Index classes = 10) {
  return "input = 3x" + std::to_string(size) + "x" + std::to_string(size) + "\nclasses = " + std::to_string(classes) +
         "\nlayer = cbr out=16 kernel=3 pad=1\nlayer = maxpool size=2\nlayer = cbr out=32 kernel=3 pad=1\n"
         "layer = maxpool size=2\nlayer = cbr out=32 kernel=3 pad=1\nlayer = globalavgpool\nlayer = linear out=" +
         std::to_string(classes) + "\n";
}

/// Overwrites every batchnorm's scale, shift and running statistics with
/// random values so the eval path is nontrivial.
inline void randomize_batchnorm(ModelGraph& model, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> scale(0.2f, 1.5f), shift(-0.5f, 0.5f), var(0.3f, 2.0f);
  for (Layer& layer : model.layers) {
    if (auto* bn = std::get_if<BatchNormLayer>(&layer)) {
      auto& p = bn->params;
      for (Index c = 0; c < p.channels(); ++c) {
        p.scale[c] = scale(rng);
        p.shift[c] = shift(rng);
        p.running_mean[c] = shift(rng);
        p.running_var[c] = var(rng);
      }
    }
  }
}

/// Random sequential model: 1-3 CBR blocks with irregular channel counts and
/// kernel sizes, optional max pools, global pooling and 1-2 linear layers.
inline ModelGraph random_model(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> blocks(1, 3), channels(1, 13), kernel(0, 2), coin(0, 1), hidden(2, 9);
  ModelDescription d;
  d.input = {std::uniform_int_distribution<Index>(1, 4)(rng), 12, 12};
  d.num_classes = std::uniform_int_distribution<Index>(2, 7)(rng);
  const int n_blocks = blocks(rng);
  for (int b = 0; b < n_blocks; ++b) {
    LayerDescription l;
    l.cbr = true;
    l.out = channels(rng);
    l.kernel = 1 + 2 * kernel(rng);
    l.padding = l.kernel / 2;
    d.layers.push_back(l);
    if (b + 1 < n_blocks && coin(rng)) {
      LayerDescription pool;
      pool.kind = LayerKind::kMaxPool;
      pool.extent = 2;
      d.layers.push_back(pool);
    }
  }
  LayerDescription gap;
  gap.kind = LayerKind::kGlobalAvgPool;
  d.layers.push_back(gap);
  if (coin(rng)) {
    LayerDescription fc;
    fc.kind = LayerKind::kLinear;
    fc.out = hidden(rng);
    d.layers.push_back(fc);
    LayerDescription act;
    act.kind = LayerKind::kRelu;
    d.layers.push_back(act);
  }
  LayerDescription head;
  head.kind = LayerKind::kLinear;
  head.out = d.num_classes;
  d.layers.push_back(head);
  ModelGraph m = build_model(d, rng());
  randomize_batchnorm(m, rng);
  return m;
}

}  // namespace slim::testing
