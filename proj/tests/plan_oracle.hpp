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

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <tuple>
#include <vector>

#include "slim/model.hpp"

namespace slim::testing {

struct OracleChannel {
  std::size_t layer;
  Index channel;
  double magnitude;
};

/// Every batchnorm channel, fully sorted by (magnitude, layer, channel).
inline std::vector<OracleChannel> oracle_sorted_channels(const ModelGraph& model) {
  std::vector<OracleChannel> all;
  for (std::size_t i = 0; i < model.layers.size(); ++i)
    if (const auto* bn = std::get_if<BatchNormLayer>(&model.layers[i]))
      for (Index c = 0; c < bn->params.channels(); ++c)
        all.push_back({i, c, std::abs(static_cast<double>(bn->params.scale[c]))});
  std::sort(all.begin(), all.end(), [](const OracleChannel& a, const OracleChannel& b) {
    return std::tie(a.magnitude, a.layer, a.channel) < std::tie(b.magnitude, b.layer, b.channel);
  });
  return all;
}

struct OracleNormalPlan {
  std::map<std::size_t, std::vector<bool>> keep;
  Index requested = 0;
  Index restored = 0;
};

/// Normal plan by exhaustive bookkeeping: drop the first floor(ratio * total)
/// sorted channels, then give every emptied layer back its largest victim.
inline OracleNormalPlan oracle_normal_plan(const ModelGraph& model, double ratio) {
  const auto sorted = oracle_sorted_channels(model);
  OracleNormalPlan out;
  for (std::size_t i = 0; i < model.layers.size(); ++i)
    if (const auto* bn = std::get_if<BatchNormLayer>(&model.layers[i]))
      out.keep[i] = std::vector<bool>(static_cast<std::size_t>(bn->params.channels()), true);
  out.requested = static_cast<Index>(std::floor(ratio * static_cast<double>(sorted.size()) + 1e-9));
  std::map<std::size_t, OracleChannel> largest_victim;
  for (Index k = 0; k < out.requested; ++k) {
    const auto& e = sorted[static_cast<std::size_t>(k)];
    out.keep[e.layer][static_cast<std::size_t>(e.channel)] = false;
    largest_victim.insert_or_assign(e.layer, e);
  }
  for (auto& [layer, keep] : out.keep) {
    if (std::none_of(keep.begin(), keep.end(), [](bool b) { return b; })) {
      keep[static_cast<std::size_t>(largest_victim.at(layer).channel)] = true;
      ++out.restored;
    }
  }
  return out;
}

/// Overwrites every batchnorm scale with draws that include exact ties and
/// zeros.
inline void randomize_scales(ModelGraph& model, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> grid(0, 40);
  std::uniform_int_distribution<int> sign(0, 1);
  for (Layer& layer : model.layers)
    if (auto* bn = std::get_if<BatchNormLayer>(&layer))
      for (Index c = 0; c < bn->params.channels(); ++c)
        bn->params.scale[c] = static_cast<float>(grid(rng)) / 40.0f * (sign(rng) ? 1.0f : -1.0f);
}

}  // namespace slim::testing
