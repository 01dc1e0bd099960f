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
#include <iosfwd>
#include <string>
#include <vector>

#include "slim/augment.hpp"
#include "slim/dataset.hpp"
#include "slim/model.hpp"
#include "slim/trainer.hpp"

namespace slim {

/// Augmentation method names in pipeline order.
const std::vector<std::string>& augmentation_methods();

/// Enables exactly `methods` on a copy of `base`. Throws ConfigError on an
/// unknown name.
AugmentConfig with_methods(AugmentConfig base, const std::vector<std::string>& methods);

struct AblationSettings {
  ModelDescription model;
  TrainConfig train;
  AugmentConfig augment;  // factors, angle range and scale set; flags are ignored
  std::vector<std::string> methods = augmentation_methods();
  std::uint64_t seed = 1;  // model init, data order and augmentation streams

  void validate() const;
};

struct AblationRow {
  std::string approach;
  std::string metric;
  double value = 0;             // percent, 2 decimals
  double delta_vs_baseline = 0;  // value - baseline value
  double cumulative_delta = 0;   // run with this and every earlier method, minus baseline
};

/// One training run per listed method plus the baseline and every prefix
/// combination of `methods`, each from the same seed. Rows: baseline, each
/// method in the order given, then "cumulative" (all methods at once).
std::vector<AblationRow> run_ablation(const AblationSettings& settings, const LabeledImages& train,
                                      const LabeledImages& test);

/// Header approach,metric,value,delta_vs_baseline,cumulative_delta.
void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);

}  // namespace slim
