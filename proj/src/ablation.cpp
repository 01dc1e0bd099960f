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

#include "slim/ablation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <set>

#include "slim/errors.hpp"
#include "slim/metrics.hpp"

namespace slim {

namespace {

double round2(double v) {
  const double r = std::round(v * 100.0) / 100.0;
  return r == 0.0 ? 0.0 : r;
}

double run_once(const AblationSettings& s, const std::vector<std::string>& methods, const LabeledImages& train_set,
                const LabeledImages& test_set) {
  AugmentConfig ac = with_methods(s.augment, methods);
  ac.seed = s.seed;
  const Augmenter aug(ac);
  BatchTransform transform;
  if (ac.any_enabled()) transform = [&aug](std::span<const Image> b, std::uint64_t i) { return aug(b, i); };
  TrainConfig tc = s.train;
  tc.seed = s.seed;
  const TrainResult r = train(build_model(s.model, s.seed), train_set, tc, transform);
  return round2(100.0 * classify_accuracy(r.model, test_set));
}

}  // namespace

const std::vector<std::string>& augmentation_methods() {
  static const std::vector<std::string> names{"shape", "angle", "saturation", "exposure", "hue"};
  return names;
}

AugmentConfig with_methods(AugmentConfig base, const std::vector<std::string>& methods) {
  base.shape = base.rotate = base.saturation = base.exposure = base.hue = false;
  for (const auto& m : methods) {
    if (m == "shape") base.shape = true;
    else if (m == "angle") base.rotate = true;
    else if (m == "saturation") base.saturation = true;
    else if (m == "exposure") base.exposure = true;
    else if (m == "hue") base.hue = true;
    else throw ConfigError("unknown augmentation method '" + m + "'");
  }
  return base;
}

void AblationSettings::validate() const {
  if (methods.empty()) throw ConfigError("ablation needs at least one augmentation method");
  const std::set<std::string> unique(methods.begin(), methods.end());
  if (unique.size() != methods.size()) throw ConfigError("ablation lists a method twice");
  with_methods(augment, methods).validate();
  train.validate();
}

std::vector<AblationRow> run_ablation(const AblationSettings& settings, const LabeledImages& train_set,
                                      const LabeledImages& test_set) {
  settings.validate();
  const std::string metric = "accuracy_percent";
  const double base = run_once(settings, {}, train_set, test_set);
  std::vector<AblationRow> rows{{"baseline", metric, base, 0.0, 0.0}};
  std::vector<std::string> prefix;
  double combined = base;
  for (const auto& m : settings.methods) {
    prefix.push_back(m);
    const double alone = run_once(settings, {m}, train_set, test_set);
    combined = prefix.size() == 1 ? alone : run_once(settings, prefix, train_set, test_set);
    rows.push_back({m, metric, alone, round2(alone - base), round2(combined - base)});
  }
  rows.push_back({"cumulative", metric, combined, round2(combined - base), round2(combined - base)});
  return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "approach,metric,value,delta_vs_baseline,cumulative_delta\n" << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    out << r.approach << ',' << r.metric << ',' << r.value << ',' << r.delta_vs_baseline << ',' << r.cumulative_delta
        << '\n';
  }
  out << std::defaultfloat;
}

}  // namespace slim
