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
#include <thread>
#include <vector>

#include "slim/tensor.hpp"

namespace slim {

/// Worker count for intra-op parallelism. Read once from SLIM_NUM_THREADS
/// (default 1) unless overridden with set_num_threads().
int num_threads();
void set_num_threads(int threads);

/// Runs `fn(i)` for i in [0, n). Work items are partitioned into contiguous
/// ranges; callers keep per-item outputs disjoint and reduce afterwards in
/// index order so results do not depend on the thread count.
template <typename Fn>
void parallel_for(Index n, Fn&& fn) {
  const Index workers = std::min<Index>(num_threads(), n);
  if (workers <= 1) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const Index chunk = (n + workers - 1) / workers;
  for (Index w = 0; w < workers; ++w) {
    const Index begin = w * chunk;
    const Index end = std::min(n, begin + chunk);
    pool.emplace_back([begin, end, &fn] {
      for (Index i = begin; i < end; ++i) fn(i);
    });
  }
}

}  // namespace slim
