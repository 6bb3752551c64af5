// Copyright 2026 The shardsearch Authors.
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

#include "shardsearch/baselines.h"

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "shardsearch/common.h"

namespace shardsearch {

std::string ToString(Heuristic h) {
  switch (h) {
    case Heuristic::kSize:
      return "size";
    case Heuristic::kDim:
      return "dim";
    case Heuristic::kLookup:
      return "lookup";
    case Heuristic::kSizeLookup:
      return "size_lookup";
  }
  return "";
}

Heuristic ParseHeuristic(const std::string& s) {
  if (s == "size") return Heuristic::kSize;
  if (s == "dim") return Heuristic::kDim;
  if (s == "lookup") return Heuristic::kLookup;
  if (s == "size_lookup") return Heuristic::kSizeLookup;
  throw InvalidArgument("unknown heuristic: " + s);
}

double HeuristicValue(const TableConfig& table, Heuristic h) {
  const double size = static_cast<double>(TableSizeBytes(table));
  const double lookup = table.dim * table.pooling_factor;
  switch (h) {
    case Heuristic::kSize:
      return size;
    case Heuristic::kDim:
      return table.dim;
    case Heuristic::kLookup:
      return lookup;
    case Heuristic::kSizeLookup:
      return lookup * size;
  }
  return 0.0;
}

std::optional<TablePlan> GreedyShard(std::span<const TableConfig> tables,
                                     int num_devices, Heuristic h,
                                     int64_t mem_cap_bytes) {
  if (num_devices < 1) throw InvalidArgument("num_devices must be >= 1");
  const size_t n = tables.size();
  std::vector<double> value(n);
  for (size_t i = 0; i < n; ++i) value[i] = HeuristicValue(tables[i], h);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return value[a] > value[b]; });
  std::vector<double> load(num_devices, 0.0);
  std::vector<int64_t> used(num_devices, 0);
  TablePlan plan(n, -1);
  for (int i : order) {
    const int64_t size = TableSizeBytes(tables[i]);
    int best = -1;
    for (int d = 0; d < num_devices; ++d) {
      if (used[d] + size > mem_cap_bytes) continue;
      if (best < 0 || load[d] < load[best]) best = d;
    }
    if (best < 0) return std::nullopt;
    plan[i] = best;
    load[best] += value[i];
    used[best] += size;
  }
  return plan;
}

std::optional<TablePlan> RandomShard(std::span<const TableConfig> tables,
                                     int num_devices, int64_t mem_cap_bytes,
                                     uint64_t seed) {
  if (num_devices < 1) throw InvalidArgument("num_devices must be >= 1");
  std::mt19937_64 rng = MakeRng(seed, 0);
  std::vector<int64_t> used(num_devices, 0);
  TablePlan plan;
  plan.reserve(tables.size());
  std::vector<int> feasible;
  for (const TableConfig& t : tables) {
    const int64_t size = TableSizeBytes(t);
    feasible.clear();
    for (int d = 0; d < num_devices; ++d) {
      if (used[d] + size <= mem_cap_bytes) feasible.push_back(d);
    }
    if (feasible.empty()) return std::nullopt;
    std::uniform_int_distribution<size_t> pick(0, feasible.size() - 1);
    const int d = feasible[pick(rng)];
    plan.push_back(d);
    used[d] += size;
  }
  return plan;
}

}  // namespace shardsearch
