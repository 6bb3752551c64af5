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

// Heuristic sharding baselines. None of them split tables.

#ifndef SHARDSEARCH_BASELINES_H_
#define SHARDSEARCH_BASELINES_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "shardsearch/plan.h"
#include "shardsearch/tables.h"

namespace shardsearch {

enum class Heuristic { kSize, kDim, kLookup, kSizeLookup };

std::string ToString(Heuristic h);
Heuristic ParseHeuristic(const std::string& s);  // size|dim|lookup|size_lookup

// size_bytes | dim | dim * pooling | dim * pooling * size_bytes.
double HeuristicValue(const TableConfig& table, Heuristic h);

// Tables in descending heuristic order (stable), each to the memory-feasible
// device with the smallest running heuristic sum (lowest index on ties).
// nullopt if some table fits nowhere.
std::optional<TablePlan> GreedyShard(std::span<const TableConfig> tables,
                                     int num_devices, Heuristic h,
                                     int64_t mem_cap_bytes);

// Uniform over memory-feasible devices, tables in input order.
std::optional<TablePlan> RandomShard(std::span<const TableConfig> tables,
                                     int num_devices, int64_t mem_cap_bytes,
                                     uint64_t seed);

}  // namespace shardsearch

#endif  // SHARDSEARCH_BASELINES_H_
