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

#ifndef SHARDSEARCH_PLAN_H_
#define SHARDSEARCH_PLAN_H_

#include <span>
#include <vector>

#include "json.hpp"
#include "shardsearch/tables.h"

namespace shardsearch {

// Column-wise plan: step i splits the table currently at index steps[i];
// the first half replaces it in place and the second half is appended.
using ColumnPlan = std::vector<int>;

// Table-wise plan: device index (0-based) per post-split table.
using TablePlan = std::vector<int>;

struct ShardingPlan {
  ColumnPlan column_plan;
  TablePlan assignment;
  double predicted_cost_ms = 0.0;
};

// Throws NotSplittable or InvalidArgument (index out of range).
std::vector<TableConfig> ApplyColumnPlan(std::span<const TableConfig> tables,
                                         std::span<const int> column_plan);

// Applies the column plan and checks the assignment against the task's
// device count and memory cap. Returns the post-split tables. Throws
// PlanInvalid naming the violated constraint.
std::vector<TableConfig> CheckPlan(const ShardingTask& task,
                                   const ShardingPlan& plan);

// Per-device sums over a post-split table list.
std::vector<int64_t> DeviceBytes(std::span<const TableConfig> tables,
                                 std::span<const int> assignment,
                                 int num_devices);
std::vector<double> DeviceDims(std::span<const TableConfig> tables,
                               std::span<const int> assignment,
                               int num_devices);

}  // namespace shardsearch

#endif  // SHARDSEARCH_PLAN_H_
