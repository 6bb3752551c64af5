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

#include "shardsearch/plan.h"

#include <string>

#include "shardsearch/common.h"

namespace shardsearch {

std::vector<TableConfig> ApplyColumnPlan(std::span<const TableConfig> tables,
                                         std::span<const int> column_plan) {
  std::vector<TableConfig> out(tables.begin(), tables.end());
  out.reserve(tables.size() + column_plan.size());
  for (int idx : column_plan) {
    if (idx < 0 || idx >= static_cast<int>(out.size())) {
      throw InvalidArgument("column plan index " + std::to_string(idx) +
                            " out of range");
    }
    auto [first, second] = SplitColumnWise(out[idx]);
    out[idx] = std::move(first);
    out.push_back(std::move(second));
  }
  return out;
}

std::vector<int64_t> DeviceBytes(std::span<const TableConfig> tables,
                                 std::span<const int> assignment,
                                 int num_devices) {
  std::vector<int64_t> bytes(num_devices, 0);
  for (size_t i = 0; i < tables.size(); ++i) {
    bytes[assignment[i]] += TableSizeBytes(tables[i]);
  }
  return bytes;
}

std::vector<double> DeviceDims(std::span<const TableConfig> tables,
                               std::span<const int> assignment,
                               int num_devices) {
  std::vector<double> dims(num_devices, 0.0);
  for (size_t i = 0; i < tables.size(); ++i) {
    dims[assignment[i]] += tables[i].dim;
  }
  return dims;
}

std::vector<TableConfig> CheckPlan(const ShardingTask& task,
                                   const ShardingPlan& plan) {
  std::vector<TableConfig> tables;
  try {
    tables = ApplyColumnPlan(task.tables, plan.column_plan);
  } catch (const InvalidArgument& e) {
    throw PlanInvalid(std::string("column plan: ") + e.what());
  }
  if (plan.assignment.size() != tables.size()) {
    throw PlanInvalid("assignment length " +
                      std::to_string(plan.assignment.size()) +
                      " != post-split table count " +
                      std::to_string(tables.size()));
  }
  for (size_t i = 0; i < tables.size(); ++i) {
    const int d = plan.assignment[i];
    if (d < 0 || d >= task.num_devices) {
      throw PlanInvalid("table " + tables[i].id + " assigned to device " +
                        std::to_string(d) + " outside [0, " +
                        std::to_string(task.num_devices) + ")");
    }
  }
  const std::vector<int64_t> bytes =
      DeviceBytes(tables, plan.assignment, task.num_devices);
  for (int d = 0; d < task.num_devices; ++d) {
    if (bytes[d] > task.mem_cap_bytes) {
      throw PlanInvalid("memory cap exceeded on device " + std::to_string(d) +
                        ": " + std::to_string(bytes[d]) + " > " +
                        std::to_string(task.mem_cap_bytes) + " bytes");
    }
  }
  return tables;
}

}  // namespace shardsearch
