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

#include "shardsearch/plan_check.h"

#include <cstdint>

namespace shardsearch {

std::vector<std::string> AuditPlan(const ShardingTask& task,
                                   const std::vector<int>& col,
                                   const std::vector<int>& assign) {
  std::vector<std::string> errors;
  // (dim, rows) of the evolving table list.
  std::vector<std::pair<int64_t, int64_t>> shapes;
  for (const TableConfig& t : task.tables) shapes.emplace_back(t.dim, t.hash_size);
  for (size_t step = 0; step < col.size(); ++step) {
    const int i = col[step];
    if (i < 0 || static_cast<size_t>(i) >= shapes.size()) {
      errors.push_back("split step " + std::to_string(step) +
                       " targets missing table " + std::to_string(i));
      return errors;
    }
    const int64_t dim = shapes[i].first;
    if (dim < 8 || dim % 8 != 0) {
      errors.push_back("split step " + std::to_string(step) +
                       " halves dim " + std::to_string(dim) +
                       " into a dim not divisible by 4");
      return errors;
    }
    shapes[i].first = dim / 2;
    shapes.emplace_back(dim / 2, shapes[i].second);
  }
  for (size_t i = 0; i < shapes.size(); ++i) {
    if (shapes[i].first % 4 != 0) {
      errors.push_back("table " + std::to_string(i) + " has dim " +
                       std::to_string(shapes[i].first));
    }
  }
  if (assign.size() != shapes.size()) {
    errors.push_back("expected " + std::to_string(shapes.size()) +
                     " device entries, got " + std::to_string(assign.size()));
    return errors;
  }
  std::vector<int64_t> bytes(task.num_devices, 0);
  for (size_t i = 0; i < assign.size(); ++i) {
    if (assign[i] < 0 || assign[i] >= task.num_devices) {
      errors.push_back("table " + std::to_string(i) + " on device " +
                       std::to_string(assign[i]));
      continue;
    }
    bytes[assign[i]] += shapes[i].first * shapes[i].second * 4;
  }
  for (int d = 0; d < task.num_devices; ++d) {
    if (bytes[d] > task.mem_cap_bytes) {
      errors.push_back("device " + std::to_string(d) + " holds " +
                       std::to_string(bytes[d]) + " bytes, cap " +
                       std::to_string(task.mem_cap_bytes));
    }
  }
  return errors;
}

}  // namespace shardsearch
