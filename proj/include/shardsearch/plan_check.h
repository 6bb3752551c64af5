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

// Stand-alone plan validator. Deliberately re-derives the split semantics
// from raw dims and sizes instead of calling into plan.h, so that it can
// audit the planner and baselines.

#ifndef SHARDSEARCH_PLAN_CHECK_H_
#define SHARDSEARCH_PLAN_CHECK_H_

#include <string>
#include <vector>

#include "shardsearch/tables.h"

namespace shardsearch {

// Returns human-readable violations; empty means the plan is valid.
// `col` indexes the evolving table list; `assign` is 0-based.
std::vector<std::string> AuditPlan(const ShardingTask& task,
                                   const std::vector<int>& col,
                                   const std::vector<int>& assign);

}  // namespace shardsearch

#endif  // SHARDSEARCH_PLAN_CHECK_H_
