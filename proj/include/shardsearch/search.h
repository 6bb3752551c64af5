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

// The sharding planner: beam search over column-wise splits, each scored
// by a greedy assignment under a grid of max-device-dimension caps, all
// priced by the neural cost models through a memoizing prediction cache.

#ifndef SHARDSEARCH_SEARCH_H_
#define SHARDSEARCH_SEARCH_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "shardsearch/cost_model.h"
#include "shardsearch/oracle.h"
#include "shardsearch/plan.h"
#include "shardsearch/tables.h"

namespace shardsearch {

struct SearchHyper {
  int N = 10;  // candidate tables per ranking
  int K = 3;   // beam width
  int L = 10;  // split steps; 0 disables column-wise sharding
  int M = 11;  // grid points

  void Validate() const;
};

void to_json(nlohmann::json& j, const SearchHyper& h);
void from_json(const nlohmann::json& j, SearchHyper& h);

// Memoized compute-cost predictions keyed by the multiset of (id, dim) of
// the tables on a device. Tables are interned once; their encoder outputs
// are kept so a miss only pays the pooling sum and the head.
//
// With caching disabled every query is a miss and re-runs the head; the
// returned values are bitwise identical either way.
class PredictionCache {
 public:
  explicit PredictionCache(const ComputeCostModel& model, bool enabled = true);

  // Stable small integer for (table.id, table.dim).
  int Intern(const TableConfig& table);

  // Predicted fused cost of the interned tables `ids` (any order, non-empty).
  double Get(std::span<const int> ids);
  // Convenience: interns and queries.
  double GetTables(std::span<const TableConfig> tables);

  bool enabled() const { return enabled_; }
  int64_t hits() const { return hits_; }
  int64_t misses() const { return misses_; }
  int64_t model_evaluations() const { return model_evaluations_; }
  double HitRate() const;
  size_t size() const { return map_.size(); }

 private:
  struct KeyHash {
    size_t operator()(const std::vector<int>& key) const;
  };

  double Compute(const std::vector<int>& sorted_ids);

  const ComputeCostModel* model_;
  bool enabled_;
  std::map<std::pair<std::string, int>, int> ids_;
  std::vector<FeatureVector> features_;
  std::vector<Eigen::VectorXd> encodings_;
  std::unordered_map<std::vector<int>, double, KeyHash> map_;
  std::vector<int> scratch_;
  int64_t hits_ = 0;
  int64_t misses_ = 0;
  int64_t model_evaluations_ = 0;
};

// Predicted per-device compute, forward and backward communication. Empty
// devices have zero compute. Throws PlanInvalid if the assignment has the
// wrong length or an out-of-range device.
PlanCost SimulateAssignmentCost(const CostModelBundle& models,
                                PredictionCache& cache,
                                std::span<const TableConfig> tables,
                                std::span<const int> assignment,
                                int num_devices);

// Same, for a full plan; checks the plan against the task first.
PlanCost SimulatePlanCost(const CostModelBundle& models,
                          const ShardingTask& task, const ShardingPlan& plan,
                          PredictionCache& cache);

struct GridResult {
  bool feasible = false;
  double cost_ms = 0.0;  // +inf when infeasible
  TablePlan assignment;
  double max_dim = 0.0;  // winning grid value
  int stranded = 0;      // fewest unplaced tables over grid points
};

// Grid values M_s + k (M_e - M_s) / (M - 1), M_s = sum(dims) / D,
// M_e = 1.5 M_s.
std::vector<double> MaxDimGrid(std::span<const TableConfig> tables,
                               int num_devices, int M);

GridResult GreedyGridSearch(const CostModelBundle& models,
                            PredictionCache& cache,
                            std::span<const TableConfig> tables,
                            int num_devices, int64_t mem_cap_bytes, int M);

struct SearchStats {
  int64_t cache_hits = 0;
  int64_t cache_misses = 0;
  int64_t model_evaluations = 0;
  int64_t plans_evaluated = 0;  // grid searches run

  double HitRate() const;
};

struct SearchResult {
  bool feasible = false;
  ShardingPlan plan;  // best found; empty assignment when infeasible
  std::vector<TableConfig> tables_after_split;
  SearchStats stats;
};

SearchResult BeamSearch(const CostModelBundle& models,
                        const ShardingTask& task, const SearchHyper& hyper,
                        PredictionCache& cache);

// Owns a fresh cache for the run.
SearchResult BeamSearch(const CostModelBundle& models,
                        const ShardingTask& task, const SearchHyper& hyper,
                        bool use_cache = true);

}  // namespace shardsearch

#endif  // SHARDSEARCH_SEARCH_H_
