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

// Runs planners and baselines over task sets and aggregates reports.
//
// Report JSON and CSV are a pure function of inputs and seeds. Wall times
// go to a separate timing document so reports stay byte-reproducible.

#ifndef SHARDSEARCH_HARNESS_H_
#define SHARDSEARCH_HARNESS_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "shardsearch/cost_model.h"
#include "shardsearch/oracle.h"
#include "shardsearch/plan.h"
#include "shardsearch/search.h"
#include "shardsearch/tables.h"

namespace shardsearch {

// planner, random, greedy_size, greedy_dim, greedy_lookup, greedy_size_lookup
const std::vector<std::string>& AllAlgorithms();
bool IsKnownAlgorithm(const std::string& name);

enum class EvaluatorKind { kOracle, kModel, kBoth };
EvaluatorKind ParseEvaluator(const std::string& s);
std::string ToString(EvaluatorKind e);

struct EvalConfig {
  std::vector<std::string> algorithms = AllAlgorithms();
  SearchHyper hyper;
  bool use_cache = true;
  EvaluatorKind evaluator = EvaluatorKind::kBoth;
  OracleParams oracle;
  uint64_t seed = 0;  // random baseline, per task DeriveSeed(seed, index)
  // Apply the planner's column plan before running the baselines.
  bool presplit_baselines = false;
  // Extra provenance (pool fingerprint, file names) copied into reports.
  nlohmann::json provenance = nlohmann::json::object();

  nlohmann::json ToJson() const;
};

struct TaskOutcome {
  int task = 0;
  std::string algorithm;
  bool feasible = false;
  ShardingPlan plan;
  int num_tables_after_split = 0;
  std::vector<std::string> audit_errors;  // from the independent validator
  std::optional<double> oracle_cost_ms;
  std::optional<double> model_cost_ms;
  int64_t cache_hits = 0;
  int64_t cache_misses = 0;
  int64_t model_evaluations = 0;
  double wall_seconds = 0.0;
};

struct AlgorithmSummary {
  std::string algorithm;
  int num_tasks = 0;
  int num_feasible = 0;
  int num_invalid = 0;  // feasible plans rejected by the validator
  double success_rate = 0.0;
  // Over feasible tasks; the strict mean is absent unless all succeeded.
  std::optional<double> mean_oracle_cost_ms;
  std::optional<double> mean_oracle_cost_feasible_ms;
  std::optional<double> mean_model_cost_feasible_ms;
  std::optional<double> mean_relative_gap;  // |model - oracle| / oracle
  double cache_hit_rate = 0.0;
  int64_t cache_hits = 0;
  int64_t cache_misses = 0;
  int64_t model_evaluations = 0;
  double mean_wall_seconds = 0.0;
};

struct EvalReport {
  std::string kind = "eval";  // eval | ablate | sweep
  nlohmann::json config;
  nlohmann::json fingerprints;
  std::vector<AlgorithmSummary> summaries;
  std::vector<TaskOutcome> rows;
  nlohmann::json extra = nlohmann::json::object();

  const AlgorithmSummary& Summary(const std::string& algorithm) const;
  // Deterministic: excludes wall times.
  nlohmann::json ToJson() const;
  nlohmann::json TimingJson() const;
  std::string ToCsv() const;
};

// Runs one algorithm on one task. `planner_col` optionally pre-splits the
// task for baselines.
TaskOutcome RunAlgorithm(const std::string& algorithm, const ShardingTask& task,
                         int task_index, const CostModelBundle& models,
                         const EvalConfig& config,
                         const ColumnPlan* planner_col = nullptr);

// Throws ConfigError on unknown algorithms or a device-count mismatch
// between models and tasks.
EvalReport Evaluate(const std::vector<ShardingTask>& tasks,
                    const CostModelBundle& models, const EvalConfig& config);

// Full planner plus one variant per flag (no_beam: L=0, no_grid: M=1,
// no_cache). extra["paired"] compares each variant with the full planner
// on the tasks both solved.
EvalReport Ablate(const std::vector<ShardingTask>& tasks,
                  const CostModelBundle& models, const EvalConfig& base,
                  const std::vector<std::string>& flags);

// Planner only, one run per value of hyperparameter `name` (N|K|L|M).
EvalReport Sweep(const std::vector<ShardingTask>& tasks,
                 const CostModelBundle& models, const EvalConfig& base,
                 const std::string& name, const std::vector<int>& values);

// Plan file contents; `hyper` is only written for the planner.
nlohmann::json PlanJson(const ShardingPlan& plan,
                        const std::vector<TableConfig>& tables_after_split,
                        const std::string& algorithm,
                        const std::optional<SearchHyper>& hyper,
                        const nlohmann::json& model_fingerprints);

}  // namespace shardsearch

#endif  // SHARDSEARCH_HARNESS_H_
