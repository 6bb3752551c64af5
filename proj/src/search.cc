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

#include "shardsearch/search.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "shardsearch/common.h"

namespace shardsearch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Slack on real-valued max_dim comparisons.
constexpr double kDimTolerance = 1e-9;

}  // namespace

void SearchHyper::Validate() const {
  if (N < 1 || K < 1 || M < 1) {
    throw InvalidArgument("search: N, K and M must be >= 1");
  }
  if (L < 0) throw InvalidArgument("search: L must be >= 0");
}

void to_json(nlohmann::json& j, const SearchHyper& h) {
  j = nlohmann::json{{"N", h.N}, {"K", h.K}, {"L", h.L}, {"M", h.M}};
}

void from_json(const nlohmann::json& j, SearchHyper& h) {
  SearchHyper d;
  h.N = j.value("N", d.N);
  h.K = j.value("K", d.K);
  h.L = j.value("L", d.L);
  h.M = j.value("M", d.M);
}

// ---------------------------------------------------------------------------
// PredictionCache

PredictionCache::PredictionCache(const ComputeCostModel& model, bool enabled)
    : model_(&model), enabled_(enabled) {}

size_t PredictionCache::KeyHash::operator()(const std::vector<int>& key) const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (int v : key) {
    h ^= static_cast<uint32_t>(v);
    h *= 0x100000001b3ULL;
    h ^= h >> 29;
  }
  return static_cast<size_t>(h);
}

int PredictionCache::Intern(const TableConfig& table) {
  auto [it, inserted] = ids_.try_emplace({table.id, table.dim},
                                         static_cast<int>(features_.size()));
  if (inserted) {
    features_.push_back(Featurize(table));
    encodings_.push_back(model_->Encode(features_.back()));
  }
  return it->second;
}

double PredictionCache::HitRate() const {
  const int64_t total = hits_ + misses_;
  return total == 0 ? 0.0 : static_cast<double>(hits_) / static_cast<double>(total);
}

double PredictionCache::Compute(const std::vector<int>& sorted_ids) {
  // Pool in the model's canonical (feature-sorted) order so the result is
  // bitwise equal to ComputeCostModel::Predict.
  std::vector<int> order = sorted_ids;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return features_[a] < features_[b]; });
  Eigen::VectorXd pooled = Eigen::VectorXd::Zero(ComputeCostModel::kEmbedding);
  for (int id : order) pooled += encodings_[id];
  ++model_evaluations_;
  return model_->PredictPooled(pooled);
}

double PredictionCache::Get(std::span<const int> ids) {
  if (ids.empty()) throw InvalidArgument("prediction cache: empty table set");
  scratch_.assign(ids.begin(), ids.end());
  std::sort(scratch_.begin(), scratch_.end());
  if (!enabled_) {
    ++misses_;
    return Compute(scratch_);
  }
  auto it = map_.find(scratch_);
  if (it != map_.end()) {
    ++hits_;
    return it->second;
  }
  ++misses_;
  const double value = Compute(scratch_);
  map_.emplace(scratch_, value);
  return value;
}

double PredictionCache::GetTables(std::span<const TableConfig> tables) {
  std::vector<int> ids;
  ids.reserve(tables.size());
  for (const TableConfig& t : tables) ids.push_back(Intern(t));
  return Get(ids);
}

// ---------------------------------------------------------------------------
// Objective

namespace {

// Shared by the public entry points; `ids` are interned ids per table.
PlanCost SimulateInterned(const CostModelBundle& models, PredictionCache& cache,
                          std::span<const TableConfig> tables,
                          std::span<const int> ids,
                          std::span<const int> assignment, int num_devices) {
  std::vector<std::vector<int>> per_device(num_devices);
  std::vector<double> dims(num_devices, 0.0);
  for (size_t i = 0; i < tables.size(); ++i) {
    per_device[assignment[i]].push_back(ids[i]);
    dims[assignment[i]] += tables[i].dim;
  }
  PlanCost cost;
  cost.compute.assign(num_devices, 0.0);
  for (int d = 0; d < num_devices; ++d) {
    if (!per_device[d].empty()) cost.compute[d] = cache.Get(per_device[d]);
  }
  cost.forward = models.comm_fwd.Predict(cost.compute, dims);
  const std::vector<double> zeros(num_devices, 0.0);
  cost.backward = models.comm_bwd.Predict(zeros, dims);
  for (int d = 0; d < num_devices; ++d) {
    cost.bottleneck = std::max(cost.bottleneck, cost.DeviceTotal(d));
  }
  return cost;
}

void CheckDevices(const CostModelBundle& models, int num_devices) {
  if (models.num_devices() != num_devices) {
    throw InvalidArgument("cost models were trained for " +
                          std::to_string(models.num_devices()) +
                          " devices, task has " + std::to_string(num_devices));
  }
}

}  // namespace

PlanCost SimulateAssignmentCost(const CostModelBundle& models,
                                PredictionCache& cache,
                                std::span<const TableConfig> tables,
                                std::span<const int> assignment,
                                int num_devices) {
  CheckDevices(models, num_devices);
  if (assignment.size() != tables.size()) {
    throw PlanInvalid("assignment length does not match table count");
  }
  for (int d : assignment) {
    if (d < 0 || d >= num_devices) throw PlanInvalid("device index out of range");
  }
  std::vector<int> ids;
  ids.reserve(tables.size());
  for (const TableConfig& t : tables) ids.push_back(cache.Intern(t));
  return SimulateInterned(models, cache, tables, ids, assignment, num_devices);
}

PlanCost SimulatePlanCost(const CostModelBundle& models,
                          const ShardingTask& task, const ShardingPlan& plan,
                          PredictionCache& cache) {
  const std::vector<TableConfig> tables = CheckPlan(task, plan);
  return SimulateAssignmentCost(models, cache, tables, plan.assignment,
                                task.num_devices);
}

// ---------------------------------------------------------------------------
// Greedy grid search

std::vector<double> MaxDimGrid(std::span<const TableConfig> tables,
                               int num_devices, int M) {
  if (M < 1) throw InvalidArgument("grid: M must be >= 1");
  double sum = 0.0;
  for (const TableConfig& t : tables) sum += t.dim;
  const double start = sum / num_devices;
  const double end = 1.5 * start;
  std::vector<double> grid;
  grid.reserve(M);
  if (M == 1) return {start};
  for (int k = 0; k < M; ++k) {
    grid.push_back(start + k * (end - start) / (M - 1));
  }
  return grid;
}

GridResult GreedyGridSearch(const CostModelBundle& models,
                            PredictionCache& cache,
                            std::span<const TableConfig> tables,
                            int num_devices, int64_t mem_cap_bytes, int M) {
  CheckDevices(models, num_devices);
  const int n = static_cast<int>(tables.size());
  std::vector<int> ids(n);
  std::vector<double> single(n);
  std::vector<int64_t> bytes(n);
  for (int i = 0; i < n; ++i) {
    ids[i] = cache.Intern(tables[i]);
    single[i] = cache.Get(std::span<const int>(&ids[i], 1));
    bytes[i] = TableSizeBytes(tables[i]);
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return single[a] > single[b]; });

  GridResult best;
  best.cost_ms = kInf;
  best.stranded = n + 1;
  std::vector<std::vector<int>> members(num_devices);
  std::vector<double> dev_dims(num_devices);
  std::vector<int64_t> dev_bytes(num_devices);
  std::vector<int> key;
  for (double max_dim : MaxDimGrid(tables, num_devices, M)) {
    for (auto& m : members) m.clear();
    std::fill(dev_dims.begin(), dev_dims.end(), 0.0);
    std::fill(dev_bytes.begin(), dev_bytes.end(), 0);
    TablePlan assignment(n, -1);
    int stranded = 0;
    for (int i : order) {
      int chosen = -1;
      double chosen_cost = kInf;
      for (int d = 0; d < num_devices; ++d) {
        if (dev_bytes[d] + bytes[i] > mem_cap_bytes) continue;
        if (dev_dims[d] + tables[i].dim > max_dim + kDimTolerance) continue;
        key = members[d];
        key.push_back(ids[i]);
        const double c = cache.Get(key);
        if (c < chosen_cost) {
          chosen_cost = c;
          chosen = d;
        }
      }
      if (chosen < 0) {
        ++stranded;
        continue;
      }
      assignment[i] = chosen;
      members[chosen].push_back(ids[i]);
      dev_dims[chosen] += tables[i].dim;
      dev_bytes[chosen] += bytes[i];
    }
    best.stranded = std::min(best.stranded, stranded);
    if (stranded > 0) continue;
    const double cost =
        SimulateInterned(models, cache, tables, ids, assignment, num_devices)
            .bottleneck;
    if (cost < best.cost_ms) {
      best.feasible = true;
      best.cost_ms = cost;
      best.assignment = std::move(assignment);
      best.max_dim = max_dim;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Beam search

double SearchStats::HitRate() const {
  const int64_t total = cache_hits + cache_misses;
  return total == 0 ? 0.0
                    : static_cast<double>(cache_hits) / static_cast<double>(total);
}

namespace {

struct BeamEntry {
  ColumnPlan column_plan;
  std::vector<TableConfig> tables;
  GridResult grid;
};

// Top-N by single-table predicted cost, then top-N by size, splittable
// tables only, duplicates dropped.
std::vector<int> Candidates(const std::vector<TableConfig>& tables, int N,
                            PredictionCache& cache) {
  std::vector<int> splittable;
  std::vector<double> cost(tables.size());
  for (size_t i = 0; i < tables.size(); ++i) {
    if (!IsSplittable(tables[i])) continue;
    splittable.push_back(static_cast<int>(i));
    const int id = cache.Intern(tables[i]);
    cost[i] = cache.Get(std::span<const int>(&id, 1));
  }
  std::vector<int> by_cost = splittable;
  std::stable_sort(by_cost.begin(), by_cost.end(),
                   [&](int a, int b) { return cost[a] > cost[b]; });
  std::vector<int> by_size = splittable;
  std::stable_sort(by_size.begin(), by_size.end(), [&](int a, int b) {
    return TableSizeBytes(tables[a]) > TableSizeBytes(tables[b]);
  });
  const size_t n = static_cast<size_t>(N);
  std::vector<int> out(by_cost.begin(),
                       by_cost.begin() + std::min(n, by_cost.size()));
  for (size_t k = 0; k < std::min(n, by_size.size()); ++k) {
    if (std::find(out.begin(), out.end(), by_size[k]) == out.end()) {
      out.push_back(by_size[k]);
    }
  }
  return out;
}

bool Better(const BeamEntry& a, const BeamEntry& b) {
  if (a.grid.cost_ms != b.grid.cost_ms) return a.grid.cost_ms < b.grid.cost_ms;
  return a.grid.stranded < b.grid.stranded;
}

}  // namespace

SearchResult BeamSearch(const CostModelBundle& models,
                        const ShardingTask& task, const SearchHyper& hyper,
                        PredictionCache& cache) {
  hyper.Validate();
  ValidateTask(task);
  CheckDevices(models, task.num_devices);
  const int64_t hits0 = cache.hits();
  const int64_t misses0 = cache.misses();
  const int64_t evals0 = cache.model_evaluations();

  SearchResult result;
  auto evaluate = [&](ColumnPlan plan, std::vector<TableConfig> tables) {
    BeamEntry e;
    e.grid = GreedyGridSearch(models, cache, tables, task.num_devices,
                              task.mem_cap_bytes, hyper.M);
    e.column_plan = std::move(plan);
    e.tables = std::move(tables);
    ++result.stats.plans_evaluated;
    if (e.grid.feasible &&
        (!result.feasible || e.grid.cost_ms < result.plan.predicted_cost_ms)) {
      result.feasible = true;
      result.plan = {e.column_plan, e.grid.assignment, e.grid.cost_ms};
      result.tables_after_split = e.tables;
    }
    return e;
  };

  std::vector<BeamEntry> beam;
  beam.push_back(evaluate({}, task.tables));
  for (int level = 0; level < hyper.L; ++level) {
    std::vector<BeamEntry> next;
    for (const BeamEntry& parent : beam) {
      for (int c : Candidates(parent.tables, hyper.N, cache)) {
        ColumnPlan plan = parent.column_plan;
        plan.push_back(c);
        next.push_back(evaluate(std::move(plan),
                                ApplyColumnPlan(parent.tables,
                                                std::span<const int>(&c, 1))));
      }
    }
    if (next.empty()) break;
    std::stable_sort(next.begin(), next.end(), Better);
    if (next.size() > static_cast<size_t>(hyper.K)) next.resize(hyper.K);
    beam = std::move(next);
  }

  if (!result.feasible) {
    result.plan = {};
    result.tables_after_split.clear();
  }
  result.stats.cache_hits = cache.hits() - hits0;
  result.stats.cache_misses = cache.misses() - misses0;
  result.stats.model_evaluations = cache.model_evaluations() - evals0;
  return result;
}

SearchResult BeamSearch(const CostModelBundle& models,
                        const ShardingTask& task, const SearchHyper& hyper,
                        bool use_cache) {
  PredictionCache cache(models.compute, use_cache);
  return BeamSearch(models, task, hyper, cache);
}

}  // namespace shardsearch
