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

#include "shardsearch/harness.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "shardsearch/baselines.h"
#include "shardsearch/common.h"
#include "shardsearch/io.h"
#include "shardsearch/plan_check.h"

namespace shardsearch {

const std::vector<std::string>& AllAlgorithms() {
  static const std::vector<std::string> kAll = {
      "planner",    "random",        "greedy_size",
      "greedy_dim", "greedy_lookup", "greedy_size_lookup"};
  return kAll;
}

bool IsKnownAlgorithm(const std::string& name) {
  const auto& all = AllAlgorithms();
  return std::find(all.begin(), all.end(), name) != all.end();
}

EvaluatorKind ParseEvaluator(const std::string& s) {
  if (s == "oracle") return EvaluatorKind::kOracle;
  if (s == "model") return EvaluatorKind::kModel;
  if (s == "both") return EvaluatorKind::kBoth;
  throw ConfigError("unknown evaluator: " + s);
}

std::string ToString(EvaluatorKind e) {
  switch (e) {
    case EvaluatorKind::kOracle:
      return "oracle";
    case EvaluatorKind::kModel:
      return "model";
    case EvaluatorKind::kBoth:
      return "both";
  }
  return "";
}

nlohmann::json EvalConfig::ToJson() const {
  return {{"algorithms", algorithms},
          {"hyper", hyper},
          {"use_cache", use_cache},
          {"evaluator", ToString(evaluator)},
          {"oracle", oracle},
          {"seed", seed},
          {"presplit_baselines", presplit_baselines},
          {"provenance", provenance}};
}

namespace {

using Clock = std::chrono::steady_clock;

bool UsesOracle(EvaluatorKind e) { return e != EvaluatorKind::kModel; }
bool UsesModel(EvaluatorKind e) { return e != EvaluatorKind::kOracle; }

nlohmann::json Optional(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

void CheckInputs(const std::vector<ShardingTask>& tasks,
                 const CostModelBundle& models, const EvalConfig& config) {
  if (tasks.empty()) throw ConfigError("no tasks to evaluate");
  for (const std::string& a : config.algorithms) {
    if (!IsKnownAlgorithm(a)) throw ConfigError("unknown algorithm: " + a);
  }
  for (const ShardingTask& t : tasks) {
    if (t.num_devices != models.num_devices()) {
      throw ConfigError("task has " + std::to_string(t.num_devices) +
                        " devices but the models expect " +
                        std::to_string(models.num_devices()));
    }
  }
  try {
    config.hyper.Validate();
    config.oracle.Validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

AlgorithmSummary Summarize(const std::string& algorithm,
                           const std::vector<TaskOutcome>& rows) {
  AlgorithmSummary s;
  s.algorithm = algorithm;
  double oracle_sum = 0, model_sum = 0, gap_sum = 0, wall_sum = 0;
  int n_oracle = 0, n_model = 0, n_gap = 0;
  for (const TaskOutcome& r : rows) {
    if (r.algorithm != algorithm) continue;
    ++s.num_tasks;
    wall_sum += r.wall_seconds;
    s.cache_hits += r.cache_hits;
    s.cache_misses += r.cache_misses;
    s.model_evaluations += r.model_evaluations;
    if (!r.feasible) continue;
    ++s.num_feasible;
    if (!r.audit_errors.empty()) ++s.num_invalid;
    if (r.oracle_cost_ms) {
      oracle_sum += *r.oracle_cost_ms;
      ++n_oracle;
    }
    if (r.model_cost_ms) {
      model_sum += *r.model_cost_ms;
      ++n_model;
    }
    if (r.oracle_cost_ms && r.model_cost_ms && *r.oracle_cost_ms > 0) {
      gap_sum += std::abs(*r.model_cost_ms - *r.oracle_cost_ms) / *r.oracle_cost_ms;
      ++n_gap;
    }
  }
  if (s.num_tasks == 0) return s;
  s.success_rate = static_cast<double>(s.num_feasible) / s.num_tasks;
  if (n_oracle > 0) {
    s.mean_oracle_cost_feasible_ms = oracle_sum / n_oracle;
    if (s.num_feasible == s.num_tasks) s.mean_oracle_cost_ms = oracle_sum / n_oracle;
  }
  if (n_model > 0) s.mean_model_cost_feasible_ms = model_sum / n_model;
  if (n_gap > 0) s.mean_relative_gap = gap_sum / n_gap;
  const int64_t lookups = s.cache_hits + s.cache_misses;
  s.cache_hit_rate =
      lookups == 0 ? 0.0 : static_cast<double>(s.cache_hits) / lookups;
  s.mean_wall_seconds = wall_sum / s.num_tasks;
  return s;
}

nlohmann::json SummaryJson(const AlgorithmSummary& s) {
  return {{"algorithm", s.algorithm},
          {"num_tasks", s.num_tasks},
          {"num_feasible", s.num_feasible},
          {"num_invalid", s.num_invalid},
          {"success_rate", s.success_rate},
          {"mean_oracle_cost_ms", Optional(s.mean_oracle_cost_ms)},
          {"mean_oracle_cost_feasible_ms", Optional(s.mean_oracle_cost_feasible_ms)},
          {"mean_model_cost_feasible_ms", Optional(s.mean_model_cost_feasible_ms)},
          {"mean_relative_gap", Optional(s.mean_relative_gap)},
          {"cache_hit_rate", s.cache_hit_rate},
          {"cache_hits", s.cache_hits},
          {"cache_misses", s.cache_misses},
          {"model_evaluations", s.model_evaluations}};
}

nlohmann::json RowJson(const TaskOutcome& r) {
  return {{"task", r.task},
          {"algorithm", r.algorithm},
          {"feasible", r.feasible},
          {"col", r.plan.column_plan},
          {"assign", r.plan.assignment},
          {"predicted_cost_ms", r.feasible ? nlohmann::json(r.plan.predicted_cost_ms)
                                           : nlohmann::json(nullptr)},
          {"num_tables_after_split", r.num_tables_after_split},
          {"oracle_cost_ms", Optional(r.oracle_cost_ms)},
          {"model_cost_ms", Optional(r.model_cost_ms)},
          {"audit_errors", r.audit_errors},
          {"cache_hits", r.cache_hits},
          {"cache_misses", r.cache_misses},
          {"model_evaluations", r.model_evaluations}};
}

std::string FormatOptional(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream ss;
  ss << std::setprecision(12) << *v;
  return ss.str();
}

nlohmann::json Fingerprints(const std::vector<ShardingTask>& tasks,
                            const CostModelBundle& models,
                            const EvalConfig& config) {
  return {{"tasks", Fingerprint(TaskSetJson(tasks).dump())},
          {"models", models.Fingerprints()},
          {"oracle", Fingerprint(nlohmann::json(config.oracle).dump())},
          {"config", Fingerprint(config.ToJson().dump())}};
}

// Runs `config.algorithms` over all tasks, labelling planner rows `label`.
std::vector<TaskOutcome> RunAll(const std::vector<ShardingTask>& tasks,
                                const CostModelBundle& models,
                                const EvalConfig& config,
                                const std::string& planner_label) {
  std::vector<TaskOutcome> rows;
  for (size_t i = 0; i < tasks.size(); ++i) {
    const int index = static_cast<int>(i);
    std::optional<TaskOutcome> planner;
    const bool need_planner =
        config.presplit_baselines ||
        std::find(config.algorithms.begin(), config.algorithms.end(),
                  "planner") != config.algorithms.end();
    if (need_planner) {
      planner = RunAlgorithm("planner", tasks[i], index, models, config);
    }
    for (const std::string& a : config.algorithms) {
      if (a == "planner") {
        rows.push_back(*planner);
        rows.back().algorithm = planner_label;
        continue;
      }
      const ColumnPlan* col =
          config.presplit_baselines && planner->feasible
              ? &planner->plan.column_plan
              : nullptr;
      rows.push_back(RunAlgorithm(a, tasks[i], index, models, config, col));
    }
  }
  return rows;
}

}  // namespace

TaskOutcome RunAlgorithm(const std::string& algorithm, const ShardingTask& task,
                         int task_index, const CostModelBundle& models,
                         const EvalConfig& config,
                         const ColumnPlan* planner_col) {
  TaskOutcome out;
  out.task = task_index;
  out.algorithm = algorithm;
  const Clock::time_point start = Clock::now();
  if (algorithm == "planner") {
    const SearchResult r =
        BeamSearch(models, task, config.hyper, config.use_cache);
    out.wall_seconds =
        std::chrono::duration<double>(Clock::now() - start).count();
    out.feasible = r.feasible;
    out.plan = r.plan;
    out.num_tables_after_split = static_cast<int>(r.tables_after_split.size());
    out.cache_hits = r.stats.cache_hits;
    out.cache_misses = r.stats.cache_misses;
    out.model_evaluations = r.stats.model_evaluations;
  } else {
    const std::vector<TableConfig> tables =
        planner_col != nullptr ? ApplyColumnPlan(task.tables, *planner_col)
                               : task.tables;
    std::optional<TablePlan> assignment;
    if (algorithm == "random") {
      assignment = RandomShard(tables, task.num_devices, task.mem_cap_bytes,
                               DeriveSeed(config.seed, task_index));
    } else if (algorithm.starts_with("greedy_")) {
      assignment = GreedyShard(tables, task.num_devices,
                               ParseHeuristic(algorithm.substr(7)),
                               task.mem_cap_bytes);
    } else {
      throw ConfigError("unknown algorithm: " + algorithm);
    }
    out.wall_seconds =
        std::chrono::duration<double>(Clock::now() - start).count();
    out.feasible = assignment.has_value();
    if (out.feasible) {
      out.plan.column_plan = planner_col != nullptr ? *planner_col : ColumnPlan{};
      out.plan.assignment = std::move(*assignment);
      out.num_tables_after_split = static_cast<int>(tables.size());
    }
  }
  if (!out.feasible) return out;

  out.audit_errors = AuditPlan(task, out.plan.column_plan, out.plan.assignment);
  if (!out.audit_errors.empty()) return out;
  if (UsesOracle(config.evaluator)) {
    out.oracle_cost_ms = OracleEvalPlan(task, out.plan, config.oracle).bottleneck;
  }
  if (UsesModel(config.evaluator) || algorithm != "planner") {
    PredictionCache cache(models.compute);
    const double model_cost =
        SimulatePlanCost(models, task, out.plan, cache).bottleneck;
    if (algorithm != "planner") out.plan.predicted_cost_ms = model_cost;
    if (UsesModel(config.evaluator)) out.model_cost_ms = model_cost;
  }
  return out;
}

const AlgorithmSummary& EvalReport::Summary(const std::string& algorithm) const {
  for (const AlgorithmSummary& s : summaries) {
    if (s.algorithm == algorithm) return s;
  }
  throw InvalidArgument("report has no algorithm " + algorithm);
}

nlohmann::json EvalReport::ToJson() const {
  nlohmann::json summary_json = nlohmann::json::array();
  for (const AlgorithmSummary& s : summaries) summary_json.push_back(SummaryJson(s));
  nlohmann::json row_json = nlohmann::json::array();
  for (const TaskOutcome& r : rows) row_json.push_back(RowJson(r));
  return {{"format", "shardsearch-report"},
          {"version", 1},
          {"kind", kind},
          {"config", config},
          {"fingerprints", fingerprints},
          {"summaries", summary_json},
          {"extra", extra},
          {"tasks", row_json}};
}

nlohmann::json EvalReport::TimingJson() const {
  nlohmann::json per_algorithm = nlohmann::json::object();
  for (const AlgorithmSummary& s : summaries) {
    per_algorithm[s.algorithm] = s.mean_wall_seconds;
  }
  nlohmann::json per_task = nlohmann::json::array();
  for (const TaskOutcome& r : rows) {
    per_task.push_back(
        {{"task", r.task}, {"algorithm", r.algorithm}, {"wall_seconds", r.wall_seconds}});
  }
  return {{"mean_wall_seconds", per_algorithm}, {"tasks", per_task}};
}

std::string EvalReport::ToCsv() const {
  std::ostringstream ss;
  ss << "task,algorithm,feasible,valid,num_splits,num_tables,oracle_cost_ms,"
        "model_cost_ms,cache_hits,cache_misses,model_evaluations\n";
  for (const TaskOutcome& r : rows) {
    ss << r.task << ',' << r.algorithm << ',' << (r.feasible ? 1 : 0) << ','
       << (r.audit_errors.empty() ? 1 : 0) << ',' << r.plan.column_plan.size()
       << ',' << r.num_tables_after_split << ','
       << FormatOptional(r.oracle_cost_ms) << ','
       << FormatOptional(r.model_cost_ms) << ',' << r.cache_hits << ','
       << r.cache_misses << ',' << r.model_evaluations << '\n';
  }
  return ss.str();
}

EvalReport Evaluate(const std::vector<ShardingTask>& tasks,
                    const CostModelBundle& models, const EvalConfig& config) {
  CheckInputs(tasks, models, config);
  EvalReport report;
  report.kind = "eval";
  report.config = config.ToJson();
  report.fingerprints = Fingerprints(tasks, models, config);
  report.rows = RunAll(tasks, models, config, "planner");
  for (const std::string& a : config.algorithms) {
    report.summaries.push_back(Summarize(a, report.rows));
  }
  return report;
}

EvalReport Ablate(const std::vector<ShardingTask>& tasks,
                  const CostModelBundle& models, const EvalConfig& base,
                  const std::vector<std::string>& flags) {
  EvalConfig full = base;
  full.algorithms = {"planner"};
  full.presplit_baselines = false;
  CheckInputs(tasks, models, full);
  EvalReport report;
  report.kind = "ablate";
  report.config = full.ToJson();
  report.config["ablations"] = flags;
  report.fingerprints = Fingerprints(tasks, models, full);
  report.rows = RunAll(tasks, models, full, "planner");
  report.summaries.push_back(Summarize("planner", report.rows));

  nlohmann::json paired = nlohmann::json::object();
  for (const std::string& flag : flags) {
    EvalConfig variant = full;
    if (flag == "no_beam") {
      variant.hyper.L = 0;
    } else if (flag == "no_grid") {
      variant.hyper.M = 1;
    } else if (flag == "no_cache") {
      variant.use_cache = false;
    } else {
      throw ConfigError("unknown ablation: " + flag);
    }
    const std::string label = "planner_" + flag;
    std::vector<TaskOutcome> rows = RunAll(tasks, models, variant, label);
    // Paired comparison on tasks both variants solved.
    int common = 0;
    double full_sum = 0, variant_sum = 0;
    for (size_t i = 0; i < rows.size(); ++i) {
      const TaskOutcome& f = report.rows[i];
      const TaskOutcome& v = rows[i];
      if (f.oracle_cost_ms && v.oracle_cost_ms) {
        ++common;
        full_sum += *f.oracle_cost_ms;
        variant_sum += *v.oracle_cost_ms;
      }
    }
    paired[label] = {
        {"common_feasible_tasks", common},
        {"mean_oracle_cost_ms_full",
         common > 0 ? nlohmann::json(full_sum / common) : nlohmann::json(nullptr)},
        {"mean_oracle_cost_ms_variant",
         common > 0 ? nlohmann::json(variant_sum / common)
                    : nlohmann::json(nullptr)}};
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    report.summaries.push_back(Summarize(label, report.rows));
  }
  report.extra["paired"] = paired;
  return report;
}

EvalReport Sweep(const std::vector<ShardingTask>& tasks,
                 const CostModelBundle& models, const EvalConfig& base,
                 const std::string& name, const std::vector<int>& values) {
  if (name != "N" && name != "K" && name != "L" && name != "M") {
    throw ConfigError("sweep: hyperparameter must be one of N, K, L, M");
  }
  if (values.empty()) throw ConfigError("sweep: no values");
  EvalConfig config = base;
  config.algorithms = {"planner"};
  config.presplit_baselines = false;
  EvalReport report;
  report.kind = "sweep";
  report.config = config.ToJson();
  report.config["sweep"] = {{"hyper", name}, {"values", values}};
  report.fingerprints = Fingerprints(tasks, models, config);
  nlohmann::json table = nlohmann::json::array();
  for (int value : values) {
    EvalConfig variant = config;
    int& slot = name == "N"   ? variant.hyper.N
                : name == "K" ? variant.hyper.K
                : name == "L" ? variant.hyper.L
                              : variant.hyper.M;
    slot = value;
    CheckInputs(tasks, models, variant);
    const std::string label = "planner_" + name + "=" + std::to_string(value);
    std::vector<TaskOutcome> rows = RunAll(tasks, models, variant, label);
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    const AlgorithmSummary s = Summarize(label, report.rows);
    report.summaries.push_back(s);
    table.push_back(
        {{"value", value},
         {"success_rate", s.success_rate},
         {"mean_oracle_cost_feasible_ms", Optional(s.mean_oracle_cost_feasible_ms)},
         {"mean_model_evaluations",
          static_cast<double>(s.model_evaluations) / s.num_tasks}});
  }
  report.extra["sweep"] = table;
  return report;
}

nlohmann::json PlanJson(const ShardingPlan& plan,
                        const std::vector<TableConfig>& tables_after_split,
                        const std::string& algorithm,
                        const std::optional<SearchHyper>& hyper,
                        const nlohmann::json& model_fingerprints) {
  nlohmann::json j{{"algorithm", algorithm},
                   {"feasible", !plan.assignment.empty()},
                   {"col", plan.column_plan},
                   {"assign", plan.assignment},
                   {"predicted_cost_ms", plan.assignment.empty()
                                             ? nlohmann::json(nullptr)
                                             : nlohmann::json(plan.predicted_cost_ms)},
                   {"tables_after_split", tables_after_split},
                   {"model_fingerprints", model_fingerprints}};
  if (hyper) j["hyper"] = *hyper;
  return j;
}

}  // namespace shardsearch
