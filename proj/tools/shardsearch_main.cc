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

// shardsearch: command-line driver for the generate / train / shard / eval
// pipeline.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "CLI11.hpp"
#include "shardsearch/baselines.h"
#include "shardsearch/common.h"
#include "shardsearch/cost_model.h"
#include "shardsearch/datagen.h"
#include "shardsearch/harness.h"
#include "shardsearch/io.h"
#include "shardsearch/search.h"
#include "shardsearch/tables.h"

namespace shardsearch {
namespace {

namespace fs = std::filesystem;

OracleParams LoadOracle(const std::string& path) {
  if (path.empty()) return OracleParams{};
  try {
    OracleParams p = ReadJsonFile(path).get<OracleParams>();
    p.Validate();
    return p;
  } catch (const InvalidArgument& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

CostModelBundle LoadModels(const std::string& dir) {
  return CostModelBundle::Load(dir);
}

ShardingTask PickTask(const std::string& path, int index) {
  const std::vector<ShardingTask> tasks = LoadTasks(path);
  if (index < 0 || index >= static_cast<int>(tasks.size())) {
    throw ConfigError("task index " + std::to_string(index) + " out of range [0, " +
                      std::to_string(tasks.size()) + ")");
  }
  return tasks[index];
}

void WriteReport(const EvalReport& report, const fs::path& out) {
  WriteJsonFile(out, report.ToJson());
  fs::path csv = out;
  csv.replace_extension(".csv");
  WriteTextFile(csv, report.ToCsv());
  fs::path timing = out;
  timing.replace_extension(".timing.json");
  WriteJsonFile(timing, report.TimingJson());
}

void PrintSummaries(const EvalReport& report) {
  for (const AlgorithmSummary& s : report.summaries) {
    std::cout << s.algorithm << ": success " << s.num_feasible << "/"
              << s.num_tasks;
    if (s.mean_oracle_cost_feasible_ms) {
      std::cout << ", mean oracle cost " << *s.mean_oracle_cost_feasible_ms
                << " ms";
    }
    if (s.mean_relative_gap) {
      std::cout << ", model/oracle gap " << 100.0 * *s.mean_relative_gap << "%";
    }
    if (s.cache_hits + s.cache_misses > 0) {
      std::cout << ", cache hit rate " << 100.0 * s.cache_hit_rate << "%";
    }
    std::cout << ", " << s.mean_wall_seconds << " s/task\n";
  }
}

std::vector<int> ParseDims(const std::string& csv) {
  std::vector<int> dims;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) dims.push_back(std::stoi(item));
  }
  return dims;
}

struct EvalFlags {
  std::string tasks;
  std::string models;
  std::string oracle;
  std::string out;
  SearchHyper hyper;
  uint64_t seed = 0;
  bool no_cache = false;
};

void AddEvalFlags(CLI::App* app, EvalFlags& f) {
  app->add_option("--tasks", f.tasks, "Task set JSON")->required();
  app->add_option("--models", f.models, "Model directory")->required();
  app->add_option("--oracle", f.oracle, "Oracle parameter JSON");
  app->add_option("--out", f.out, "Report JSON (CSV and timing files alongside)")
      ->required();
  app->add_option("--N", f.hyper.N, "Candidate tables per ranking");
  app->add_option("--K", f.hyper.K, "Beam width");
  app->add_option("--L", f.hyper.L, "Split steps");
  app->add_option("--M", f.hyper.M, "Grid points");
  app->add_option("--seed", f.seed, "Seed for the random baseline");
  app->add_flag("--no-cache", f.no_cache, "Disable the prediction cache");
}

EvalConfig MakeEvalConfig(const EvalFlags& f) {
  EvalConfig c;
  c.hyper = f.hyper;
  c.use_cache = !f.no_cache;
  c.oracle = LoadOracle(f.oracle);
  c.seed = f.seed;
  c.provenance = {{"tasks_file", fs::path(f.tasks).filename().string()}};
  return c;
}

int Run(int argc, char** argv) {
  CLI::App app{"Embedding table sharding: data generation, cost-model "
               "training, search and evaluation."};
  app.require_subcommand(1);

  // gen-pool
  int pool_n = 856;
  uint64_t pool_seed = 0;
  std::string pool_out, pool_augment;
  CLI::App* gen_pool = app.add_subcommand("gen-pool", "Generate a table pool");
  gen_pool->add_option("--n", pool_n, "Number of tables");
  gen_pool->add_option("--seed", pool_seed, "Seed");
  gen_pool->add_option("--augment", pool_augment,
                       "Comma-separated dims; emit one variant per dim");
  gen_pool->add_option("--out", pool_out, "Pool JSON")->required();

  // gen-tasks
  TaskGenConfig task_cfg;
  std::string tasks_pool, tasks_out;
  double mem_cap_gib = 4.0;
  CLI::App* gen_tasks = app.add_subcommand("gen-tasks", "Generate sharding tasks");
  gen_tasks->add_option("--pool", tasks_pool, "Pool JSON or CSV")->required();
  gen_tasks->add_option("--devices", task_cfg.num_devices, "Devices per task");
  CLI::Option* tmin = gen_tasks->add_option("--min-tables", task_cfg.min_tables);
  CLI::Option* tmax = gen_tasks->add_option("--max-tables", task_cfg.max_tables);
  gen_tasks->add_option("--max-dim", task_cfg.max_dim, "Largest table dim");
  gen_tasks->add_option("--count", task_cfg.count, "Number of tasks");
  gen_tasks->add_option("--mem-cap-gib", mem_cap_gib, "Per-device memory, GiB");
  gen_tasks->add_option("--seed", task_cfg.seed, "Seed");
  gen_tasks->add_option("--out", tasks_out, "Task set JSON")->required();

  // gen-data
  DataGenConfig data_cfg;
  std::string data_pool, data_out, data_oracle;
  double data_noise = -1.0;
  CLI::App* gen_data = app.add_subcommand("gen-data", "Collect oracle cost samples");
  gen_data->add_option("--pool", data_pool, "Pool JSON or CSV")->required();
  gen_data->add_option("--kind", data_cfg.kind, "compute|comm-fwd|comm-bwd")
      ->check(CLI::IsMember({"compute", "comm-fwd", "comm-bwd"}));
  gen_data->add_option("--count", data_cfg.count, "Samples");
  gen_data->add_option("--devices", data_cfg.num_devices, "Devices (comm)");
  gen_data->add_option("--n-min", data_cfg.n_min, "Min tables per sample");
  gen_data->add_option("--n-max", data_cfg.n_max, "Max tables per sample");
  std::vector<double> start_range;
  gen_data->add_option("--start-range-ms", start_range,
                       "Comm start range min,max (default 0,20 fwd; 0,0 bwd)")
      ->delimiter(',')
      ->expected(2);
  gen_data->add_option("--seed", data_cfg.seed, "Seed");
  gen_data->add_option("--oracle", data_oracle, "Oracle parameter JSON");
  gen_data->add_option("--noise", data_noise, "Override oracle noise sigma");
  gen_data->add_option("--out", data_out, "Dataset JSONL")->required();

  // train
  std::string train_kind = "compute", train_data, train_out;
  TrainConfig train_cfg;
  CLI::App* train = app.add_subcommand("train", "Train a cost model");
  train->add_option("--kind", train_kind, "compute|comm-fwd|comm-bwd")
      ->check(CLI::IsMember({"compute", "comm-fwd", "comm-bwd"}));
  train->add_option("--data", train_data, "Dataset JSONL")->required();
  train->add_option("--out", train_out, "Model JSON")->required();
  train->add_option("--epochs", train_cfg.epochs, "Epochs");
  train->add_option("--batch-size", train_cfg.batch_size, "Mini-batch size");
  train->add_option("--lr", train_cfg.learning_rate, "Adam learning rate");
  train->add_option("--seed", train_cfg.seed, "Seed");

  // shard
  std::string shard_task, shard_models, shard_out;
  int shard_index = 0;
  SearchHyper shard_hyper;
  bool shard_no_cache = false;
  CLI::App* shard = app.add_subcommand("shard", "Search a sharding plan");
  shard->add_option("--task", shard_task, "Task or task set JSON")->required();
  shard->add_option("--index", shard_index, "Task index within a set");
  shard->add_option("--models", shard_models, "Model directory")->required();
  shard->add_option("--N", shard_hyper.N, "Candidate tables per ranking");
  shard->add_option("--K", shard_hyper.K, "Beam width");
  shard->add_option("--L", shard_hyper.L, "Split steps");
  shard->add_option("--M", shard_hyper.M, "Grid points");
  shard->add_flag("--no-cache", shard_no_cache, "Disable the prediction cache");
  shard->add_option("--out", shard_out, "Plan JSON")->required();

  // baseline
  std::string base_task, base_models, base_algorithm = "greedy_lookup",
                                      base_out, base_presplit;
  int base_index = 0;
  uint64_t base_seed = 0;
  CLI::App* baseline = app.add_subcommand("baseline", "Run a heuristic baseline");
  baseline->add_option("--task", base_task, "Task or task set JSON")->required();
  baseline->add_option("--index", base_index, "Task index within a set");
  baseline->add_option("--algorithm", base_algorithm)
      ->check(CLI::IsMember({"random", "greedy_size", "greedy_dim",
                             "greedy_lookup", "greedy_size_lookup"}));
  baseline->add_option("--models", base_models,
                       "Model directory (for the predicted cost)");
  baseline->add_option("--presplit", base_presplit,
                       "Plan JSON whose column plan is applied first");
  baseline->add_option("--seed", base_seed, "Seed for random");
  baseline->add_option("--out", base_out, "Plan JSON")->required();

  // eval
  EvalFlags eval_flags;
  std::vector<std::string> eval_algorithms = AllAlgorithms();
  std::string evaluator = "both";
  bool presplit = false;
  CLI::App* eval = app.add_subcommand("eval", "Compare algorithms on a task set");
  AddEvalFlags(eval, eval_flags);
  eval->add_option("--algorithms", eval_algorithms)->delimiter(',');
  eval->add_option("--evaluator", evaluator, "oracle|model|both")
      ->check(CLI::IsMember({"oracle", "model", "both"}));
  eval->add_flag("--presplit-baselines", presplit,
                 "Apply the planner's column plan before each baseline");

  // ablate
  EvalFlags ablate_flags;
  std::vector<std::string> ablations = {"no_beam", "no_grid", "no_cache"};
  CLI::App* ablate = app.add_subcommand("ablate", "Planner ablations");
  AddEvalFlags(ablate, ablate_flags);
  ablate->add_option("--flags", ablations)
      ->delimiter(',')
      ->check(CLI::IsMember({"no_beam", "no_grid", "no_cache"}));

  // sweep
  EvalFlags sweep_flags;
  std::string sweep_hyper = "L";
  std::vector<int> sweep_values = {0, 2, 10};
  CLI::App* sweep = app.add_subcommand("sweep", "Sweep one search hyperparameter");
  AddEvalFlags(sweep, sweep_flags);
  sweep->add_option("--hyper", sweep_hyper)->check(CLI::IsMember({"N", "K", "L", "M"}));
  sweep->add_option("--values", sweep_values)->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  if (*gen_pool) {
    TablePool pool = GenPool(pool_n, pool_seed);
    if (!pool_augment.empty()) {
      const std::vector<int> dims = ParseDims(pool_augment);
      pool = AugmentPool(pool, dims);
    }
    WriteJsonFile(pool_out, pool);
    std::cout << "wrote " << pool.tables.size() << " tables to " << pool_out << "\n";
  } else if (*gen_tasks) {
    if (tmin->count() == 0) task_cfg.min_tables = 10 * task_cfg.num_devices / 4;
    if (tmax->count() == 0) task_cfg.max_tables = 60 * task_cfg.num_devices / 4;
    task_cfg.mem_cap_bytes = static_cast<int64_t>(mem_cap_gib * (int64_t{1} << 30));
    const std::vector<ShardingTask> tasks = GenTasks(LoadPool(tasks_pool), task_cfg);
    WriteJsonFile(tasks_out, TaskSetJson(tasks));
    std::cout << "wrote " << tasks.size() << " tasks to " << tasks_out << "\n";
  } else if (*gen_data) {
    const TablePool pool = LoadPool(data_pool);
    data_cfg.oracle = LoadOracle(data_oracle);
    if (data_noise >= 0.0) data_cfg.oracle.noise_sigma = data_noise;
    if (start_range.size() == 2) {
      data_cfg.start_range_ms = std::make_pair(start_range[0], start_range[1]);
    }
    const DataGenConfig resolved = data_cfg.Resolved();
    DatasetHeader header{resolved.kind, resolved.oracle, resolved.ToJson()};
    header.generator["pool_fingerprint"] = Fingerprint(nlohmann::json(pool).dump());
    std::ostringstream out;
    if (resolved.kind == "compute") {
      WriteComputeDataset(out, header, GenComputeData(pool, resolved));
    } else {
      WriteCommDataset(out, header, GenCommData(pool, resolved));
    }
    WriteTextFile(data_out, out.str());
    std::cout << "wrote " << resolved.count << " " << resolved.kind
              << " samples to " << data_out << "\n";
  } else if (*train) {
    std::istringstream in(ReadTextFile(train_data));
    TrainMetrics metrics;
    nlohmann::json model_json;
    if (train_kind == "compute") {
      const std::vector<ComputeSample> data = ReadComputeDataset(in);
      ComputeCostModel model;
      metrics = Train(model, data, train_cfg);
      model.training_info()["data_fingerprint"] = Fingerprint(ReadTextFile(train_data));
      model_json = model.ToJson();
    } else {
      DatasetHeader header;
      const std::vector<CommSample> data = ReadCommDataset(in, &header);
      if (header.kind != train_kind) {
        throw ConfigError("dataset kind " + header.kind + " does not match --kind " +
                          train_kind);
      }
      if (data.empty()) throw ConfigError("empty dataset");
      CommCostModel model(static_cast<int>(data.front().starts.size()));
      metrics = Train(model, data, train_cfg);
      model.training_info()["data_fingerprint"] = Fingerprint(ReadTextFile(train_data));
      model_json = model.ToJson(train_kind);
    }
    WriteTextFile(train_out, model_json.dump() + "\n");
    std::cout << "best epoch " << metrics.best_epoch << ", valid MSE "
              << metrics.valid_mse << ", test MSE " << metrics.test_mse << "\n";
  } else if (*shard) {
    const CostModelBundle models = LoadModels(shard_models);
    const ShardingTask task = PickTask(shard_task, shard_index);
    const SearchResult r = BeamSearch(models, task, shard_hyper, !shard_no_cache);
    WriteJsonFile(shard_out, PlanJson(r.plan, r.tables_after_split, "planner",
                                      shard_hyper, models.Fingerprints()));
    if (r.feasible) {
      std::cout << "predicted cost " << r.plan.predicted_cost_ms << " ms, "
                << r.plan.column_plan.size() << " splits, cache hit rate "
                << 100.0 * r.stats.HitRate() << "%\n";
    } else {
      std::cout << "infeasible: no plan satisfies the memory caps\n";
    }
  } else if (*baseline) {
    const ShardingTask task = PickTask(base_task, base_index);
    ColumnPlan col;
    if (!base_presplit.empty()) {
      col = ReadJsonFile(base_presplit).at("col").get<ColumnPlan>();
    }
    const std::vector<TableConfig> tables = ApplyColumnPlan(task.tables, col);
    const std::optional<TablePlan> assignment =
        base_algorithm == "random"
            ? RandomShard(tables, task.num_devices, task.mem_cap_bytes,
                          DeriveSeed(base_seed, base_index))
            : GreedyShard(tables, task.num_devices,
                          ParseHeuristic(base_algorithm.substr(7)),
                          task.mem_cap_bytes);
    ShardingPlan plan;
    nlohmann::json fingerprints = nlohmann::json::object();
    if (assignment) {
      plan = {col, *assignment, 0.0};
      if (!base_models.empty()) {
        const CostModelBundle models = LoadModels(base_models);
        PredictionCache cache(models.compute);
        plan.predicted_cost_ms = SimulatePlanCost(models, task, plan, cache).bottleneck;
        fingerprints = models.Fingerprints();
      }
    }
    WriteJsonFile(base_out, PlanJson(plan, assignment ? tables : std::vector<TableConfig>{},
                                     base_algorithm, std::nullopt, fingerprints));
    std::cout << (assignment ? "feasible" : "infeasible") << "\n";
  } else if (*eval) {
    EvalConfig config = MakeEvalConfig(eval_flags);
    config.algorithms = eval_algorithms;
    config.evaluator = ParseEvaluator(evaluator);
    config.presplit_baselines = presplit;
    const EvalReport report =
        Evaluate(LoadTasks(eval_flags.tasks), LoadModels(eval_flags.models), config);
    WriteReport(report, eval_flags.out);
    PrintSummaries(report);
  } else if (*ablate) {
    const EvalReport report =
        Ablate(LoadTasks(ablate_flags.tasks), LoadModels(ablate_flags.models),
               MakeEvalConfig(ablate_flags), ablations);
    WriteReport(report, ablate_flags.out);
    PrintSummaries(report);
  } else if (*sweep) {
    const EvalReport report =
        Sweep(LoadTasks(sweep_flags.tasks), LoadModels(sweep_flags.models),
              MakeEvalConfig(sweep_flags), sweep_hyper, sweep_values);
    WriteReport(report, sweep_flags.out);
    PrintSummaries(report);
  }
  return 0;
}

}  // namespace
}  // namespace shardsearch

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Training allocates large short-lived matrices; keep them on the heap
  // instead of round-tripping through mmap on every batch.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  try {
    return shardsearch::Run(argc, argv);
  } catch (const shardsearch::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const shardsearch::InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return 2;
  } catch (const shardsearch::TrainingDiverged& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
