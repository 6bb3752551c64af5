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

#include "shardsearch/tables.h"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <sstream>
#include <unordered_set>

#include "shardsearch/common.h"

namespace shardsearch {

void ValidateTable(const TableConfig& table) {
  const std::string& id = table.id;
  if (table.dim <= 0 || table.dim % 4 != 0) {
    throw InvalidArgument("table " + id + ": dim " +
                          std::to_string(table.dim) +
                          " must be a positive multiple of 4");
  }
  if (table.hash_size < 1) {
    throw InvalidArgument("table " + id + ": hash_size must be >= 1");
  }
  if (!(table.pooling_factor > 0.0) || !std::isfinite(table.pooling_factor)) {
    throw InvalidArgument("table " + id + ": pooling_factor must be > 0");
  }
  if (!(table.skew >= 0.0) || !std::isfinite(table.skew)) {
    throw InvalidArgument("table " + id + ": skew must be >= 0");
  }
  if (table.batch_size < 1) {
    throw InvalidArgument("table " + id + ": batch_size must be >= 1");
  }
}

int64_t TableSizeBytes(const TableConfig& table) {
  return table.hash_size * table.dim * kBytesPerElement;
}

bool IsSplittable(const TableConfig& table) {
  return table.dim >= 8 && (table.dim / 2) % 4 == 0;
}

std::pair<TableConfig, TableConfig> SplitColumnWise(const TableConfig& table) {
  if (!IsSplittable(table)) {
    throw NotSplittable("table " + table.id + " with dim " +
                        std::to_string(table.dim) +
                        " cannot be split into halves divisible by 4");
  }
  TableConfig first = table;
  first.dim = table.dim / 2;
  first.id = table.id + ".0";
  TableConfig second = first;
  second.id = table.id + ".1";
  return {std::move(first), std::move(second)};
}

void ValidatePool(const TablePool& pool) {
  std::unordered_set<std::string> seen;
  for (const TableConfig& t : pool.tables) {
    ValidateTable(t);
    if (!seen.insert(t.id).second) {
      throw InvalidArgument("duplicate table id in pool: " + t.id);
    }
  }
}

TablePool AugmentPool(const TablePool& pool, std::span<const int> dims) {
  if (dims.empty()) throw InvalidArgument("augment_pool: dims is empty");
  for (int d : dims) {
    if (d <= 0 || d % 4 != 0) {
      throw InvalidArgument("augment_pool: dim " + std::to_string(d) +
                            " is not a positive multiple of 4");
    }
  }
  TablePool out;
  out.seed = pool.seed;
  out.tables.reserve(pool.tables.size() * dims.size());
  for (const TableConfig& t : pool.tables) {
    for (int d : dims) {
      TableConfig aug = t;
      aug.dim = d;
      aug.id = t.id + "@" + std::to_string(d);
      out.tables.push_back(std::move(aug));
    }
  }
  return out;
}

TablePool GenPool(int num_tables, uint64_t seed, const PoolConfig& config) {
  if (num_tables < 1) throw InvalidArgument("gen_pool: num_tables must be >= 1");
  if (config.dims.empty()) throw InvalidArgument("gen_pool: no dims");
  std::mt19937_64 rng = MakeRng(seed, 0);
  std::normal_distribution<double> log_hash(config.log10_hash_mean,
                                            config.log10_hash_stddev);
  std::uniform_real_distribution<double> log_pool(
      std::log(config.pooling_min), std::log(config.pooling_max));
  std::uniform_real_distribution<double> skew(0.0, config.skew_max);
  std::uniform_int_distribution<size_t> dim_index(0, config.dims.size() - 1);
  const double lo = std::log10(static_cast<double>(config.hash_min));
  const double hi = std::log10(static_cast<double>(config.hash_max));

  TablePool pool;
  pool.seed = seed;
  pool.tables.reserve(num_tables);
  for (int i = 0; i < num_tables; ++i) {
    TableConfig t;
    t.id = "t" + std::to_string(i);
    double x;
    do {
      x = log_hash(rng);
    } while (x < lo || x > hi);
    t.hash_size = std::clamp<int64_t>(std::llround(std::pow(10.0, x)),
                                      config.hash_min, config.hash_max);
    t.pooling_factor = std::exp(log_pool(rng));
    t.skew = skew(rng);
    t.dim = config.dims[dim_index(rng)];
    pool.tables.push_back(std::move(t));
  }
  ValidatePool(pool);
  return pool;
}

void ValidateTask(const ShardingTask& task) {
  if (task.num_devices < 1) throw InvalidArgument("task: num_devices must be >= 1");
  if (task.mem_cap_bytes < 1) throw InvalidArgument("task: mem_cap_bytes must be >= 1");
  if (static_cast<int>(task.tables.size()) < task.num_devices) {
    throw InvalidArgument("task: fewer tables than devices");
  }
  std::unordered_set<std::string> seen;
  for (const TableConfig& t : task.tables) {
    ValidateTable(t);
    if (!seen.insert(t.id).second) {
      throw InvalidArgument("task: duplicate table id " + t.id);
    }
  }
}

std::vector<int> DimChoices(int max_dim) {
  if (max_dim < 4 || max_dim > kMaxTableDim || (max_dim & (max_dim - 1)) != 0) {
    throw InvalidArgument("max_dim must be a power of two in [4, 128], got " +
                          std::to_string(max_dim));
  }
  std::vector<int> dims;
  for (int d = 4; d <= max_dim; d *= 2) dims.push_back(d);
  return dims;
}

std::vector<ShardingTask> GenTasks(const TablePool& pool,
                                   const TaskGenConfig& config) {
  if (config.min_tables < 1 || config.min_tables > config.max_tables) {
    throw InvalidArgument("gen_tasks: need 1 <= T_min <= T_max");
  }
  if (config.max_tables > static_cast<int>(pool.tables.size())) {
    throw InvalidArgument("gen_tasks: T_max " +
                          std::to_string(config.max_tables) +
                          " exceeds pool size " +
                          std::to_string(pool.tables.size()));
  }
  if (config.num_devices < 1) throw InvalidArgument("gen_tasks: num_devices must be >= 1");
  if (config.min_tables < config.num_devices) {
    throw InvalidArgument("gen_tasks: T_min must be >= num_devices");
  }
  const std::vector<int> dims = DimChoices(config.max_dim);

  std::vector<ShardingTask> tasks;
  tasks.reserve(config.count);
  for (int k = 0; k < config.count; ++k) {
    std::mt19937_64 rng = MakeRng(config.seed, k);
    std::uniform_int_distribution<int> num(config.min_tables, config.max_tables);
    const int n = num(rng);
    std::vector<TableConfig> picked;
    picked.reserve(n);
    std::sample(pool.tables.begin(), pool.tables.end(),
                std::back_inserter(picked), n, rng);
    std::shuffle(picked.begin(), picked.end(), rng);
    std::uniform_int_distribution<size_t> dim_index(0, dims.size() - 1);
    for (TableConfig& t : picked) t.dim = dims[dim_index(rng)];

    ShardingTask task;
    task.tables = std::move(picked);
    task.num_devices = config.num_devices;
    task.mem_cap_bytes = config.mem_cap_bytes;
    tasks.push_back(std::move(task));
  }
  return tasks;
}

void to_json(nlohmann::json& j, const TableConfig& t) {
  j = nlohmann::json{{"id", t.id},
                     {"dim", t.dim},
                     {"hash_size", t.hash_size},
                     {"pooling_factor", t.pooling_factor},
                     {"skew", t.skew}};
  if (t.batch_size != kDefaultBatchSize) j["batch_size"] = t.batch_size;
}

void from_json(const nlohmann::json& j, TableConfig& t) {
  t.id = j.at("id").get<std::string>();
  t.dim = j.at("dim").get<int>();
  t.hash_size = j.at("hash_size").get<int64_t>();
  t.pooling_factor = j.at("pooling_factor").get<double>();
  t.skew = j.at("skew").get<double>();
  t.batch_size = j.value("batch_size", kDefaultBatchSize);
  ValidateTable(t);
}

void to_json(nlohmann::json& j, const TablePool& p) {
  j = nlohmann::json{{"seed", p.seed}, {"tables", p.tables}};
}

void from_json(const nlohmann::json& j, TablePool& p) {
  p.seed = j.value("seed", uint64_t{0});
  p.tables = j.at("tables").get<std::vector<TableConfig>>();
  ValidatePool(p);
}

void to_json(nlohmann::json& j, const ShardingTask& t) {
  j = nlohmann::json{{"num_devices", t.num_devices},
                     {"mem_cap_bytes", t.mem_cap_bytes},
                     {"tables", t.tables}};
}

void from_json(const nlohmann::json& j, ShardingTask& t) {
  t.num_devices = j.at("num_devices").get<int>();
  t.mem_cap_bytes = j.at("mem_cap_bytes").get<int64_t>();
  t.tables = j.at("tables").get<std::vector<TableConfig>>();
  ValidateTask(t);
}

namespace {

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    auto b = cell.find_first_not_of(" \t\r");
    auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return cells;
}

}  // namespace

TablePool ReadPoolCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("csv: empty input");
  const std::vector<std::string> header = SplitCsvLine(line);
  const std::vector<std::string> expected = {"id", "dim", "hash_size",
                                             "pooling_factor", "skew"};
  if (header != expected) {
    throw InvalidArgument("csv: header must be id,dim,hash_size,pooling_factor,skew");
  }
  TablePool pool;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> cells = SplitCsvLine(line);
    if (cells.size() != 5) {
      throw InvalidArgument("csv line " + std::to_string(line_no) +
                            ": expected 5 columns");
    }
    TableConfig t;
    try {
      t.id = cells[0];
      t.dim = std::stoi(cells[1]);
      t.hash_size = std::stoll(cells[2]);
      t.pooling_factor = std::stod(cells[3]);
      t.skew = std::stod(cells[4]);
    } catch (const std::logic_error&) {
      throw InvalidArgument("csv line " + std::to_string(line_no) +
                            ": malformed number");
    }
    pool.tables.push_back(std::move(t));
  }
  ValidatePool(pool);
  return pool;
}

}  // namespace shardsearch
