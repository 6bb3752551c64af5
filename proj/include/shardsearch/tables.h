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

// Embedding-table domain model: tables, pools, column-wise splitting and
// synthetic sharding-task generation.

#ifndef SHARDSEARCH_TABLES_H_
#define SHARDSEARCH_TABLES_H_

#include <cstdint>
#include <istream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace shardsearch {

inline constexpr int64_t kDefaultBatchSize = 65536;
// fp32 weights only; optimizer state is not counted.
inline constexpr int64_t kBytesPerElement = 4;
inline constexpr int64_t kDefaultMemCapBytes = int64_t{4} << 30;
inline constexpr int kMaxTableDim = 128;

struct TableConfig {
  std::string id;
  int dim = 0;             // columns
  int64_t hash_size = 0;   // rows
  double pooling_factor = 0.0;
  double skew = 0.0;       // Zipf-like skew of the index distribution
  int64_t batch_size = kDefaultBatchSize;

  bool operator==(const TableConfig&) const = default;
};

// Throws InvalidArgument naming the violated invariant.
void ValidateTable(const TableConfig& table);

int64_t TableSizeBytes(const TableConfig& table);

// dim >= 8 and dim / 2 still divisible by 4.
bool IsSplittable(const TableConfig& table);

// Halves the columns. The first half keeps slot ".0", the second ".1".
// Throws NotSplittable.
std::pair<TableConfig, TableConfig> SplitColumnWise(const TableConfig& table);

struct TablePool {
  std::vector<TableConfig> tables;
  uint64_t seed = 0;
};

// Throws InvalidArgument on duplicate ids or invalid tables.
void ValidatePool(const TablePool& pool);

// One variant per (table, dim); ids become "<id>@<dim>".
TablePool AugmentPool(const TablePool& pool, std::span<const int> dims);

// Distributions for the synthetic pool. log10(hash_size) follows a normal
// distribution truncated to [hash_min, hash_max]; pooling factor is
// log-uniform.
struct PoolConfig {
  double log10_hash_mean = 5.2;
  double log10_hash_stddev = 0.7;
  int64_t hash_min = 10'000;
  int64_t hash_max = 16'000'000;
  double pooling_min = 1.0;
  double pooling_max = 64.0;
  double skew_max = 2.0;
  std::vector<int> dims = {4, 8, 16, 32, 64, 128};
};

TablePool GenPool(int num_tables, uint64_t seed, const PoolConfig& config = {});

struct ShardingTask {
  std::vector<TableConfig> tables;
  int num_devices = 0;
  int64_t mem_cap_bytes = kDefaultMemCapBytes;
};

void ValidateTask(const ShardingTask& task);

struct TaskGenConfig {
  int num_devices = 4;
  int min_tables = 10;
  int max_tables = 60;
  int max_dim = 128;  // power of two in [4, 128]
  int count = 100;
  int64_t mem_cap_bytes = kDefaultMemCapBytes;
  uint64_t seed = 0;
};

std::vector<ShardingTask> GenTasks(const TablePool& pool,
                                   const TaskGenConfig& config);

// {4, 8, ..., max_dim}
std::vector<int> DimChoices(int max_dim);

// JSON.
void to_json(nlohmann::json& j, const TableConfig& t);
void from_json(const nlohmann::json& j, TableConfig& t);
void to_json(nlohmann::json& j, const TablePool& p);
void from_json(const nlohmann::json& j, TablePool& p);
void to_json(nlohmann::json& j, const ShardingTask& t);
void from_json(const nlohmann::json& j, ShardingTask& t);

// CSV with header id,dim,hash_size,pooling_factor,skew.
TablePool ReadPoolCsv(std::istream& in);

}  // namespace shardsearch

#endif  // SHARDSEARCH_TABLES_H_
