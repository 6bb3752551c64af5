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

// Synthetic benchmark inputs (random table combinations and placements)
// and oracle-labelled cost datasets for cost-model pre-training.

#ifndef SHARDSEARCH_DATAGEN_H_
#define SHARDSEARCH_DATAGEN_H_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "shardsearch/oracle.h"
#include "shardsearch/tables.h"

namespace shardsearch {

inline constexpr int kNumTableFeatures = 5;
using FeatureVector = std::array<double, kNumTableFeatures>;

// [dim/128, log10(rows)/8, pooling/50, skew/2, size in GB]
FeatureVector Featurize(const TableConfig& table);
inline constexpr int kFeatureVersion = 1;

// Each combination is a list of indices into the pool.
using TableCombination = std::vector<int>;

std::vector<TableCombination> GenTableCombinations(const TablePool& pool,
                                                   int n_min, int n_max,
                                                   int count, uint64_t seed);

struct PlacementConfig {
  int n_min = 10;
  int n_max = 60;
  int num_devices = 4;
  double start_min_ms = 0.0;
  double start_max_ms = 20.0;
  int64_t mem_cap_bytes = kDefaultMemCapBytes;
  int max_retries = 100;
  // Test hook: fixes the greedy probability instead of sampling it.
  std::optional<double> force_greedy_probability;
};

struct Placement {
  std::vector<int> table_indices;  // into the pool, sorted by dim descending
  std::vector<int> assignment;     // device per entry of table_indices
  std::vector<double> starts;      // ms, one per device
  std::vector<double> device_dims;
};

// Throws InvalidArgument when a placement keeps failing the memory cap.
std::vector<Placement> GenTablePlacements(const TablePool& pool,
                                          const PlacementConfig& config,
                                          int count, uint64_t seed);

struct ComputeSample {
  std::vector<std::string> table_ids;
  std::vector<FeatureVector> features;
  double cost_ms = 0.0;

  bool operator==(const ComputeSample&) const = default;
};

struct CommSample {
  std::vector<double> starts;
  std::vector<double> device_dims;
  CommDirection direction = CommDirection::kForward;
  std::vector<double> costs_ms;

  bool operator==(const CommSample&) const = default;
};

// Sample i uses noise stream DeriveSeed(seed, i).
std::vector<ComputeSample> CollectComputeSamples(
    const TablePool& pool, const std::vector<TableCombination>& combinations,
    const OracleParams& params, uint64_t seed = 0);

std::vector<CommSample> CollectCommSamples(
    const std::vector<Placement>& placements, CommDirection direction,
    const OracleParams& params, uint64_t seed = 0);

// JSON-lines datasets. First line is a header with the kind, the oracle
// parameters and generator settings; each further line is one sample.
struct DatasetHeader {
  std::string kind;  // compute | comm-fwd | comm-bwd
  OracleParams oracle;
  nlohmann::json generator = nlohmann::json::object();
};

void WriteComputeDataset(std::ostream& out, const DatasetHeader& header,
                         const std::vector<ComputeSample>& samples);
void WriteCommDataset(std::ostream& out, const DatasetHeader& header,
                      const std::vector<CommSample>& samples);

// Readers consume the header line too; `header` may be null. Throw
// InvalidArgument on malformed input or a kind mismatch.
std::vector<ComputeSample> ReadComputeDataset(std::istream& in,
                                              DatasetHeader* header = nullptr);
std::vector<CommSample> ReadCommDataset(std::istream& in,
                                        DatasetHeader* header = nullptr);


// End-to-end sample generation from a pool, as used by the CLI.
struct DataGenConfig {
  std::string kind = "compute";  // compute | comm-fwd | comm-bwd
  int count = 10000;
  int num_devices = 4;
  // Tables per sample; 0 picks the default for the kind: [1, 40] for
  // compute, [10 D / 4, 60 D / 4] for communication.
  int n_min = 0;
  int n_max = 0;
  int64_t mem_cap_bytes = kDefaultMemCapBytes;
  // Device start-time range for communication samples; unset picks
  // [0, 20] ms for forward and [0, 0] for backward, which the search
  // always queries with zero starts.
  std::optional<std::pair<double, double>> start_range_ms;
  uint64_t seed = 0;
  OracleParams oracle;

  // Fills in the defaulted table-count range; throws InvalidArgument.
  DataGenConfig Resolved() const;
  nlohmann::json ToJson() const;
};

std::vector<ComputeSample> GenComputeData(const TablePool& pool,
                                          const DataGenConfig& config);
// Forward and backward data from the same seed share their placements.
std::vector<CommSample> GenCommData(const TablePool& pool,
                                    const DataGenConfig& config);

}  // namespace shardsearch

#endif  // SHARDSEARCH_DATAGEN_H_
