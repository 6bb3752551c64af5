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

// Analytical cost oracle. Stands in for GPU micro-benchmarks: it labels
// training data and is the final judge of plan quality.
//
// Compute on one device running a fused lookup over tables S:
//   launch + sum_t (gamma * overhead + work(t))       for |S| >= 2
//   launch + overhead + work(t)                       for |S| == 1
// work(t) = kappa * pooling * dim^e * (1 + h * log10(rows))
//           * (1 - s * min(skew, 2) / 2)
// All-to-all on D devices with local start times s_d and dim sums m_d:
//   T_end = max_d s_d + latency + beta * max_d m_d,   cost_d = T_end - s_d
//
// Because e < 1 and gamma < 1, halving a table costs more than half of it
// and fusing tables costs less than running them separately.

#ifndef SHARDSEARCH_ORACLE_H_
#define SHARDSEARCH_ORACLE_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "shardsearch/plan.h"
#include "shardsearch/tables.h"

namespace shardsearch {

struct OracleParams {
  double kappa_w = 2.5e-3;          // ms per work unit
  double overhead_per_table = 0.15;  // ms
  double launch = 0.5;               // ms
  double fusion_gamma = 0.3;
  double dim_exponent = 0.8;
  double hash_coef = 0.05;
  double skew_coef = 0.3;
  double comm_latency = 1.0;     // ms
  double comm_beta_fwd = 0.010;  // ms per dim unit
  double comm_beta_bwd = 0.012;  // ms per dim unit
  double noise_sigma = 0.0;

  // Throws InvalidArgument.
  void Validate() const;
};

void to_json(nlohmann::json& j, const OracleParams& p);
void from_json(const nlohmann::json& j, OracleParams& p);

enum class CommDirection { kForward, kBackward };

std::string ToString(CommDirection direction);
CommDirection ParseCommDirection(const std::string& s);

double Work(const TableConfig& table, const OracleParams& params);

// Unfused single lookup.
double OracleSingleTableCost(const TableConfig& table,
                             const OracleParams& params);

// `noise_seed` is only consulted when params.noise_sigma > 0.
double OracleMultiTableCost(std::span<const TableConfig> tables,
                            const OracleParams& params,
                            std::optional<uint64_t> noise_seed = std::nullopt);

std::vector<double> OracleCommCost(std::span<const double> starts,
                                   std::span<const double> device_dims,
                                   CommDirection direction,
                                   const OracleParams& params,
                                   std::optional<uint64_t> noise_seed = std::nullopt);

struct PlanCost {
  std::vector<double> compute;
  std::vector<double> forward;
  std::vector<double> backward;
  double bottleneck = 0.0;

  double DeviceTotal(int d) const {
    return compute[d] + forward[d] + backward[d];
  }
};

// Throws PlanInvalid.
PlanCost OracleEvalPlan(const ShardingTask& task, const ShardingPlan& plan,
                        const OracleParams& params);

// Same measurement for already split tables and an assignment.
PlanCost OracleEvalAssignment(std::span<const TableConfig> tables,
                              std::span<const int> assignment, int num_devices,
                              const OracleParams& params);

}  // namespace shardsearch

#endif  // SHARDSEARCH_ORACLE_H_
