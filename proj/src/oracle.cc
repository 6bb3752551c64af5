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

#include "shardsearch/oracle.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "shardsearch/common.h"

namespace shardsearch {

void OracleParams::Validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidArgument(std::string("oracle: ") + name + " must be > 0");
    }
  };
  positive(kappa_w, "kappa_w");
  positive(overhead_per_table, "overhead_per_table");
  positive(launch, "launch");
  positive(fusion_gamma, "fusion_gamma");
  positive(dim_exponent, "dim_exponent");
  positive(hash_coef, "hash_coef");
  positive(skew_coef, "skew_coef");
  positive(comm_latency, "comm_latency");
  positive(comm_beta_fwd, "comm_beta_fwd");
  positive(comm_beta_bwd, "comm_beta_bwd");
  if (fusion_gamma >= 1.0) throw InvalidArgument("oracle: fusion_gamma must be < 1");
  if (dim_exponent >= 1.0) throw InvalidArgument("oracle: dim_exponent must be < 1");
  if (skew_coef >= 1.0) throw InvalidArgument("oracle: skew_coef must be < 1");
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("oracle: noise_sigma must be >= 0");
}

void to_json(nlohmann::json& j, const OracleParams& p) {
  j = nlohmann::json{{"kappa_w", p.kappa_w},
                     {"overhead_per_table", p.overhead_per_table},
                     {"launch", p.launch},
                     {"fusion_gamma", p.fusion_gamma},
                     {"dim_exponent", p.dim_exponent},
                     {"hash_coef", p.hash_coef},
                     {"skew_coef", p.skew_coef},
                     {"comm_latency", p.comm_latency},
                     {"comm_beta_fwd", p.comm_beta_fwd},
                     {"comm_beta_bwd", p.comm_beta_bwd},
                     {"noise_sigma", p.noise_sigma}};
}

void from_json(const nlohmann::json& j, OracleParams& p) {
  const OracleParams d;
  p.kappa_w = j.value("kappa_w", d.kappa_w);
  p.overhead_per_table = j.value("overhead_per_table", d.overhead_per_table);
  p.launch = j.value("launch", d.launch);
  p.fusion_gamma = j.value("fusion_gamma", d.fusion_gamma);
  p.dim_exponent = j.value("dim_exponent", d.dim_exponent);
  p.hash_coef = j.value("hash_coef", d.hash_coef);
  p.skew_coef = j.value("skew_coef", d.skew_coef);
  p.comm_latency = j.value("comm_latency", d.comm_latency);
  p.comm_beta_fwd = j.value("comm_beta_fwd", d.comm_beta_fwd);
  p.comm_beta_bwd = j.value("comm_beta_bwd", d.comm_beta_bwd);
  p.noise_sigma = j.value("noise_sigma", d.noise_sigma);
  p.Validate();
}

std::string ToString(CommDirection direction) {
  return direction == CommDirection::kForward ? "fwd" : "bwd";
}

CommDirection ParseCommDirection(const std::string& s) {
  if (s == "fwd") return CommDirection::kForward;
  if (s == "bwd") return CommDirection::kBackward;
  throw InvalidArgument("unknown comm direction: " + s);
}

double Work(const TableConfig& table, const OracleParams& params) {
  const double rows = static_cast<double>(table.hash_size);
  return params.kappa_w * table.pooling_factor *
         std::pow(static_cast<double>(table.dim), params.dim_exponent) *
         (1.0 + params.hash_coef * std::log10(rows)) *
         (1.0 - params.skew_coef * std::min(table.skew, 2.0) / 2.0);
}

double OracleSingleTableCost(const TableConfig& table,
                             const OracleParams& params) {
  return params.launch + params.overhead_per_table + Work(table, params);
}

namespace {

double NoiseFactor(const OracleParams& params, std::optional<uint64_t> seed,
                   uint64_t stream) {
  if (params.noise_sigma <= 0.0) return 1.0;
  std::mt19937_64 rng = MakeRng(seed.value_or(0), stream);
  std::normal_distribution<double> eps(0.0, params.noise_sigma);
  return std::max(0.0, 1.0 + eps(rng));
}

}  // namespace

double OracleMultiTableCost(std::span<const TableConfig> tables,
                            const OracleParams& params,
                            std::optional<uint64_t> noise_seed) {
  if (tables.empty()) throw InvalidArgument("multi-table cost of no tables");
  double cost;
  if (tables.size() == 1) {
    cost = OracleSingleTableCost(tables[0], params);
  } else {
    cost = params.launch;
    for (const TableConfig& t : tables) {
      cost += params.fusion_gamma * params.overhead_per_table + Work(t, params);
    }
  }
  return cost * NoiseFactor(params, noise_seed, 0);
}

std::vector<double> OracleCommCost(std::span<const double> starts,
                                   std::span<const double> device_dims,
                                   CommDirection direction,
                                   const OracleParams& params,
                                   std::optional<uint64_t> noise_seed) {
  if (starts.empty() || starts.size() != device_dims.size()) {
    throw InvalidArgument("comm cost: starts and device_dims must have equal, "
                          "non-zero length");
  }
  const double beta = direction == CommDirection::kForward
                          ? params.comm_beta_fwd
                          : params.comm_beta_bwd;
  const double latest = *std::max_element(starts.begin(), starts.end());
  const double max_dim =
      *std::max_element(device_dims.begin(), device_dims.end());
  const double end = latest + params.comm_latency + beta * max_dim;
  std::vector<double> cost(starts.size());
  for (size_t d = 0; d < starts.size(); ++d) {
    cost[d] = (end - starts[d]) * NoiseFactor(params, noise_seed, d + 1);
  }
  return cost;
}

PlanCost OracleEvalAssignment(std::span<const TableConfig> tables,
                              std::span<const int> assignment, int num_devices,
                              const OracleParams& params) {
  std::vector<std::vector<TableConfig>> per_device(num_devices);
  for (size_t i = 0; i < tables.size(); ++i) {
    per_device[assignment[i]].push_back(tables[i]);
  }
  PlanCost cost;
  cost.compute.assign(num_devices, 0.0);
  for (int d = 0; d < num_devices; ++d) {
    if (!per_device[d].empty()) {
      cost.compute[d] = OracleMultiTableCost(per_device[d], params);
    }
  }
  const std::vector<double> dims = DeviceDims(tables, assignment, num_devices);
  cost.forward =
      OracleCommCost(cost.compute, dims, CommDirection::kForward, params);
  const std::vector<double> zeros(num_devices, 0.0);
  cost.backward = OracleCommCost(zeros, dims, CommDirection::kBackward, params);
  cost.bottleneck = 0.0;
  for (int d = 0; d < num_devices; ++d) {
    cost.bottleneck = std::max(cost.bottleneck, cost.DeviceTotal(d));
  }
  return cost;
}

PlanCost OracleEvalPlan(const ShardingTask& task, const ShardingPlan& plan,
                        const OracleParams& params) {
  const std::vector<TableConfig> tables = CheckPlan(task, plan);
  return OracleEvalAssignment(tables, plan.assignment, task.num_devices,
                              params);
}

}  // namespace shardsearch
