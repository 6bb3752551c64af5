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

#include "shardsearch/datagen.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>

#include "shardsearch/common.h"

namespace shardsearch {

FeatureVector Featurize(const TableConfig& table) {
  return {static_cast<double>(table.dim) / 128.0,
          std::log10(static_cast<double>(table.hash_size)) / 8.0,
          table.pooling_factor / 50.0, table.skew / 2.0,
          static_cast<double>(TableSizeBytes(table)) / 1e9};
}

namespace {

// n distinct indices from [0, pool_size) in draw order.
std::vector<int> SampleDistinct(int pool_size, int n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, pool_size - 1);
  std::vector<int> out;
  out.reserve(n);
  if (2 * n > pool_size) {
    std::vector<int> all(pool_size);
    for (int i = 0; i < pool_size; ++i) all[i] = i;
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(n);
    return all;
  }
  while (static_cast<int>(out.size()) < n) {
    const int idx = pick(rng);
    if (std::find(out.begin(), out.end(), idx) == out.end()) out.push_back(idx);
  }
  return out;
}

void CheckRange(const TablePool& pool, int n_min, int n_max) {
  if (n_min < 1 || n_min > n_max ||
      n_max > static_cast<int>(pool.tables.size())) {
    throw InvalidArgument("need 1 <= n_min <= n_max <= |pool|");
  }
}

}  // namespace

std::vector<TableCombination> GenTableCombinations(const TablePool& pool,
                                                   int n_min, int n_max,
                                                   int count, uint64_t seed) {
  CheckRange(pool, n_min, n_max);
  const int pool_size = static_cast<int>(pool.tables.size());
  std::vector<TableCombination> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng = MakeRng(seed, i);
    std::uniform_int_distribution<int> num(n_min, n_max);
    out.push_back(SampleDistinct(pool_size, num(rng), rng));
  }
  return out;
}

std::vector<Placement> GenTablePlacements(const TablePool& pool,
                                          const PlacementConfig& config,
                                          int count, uint64_t seed) {
  CheckRange(pool, config.n_min, config.n_max);
  if (config.num_devices < 1) throw InvalidArgument("placements: num_devices must be >= 1");
  if (config.start_min_ms > config.start_max_ms) {
    throw InvalidArgument("placements: empty start range");
  }
  const int pool_size = static_cast<int>(pool.tables.size());
  const int num_devices = config.num_devices;
  std::vector<Placement> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng = MakeRng(seed, i);
    bool placed = false;
    for (int attempt = 0; attempt <= config.max_retries && !placed; ++attempt) {
      std::uniform_int_distribution<int> num(config.n_min, config.n_max);
      std::vector<int> picked = SampleDistinct(pool_size, num(rng), rng);
      std::stable_sort(picked.begin(), picked.end(), [&](int a, int b) {
        return pool.tables[a].dim > pool.tables[b].dim;
      });
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const double p = config.force_greedy_probability.value_or(unit(rng));

      Placement placement;
      placement.table_indices = picked;
      placement.assignment.reserve(picked.size());
      placement.device_dims.assign(num_devices, 0.0);
      std::vector<int64_t> used(num_devices, 0);
      bool ok = true;
      for (int idx : picked) {
        const TableConfig& t = pool.tables[idx];
        const int64_t size = TableSizeBytes(t);
        std::vector<int> candidates;
        for (int d = 0; d < num_devices; ++d) {
          if (used[d] + size <= config.mem_cap_bytes) candidates.push_back(d);
        }
        if (candidates.empty()) {
          ok = false;
          break;
        }
        int device;
        if (unit(rng) <= p) {
          device = candidates[0];
          for (int d : candidates) {
            if (placement.device_dims[d] < placement.device_dims[device]) device = d;
          }
        } else {
          std::uniform_int_distribution<size_t> any(0, candidates.size() - 1);
          device = candidates[any(rng)];
        }
        placement.assignment.push_back(device);
        placement.device_dims[device] += t.dim;
        used[device] += size;
      }
      if (!ok) continue;
      std::uniform_real_distribution<double> start(config.start_min_ms,
                                                   config.start_max_ms);
      placement.starts.resize(num_devices);
      for (double& s : placement.starts) {
        s = config.start_min_ms == config.start_max_ms ? config.start_min_ms
                                                       : start(rng);
      }
      out.push_back(std::move(placement));
      placed = true;
    }
    if (!placed) {
      throw InvalidArgument("placement " + std::to_string(i) +
                            ": no memory-feasible placement after " +
                            std::to_string(config.max_retries) + " retries");
    }
  }
  return out;
}

std::vector<ComputeSample> CollectComputeSamples(
    const TablePool& pool, const std::vector<TableCombination>& combinations,
    const OracleParams& params, uint64_t seed) {
  std::vector<ComputeSample> out;
  out.reserve(combinations.size());
  std::vector<TableConfig> tables;
  for (size_t i = 0; i < combinations.size(); ++i) {
    tables.clear();
    ComputeSample sample;
    for (int idx : combinations[i]) {
      const TableConfig& t = pool.tables.at(idx);
      tables.push_back(t);
      sample.table_ids.push_back(t.id);
      sample.features.push_back(Featurize(t));
    }
    sample.cost_ms =
        OracleMultiTableCost(tables, params, DeriveSeed(seed, i));
    out.push_back(std::move(sample));
  }
  return out;
}

std::vector<CommSample> CollectCommSamples(
    const std::vector<Placement>& placements, CommDirection direction,
    const OracleParams& params, uint64_t seed) {
  std::vector<CommSample> out;
  out.reserve(placements.size());
  for (size_t i = 0; i < placements.size(); ++i) {
    const Placement& p = placements[i];
    CommSample sample;
    sample.starts = p.starts;
    sample.device_dims = p.device_dims;
    sample.direction = direction;
    sample.costs_ms = OracleCommCost(p.starts, p.device_dims, direction,
                                     params, DeriveSeed(seed, i));
    out.push_back(std::move(sample));
  }
  return out;
}

namespace {

constexpr char kDatasetFormat[] = "shardsearch-dataset";

void WriteHeader(std::ostream& out, const DatasetHeader& header,
                 size_t count) {
  nlohmann::json j{{"format", kDatasetFormat},
                   {"version", 1},
                   {"kind", header.kind},
                   {"oracle", header.oracle},
                   {"generator", header.generator},
                   {"count", count},
                   {"feature_version", kFeatureVersion}};
  out << j.dump() << '\n';
}

DatasetHeader ReadHeader(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("dataset: empty input");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("dataset header: ") + e.what());
  }
  if (j.value("format", "") != kDatasetFormat) {
    throw InvalidArgument("dataset: missing header line");
  }
  if (j.value("feature_version", 0) != kFeatureVersion) {
    throw InvalidArgument("dataset: feature version mismatch");
  }
  DatasetHeader header;
  header.kind = j.at("kind").get<std::string>();
  header.oracle = j.at("oracle").get<OracleParams>();
  header.generator = j.value("generator", nlohmann::json::object());
  return header;
}

template <typename Fn>
void ForEachSampleLine(std::istream& in, Fn&& fn) {
  std::string line;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      fn(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument("dataset line " + std::to_string(line_no) + ": " +
                            e.what());
    }
  }
}

}  // namespace

void WriteComputeDataset(std::ostream& out, const DatasetHeader& header,
                         const std::vector<ComputeSample>& samples) {
  WriteHeader(out, header, samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    const ComputeSample& s = samples[i];
    nlohmann::json j{{"i", i},
                     {"table_ids", s.table_ids},
                     {"features", s.features},
                     {"cost_ms", s.cost_ms}};
    out << j.dump() << '\n';
  }
}

void WriteCommDataset(std::ostream& out, const DatasetHeader& header,
                      const std::vector<CommSample>& samples) {
  WriteHeader(out, header, samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    const CommSample& s = samples[i];
    nlohmann::json j{{"i", i},
                     {"direction", ToString(s.direction)},
                     {"starts", s.starts},
                     {"device_dims", s.device_dims},
                     {"costs_ms", s.costs_ms}};
    out << j.dump() << '\n';
  }
}

std::vector<ComputeSample> ReadComputeDataset(std::istream& in,
                                              DatasetHeader* header) {
  DatasetHeader h = ReadHeader(in);
  if (h.kind != "compute") {
    throw InvalidArgument("dataset kind is " + h.kind + ", expected compute");
  }
  std::vector<ComputeSample> samples;
  ForEachSampleLine(in, [&](const nlohmann::json& j) {
    ComputeSample s;
    s.table_ids = j.at("table_ids").get<std::vector<std::string>>();
    s.features = j.at("features").get<std::vector<FeatureVector>>();
    s.cost_ms = j.at("cost_ms").get<double>();
    if (s.features.empty() || s.features.size() != s.table_ids.size()) {
      throw InvalidArgument("compute sample with inconsistent tables");
    }
    samples.push_back(std::move(s));
  });
  if (header != nullptr) *header = std::move(h);
  return samples;
}

std::vector<CommSample> ReadCommDataset(std::istream& in,
                                        DatasetHeader* header) {
  DatasetHeader h = ReadHeader(in);
  if (h.kind != "comm-fwd" && h.kind != "comm-bwd") {
    throw InvalidArgument("dataset kind is " + h.kind + ", expected comm-*");
  }
  std::vector<CommSample> samples;
  ForEachSampleLine(in, [&](const nlohmann::json& j) {
    CommSample s;
    s.direction = ParseCommDirection(j.at("direction").get<std::string>());
    s.starts = j.at("starts").get<std::vector<double>>();
    s.device_dims = j.at("device_dims").get<std::vector<double>>();
    s.costs_ms = j.at("costs_ms").get<std::vector<double>>();
    if (s.starts.size() != s.device_dims.size() ||
        s.starts.size() != s.costs_ms.size()) {
      throw InvalidArgument("comm sample with inconsistent lengths");
    }
    samples.push_back(std::move(s));
  });
  if (header != nullptr) *header = std::move(h);
  return samples;
}


DataGenConfig DataGenConfig::Resolved() const {
  DataGenConfig c = *this;
  if (c.kind != "compute" && c.kind != "comm-fwd" && c.kind != "comm-bwd") {
    throw InvalidArgument("unknown data kind: " + c.kind);
  }
  if (c.count < 1) throw InvalidArgument("data: count must be >= 1");
  if (c.num_devices < 1) throw InvalidArgument("data: devices must be >= 1");
  if (c.n_min == 0) {
    c.n_min = c.kind == "compute" ? 1 : std::max(1, 10 * c.num_devices / 4);
  }
  if (c.n_max == 0) {
    c.n_max = c.kind == "compute" ? 40 : std::max(c.n_min, 60 * c.num_devices / 4);
  }
  if (!c.start_range_ms) {
    c.start_range_ms = c.kind == "comm-bwd" ? std::make_pair(0.0, 0.0)
                                            : std::make_pair(0.0, 20.0);
  }
  if (c.start_range_ms->first < 0 ||
      c.start_range_ms->first > c.start_range_ms->second) {
    throw InvalidArgument("data: invalid start range");
  }
  c.oracle.Validate();
  return c;
}

nlohmann::json DataGenConfig::ToJson() const {
  return {{"kind", kind},       {"count", count},
          {"num_devices", num_devices}, {"n_min", n_min},
          {"n_max", n_max},     {"mem_cap_bytes", mem_cap_bytes},
          {"start_range_ms", start_range_ms
                                 ? nlohmann::json{start_range_ms->first,
                                                  start_range_ms->second}
                                 : nlohmann::json(nullptr)},
          {"seed", seed}};
}

std::vector<ComputeSample> GenComputeData(const TablePool& pool,
                                          const DataGenConfig& config) {
  const DataGenConfig c = config.Resolved();
  const std::vector<TableCombination> combos = GenTableCombinations(
      pool, c.n_min, c.n_max, c.count, DeriveSeed(c.seed, 0));
  return CollectComputeSamples(pool, combos, c.oracle, DeriveSeed(c.seed, 1));
}

std::vector<CommSample> GenCommData(const TablePool& pool,
                                    const DataGenConfig& config) {
  const DataGenConfig c = config.Resolved();
  PlacementConfig placement;
  placement.n_min = c.n_min;
  placement.n_max = c.n_max;
  placement.num_devices = c.num_devices;
  placement.mem_cap_bytes = c.mem_cap_bytes;
  placement.start_min_ms = c.start_range_ms->first;
  placement.start_max_ms = c.start_range_ms->second;
  const std::vector<Placement> placements =
      GenTablePlacements(pool, placement, c.count, DeriveSeed(c.seed, 0));
  const CommDirection direction =
      c.kind == "comm-fwd" ? CommDirection::kForward : CommDirection::kBackward;
  return CollectCommSamples(placements, direction, c.oracle,
                            DeriveSeed(c.seed, 1));
}

}  // namespace shardsearch
