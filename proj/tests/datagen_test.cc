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
#include <set>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "shardsearch/common.h"
#include "shardsearch/oracle.h"
#include "test_util.h"

namespace shardsearch {
namespace {

using ::shardsearch::testing::MakeTable;

TEST(FeaturizeTest, Normalization) {
  EXPECT_DOUBLE_EQ(Featurize(MakeTable("a", 128))[0], 1.0);
  EXPECT_DOUBLE_EQ(Featurize(MakeTable("a", 16, 100'000'000))[1], 1.0);
  const FeatureVector f = Featurize(MakeTable("a", 64, 1'000'000, 25.0, 1.0));
  EXPECT_DOUBLE_EQ(f[2], 0.5);
  EXPECT_DOUBLE_EQ(f[3], 0.5);
  EXPECT_DOUBLE_EQ(f[4], 0.256);
  EXPECT_EQ(Featurize(MakeTable("a", 64, 5, 3.0, 0.2)),
            Featurize(MakeTable("b", 64, 5, 3.0, 0.2)));
}

TEST(CombinationsTest, SizesSpanRange) {
  const TablePool pool = GenPool(856, 0);
  const auto combos = GenTableCombinations(pool, 1, 15, 100'000, 3);
  ASSERT_EQ(combos.size(), 100'000u);
  std::set<size_t> sizes;
  for (const TableCombination& c : combos) {
    sizes.insert(c.size());
    EXPECT_EQ(std::set<int>(c.begin(), c.end()).size(), c.size());
  }
  EXPECT_EQ(*sizes.begin(), 1u);
  EXPECT_EQ(*sizes.rbegin(), 15u);
  EXPECT_EQ(sizes.size(), 15u);
}

TEST(CombinationsTest, SingletonsAndDeterminism) {
  const TablePool pool = GenPool(50, 0);
  for (const TableCombination& c : GenTableCombinations(pool, 1, 1, 200, 1)) {
    EXPECT_EQ(c.size(), 1u);
  }
  EXPECT_EQ(GenTableCombinations(pool, 2, 9, 100, 4),
            GenTableCombinations(pool, 2, 9, 100, 4));
  EXPECT_NE(GenTableCombinations(pool, 2, 9, 100, 4),
            GenTableCombinations(pool, 2, 9, 100, 5));
  EXPECT_THROW(GenTableCombinations(pool, 0, 3, 1, 0), InvalidArgument);
  EXPECT_THROW(GenTableCombinations(pool, 1, 51, 1, 0), InvalidArgument);
}

// Small tables so the memory cap never restricts the greedy choice.
TablePool SmallPool(int n, uint64_t seed) {
  PoolConfig cfg;
  cfg.hash_min = 10'000;
  cfg.hash_max = 100'000;
  return GenPool(n, seed, cfg);
}

double Spread(const std::vector<double>& v) {
  return *std::max_element(v.begin(), v.end()) -
         *std::min_element(v.begin(), v.end());
}

TEST(PlacementsTest, GreedyBalanceBound) {
  const TablePool pool = SmallPool(300, 1);
  PlacementConfig cfg;
  cfg.force_greedy_probability = 1.0;
  for (const Placement& p : GenTablePlacements(pool, cfg, 200, 2)) {
    int max_dim = 0;
    for (int idx : p.table_indices) max_dim = std::max(max_dim, pool.tables[idx].dim);
    EXPECT_LE(Spread(p.device_dims), max_dim);
    // Indices are sorted by dim, descending.
    for (size_t i = 1; i < p.table_indices.size(); ++i) {
      EXPECT_GE(pool.tables[p.table_indices[i - 1]].dim,
                pool.tables[p.table_indices[i]].dim);
    }
  }
}

// Exhaustive check on tiny instances: the greedy result sits within the
// bound, and the bound is at least as large as the best achievable spread.
TEST(PlacementsTest, GreedyBoundAgainstBruteForce) {
  const TablePool pool = SmallPool(40, 3);
  PlacementConfig cfg;
  cfg.n_min = 3;
  cfg.n_max = 7;
  cfg.num_devices = 3;
  cfg.force_greedy_probability = 1.0;
  for (const Placement& p : GenTablePlacements(pool, cfg, 30, 4)) {
    const int n = static_cast<int>(p.table_indices.size());
    int max_dim = 0;
    for (int idx : p.table_indices) max_dim = std::max(max_dim, pool.tables[idx].dim);
    double best = 1e18;
    int total = 1;
    for (int i = 0; i < n; ++i) total *= 3;
    for (int code = 0; code < total; ++code) {
      std::vector<double> sums(3, 0.0);
      int c = code;
      for (int i = 0; i < n; ++i, c /= 3) sums[c % 3] += pool.tables[p.table_indices[i]].dim;
      best = std::min(best, Spread(sums));
    }
    EXPECT_GE(Spread(p.device_dims), best);
    EXPECT_LE(Spread(p.device_dims), max_dim);
  }
}

TEST(PlacementsTest, RandomSpreadExceedsGreedy) {
  const TablePool pool = SmallPool(300, 5);
  PlacementConfig cfg;
  double greedy = 0, random = 0;
  cfg.force_greedy_probability = 1.0;
  for (const Placement& p : GenTablePlacements(pool, cfg, 300, 6)) greedy += Spread(p.device_dims);
  cfg.force_greedy_probability = 0.0;
  for (const Placement& p : GenTablePlacements(pool, cfg, 300, 6)) random += Spread(p.device_dims);
  EXPECT_GT(random, greedy);
}

TEST(PlacementsTest, ZeroStartRangeAndConsistency) {
  const TablePool pool = SmallPool(100, 7);
  PlacementConfig cfg;
  cfg.start_max_ms = 0.0;
  for (const Placement& p : GenTablePlacements(pool, cfg, 50, 8)) {
    ASSERT_EQ(p.starts.size(), 4u);
    for (double s : p.starts) EXPECT_EQ(s, 0.0);
    std::vector<double> dims(4, 0.0);
    for (size_t i = 0; i < p.table_indices.size(); ++i) {
      dims[p.assignment[i]] += pool.tables[p.table_indices[i]].dim;
    }
    EXPECT_EQ(dims, p.device_dims);
  }
  cfg.start_max_ms = 20.0;
  for (const Placement& p : GenTablePlacements(pool, cfg, 50, 8)) {
    for (double s : p.starts) {
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 20.0);
    }
  }
}

TEST(PlacementsTest, RespectsMemoryCap) {
  const TablePool pool = GenPool(856, 0);
  PlacementConfig cfg;
  for (const Placement& p : GenTablePlacements(pool, cfg, 300, 9)) {
    std::vector<int64_t> bytes(4, 0);
    for (size_t i = 0; i < p.table_indices.size(); ++i) {
      bytes[p.assignment[i]] += TableSizeBytes(pool.tables[p.table_indices[i]]);
    }
    for (int64_t b : bytes) EXPECT_LE(b, cfg.mem_cap_bytes);
  }
}

TEST(PlacementsTest, ImpossibleCapThrows) {
  TablePool pool{{MakeTable("a", 128, 10'000'000), MakeTable("b", 128, 10'000'000)}, 0};
  PlacementConfig cfg;
  cfg.n_min = 1;
  cfg.n_max = 2;
  cfg.max_retries = 5;
  EXPECT_THROW(GenTablePlacements(pool, cfg, 3, 0), InvalidArgument);
}

TEST(PlacementsTest, RatioCoverage) {
  const TablePool pool = GenPool(856, 0);
  PlacementConfig cfg;
  double lo = 1e9, hi = 0;
  for (const Placement& p : GenTablePlacements(pool, cfg, 10'000, 10)) {
    double sum = 0, mx = 0;
    for (double d : p.device_dims) {
      sum += d;
      mx = std::max(mx, d);
    }
    const double ratio = mx / (sum / p.device_dims.size());
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  EXPECT_LT(lo, 1.05);
  EXPECT_GE(hi, 2.0);
}

TEST(CollectTest, ComputeLabels) {
  const TablePool pool = GenPool(30, 0);
  const OracleParams params;
  const std::vector<TableCombination> combos = {{0}, {1, 2, 3}, {1, 2, 3}};
  const auto samples = CollectComputeSamples(pool, combos, params);
  ASSERT_EQ(samples.size(), 3u);
  for (const ComputeSample& s : samples) EXPECT_GT(s.cost_ms, 0.0);
  EXPECT_EQ(samples[1].cost_ms, samples[2].cost_ms);
  const std::vector<TableConfig> t = {pool.tables[1], pool.tables[2], pool.tables[3]};
  EXPECT_EQ(samples[1].cost_ms, OracleMultiTableCost(t, params));
  EXPECT_EQ(samples[1].features[0], Featurize(pool.tables[1]));
  EXPECT_EQ(samples[1].table_ids[2], pool.tables[3].id);
}

TEST(CollectTest, CommLabels) {
  const TablePool pool = SmallPool(100, 1);
  const OracleParams params;
  auto placements = GenTablePlacements(pool, PlacementConfig{}, 3, 0);
  placements.push_back(placements[0]);
  for (CommDirection dir : {CommDirection::kForward, CommDirection::kBackward}) {
    const auto samples = CollectCommSamples(placements, dir, params);
    ASSERT_EQ(samples.size(), 4u);
    for (const CommSample& s : samples) {
      EXPECT_EQ(s.direction, dir);
      for (double c : s.costs_ms) EXPECT_GT(c, 0.0);
    }
    EXPECT_EQ(samples[0].costs_ms, samples[3].costs_ms);
    EXPECT_EQ(samples[1].costs_ms,
              OracleCommCost(placements[1].starts, placements[1].device_dims, dir,
                             params));
  }
}

TEST(DatasetTest, ComputeRoundTrip100k) {
  DataGenConfig cfg;
  cfg.count = 100'000;
  cfg.n_min = 1;
  cfg.n_max = 15;
  cfg.oracle.noise_sigma = 0.03;
  const auto samples = GenComputeData(GenPool(856, 0), cfg);
  std::stringstream buf;
  WriteComputeDataset(buf, DatasetHeader{"compute", cfg.oracle, cfg.ToJson()}, samples);
  DatasetHeader header;
  const auto back = ReadComputeDataset(buf, &header);
  EXPECT_EQ(header.kind, "compute");
  EXPECT_EQ(header.oracle.noise_sigma, 0.03);
  EXPECT_TRUE(back == samples);
}

TEST(DatasetTest, CommRoundTripAndKindCheck) {
  DataGenConfig cfg;
  cfg.kind = "comm-bwd";
  cfg.count = 2000;
  const auto samples = GenCommData(GenPool(856, 0), cfg);
  for (const CommSample& s : samples) {
    for (double st : s.starts) EXPECT_EQ(st, 0.0);
  }
  std::stringstream buf;
  WriteCommDataset(buf, DatasetHeader{"comm-bwd", cfg.oracle, cfg.ToJson()}, samples);
  const std::string text = buf.str();
  std::istringstream in(text);
  EXPECT_TRUE(ReadCommDataset(in) == samples);
  std::istringstream wrong(text);
  EXPECT_THROW(ReadComputeDataset(wrong), InvalidArgument);
  std::istringstream empty("");
  EXPECT_THROW(ReadCommDataset(empty), InvalidArgument);
}

TEST(GenDataTest, ForwardAndBackwardSharePlacements) {
  const TablePool pool = GenPool(856, 0);
  DataGenConfig cfg;
  cfg.count = 50;
  cfg.kind = "comm-fwd";
  cfg.start_range_ms = std::make_pair(0.0, 0.0);
  const auto fwd = GenCommData(pool, cfg);
  cfg.kind = "comm-bwd";
  const auto bwd = GenCommData(pool, cfg);
  for (size_t i = 0; i < fwd.size(); ++i) {
    EXPECT_EQ(fwd[i].device_dims, bwd[i].device_dims);
  }
}

TEST(GenDataTest, ResolvedDefaultsAndErrors) {
  DataGenConfig cfg;
  DataGenConfig r = cfg.Resolved();
  EXPECT_EQ(r.n_min, 1);
  EXPECT_EQ(r.n_max, 40);
  cfg.kind = "comm-fwd";
  cfg.num_devices = 8;
  r = cfg.Resolved();
  EXPECT_EQ(r.n_min, 20);
  EXPECT_EQ(r.n_max, 120);
  cfg.kind = "bogus";
  EXPECT_THROW(cfg.Resolved(), InvalidArgument);
}

TEST(GenDataTest, Deterministic) {
  const TablePool pool = GenPool(200, 0);
  DataGenConfig cfg;
  cfg.count = 300;
  cfg.oracle.noise_sigma = 0.05;
  EXPECT_TRUE(GenComputeData(pool, cfg) == GenComputeData(pool, cfg));
  cfg.seed = 1;
  EXPECT_FALSE(GenComputeData(pool, cfg) == GenComputeData(pool, DataGenConfig{}));
}

}  // namespace
}  // namespace shardsearch
