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


#include "shardsearch/cost_model.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "shardsearch/common.h"
#include "shardsearch/datagen.h"
#include "shardsearch/oracle.h"
#include "test_util.h"

namespace shardsearch {
namespace {

using ::shardsearch::testing::RandomBundle;
using ::shardsearch::testing::RandomTables;

std::vector<ComputeSample> ComputeData(int count, uint64_t seed, int n_max = 10) {
  DataGenConfig cfg;
  cfg.count = count;
  cfg.n_min = 1;
  cfg.n_max = n_max;
  cfg.seed = seed;
  return GenComputeData(GenPool(856, 0), cfg);
}

std::vector<CommSample> CommData(int count, uint64_t seed) {
  DataGenConfig cfg;
  cfg.kind = "comm-fwd";
  cfg.count = count;
  cfg.seed = seed;
  return GenCommData(GenPool(856, 0), cfg);
}

TEST(ComputeModelTest, ParameterCounts) {
  ComputeCostModel m;
  EXPECT_EQ(m.encoder().widths(), (std::vector<int>{5, 128, 32}));
  EXPECT_EQ(m.head().widths(), (std::vector<int>{32, 64, 1}));
  EXPECT_EQ(m.NumParameters(), 4896u + 2177u);
  CommCostModel c(4);
  EXPECT_EQ(c.mlp().widths(), (std::vector<int>{8, 128, 64, 32, 16, 4}));
  EXPECT_EQ(c.NumParameters(), 1152u + 8256u + 2080u + 528u + 68u);
}

TEST(ComputeModelTest, ZeroWeightsPredictZero) {
  const ComputeCostModel m;
  std::mt19937_64 rng(1);
  EXPECT_EQ(m.Predict(RandomTables(7, rng)), 0.0);
  const CommCostModel c(3);
  const std::vector<double> s = {1, 2, 3}, d = {40, 50, 60};
  EXPECT_EQ(c.Predict(s, d), std::vector<double>(3, 0.0));
}

TEST(ComputeModelTest, PermutationInvariantBitwise) {
  const CostModelBundle b = RandomBundle(4, 3);
  std::mt19937_64 rng(4);
  std::vector<TableConfig> tables = RandomTables(12, rng);
  const double want = b.compute.Predict(tables);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(tables.begin(), tables.end(), rng);
    EXPECT_EQ(b.compute.Predict(tables), want);
  }
}

TEST(ComputeModelTest, MatchesManualPooling) {
  const CostModelBundle b = RandomBundle(4, 5);
  std::mt19937_64 rng(6);
  const std::vector<TableConfig> tables = RandomTables(5, rng);
  Eigen::VectorXd pooled = Eigen::VectorXd::Zero(ComputeCostModel::kEmbedding);
  for (const TableConfig& t : tables) {
    const FeatureVector f = Featurize(t);
    Eigen::VectorXd x(kNumTableFeatures);
    for (int i = 0; i < kNumTableFeatures; ++i) x[i] = f[i];
    pooled += b.compute.encoder().Forward(x);
  }
  const double raw = b.compute.head().Forward(pooled)[0];
  const double want =
      std::max(0.0, raw * b.compute.label_std() + b.compute.label_mean());
  EXPECT_NEAR(b.compute.Predict(tables), want, 1e-12);
  EXPECT_NEAR(b.compute.PredictPooled(pooled), want, 1e-12);
}

TEST(ComputeModelTest, EmptyThrows) {
  const ComputeCostModel m;
  EXPECT_THROW(m.Predict(std::vector<TableConfig>{}), InvalidArgument);
}

TEST(CommModelTest, InputEncodingAndMismatch) {
  const CostModelBundle b = RandomBundle(2, 7);
  const std::vector<double> s = {10, 4}, d = {512, 128};
  const Eigen::VectorXd x = b.comm_fwd.EncodeInput(s, d);
  EXPECT_DOUBLE_EQ(x[0], 0.5);
  EXPECT_DOUBLE_EQ(x[1], 0.2);
  EXPECT_DOUBLE_EQ(x[2], 0.5);
  EXPECT_DOUBLE_EQ(x[3], 0.125);
  EXPECT_EQ(b.comm_fwd.Predict(s, d), b.comm_fwd.Predict(s, d));
  const std::vector<double> three = {1, 2, 3};
  EXPECT_THROW(b.comm_fwd.Predict(three, d), InvalidArgument);
}

TEST(GradientCheckTest, RandomSmallModels) {
  ComputeCostModel m;
  m.Initialize(11);
  m.set_label_scaling(17.0, 10.0);  // roughly the label statistics
  const auto data = ComputeData(20, 1);
  int checked = 0;
  for (const ComputeSample& s : data) {
    try {
      EXPECT_LE(GradientCheck(m, s), 1e-4);
      ++checked;
    } catch (const InvalidArgument&) {
      // Step crossed a ReLU kink; skip this sample.
    }
  }
  EXPECT_GE(checked, 10);

  CommCostModel c(4);
  c.Initialize(12);
  c.set_label_scaling(11.0, 6.0);
  checked = 0;
  for (const CommSample& s : CommData(20, 2)) {
    try {
      EXPECT_LE(GradientCheck(c, s), 1e-4);
      ++checked;
    } catch (const InvalidArgument&) {
    }
  }
  EXPECT_GE(checked, 10);
}

TEST(GradientCheckTest, LinearModelExact) {
  Mlp mlp({4, 2}, false);
  std::mt19937_64 rng(13);
  mlp.InitUniform(rng);
  Eigen::VectorXd x(4), y(2);
  x << 0.3, -1.0, 2.0, 0.7;
  y << 1.0, -0.5;
  EXPECT_LE(GradientCheck(mlp, x, y), 1e-7);
}

TEST(GradientCheckTest, ZeroInputZeroFirstLayerWeightGradient) {
  Mlp mlp({3, 6, 1}, false);
  std::mt19937_64 rng(14);
  mlp.InitUniform(rng);
  Eigen::VectorXd y(1);
  y << 2.0;
  const MlpGradients g = SquaredErrorGradient(mlp, Eigen::VectorXd::Zero(3), y);
  EXPECT_EQ(g.weight[0].norm(), 0.0);
  EXPECT_GT(g.bias[0].norm() + g.bias[1].norm(), 0.0);
}

TEST(TrainTest, ConstantLabelsFitWithin50Epochs) {
  std::vector<ComputeSample> data = ComputeData(400, 3);
  for (ComputeSample& s : data) s.cost_ms = 7.5;
  ComputeCostModel m;
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 64;
  const TrainMetrics metrics = Train(m, data, cfg);
  EXPECT_LT(metrics.test_mse, 1e-4);  // rmse 0.01 ms on a 7.5 ms label
  EXPECT_NEAR(m.Predict(std::vector<TableConfig>{GenPool(3, 9).tables[0]}), 7.5, 1e-3);
}

TEST(TrainTest, FitsSmallDatasetAndIsDeterministic) {
  const auto data = ComputeData(1500, 4);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 64;
  ComputeCostModel a, b;
  const TrainMetrics ma = Train(a, data, cfg);
  const TrainMetrics mb = Train(b, data, cfg);
  EXPECT_EQ(ma.test_mse, mb.test_mse);
  EXPECT_EQ(ma.best_epoch, mb.best_epoch);
  EXPECT_EQ(a.ToJson(), b.ToJson());
  EXPECT_EQ(ma.train_size + ma.valid_size + ma.test_size, data.size());
  EXPECT_EQ(ma.test_size, 150u);
  const FitStats fit = Evaluate(a, data);
  EXPECT_GT(fit.pearson, 0.95);
}

TEST(TrainTest, CommModelLearns) {
  const auto data = CommData(1500, 5);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 64;
  CommCostModel m(4);
  Train(m, data, cfg);
  EXPECT_GT(Evaluate(m, data).pearson, 0.9);
}

TEST(TrainTest, Errors) {
  ComputeCostModel m;
  auto data = ComputeData(9, 6);
  EXPECT_THROW(Train(m, data, TrainConfig{}), InvalidArgument);
  data = ComputeData(50, 6);
  TrainConfig cfg;
  cfg.learning_rate = 1e300;
  cfg.epochs = 5;
  data[3].cost_ms = std::numeric_limits<double>::infinity();
  EXPECT_THROW(Train(m, data, cfg), TrainingDiverged);
  cfg.train_fraction = 0.5;
  EXPECT_THROW(cfg.Validate(), InvalidArgument);
}

TEST(SerializationTest, ModelsRoundTrip) {
  CostModelBundle b = RandomBundle(4, 15);
  b.compute.training_info()["note"] = "x";
  const ComputeCostModel c = ComputeCostModel::FromJson(b.compute.ToJson());
  std::mt19937_64 rng(16);
  const auto tables = RandomTables(9, rng);
  EXPECT_EQ(c.Predict(tables), b.compute.Predict(tables));
  EXPECT_EQ(c.training_info()["note"], "x");
  const nlohmann::json j = b.comm_bwd.ToJson("comm-bwd");
  EXPECT_EQ(j["input_encoding"], "starts-then-device-dims");
  const CommCostModel back = CommCostModel::FromJson(j);
  const std::vector<double> s = {1, 2, 3, 4}, d = {100, 20, 30, 40};
  EXPECT_EQ(back.Predict(s, d), b.comm_bwd.Predict(s, d));
}

TEST(SerializationTest, BundleSaveLoad) {
  const auto dir = std::filesystem::temp_directory_path() / "shardsearch_bundle_test";
  std::filesystem::remove_all(dir);
  const CostModelBundle b = RandomBundle(4, 17);
  b.Save(dir);
  const CostModelBundle back = CostModelBundle::Load(dir);
  EXPECT_EQ(back.num_devices(), 4);
  EXPECT_EQ(back.Fingerprints(), b.Fingerprints());
  std::filesystem::remove(dir / "comm_bwd.json");
  EXPECT_THROW(CostModelBundle::Load(dir), ConfigError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace shardsearch
