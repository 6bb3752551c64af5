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

// Neural cost models.
//
// Compute: a shared encoder (5 -> 128 -> 32) maps every table's features
// to a representation; representations are summed and a head
// (32 -> 64 -> 1) regresses the fused multi-table cost.
//
// Communication: one MLP (2D -> 128 -> 64 -> 32 -> 16 -> D) per direction
// maps per-device start times and device dims to per-device costs.
// Inputs are starts/20ms followed by dims/1024.
//
// Labels are standardized with train-split statistics stored alongside the
// weights; predictions are clamped at zero.

#ifndef SHARDSEARCH_COST_MODEL_H_
#define SHARDSEARCH_COST_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "shardsearch/datagen.h"
#include "shardsearch/nn.h"
#include "shardsearch/tables.h"

namespace shardsearch {

struct TrainConfig {
  int batch_size = 512;
  double learning_rate = 1e-3;
  int epochs = 200;
  double train_fraction = 0.8;
  double valid_fraction = 0.1;
  double test_fraction = 0.1;
  uint64_t seed = 0;

  void Validate() const;
  nlohmann::json ToJson() const;
};

// Mean squared errors in ms^2 of the returned (best-validation) snapshot.
struct TrainMetrics {
  double train_mse = 0.0;
  double valid_mse = 0.0;
  double test_mse = 0.0;
  int best_epoch = 0;
  size_t train_size = 0;
  size_t valid_size = 0;
  size_t test_size = 0;
};

void to_json(nlohmann::json& j, const TrainMetrics& m);

class ComputeCostModel {
 public:
  static constexpr int kEmbedding = 32;

  // All-zero weights, identity label scaling.
  ComputeCostModel();

  void Initialize(uint64_t seed);

  Eigen::VectorXd Encode(const FeatureVector& features) const;
  // ms from an already pooled (summed) representation; clamped at 0.
  double PredictPooled(const Eigen::VectorXd& pooled) const;
  // Bitwise permutation invariant. Throws InvalidArgument if empty.
  double Predict(std::span<const TableConfig> tables) const;
  double PredictFeatures(std::vector<FeatureVector> features) const;

  // Sorts features into the canonical pooling order.
  static void CanonicalOrder(std::vector<FeatureVector>& features);

  Mlp& encoder() { return encoder_; }
  const Mlp& encoder() const { return encoder_; }
  Mlp& head() { return head_; }
  const Mlp& head() const { return head_; }
  double label_mean() const { return label_mean_; }
  double label_std() const { return label_std_; }
  void set_label_scaling(double mean, double stddev);
  size_t NumParameters() const;

  nlohmann::json& training_info() { return training_info_; }
  const nlohmann::json& training_info() const { return training_info_; }

  nlohmann::json ToJson() const;
  static ComputeCostModel FromJson(const nlohmann::json& j);

 private:
  Mlp encoder_;
  Mlp head_;
  double label_mean_ = 0.0;
  double label_std_ = 1.0;
  nlohmann::json training_info_ = nlohmann::json::object();
};

class CommCostModel {
 public:
  static constexpr double kStartScaleMs = 20.0;
  static constexpr double kDimScale = 1024.0;

  CommCostModel() = default;
  // All-zero weights.
  explicit CommCostModel(int num_devices);

  void Initialize(uint64_t seed);

  int num_devices() const { return num_devices_; }
  // Throws InvalidArgument on a length mismatch.
  std::vector<double> Predict(std::span<const double> starts,
                              std::span<const double> device_dims) const;
  Eigen::VectorXd EncodeInput(std::span<const double> starts,
                              std::span<const double> device_dims) const;

  Mlp& mlp() { return mlp_; }
  const Mlp& mlp() const { return mlp_; }
  double label_mean() const { return label_mean_; }
  double label_std() const { return label_std_; }
  void set_label_scaling(double mean, double stddev);
  size_t NumParameters() const { return mlp_.NumParameters(); }

  nlohmann::json& training_info() { return training_info_; }
  const nlohmann::json& training_info() const { return training_info_; }

  nlohmann::json ToJson(const std::string& kind) const;
  static CommCostModel FromJson(const nlohmann::json& j);

 private:
  int num_devices_ = 0;
  Mlp mlp_;
  double label_mean_ = 0.0;
  double label_std_ = 1.0;
  nlohmann::json training_info_ = nlohmann::json::object();
};

// The three pre-trained networks used by the search.
struct CostModelBundle {
  ComputeCostModel compute;
  CommCostModel comm_fwd;
  CommCostModel comm_bwd;

  int num_devices() const { return comm_fwd.num_devices(); }

  // dir/compute.json, dir/comm_fwd.json, dir/comm_bwd.json. Load throws
  // ConfigError if a file is missing or inconsistent.
  static CostModelBundle Load(const std::filesystem::path& dir);
  void Save(const std::filesystem::path& dir) const;
  nlohmann::json Fingerprints() const;
};

// Re-initializes the model from config.seed, trains with Adam on shuffled
// mini-batches and keeps the snapshot with the lowest validation MSE.
// Throws TrainingDiverged on a non-finite loss, InvalidArgument on fewer
// than 10 samples.
TrainMetrics Train(ComputeCostModel& model,
                   const std::vector<ComputeSample>& data,
                   const TrainConfig& config);
TrainMetrics Train(CommCostModel& model, const std::vector<CommSample>& data,
                   const TrainConfig& config);

// Prediction quality on held-out samples (comm samples are flattened over
// devices).
struct FitStats {
  double mse = 0.0;
  double rmse = 0.0;
  double pearson = 0.0;
  double label_stddev = 0.0;
};
FitStats Evaluate(const ComputeCostModel& model,
                  const std::vector<ComputeSample>& data);
FitStats Evaluate(const CommCostModel& model,
                  const std::vector<CommSample>& data);

// Max relative error between backprop and central finite differences
// (step 1e-4) of the per-sample squared error, over every parameter.
// |a - n| / max(|a|, |n|, 1e-6). Throws InvalidArgument if a finite
// difference step flips a ReLU (degenerate sample).
inline constexpr double kGradientCheckStep = 1e-4;
double GradientCheck(ComputeCostModel& model, const ComputeSample& sample);
double GradientCheck(CommCostModel& model, const CommSample& sample);
double GradientCheck(Mlp& mlp, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& y);

// Backprop gradient of sum((f(x) - y)^2) for a single example.
MlpGradients SquaredErrorGradient(const Mlp& mlp, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& y);

}  // namespace shardsearch

#endif  // SHARDSEARCH_COST_MODEL_H_
