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

// Fully connected ReLU networks with hand-written backprop and Adam.

#ifndef SHARDSEARCH_NN_H_
#define SHARDSEARCH_NN_H_

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace shardsearch {

struct MlpGradients;

// widths = {in, hidden..., out}. Hidden layers use ReLU; the output layer
// is linear unless `relu_output` is set. Batches are column-major: one
// example per column.
class Mlp {
 public:
  struct Layer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;
  };

  // Inputs and pre-activations of every layer, as needed by Backward.
  struct Tape {
    std::vector<Eigen::MatrixXd> inputs;
    std::vector<Eigen::MatrixXd> pre;
  };

  Mlp() = default;
  Mlp(std::vector<int> widths, bool relu_output);

  // PyTorch's default Linear init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  void InitUniform(std::mt19937_64& rng);
  void SetZero();

  int input_size() const { return widths_.front(); }
  int output_size() const { return widths_.back(); }
  int num_layers() const { return static_cast<int>(layers_.size()); }
  const std::vector<int>& widths() const { return widths_; }
  bool relu_output() const { return relu_output_; }
  size_t NumParameters() const;
  bool Activated(int layer) const {
    return layer + 1 < num_layers() || relu_output_;
  }

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  Eigen::VectorXd Forward(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd Forward(const Eigen::MatrixXd& x, Tape* tape) const;

  // Accumulates parameter gradients into `grads`; returns dL/dx.
  Eigen::MatrixXd Backward(const Tape& tape, Eigen::MatrixXd grad_out,
                           MlpGradients* grads) const;

  // ReLU on/off bits over all activated units of a single example, used to
  // detect finite-difference steps that cross a kink.
  std::vector<bool> ActivationPattern(const Eigen::VectorXd& x) const;

  nlohmann::json ToJson() const;
  static Mlp FromJson(const nlohmann::json& j);

 private:
  std::vector<int> widths_;
  bool relu_output_ = false;
  std::vector<Layer> layers_;
};

struct MlpGradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;

  explicit MlpGradients(const Mlp& mlp);
  void SetZero();
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(const Mlp& mlp, const AdamConfig& config);
  void Step(Mlp& mlp, const MlpGradients& grads);

 private:
  AdamConfig config_;
  int64_t step_ = 0;
  MlpGradients m_;
  MlpGradients v_;
};

}  // namespace shardsearch

#endif  // SHARDSEARCH_NN_H_
