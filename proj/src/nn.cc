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

#include "shardsearch/nn.h"

#include <cmath>

#include "shardsearch/common.h"

namespace shardsearch {

Mlp::Mlp(std::vector<int> widths, bool relu_output)
    : widths_(std::move(widths)), relu_output_(relu_output) {
  if (widths_.size() < 2) throw InvalidArgument("mlp needs at least two widths");
  for (int w : widths_) {
    if (w < 1) throw InvalidArgument("mlp widths must be positive");
  }
  for (size_t l = 0; l + 1 < widths_.size(); ++l) {
    layers_.push_back({Eigen::MatrixXd::Zero(widths_[l + 1], widths_[l]),
                       Eigen::VectorXd::Zero(widths_[l + 1])});
  }
}

void Mlp::InitUniform(std::mt19937_64& rng) {
  for (Layer& layer : layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        layer.weight(r, c) = u(rng);
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = u(rng);
  }
}

void Mlp::SetZero() {
  for (Layer& layer : layers_) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
}

size_t Mlp::NumParameters() const {
  size_t n = 0;
  for (const Layer& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

Eigen::VectorXd Mlp::Forward(const Eigen::VectorXd& x) const {
  Eigen::VectorXd h = x;
  for (int l = 0; l < num_layers(); ++l) {
    Eigen::VectorXd z = layers_[l].bias;
    z.noalias() += layers_[l].weight * h;
    if (Activated(l)) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return h;
}

Eigen::MatrixXd Mlp::Forward(const Eigen::MatrixXd& x, Tape* tape) const {
  if (tape != nullptr) {
    tape->inputs.resize(num_layers());
    tape->pre.resize(num_layers());
  }
  Eigen::MatrixXd h = x;
  for (int l = 0; l < num_layers(); ++l) {
    Eigen::MatrixXd z = layers_[l].weight * h;
    z.colwise() += layers_[l].bias;
    if (tape != nullptr) {
      tape->inputs[l] = std::move(h);
      tape->pre[l] = z;
    }
    if (Activated(l)) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return h;
}

Eigen::MatrixXd Mlp::Backward(const Tape& tape, Eigen::MatrixXd grad_out,
                              MlpGradients* grads) const {
  Eigen::MatrixXd g = std::move(grad_out);
  for (int l = num_layers() - 1; l >= 0; --l) {
    if (Activated(l)) {
      g = (tape.pre[l].array() > 0.0).select(g, 0.0);
    }
    grads->weight[l].noalias() += g * tape.inputs[l].transpose();
    grads->bias[l] += g.rowwise().sum();
    Eigen::MatrixXd next = layers_[l].weight.transpose() * g;
    g = std::move(next);
  }
  return g;
}

std::vector<bool> Mlp::ActivationPattern(const Eigen::VectorXd& x) const {
  std::vector<bool> bits;
  Eigen::VectorXd h = x;
  for (int l = 0; l < num_layers(); ++l) {
    Eigen::VectorXd z = layers_[l].bias;
    z.noalias() += layers_[l].weight * h;
    if (Activated(l)) {
      for (Eigen::Index i = 0; i < z.size(); ++i) bits.push_back(z(i) > 0.0);
      z = z.cwiseMax(0.0);
    }
    h = std::move(z);
  }
  return bits;
}

nlohmann::json Mlp::ToJson() const {
  nlohmann::json layers = nlohmann::json::array();
  for (int l = 0; l < num_layers(); ++l) {
    const Layer& layer = layers_[l];
    std::vector<double> w;
    w.reserve(layer.weight.size());
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        w.push_back(layer.weight(r, c));
      }
    }
    std::vector<double> b(layer.bias.data(), layer.bias.data() + layer.bias.size());
    layers.push_back({{"in", layer.weight.cols()},
                      {"out", layer.weight.rows()},
                      {"relu", Activated(l)},
                      {"weight", std::move(w)},
                      {"bias", std::move(b)}});
  }
  return layers;
}

Mlp Mlp::FromJson(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw InvalidArgument("mlp: expected layer array");
  std::vector<int> widths = {j.front().at("in").get<int>()};
  for (const auto& layer : j) widths.push_back(layer.at("out").get<int>());
  Mlp mlp(widths, j.back().at("relu").get<bool>());
  for (int l = 0; l < mlp.num_layers(); ++l) {
    const auto& jl = j[l];
    if (jl.at("in").get<int>() != widths[l]) {
      throw InvalidArgument("mlp: layer shapes do not chain");
    }
    const auto w = jl.at("weight").get<std::vector<double>>();
    const auto b = jl.at("bias").get<std::vector<double>>();
    Layer& layer = mlp.layers_[l];
    if (w.size() != static_cast<size_t>(layer.weight.size()) ||
        b.size() != static_cast<size_t>(layer.bias.size())) {
      throw InvalidArgument("mlp: weight array size mismatch");
    }
    size_t k = 0;
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = w[k++];
      }
    }
    for (size_t i = 0; i < b.size(); ++i) layer.bias(i) = b[i];
  }
  return mlp;
}

MlpGradients::MlpGradients(const Mlp& mlp) {
  for (const Mlp::Layer& layer : mlp.layers()) {
    weight.push_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
    bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
  }
}

void MlpGradients::SetZero() {
  for (auto& w : weight) w.setZero();
  for (auto& b : bias) b.setZero();
}

Adam::Adam(const Mlp& mlp, const AdamConfig& config)
    : config_(config), m_(mlp), v_(mlp) {}

void Adam::Step(Mlp& mlp, const MlpGradients& grads) {
  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double step_size = config_.learning_rate / correction1;
  const double sqrt_c2 = std::sqrt(correction2);
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -=
        step_size * m.array() / (v.array().sqrt() / sqrt_c2 + config_.epsilon);
  };
  for (int l = 0; l < mlp.num_layers(); ++l) {
    Mlp::Layer& layer = mlp.layers()[l];
    update(layer.weight, grads.weight[l], m_.weight[l], v_.weight[l]);
    update(layer.bias, grads.bias[l], m_.bias[l], v_.bias[l]);
  }
}

}  // namespace shardsearch
