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
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <unordered_map>

#include "shardsearch/common.h"

namespace shardsearch {

namespace {

constexpr char kModelFormat[] = "shardsearch-costmodel";

double Clamp0(double v) { return v > 0.0 ? v : 0.0; }

void LabelStats(const std::vector<double>& labels, double* mean,
                double* stddev) {
  double m = 0.0;
  for (double y : labels) m += y;
  m /= static_cast<double>(std::max<size_t>(labels.size(), 1));
  double v = 0.0;
  for (double y : labels) v += (y - m) * (y - m);
  v /= static_cast<double>(std::max<size_t>(labels.size(), 1));
  *mean = m;
  *stddev = v > 1e-24 ? std::sqrt(v) : 1.0;
}

FitStats ComputeFit(const std::vector<double>& pred,
                    const std::vector<double>& label) {
  FitStats s;
  const double n = static_cast<double>(pred.size());
  if (pred.empty()) return s;
  double mp = 0, ml = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    mp += pred[i];
    ml += label[i];
  }
  mp /= n;
  ml /= n;
  double sse = 0, cov = 0, vp = 0, vl = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - label[i];
    sse += e * e;
    cov += (pred[i] - mp) * (label[i] - ml);
    vp += (pred[i] - mp) * (pred[i] - mp);
    vl += (label[i] - ml) * (label[i] - ml);
  }
  s.mse = sse / n;
  s.rmse = std::sqrt(s.mse);
  s.pearson = (vp > 0 && vl > 0) ? cov / std::sqrt(vp * vl) : 0.0;
  s.label_stddev = std::sqrt(vl / n);
  return s;
}

struct Split {
  std::vector<int> train, valid, test;
};

Split MakeSplit(size_t n, const TrainConfig& config) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng = MakeRng(config.seed, 1);
  std::shuffle(order.begin(), order.end(), rng);
  const size_t n_train = static_cast<size_t>(
      std::floor(config.train_fraction * static_cast<double>(n)));
  const size_t n_valid = static_cast<size_t>(
      std::floor(config.valid_fraction * static_cast<double>(n)));
  Split s;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.valid.assign(order.begin() + n_train, order.begin() + n_train + n_valid);
  s.test.assign(order.begin() + n_train + n_valid, order.end());
  return s;
}

// Shared epoch loop. `batch_step(indices, grads)` accumulates gradients of
// the mean normalized loss into `grads` and returns that loss;
// `valid_loss(indices)` returns the mean normalized loss without gradients.
template <typename Model, typename BatchStep, typename ValidLoss>
int RunEpochs(Model& model, std::vector<Mlp*> nets, const Split& split,
              const TrainConfig& config, BatchStep&& batch_step,
              ValidLoss&& valid_loss) {
  AdamConfig adam_config;
  adam_config.learning_rate = config.learning_rate;
  std::vector<Adam> optimizers;
  std::vector<MlpGradients> grads;
  for (Mlp* net : nets) {
    optimizers.emplace_back(*net, adam_config);
    grads.emplace_back(*net);
  }
  std::mt19937_64 rng = MakeRng(config.seed, 2);
  std::vector<int> order = split.train;
  Model best = model;
  double best_valid = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t begin = 0; begin < order.size();
         begin += static_cast<size_t>(config.batch_size)) {
      const size_t end =
          std::min(order.size(), begin + static_cast<size_t>(config.batch_size));
      std::span<const int> batch(order.data() + begin, end - begin);
      for (MlpGradients& g : grads) g.SetZero();
      const double loss = batch_step(batch, grads);
      if (!std::isfinite(loss)) {
        throw TrainingDiverged(
            "training diverged: non-finite loss in epoch " +
                std::to_string(epoch),
            epoch);
      }
      for (size_t k = 0; k < nets.size(); ++k) {
        optimizers[k].Step(*nets[k], grads[k]);
      }
    }
    const double v = valid_loss(std::span<const int>(split.valid));
    if (!std::isfinite(v)) {
      throw TrainingDiverged("training diverged: non-finite validation loss "
                             "in epoch " + std::to_string(epoch),
                             epoch);
    }
    if (v < best_valid) {
      best_valid = v;
      best = model;
      best_epoch = epoch;
    }
  }
  model = std::move(best);
  return best_epoch;
}

template <typename T>
std::vector<T> Gather(const std::vector<T>& data, const std::vector<int>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(data[i]);
  return out;
}

}  // namespace

void TrainConfig::Validate() const {
  if (batch_size < 1) throw InvalidArgument("train: batch_size must be >= 1");
  if (!(learning_rate > 0)) throw InvalidArgument("train: learning_rate must be > 0");
  if (epochs < 1) throw InvalidArgument("train: epochs must be >= 1");
  if (train_fraction <= 0 || valid_fraction <= 0 || test_fraction < 0 ||
      std::abs(train_fraction + valid_fraction + test_fraction - 1.0) > 1e-9) {
    throw InvalidArgument("train: split fractions must be positive and sum to 1");
  }
}

nlohmann::json TrainConfig::ToJson() const {
  return {{"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"optimizer", "adam"},
          {"epochs", epochs},
          {"split", {train_fraction, valid_fraction, test_fraction}},
          {"seed", seed}};
}

void to_json(nlohmann::json& j, const TrainMetrics& m) {
  j = nlohmann::json{{"train_mse", m.train_mse},   {"valid_mse", m.valid_mse},
                     {"test_mse", m.test_mse},     {"best_epoch", m.best_epoch},
                     {"train_size", m.train_size}, {"valid_size", m.valid_size},
                     {"test_size", m.test_size}};
}

// ---------------------------------------------------------------------------
// Compute model

ComputeCostModel::ComputeCostModel()
    : encoder_({kNumTableFeatures, 128, kEmbedding}, /*relu_output=*/true),
      head_({kEmbedding, 64, 1}, /*relu_output=*/false) {}

void ComputeCostModel::Initialize(uint64_t seed) {
  std::mt19937_64 rng = MakeRng(seed, 0);
  encoder_.InitUniform(rng);
  head_.InitUniform(rng);
  label_mean_ = 0.0;
  label_std_ = 1.0;
}

void ComputeCostModel::set_label_scaling(double mean, double stddev) {
  label_mean_ = mean;
  label_std_ = stddev;
}

size_t ComputeCostModel::NumParameters() const {
  return encoder_.NumParameters() + head_.NumParameters();
}

Eigen::VectorXd ComputeCostModel::Encode(const FeatureVector& features) const {
  Eigen::VectorXd x(kNumTableFeatures);
  for (int i = 0; i < kNumTableFeatures; ++i) x(i) = features[i];
  return encoder_.Forward(x);
}

double ComputeCostModel::PredictPooled(const Eigen::VectorXd& pooled) const {
  const double out = head_.Forward(pooled)(0);
  return Clamp0(label_mean_ + label_std_ * out);
}

void ComputeCostModel::CanonicalOrder(std::vector<FeatureVector>& features) {
  std::sort(features.begin(), features.end());
}

double ComputeCostModel::PredictFeatures(
    std::vector<FeatureVector> features) const {
  if (features.empty()) throw InvalidArgument("predict_compute: no tables");
  CanonicalOrder(features);
  Eigen::VectorXd pooled = Eigen::VectorXd::Zero(kEmbedding);
  for (const FeatureVector& f : features) pooled += Encode(f);
  return PredictPooled(pooled);
}

double ComputeCostModel::Predict(std::span<const TableConfig> tables) const {
  std::vector<FeatureVector> features;
  features.reserve(tables.size());
  for (const TableConfig& t : tables) features.push_back(Featurize(t));
  return PredictFeatures(std::move(features));
}

nlohmann::json ComputeCostModel::ToJson() const {
  return {{"format", kModelFormat},
          {"version", 1},
          {"kind", "compute"},
          {"feature_version", kFeatureVersion},
          {"features",
           {"dim/128", "log10(hash_size)/8", "pooling_factor/50", "skew/2",
            "size_bytes/1e9"}},
          {"pooling", "sum"},
          {"label_mean", label_mean_},
          {"label_std", label_std_},
          {"encoder", encoder_.ToJson()},
          {"head", head_.ToJson()},
          {"training", training_info_}};
}

ComputeCostModel ComputeCostModel::FromJson(const nlohmann::json& j) {
  if (j.value("format", "") != kModelFormat || j.value("kind", "") != "compute") {
    throw InvalidArgument("not a compute cost model file");
  }
  if (j.value("feature_version", 0) != kFeatureVersion) {
    throw InvalidArgument("compute model: feature version mismatch");
  }
  ComputeCostModel m;
  Mlp encoder = Mlp::FromJson(j.at("encoder"));
  Mlp head = Mlp::FromJson(j.at("head"));
  if (encoder.widths() != m.encoder_.widths() ||
      encoder.relu_output() != m.encoder_.relu_output() ||
      head.widths() != m.head_.widths() ||
      head.relu_output() != m.head_.relu_output()) {
    throw InvalidArgument("compute model: unexpected architecture");
  }
  m.encoder_ = std::move(encoder);
  m.head_ = std::move(head);
  m.label_mean_ = j.at("label_mean").get<double>();
  m.label_std_ = j.at("label_std").get<double>();
  m.training_info_ = j.value("training", nlohmann::json::object());
  return m;
}

namespace {

// Distinct feature vectors of a dataset; samples refer to them by index.
// Tables recur across samples, so a batch encodes each distinct table once.
struct FeatureIndex {
  std::vector<FeatureVector> unique;
  std::vector<std::vector<int>> members;  // per sample
};

FeatureIndex IndexFeatures(const std::vector<ComputeSample>& data) {
  FeatureIndex index;
  std::map<FeatureVector, int> ids;
  index.members.reserve(data.size());
  for (const ComputeSample& s : data) {
    std::vector<int> m;
    m.reserve(s.features.size());
    for (const FeatureVector& f : s.features) {
      auto [it, inserted] = ids.try_emplace(f, static_cast<int>(index.unique.size()));
      if (inserted) index.unique.push_back(f);
      m.push_back(it->second);
    }
    index.members.push_back(std::move(m));
  }
  return index;
}

struct FlatBatch {
  Eigen::MatrixXd features;              // kNumTableFeatures x distinct tables
  std::vector<std::vector<int>> members;  // per sample, columns of `features`
  Eigen::RowVectorXd targets;
};

FlatBatch Flatten(const std::vector<ComputeSample>& data,
                  const FeatureIndex& index, std::span<const int> idx,
                  double mean, double stddev) {
  FlatBatch b;
  std::unordered_map<int, int> local;
  std::vector<int> order;
  b.members.reserve(idx.size());
  b.targets.resize(static_cast<Eigen::Index>(idx.size()));
  for (size_t k = 0; k < idx.size(); ++k) {
    std::vector<int> m;
    for (int u : index.members[idx[k]]) {
      auto [it, inserted] = local.try_emplace(u, static_cast<int>(order.size()));
      if (inserted) order.push_back(u);
      m.push_back(it->second);
    }
    b.members.push_back(std::move(m));
    b.targets(static_cast<Eigen::Index>(k)) = (data[idx[k]].cost_ms - mean) / stddev;
  }
  b.features.resize(kNumTableFeatures, static_cast<Eigen::Index>(order.size()));
  for (size_t c = 0; c < order.size(); ++c) {
    const FeatureVector& f = index.unique[order[c]];
    for (int r = 0; r < kNumTableFeatures; ++r) {
      b.features(r, static_cast<Eigen::Index>(c)) = f[r];
    }
  }
  return b;
}

// Mean over the batch of (f(x) - y)^2 in normalized units. With grads,
// accumulates d(mean loss)/d(params) when `mean` is set, or of the summed
// loss otherwise.
double ComputeLoss(const ComputeCostModel& model, const FlatBatch& batch,
                   MlpGradients* enc_grads, MlpGradients* head_grads,
                   bool mean = true) {
  Mlp::Tape enc_tape, head_tape;
  const bool with_grad = enc_grads != nullptr;
  const Eigen::MatrixXd encoded =
      model.encoder().Forward(batch.features, with_grad ? &enc_tape : nullptr);
  const Eigen::Index num_samples = static_cast<Eigen::Index>(batch.members.size());
  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(encoded.rows(), num_samples);
  for (Eigen::Index b = 0; b < num_samples; ++b) {
    for (int c : batch.members[b]) pooled.col(b) += encoded.col(c);
  }
  const Eigen::MatrixXd out =
      model.head().Forward(pooled, with_grad ? &head_tape : nullptr);
  const Eigen::RowVectorXd err = out.row(0) - batch.targets;
  const double n = static_cast<double>(err.size());
  const double loss = err.squaredNorm() / (mean ? n : 1.0);
  if (with_grad) {
    Eigen::MatrixXd grad_out = (2.0 / (mean ? n : 1.0)) * err;
    const Eigen::MatrixXd grad_pooled =
        model.head().Backward(head_tape, std::move(grad_out), head_grads);
    Eigen::MatrixXd grad_encoded =
        Eigen::MatrixXd::Zero(encoded.rows(), encoded.cols());
    for (Eigen::Index b = 0; b < num_samples; ++b) {
      for (int c : batch.members[b]) grad_encoded.col(c) += grad_pooled.col(b);
    }
    model.encoder().Backward(enc_tape, std::move(grad_encoded), enc_grads);
  }
  return loss;
}

}  // namespace

TrainMetrics Train(ComputeCostModel& model,
                   const std::vector<ComputeSample>& data,
                   const TrainConfig& config) {
  config.Validate();
  if (data.size() < 10) throw InvalidArgument("train: need at least 10 samples");
  const Split split = MakeSplit(data.size(), config);
  model.Initialize(DeriveSeed(config.seed, 3));
  double mean, stddev;
  {
    std::vector<double> labels;
    for (int i : split.train) labels.push_back(data[i].cost_ms);
    LabelStats(labels, &mean, &stddev);
  }
  model.set_label_scaling(mean, stddev);
  const FeatureIndex index = IndexFeatures(data);
  const FlatBatch valid = Flatten(data, index, split.valid, mean, stddev);

  TrainMetrics metrics;
  metrics.best_epoch = RunEpochs(
      model, {&model.encoder(), &model.head()}, split, config,
      [&](std::span<const int> idx, std::vector<MlpGradients>& grads) {
        const FlatBatch batch = Flatten(data, index, idx, mean, stddev);
        return ComputeLoss(model, batch, &grads[0], &grads[1]);
      },
      [&](std::span<const int>) {
        return ComputeLoss(model, valid, nullptr, nullptr);
      });
  metrics.train_size = split.train.size();
  metrics.valid_size = split.valid.size();
  metrics.test_size = split.test.size();
  metrics.train_mse = Evaluate(model, Gather(data, split.train)).mse;
  metrics.valid_mse = Evaluate(model, Gather(data, split.valid)).mse;
  metrics.test_mse = split.test.empty()
                         ? 0.0
                         : Evaluate(model, Gather(data, split.test)).mse;
  model.training_info() = {{"config", config.ToJson()},
                           {"config_fingerprint",
                            Fingerprint(config.ToJson().dump())},
                           {"metrics", metrics}};
  return metrics;
}

FitStats Evaluate(const ComputeCostModel& model,
                  const std::vector<ComputeSample>& data) {
  std::vector<double> pred, label;
  pred.reserve(data.size());
  label.reserve(data.size());
  for (const ComputeSample& s : data) {
    pred.push_back(model.PredictFeatures(s.features));
    label.push_back(s.cost_ms);
  }
  return ComputeFit(pred, label);
}

// ---------------------------------------------------------------------------
// Communication model

CommCostModel::CommCostModel(int num_devices)
    : num_devices_(num_devices),
      mlp_({2 * num_devices, 128, 64, 32, 16, num_devices},
           /*relu_output=*/false) {
  if (num_devices < 1) throw InvalidArgument("comm model: num_devices must be >= 1");
}

void CommCostModel::Initialize(uint64_t seed) {
  std::mt19937_64 rng = MakeRng(seed, 0);
  mlp_.InitUniform(rng);
  label_mean_ = 0.0;
  label_std_ = 1.0;
}

void CommCostModel::set_label_scaling(double mean, double stddev) {
  label_mean_ = mean;
  label_std_ = stddev;
}

Eigen::VectorXd CommCostModel::EncodeInput(
    std::span<const double> starts, std::span<const double> device_dims) const {
  if (static_cast<int>(starts.size()) != num_devices_ ||
      static_cast<int>(device_dims.size()) != num_devices_) {
    throw InvalidArgument("comm model expects " + std::to_string(num_devices_) +
                          " starts and device dims");
  }
  Eigen::VectorXd x(2 * num_devices_);
  for (int d = 0; d < num_devices_; ++d) {
    x(d) = starts[d] / kStartScaleMs;
    x(num_devices_ + d) = device_dims[d] / kDimScale;
  }
  return x;
}

std::vector<double> CommCostModel::Predict(
    std::span<const double> starts, std::span<const double> device_dims) const {
  const Eigen::VectorXd out = mlp_.Forward(EncodeInput(starts, device_dims));
  std::vector<double> cost(num_devices_);
  for (int d = 0; d < num_devices_; ++d) {
    cost[d] = Clamp0(label_mean_ + label_std_ * out(d));
  }
  return cost;
}

nlohmann::json CommCostModel::ToJson(const std::string& kind) const {
  return {{"format", kModelFormat},
          {"version", 1},
          {"kind", kind},
          {"num_devices", num_devices_},
          {"input_encoding", "starts-then-device-dims"},
          {"start_scale_ms", kStartScaleMs},
          {"dim_scale", kDimScale},
          {"label_mean", label_mean_},
          {"label_std", label_std_},
          {"mlp", mlp_.ToJson()},
          {"training", training_info_}};
}

CommCostModel CommCostModel::FromJson(const nlohmann::json& j) {
  const std::string kind = j.value("kind", "");
  if (j.value("format", "") != kModelFormat ||
      (kind != "comm-fwd" && kind != "comm-bwd")) {
    throw InvalidArgument("not a communication cost model file");
  }
  if (j.value("input_encoding", "") != "starts-then-device-dims" ||
      j.value("start_scale_ms", 0.0) != kStartScaleMs ||
      j.value("dim_scale", 0.0) != kDimScale) {
    throw InvalidArgument("comm model: unsupported input encoding");
  }
  CommCostModel m(j.at("num_devices").get<int>());
  Mlp mlp = Mlp::FromJson(j.at("mlp"));
  if (mlp.widths() != m.mlp_.widths() || mlp.relu_output()) {
    throw InvalidArgument("comm model: unexpected architecture");
  }
  m.mlp_ = std::move(mlp);
  m.label_mean_ = j.at("label_mean").get<double>();
  m.label_std_ = j.at("label_std").get<double>();
  m.training_info_ = j.value("training", nlohmann::json::object());
  return m;
}

namespace {

struct CommMatrices {
  Eigen::MatrixXd inputs;   // 2D x n
  Eigen::MatrixXd targets;  // D x n, normalized
};

CommMatrices CommBatch(const CommCostModel& model,
                       const std::vector<CommSample>& data,
                       std::span<const int> idx) {
  const int d = model.num_devices();
  CommMatrices m;
  m.inputs.resize(2 * d, static_cast<Eigen::Index>(idx.size()));
  m.targets.resize(d, static_cast<Eigen::Index>(idx.size()));
  for (size_t k = 0; k < idx.size(); ++k) {
    const CommSample& s = data[idx[k]];
    m.inputs.col(static_cast<Eigen::Index>(k)) =
        model.EncodeInput(s.starts, s.device_dims);
    for (int r = 0; r < d; ++r) {
      m.targets(r, static_cast<Eigen::Index>(k)) =
          (s.costs_ms[r] - model.label_mean()) / model.label_std();
    }
  }
  return m;
}

double CommLoss(const CommCostModel& model, const CommMatrices& batch,
                MlpGradients* grads, bool mean = true) {
  Mlp::Tape tape;
  const Eigen::MatrixXd out =
      model.mlp().Forward(batch.inputs, grads != nullptr ? &tape : nullptr);
  const Eigen::MatrixXd err = out - batch.targets;
  const double n = static_cast<double>(err.cols());
  const double loss = err.squaredNorm() / (mean ? n : 1.0);
  if (grads != nullptr) {
    model.mlp().Backward(tape, (2.0 / (mean ? n : 1.0)) * err, grads);
  }
  return loss;
}

void CheckCommData(const CommCostModel& model,
                   const std::vector<CommSample>& data) {
  for (const CommSample& s : data) {
    if (static_cast<int>(s.costs_ms.size()) != model.num_devices()) {
      throw InvalidArgument("comm sample device count does not match model");
    }
  }
}

}  // namespace

TrainMetrics Train(CommCostModel& model, const std::vector<CommSample>& data,
                   const TrainConfig& config) {
  config.Validate();
  if (data.size() < 10) throw InvalidArgument("train: need at least 10 samples");
  CheckCommData(model, data);
  const Split split = MakeSplit(data.size(), config);
  model.Initialize(DeriveSeed(config.seed, 3));
  double mean, stddev;
  {
    std::vector<double> labels;
    for (int i : split.train) {
      labels.insert(labels.end(), data[i].costs_ms.begin(),
                    data[i].costs_ms.end());
    }
    LabelStats(labels, &mean, &stddev);
  }
  model.set_label_scaling(mean, stddev);
  const CommMatrices valid = CommBatch(model, data, split.valid);

  TrainMetrics metrics;
  metrics.best_epoch = RunEpochs(
      model, {&model.mlp()}, split, config,
      [&](std::span<const int> idx, std::vector<MlpGradients>& grads) {
        return CommLoss(model, CommBatch(model, data, idx), &grads[0]);
      },
      [&](std::span<const int>) { return CommLoss(model, valid, nullptr); });
  metrics.train_size = split.train.size();
  metrics.valid_size = split.valid.size();
  metrics.test_size = split.test.size();
  metrics.train_mse = Evaluate(model, Gather(data, split.train)).mse;
  metrics.valid_mse = Evaluate(model, Gather(data, split.valid)).mse;
  metrics.test_mse = split.test.empty()
                         ? 0.0
                         : Evaluate(model, Gather(data, split.test)).mse;
  model.training_info() = {{"config", config.ToJson()},
                           {"config_fingerprint",
                            Fingerprint(config.ToJson().dump())},
                           {"metrics", metrics}};
  return metrics;
}

FitStats Evaluate(const CommCostModel& model,
                  const std::vector<CommSample>& data) {
  CheckCommData(model, data);
  std::vector<double> pred, label;
  for (const CommSample& s : data) {
    const std::vector<double> p = model.Predict(s.starts, s.device_dims);
    pred.insert(pred.end(), p.begin(), p.end());
    label.insert(label.end(), s.costs_ms.begin(), s.costs_ms.end());
  }
  return ComputeFit(pred, label);
}

// ---------------------------------------------------------------------------
// Bundle

namespace {

nlohmann::json ReadModelJson(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("missing model file: " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed model file " + path.string() + ": " + e.what());
  }
}

void WriteModelJson(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump() << '\n';
}

}  // namespace

CostModelBundle CostModelBundle::Load(const std::filesystem::path& dir) {
  CostModelBundle bundle;
  try {
    bundle.compute = ComputeCostModel::FromJson(ReadModelJson(dir / "compute.json"));
    bundle.comm_fwd = CommCostModel::FromJson(ReadModelJson(dir / "comm_fwd.json"));
    bundle.comm_bwd = CommCostModel::FromJson(ReadModelJson(dir / "comm_bwd.json"));
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("model bundle: ") + e.what());
  }
  if (bundle.comm_fwd.num_devices() != bundle.comm_bwd.num_devices()) {
    throw ConfigError("model bundle: comm models disagree on device count");
  }
  return bundle;
}

void CostModelBundle::Save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  WriteModelJson(dir / "compute.json", compute.ToJson());
  WriteModelJson(dir / "comm_fwd.json", comm_fwd.ToJson("comm-fwd"));
  WriteModelJson(dir / "comm_bwd.json", comm_bwd.ToJson("comm-bwd"));
}

nlohmann::json CostModelBundle::Fingerprints() const {
  return {{"compute", Fingerprint(compute.ToJson().dump())},
          {"comm_fwd", Fingerprint(comm_fwd.ToJson("comm-fwd").dump())},
          {"comm_bwd", Fingerprint(comm_bwd.ToJson("comm-bwd").dump())}};
}

// ---------------------------------------------------------------------------
// Gradient checks

namespace {

double RelativeError(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

// Perturbs every parameter of `nets` by +-step, comparing the central
// difference of `loss()` with `analytic`. `pattern()` must return the ReLU
// pattern for the current parameters.
template <typename LossFn, typename PatternFn>
double FiniteDifferenceCheck(std::vector<Mlp*> nets,
                             const std::vector<const MlpGradients*>& analytic,
                             LossFn&& loss, PatternFn&& pattern) {
  const std::vector<bool> base = pattern();
  const double h = kGradientCheckStep;
  double worst = 0.0;
  auto probe = [&](double& param, double grad) {
    const double saved = param;
    param = saved + h;
    const double plus = loss();
    const bool flip_plus = pattern() != base;
    param = saved - h;
    const double minus = loss();
    const bool flip_minus = pattern() != base;
    param = saved;
    if (flip_plus || flip_minus) {
      throw InvalidArgument("gradient check: degenerate sample (a finite "
                            "difference step crosses a ReLU kink)");
    }
    worst = std::max(worst, RelativeError(grad, (plus - minus) / (2.0 * h)));
  };
  for (size_t k = 0; k < nets.size(); ++k) {
    for (int l = 0; l < nets[k]->num_layers(); ++l) {
      Mlp::Layer& layer = nets[k]->layers()[l];
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
        probe(layer.weight.data()[i], analytic[k]->weight[l].data()[i]);
      }
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
        probe(layer.bias.data()[i], analytic[k]->bias[l].data()[i]);
      }
    }
  }
  return worst;
}

}  // namespace

MlpGradients SquaredErrorGradient(const Mlp& mlp, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& y) {
  MlpGradients grads(mlp);
  Mlp::Tape tape;
  const Eigen::MatrixXd out = mlp.Forward(Eigen::MatrixXd(x), &tape);
  mlp.Backward(tape, 2.0 * (out - Eigen::MatrixXd(y)), &grads);
  return grads;
}

double GradientCheck(Mlp& mlp, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& y) {
  const MlpGradients grads = SquaredErrorGradient(mlp, x, y);
  return FiniteDifferenceCheck(
      {&mlp}, {&grads},
      [&] { return (mlp.Forward(x) - y).squaredNorm(); },
      [&] { return mlp.ActivationPattern(x); });
}

double GradientCheck(ComputeCostModel& model, const ComputeSample& sample) {
  const std::vector<ComputeSample> one = {sample};
  const std::vector<int> idx = {0};
  const FlatBatch batch = Flatten(one, IndexFeatures(one), idx,
                                 model.label_mean(), model.label_std());
  MlpGradients enc(model.encoder()), head(model.head());
  ComputeLoss(model, batch, &enc, &head, /*mean=*/false);
  auto pattern = [&] {
    std::vector<bool> bits;
    Eigen::VectorXd pooled = Eigen::VectorXd::Zero(ComputeCostModel::kEmbedding);
    for (const FeatureVector& f : sample.features) {
      Eigen::VectorXd x(kNumTableFeatures);
      for (int i = 0; i < kNumTableFeatures; ++i) x(i) = f[i];
      const std::vector<bool> p = model.encoder().ActivationPattern(x);
      bits.insert(bits.end(), p.begin(), p.end());
      pooled += model.encoder().Forward(x);
    }
    const std::vector<bool> p = model.head().ActivationPattern(pooled);
    bits.insert(bits.end(), p.begin(), p.end());
    return bits;
  };
  return FiniteDifferenceCheck(
      {&model.encoder(), &model.head()}, {&enc, &head},
      [&] { return ComputeLoss(model, batch, nullptr, nullptr, false); },
      pattern);
}

double GradientCheck(CommCostModel& model, const CommSample& sample) {
  const std::vector<CommSample> one = {sample};
  const std::vector<int> idx = {0};
  CheckCommData(model, one);
  const CommMatrices batch = CommBatch(model, one, idx);
  MlpGradients grads(model.mlp());
  CommLoss(model, batch, &grads, /*mean=*/false);
  const Eigen::VectorXd x = batch.inputs.col(0);
  return FiniteDifferenceCheck(
      {&model.mlp()}, {&grads},
      [&] { return CommLoss(model, batch, nullptr, false); },
      [&] { return model.mlp().ActivationPattern(x); });
}

}  // namespace shardsearch
