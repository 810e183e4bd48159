/*
 * Copyright 2026 The aowrec Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef AOWREC_TRAINING_HPP_
#define AOWREC_TRAINING_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aowrec/common.hpp"
#include "aowrec/corpus.hpp"
#include "aowrec/metrics.hpp"
#include "aowrec/neural.hpp"
#include "aowrec/scorer.hpp"
#include "aowrec/tensor_file.hpp"

namespace aowrec {

enum class OptimizerKind { kSgd, kAdam };

inline const char* OptimizerName(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }

inline OptimizerKind ParseOptimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam") return OptimizerKind::kAdam;
  throw std::invalid_argument("unknown optimizer '" + s + "' (expected sgd or adam)");
}

struct TrainConfig {
  int epochs = 30;
  double learning_rate = 0.5;
  int batch_size = 32;
  int embed_dim = 32;
  int num_heads = 2;
  int num_layers = 1;
  int max_context = 50;
  double l2 = 0.0;
  // Rescale the batch gradient to this global L2 norm when larger; 0 disables.
  double clip_norm = 5.0;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  std::uint64_t seed = 1;

  bool operator==(const TrainConfig&) const = default;

  void Validate() const {
    if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("train: learning_rate must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (embed_dim < 4) throw std::invalid_argument("train: embed_dim must be >= 4");
    if (max_context < 2) throw std::invalid_argument("train: max_context must be >= 2");
    if (!(l2 >= 0.0)) throw std::invalid_argument("train: l2 must be >= 0");
    if (!(clip_norm >= 0.0)) throw std::invalid_argument("train: clip_norm must be >= 0");
  }

  NetShape Shape(std::int32_t vocab) const {
    return {vocab, embed_dim, num_heads, num_layers, max_context, 2 * embed_dim};
  }
};

// Trained self-attention scorer (float32 parameters).
class NeuralScorer final : public Scorer {
 public:
  using Net = NeuralNet<float>;

  NeuralScorer(Net net, TrainConfig config) : net_(std::move(net)), config_(config) {}

  ScorerKind kind() const override { return ScorerKind::kNeural; }
  std::int32_t vocab_size() const override { return net_.shape().vocab_size; }

  const Net& net() const { return net_; }
  Net& mutable_net() { return net_; }
  const TrainConfig& config() const { return config_; }

  int epochs_run = 0;
  float final_loss = 0.0f;

  CheckpointData ToCheckpoint() const {
    CheckpointData ck;
    ck.kind = static_cast<std::uint32_t>(ScorerKind::kNeural);
    ck.vocab_size = static_cast<std::uint32_t>(vocab_size());
    const NetShape& s = net_.shape();
    ck.config["embed_dim"] = std::to_string(s.embed_dim);
    ck.config["num_heads"] = std::to_string(s.num_heads);
    ck.config["num_layers"] = std::to_string(s.num_layers);
    ck.config["max_context"] = std::to_string(s.max_context);
    ck.config["ffn_dim"] = std::to_string(s.ffn_dim);
    ck.config["train.epochs"] = std::to_string(config_.epochs);
    ck.config["train.learning_rate"] = Real(config_.learning_rate);
    ck.config["train.batch_size"] = std::to_string(config_.batch_size);
    ck.config["train.l2"] = Real(config_.l2);
    ck.config["train.clip_norm"] = Real(config_.clip_norm);
    ck.config["train.optimizer"] = OptimizerName(config_.optimizer);
    ck.epochs_run = static_cast<std::uint32_t>(epochs_run);
    ck.final_loss = final_loss;
    ck.seed = config_.seed;
    for (const auto& p : net_.params()) {
      Tensor t{p.name,
               {static_cast<std::uint32_t>(p.value.rows()), static_cast<std::uint32_t>(p.value.cols())},
               {p.value.data(), p.value.data() + p.value.size()}};
      ck.tensors.push_back(std::move(t));
    }
    return ck;
  }

  static NeuralScorer FromCheckpoint(const CheckpointData& ck) {
    if (ck.kind != static_cast<std::uint32_t>(ScorerKind::kNeural)) {
      throw CheckpointError("checkpoint: expected a neural model");
    }
    NetShape s;
    s.vocab_size = static_cast<std::int32_t>(ck.vocab_size);
    s.embed_dim = std::stoi(ck.Config("embed_dim"));
    s.num_heads = std::stoi(ck.Config("num_heads"));
    s.num_layers = std::stoi(ck.Config("num_layers"));
    s.max_context = std::stoi(ck.Config("max_context"));
    s.ffn_dim = std::stoi(ck.Config("ffn_dim"));
    TrainConfig cfg;
    cfg.epochs = std::stoi(ck.Config("train.epochs"));
    cfg.learning_rate = std::stod(ck.Config("train.learning_rate"));
    cfg.batch_size = std::stoi(ck.Config("train.batch_size"));
    cfg.l2 = std::stod(ck.Config("train.l2"));
    cfg.clip_norm = std::stod(ck.Config("train.clip_norm"));
    cfg.optimizer = ParseOptimizer(ck.Config("train.optimizer"));
    cfg.embed_dim = s.embed_dim;
    cfg.num_heads = s.num_heads;
    cfg.num_layers = s.num_layers;
    cfg.max_context = s.max_context;
    cfg.seed = ck.seed;
    Net net(s);
    for (auto& p : net.params()) {
      const Tensor& t = ck.Find(p.name);
      if (t.dims.size() != 2 || t.dims[0] != p.value.rows() || t.dims[1] != p.value.cols()) {
        throw CheckpointError("checkpoint: shape mismatch for '" + p.name + "'");
      }
      std::copy(t.data.begin(), t.data.end(), p.value.data());
    }
    NeuralScorer m(std::move(net), cfg);
    m.epochs_run = static_cast<int>(ck.epochs_run);
    m.final_loss = ck.final_loss;
    return m;
  }

 protected:
  Scores DoScore(std::span<const ItemId> prefix) const override {
    const auto row = net_.LastLogits(prefix);
    return Scores(row.data(), row.data() + row.size());
  }

 private:
  static std::string Real(double v) { return FormatShortest(v); }

  Net net_;
  TrainConfig config_;
};

// One training window: predict targets[t] from inputs[0..t].
struct TrainingExample {
  std::vector<ItemId> inputs;
  std::vector<ItemId> targets;
  double weight = 1.0;
};

// Windows over each sequence's most recent max_context + 1 items.
inline std::vector<TrainingExample> MakeExamples(const InteractionDataset& ds, int max_context,
                                                 std::span<const double> weights = {}) {
  std::vector<TrainingExample> out;
  for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
    const auto& items = ds.sequences[i].items;
    if (items.size() < 2) continue;
    const std::size_t keep = std::min(items.size(), static_cast<std::size_t>(max_context) + 1);
    const auto begin = items.end() - static_cast<std::ptrdiff_t>(keep);
    TrainingExample ex;
    ex.inputs.assign(begin, items.end() - 1);
    ex.targets.assign(begin + 1, items.end());
    ex.weight = weights.empty() ? 1.0 : weights[i];
    out.push_back(std::move(ex));
  }
  return out;
}

struct TrainOptions {
  // Per-sequence loss weights, parallel to ds.sequences; empty means all 1.
  std::vector<double> sequence_weights;
  // Continue from these parameters instead of a fresh initialization.
  const NeuralScorer* init = nullptr;
  // Recall@k used for snapshot selection on the validation queries.
  int selection_k = 10;
  unsigned eval_threads = 1;
};

struct TrainResult {
  NeuralScorer model;
  int best_epoch = 0;
  double best_validation_recall = 0.0;
  std::vector<double> epoch_loss;
  std::vector<double> epoch_validation_recall;
};

namespace detail {

class Optimizer {
 public:
  using Mat = NeuralNet<float>::Mat;

  Optimizer(const TrainConfig& cfg, const NeuralNet<float>& net) : cfg_(cfg) {
    if (cfg.optimizer == OptimizerKind::kAdam) {
      m_ = net.ZeroGrads();
      v_ = net.ZeroGrads();
    }
  }

  void Step(NeuralNet<float>& net, std::vector<Mat>& grads) {
    const auto lr = static_cast<float>(cfg_.learning_rate);
    const auto l2 = static_cast<float>(cfg_.l2);
    auto& params = net.params();
    if (cfg_.clip_norm > 0.0) {
      double sq = 0.0;
      for (const auto& g : grads) sq += static_cast<double>(g.squaredNorm());
      const double norm = std::sqrt(sq);
      if (norm > cfg_.clip_norm) {
        const auto s = static_cast<float>(cfg_.clip_norm / norm);
        for (auto& g : grads) g *= s;
      }
    }
    ++step_;
    for (std::size_t i = 0; i < params.size(); ++i) {
      Mat& w = params[i].value;
      Mat& g = grads[i];
      if (l2 > 0.0f) g += l2 * w;
      if (cfg_.optimizer == OptimizerKind::kSgd) {
        w -= lr * g;
        continue;
      }
      constexpr float b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
      m_[i] = b1 * m_[i] + (1.0f - b1) * g;
      v_[i] = b2 * v_[i] + (1.0f - b2) * g.cwiseProduct(g);
      const float c1 = 1.0f - std::pow(b1, static_cast<float>(step_));
      const float c2 = 1.0f - std::pow(b2, static_cast<float>(step_));
      w.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
    }
  }

 private:
  TrainConfig cfg_;
  std::vector<Mat> m_, v_;
  long step_ = 0;
};

}  // namespace detail

// Minimizes next-item cross-entropy over every position of every sequence by
// mini-batch gradient descent. Returns the epoch snapshot with the best
// validation Recall@k (earliest on ties), or the last epoch when no
// validation queries are given. Single-threaded and deterministic in
// (ds, cfg, validation, opts).
inline TrainResult TrainNeural(const InteractionDataset& ds, const TrainConfig& cfg,
                               std::span<const Query> validation, const TrainOptions& opts = {}) {
  cfg.Validate();
  if (ds.empty()) throw std::invalid_argument("train_neural: empty dataset");
  if (!opts.sequence_weights.empty() && opts.sequence_weights.size() != ds.sequences.size()) {
    throw std::invalid_argument("train_neural: sequence_weights size mismatch");
  }
  NeuralNet<float> net;
  if (opts.init) {
    if (opts.init->vocab_size() != ds.vocab_size) {
      throw std::invalid_argument("train_neural: init model vocabulary mismatch");
    }
    net = opts.init->net();
  } else {
    net = NeuralNet<float>(cfg.Shape(ds.vocab_size));
    net.Initialize(DeriveSeed(cfg.seed, "init"));
  }
  const int context = net.shape().max_context;
  const auto examples = MakeExamples(ds, context, opts.sequence_weights);
  if (examples.empty()) throw std::invalid_argument("train_neural: no sequence has 2+ items");

  Rng rng(DeriveSeed(cfg.seed, "shuffle"));
  detail::Optimizer optimizer(cfg, net);
  auto grads = net.ZeroGrads();
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result{NeuralScorer(net, cfg)};
  bool have_best = false;
  double last_loss = 0.0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.Shuffle(order);
    double loss_sum = 0.0;
    double weight_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      for (auto& g : grads) g.setZero();
      double batch_weight = 0.0;
      for (std::size_t i = b; i < e; ++i) {
        const auto& ex = examples[order[i]];
        loss_sum += net.SequenceLoss(ex.inputs, ex.targets, static_cast<float>(ex.weight), &grads);
        batch_weight += ex.weight * static_cast<double>(ex.targets.size());
      }
      weight_sum += batch_weight;
      if (batch_weight <= 0.0) continue;
      const auto inv = static_cast<float>(1.0 / batch_weight);
      for (auto& g : grads) g *= inv;
      optimizer.Step(net, grads);
    }
    last_loss = weight_sum > 0.0 ? loss_sum / weight_sum : 0.0;
    if (!std::isfinite(last_loss)) {
      throw DivergenceError("training diverged at epoch " + std::to_string(epoch) +
                            " (loss is not finite)");
    }
    result.epoch_loss.push_back(last_loss);
    if (!validation.empty()) {
      NeuralScorer snapshot(net, cfg);
      const double r = Evaluate(snapshot, validation, {opts.selection_k}, {}, opts.eval_threads)
                           .recall.front();
      result.epoch_validation_recall.push_back(r);
      if (!have_best || r > result.best_validation_recall) {
        have_best = true;
        result.best_validation_recall = r;
        result.best_epoch = epoch;
        result.model = std::move(snapshot);
      }
    }
  }
  if (validation.empty()) {
    result.model = NeuralScorer(net, cfg);
    result.best_epoch = cfg.epochs;
  }
  result.model.epochs_run = cfg.epochs;
  result.model.final_loss = static_cast<float>(last_loss);
  return result;
}

// Largest relative error between the analytic gradient and central finite
// differences of the mean cross-entropy on one random batch, over
// `num_params` randomly chosen parameters. Runs in double precision.
// Relative error is |a - b| / max(|a|, |b|, 1e-8).
inline double GradientCheck(const NeuralScorer& model, int num_params, double epsilon,
                            std::uint64_t seed) {
  NeuralNet<double> net = model.net().Cast<double>();
  const NetShape& shape = net.shape();
  Rng rng(seed);
  constexpr int kBatch = 4;
  std::vector<TrainingExample> batch;
  std::size_t positions = 0;
  for (int b = 0; b < kBatch; ++b) {
    const auto len = static_cast<std::size_t>(rng.Between(2, shape.max_context + 1));
    std::vector<ItemId> items(len);
    for (auto& i : items) i = static_cast<ItemId>(rng.Below(static_cast<std::uint64_t>(shape.vocab_size)));
    batch.push_back({{items.begin(), items.end() - 1}, {items.begin() + 1, items.end()}, 1.0});
    positions += len - 1;
  }
  auto loss = [&](std::vector<NeuralNet<double>::Mat>* grads) {
    double total = 0.0;
    for (const auto& ex : batch) total += net.SequenceLoss(ex.inputs, ex.targets, 1.0, grads);
    return total / static_cast<double>(positions);
  };
  auto grads = net.ZeroGrads();
  loss(&grads);
  for (auto& g : grads) g /= static_cast<double>(positions);

  const auto total = static_cast<std::uint64_t>(net.num_parameters());
  double worst = 0.0;
  for (int s = 0; s < num_params; ++s) {
    std::uint64_t flat = rng.Below(total);
    std::size_t pi = 0;
    while (flat >= static_cast<std::uint64_t>(net.params()[pi].value.size())) {
      flat -= static_cast<std::uint64_t>(net.params()[pi].value.size());
      ++pi;
    }
    double& w = net.params()[pi].value.data()[flat];
    const double saved = w;
    w = saved + epsilon;
    const double up = loss(nullptr);
    w = saved - epsilon;
    const double down = loss(nullptr);
    w = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double analytic = grads[pi].data()[flat];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  return worst;
}

}  // namespace aowrec

#endif  // AOWREC_TRAINING_HPP_
