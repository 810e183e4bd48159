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

#ifndef AOWREC_ATTACKS_HPP_
#define AOWREC_ATTACKS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "aowrec/common.hpp"
#include "aowrec/corpus.hpp"
#include "aowrec/scorer.hpp"
#include "aowrec/training.hpp"

namespace aowrec {

enum class SamplingPolicy { kGreedy, kTopKSoftmax };
enum class StartPolicy { kPopularity, kUniform };

// Black-box attacker settings. Sequence lengths are uniform in
// [min(min_length, max_length), max_length].
struct AttackConfig {
  int num_sequences = 1000;
  int max_length = 20;
  int min_length = 5;
  SamplingPolicy sampling = SamplingPolicy::kTopKSoftmax;
  int top_k = 100;
  double temperature = 1.0;
  StartPolicy start = StartPolicy::kPopularity;
  bool allow_repeats = true;
  // 0 means: training epochs for distillation, the victim's epochs for
  // fine-tuning.
  int epochs = 0;
  TrainConfig train;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  void Validate() const {
    if (num_sequences < 1) throw std::invalid_argument("attack: num_sequences must be >= 1");
    if (max_length < 2) throw std::invalid_argument("attack: max_length must be >= 2");
    if (min_length < 1) throw std::invalid_argument("attack: min_length must be >= 1");
    if (top_k < 1) throw std::invalid_argument("attack: top_k must be >= 1");
    if (!(temperature > 0.0)) throw std::invalid_argument("attack: temperature must be > 0");
    if (epochs < 0) throw std::invalid_argument("attack: epochs must be >= 0");
  }
};

struct GeneratedData {
  InteractionDataset data;
  // One target query per appended item.
  std::size_t num_queries = 0;
};

namespace detail {

inline ItemId SampleNext(const Scores& scores, const AttackConfig& cfg,
                         const std::vector<ItemId>& used, Rng& rng) {
  std::vector<ItemId> order = RankingOrder(std::span<const float>(scores));
  if (!cfg.allow_repeats) {
    std::erase_if(order, [&](ItemId i) { return std::find(used.begin(), used.end(), i) != used.end(); });
    if (order.empty()) throw std::runtime_error("attack: vocabulary exhausted without repeats");
  }
  if (cfg.sampling == SamplingPolicy::kGreedy) return order.front();
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.top_k), order.size());
  std::vector<double> w(k);
  const double top = scores[static_cast<std::size_t>(order[0])];
  for (std::size_t i = 0; i < k; ++i) {
    w[i] = std::exp((scores[static_cast<std::size_t>(order[i])] - top) / cfg.temperature);
  }
  return order[rng.Categorical(w)];
}

}  // namespace detail

// Builds attacker data by querying `target` autoregressively. Each sequence
// has its own sub-seed, so the result does not depend on `threads`.
// `popularity` drives popularity-proportional start items; pass an empty span
// to fall back to uniform starts.
inline GeneratedData AutoregressiveGenerate(const Scorer& target, const AttackConfig& cfg,
                                            std::span<const std::int64_t> popularity = {}) {
  cfg.Validate();
  const std::int32_t vocab = target.vocab_size();
  const bool by_popularity = cfg.start == StartPolicy::kPopularity && !popularity.empty();
  if (by_popularity && popularity.size() != static_cast<std::size_t>(vocab)) {
    throw std::invalid_argument("attack: popularity size does not match vocabulary");
  }
  const int lo = std::min(cfg.min_length, cfg.max_length);
  std::vector<UserSequence> seqs(static_cast<std::size_t>(cfg.num_sequences));
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      Rng rng(DeriveSeed(cfg.seed, static_cast<std::uint64_t>(s)));
      const auto len = static_cast<std::size_t>(rng.Between(lo, cfg.max_length));
      std::vector<ItemId> items;
      items.push_back(by_popularity ? static_cast<ItemId>(rng.Categorical(popularity))
                                    : static_cast<ItemId>(rng.Below(static_cast<std::uint64_t>(vocab))));
      while (items.size() < len) items.push_back(detail::SampleNext(target.Score(items), cfg, items, rng));
      seqs[s] = {static_cast<std::int64_t>(s) + 1, std::move(items)};
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(seqs.size())));
  if (threads == 1) {
    work(0, seqs.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (seqs.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = std::min(seqs.size(), t * chunk);
      pool.emplace_back(work, b, std::min(seqs.size(), b + chunk));
    }
    for (auto& th : pool) th.join();
  }
  GeneratedData out;
  out.data.vocab_size = vocab;
  out.data.sequences = std::move(seqs);
  out.num_queries = out.data.num_interactions() - out.data.sequences.size();
  return out;
}

struct DistillResult {
  NeuralScorer surrogate;
  GeneratedData generated;
};

// Model extraction: generate data from the target, then train a fresh
// surrogate on it by next-item cross-entropy (behavior cloning).
inline DistillResult Distill(const Scorer& target, const AttackConfig& cfg,
                             std::span<const std::int64_t> popularity = {}) {
  GeneratedData gen = AutoregressiveGenerate(target, cfg, popularity);
  TrainConfig tc = cfg.train;
  if (cfg.epochs > 0) tc.epochs = cfg.epochs;
  tc.seed = DeriveSeed(cfg.seed, "surrogate");
  TrainResult trained = TrainNeural(gen.data, tc, {});
  return {std::move(trained.model), std::move(gen)};
}

// Continues training a copy of `victim` on `data` only.
inline NeuralScorer Finetune(const NeuralScorer& victim, const InteractionDataset& data,
                             const AttackConfig& cfg) {
  cfg.Validate();
  if (data.empty()) throw std::invalid_argument("finetune: empty data");
  TrainConfig tc = victim.config();
  tc.learning_rate = cfg.train.learning_rate;
  tc.batch_size = cfg.train.batch_size;
  tc.optimizer = cfg.train.optimizer;
  tc.l2 = cfg.train.l2;
  tc.clip_norm = cfg.train.clip_norm;
  tc.epochs = cfg.epochs > 0 ? cfg.epochs : std::max(1, victim.epochs_run);
  tc.seed = DeriveSeed(cfg.seed, "finetune");
  TrainOptions opts;
  opts.init = &victim;
  InteractionDataset d = data;
  d.vocab_size = victim.vocab_size();
  return TrainNeural(d, tc, {}, opts).model;
}

}  // namespace aowrec

#endif  // AOWREC_ATTACKS_HPP_
