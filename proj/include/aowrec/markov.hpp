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

#ifndef AOWREC_MARKOV_HPP_
#define AOWREC_MARKOV_HPP_

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "aowrec/corpus.hpp"
#include "aowrec/scorer.hpp"
#include "aowrec/tensor_file.hpp"

namespace aowrec {

// Counts-based scorer. For a prefix it uses the longest suffix (up to `order`
// items) seen as a context in training and scores item j as
//   log((count(ctx -> j) + a) / (count(ctx) + a * V)),
// falling back to log((pop(j) + a) / (N + a * V)) when no suffix was seen.
class MarkovScorer final : public Scorer {
 public:
  using Context = std::vector<ItemId>;

  static MarkovScorer Train(const InteractionDataset& ds, int order, double smoothing) {
    if (ds.empty()) throw std::invalid_argument("train_markov: empty dataset");
    if (order < 1) throw std::invalid_argument("train_markov: order must be >= 1");
    if (!(smoothing > 0.0)) throw std::invalid_argument("train_markov: smoothing must be > 0");
    MarkovScorer m(ds.vocab_size, order, smoothing);
    m.popularity_ = ItemPopularity(ds);
    for (auto c : m.popularity_) m.total_ += c;
    for (const auto& s : ds.sequences) {
      for (std::size_t t = 1; t < s.items.size(); ++t) {
        for (std::size_t len = 1; len <= static_cast<std::size_t>(order) && len <= t; ++len) {
          Context ctx(s.items.begin() + static_cast<std::ptrdiff_t>(t - len),
                      s.items.begin() + static_cast<std::ptrdiff_t>(t));
          m.transitions_[ctx][s.items[t]] += 1;
        }
      }
    }
    for (const auto& [ctx, next] : m.transitions_) {
      std::int64_t n = 0;
      for (const auto& [item, c] : next) n += c;
      m.context_totals_[ctx] = n;
    }
    return m;
  }

  ScorerKind kind() const override { return ScorerKind::kMarkov; }
  std::int32_t vocab_size() const override { return vocab_; }
  int order() const { return order_; }
  double smoothing() const { return smoothing_; }

  CheckpointData ToCheckpoint() const {
    CheckpointData ck;
    ck.kind = static_cast<std::uint32_t>(ScorerKind::kMarkov);
    ck.vocab_size = static_cast<std::uint32_t>(vocab_);
    ck.config["order"] = std::to_string(order_);
    ck.config["smoothing"] = FormatShortest(smoothing_);
    Tensor pop{"popularity", {static_cast<std::uint32_t>(vocab_)}, {}};
    for (auto c : popularity_) pop.data.push_back(ExactFloat(c));
    // Rows: context length, context ids (padded with -1), next item, count.
    const std::uint32_t width = static_cast<std::uint32_t>(order_) + 3;
    Tensor edges{"transitions", {0, width}, {}};
    for (const auto& [ctx, next] : transitions_) {
      for (const auto& [item, c] : next) {
        edges.data.push_back(static_cast<float>(ctx.size()));
        for (int i = 0; i < order_; ++i) {
          edges.data.push_back(i < static_cast<int>(ctx.size()) ? ExactFloat(ctx[static_cast<std::size_t>(i)])
                                                                : -1.0f);
        }
        edges.data.push_back(ExactFloat(item));
        edges.data.push_back(ExactFloat(c));
        ++edges.dims[0];
      }
    }
    ck.tensors = {std::move(pop), std::move(edges)};
    return ck;
  }

  static MarkovScorer FromCheckpoint(const CheckpointData& ck) {
    if (ck.kind != static_cast<std::uint32_t>(ScorerKind::kMarkov)) {
      throw CheckpointError("checkpoint: expected a markov model");
    }
    MarkovScorer m(static_cast<std::int32_t>(ck.vocab_size), std::stoi(ck.Config("order")),
                   std::stod(ck.Config("smoothing")));
    const Tensor& pop = ck.Find("popularity");
    if (pop.data.size() != ck.vocab_size) throw CheckpointError("checkpoint: popularity size");
    for (float f : pop.data) {
      m.popularity_.push_back(static_cast<std::int64_t>(f));
      m.total_ += m.popularity_.back();
    }
    const Tensor& edges = ck.Find("transitions");
    const std::size_t width = static_cast<std::size_t>(m.order_) + 3;
    if (edges.dims.size() != 2 || edges.dims[1] != width) {
      throw CheckpointError("checkpoint: bad transitions shape");
    }
    for (std::size_t r = 0; r < edges.dims[0]; ++r) {
      const float* row = edges.data.data() + r * width;
      const auto len = static_cast<std::size_t>(row[0]);
      if (len < 1 || len > static_cast<std::size_t>(m.order_)) {
        throw CheckpointError("checkpoint: bad context length");
      }
      Context ctx;
      for (std::size_t i = 0; i < len; ++i) ctx.push_back(static_cast<ItemId>(row[1 + i]));
      const auto c = static_cast<std::int64_t>(row[width - 1]);
      m.transitions_[ctx][static_cast<ItemId>(row[width - 2])] = c;
      m.context_totals_[ctx] += c;
    }
    return m;
  }

 protected:
  Scores DoScore(std::span<const ItemId> prefix) const override {
    const double a = smoothing_;
    const double v = static_cast<double>(vocab_);
    Scores out(static_cast<std::size_t>(vocab_));
    for (std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(order_), prefix.size());
         len >= 1; --len) {
      Context ctx(prefix.end() - static_cast<std::ptrdiff_t>(len), prefix.end());
      auto it = transitions_.find(ctx);
      if (it == transitions_.end()) continue;
      const double denom = static_cast<double>(context_totals_.at(ctx)) + a * v;
      const auto floor_score = static_cast<float>(std::log(a / denom));
      std::fill(out.begin(), out.end(), floor_score);
      for (const auto& [item, c] : it->second) {
        out[static_cast<std::size_t>(item)] =
            static_cast<float>(std::log((static_cast<double>(c) + a) / denom));
      }
      return out;
    }
    const double denom = static_cast<double>(total_) + a * v;
    for (std::size_t j = 0; j < out.size(); ++j) {
      out[j] = static_cast<float>(std::log((static_cast<double>(popularity_[j]) + a) / denom));
    }
    return out;
  }

 private:
  MarkovScorer(std::int32_t vocab, int order, double smoothing)
      : vocab_(vocab), order_(order), smoothing_(smoothing) {}

  static float ExactFloat(std::int64_t v) {
    if (v < 0 || v > (1 << 24)) throw CheckpointError("checkpoint: count not representable");
    return static_cast<float>(v);
  }

  std::int32_t vocab_;
  int order_;
  double smoothing_;
  std::vector<std::int64_t> popularity_;
  std::int64_t total_ = 0;
  std::map<Context, std::map<ItemId, std::int64_t>> transitions_;
  std::map<Context, std::int64_t> context_totals_;
};

}  // namespace aowrec

#endif  // AOWREC_MARKOV_HPP_
