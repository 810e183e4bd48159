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

#ifndef AOWREC_SCORER_HPP_
#define AOWREC_SCORER_HPP_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aowrec/common.hpp"
#include "aowrec/metrics.hpp"

namespace aowrec {

enum class ScorerKind : std::uint32_t { kMarkov = 1, kNeural = 2 };

inline const char* KindName(ScorerKind k) {
  return k == ScorerKind::kMarkov ? "markov" : "neural";
}

// Next-item scorer: maps a prefix to one raw score per item. Implementations
// are deterministic and immutable once built, so a scorer may be shared by
// concurrent evaluation workers.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual ScorerKind kind() const = 0;
  virtual std::int32_t vocab_size() const = 0;

  // Throws std::invalid_argument on an empty prefix or out-of-vocabulary item.
  Scores Score(std::span<const ItemId> prefix) const {
    if (prefix.empty()) throw std::invalid_argument("score: empty prefix");
    for (ItemId i : prefix) {
      if (i < 0 || i >= vocab_size()) {
        throw std::invalid_argument("score: item " + std::to_string(i) +
                                    " outside vocabulary of size " +
                                    std::to_string(vocab_size()));
      }
    }
    return DoScore(prefix);
  }

  Scores Score(const std::vector<ItemId>& prefix) const {
    return Score(std::span<const ItemId>(prefix));
  }

 protected:
  virtual Scores DoScore(std::span<const ItemId> prefix) const = 0;
};

// The `k` best-ranked items, in ranking order.
template <typename T>
std::vector<ItemId> TopK(std::span<const T> scores, std::size_t k) {
  if (k > scores.size()) throw std::out_of_range("TopK: k exceeds vocabulary");
  auto order = RankingOrder(scores);
  order.resize(k);
  return order;
}

// The `m` worst-ranked items under the same order RankOf uses (descending
// score, ascending id among ties), listed from rank V-m+1 to V. Every member
// therefore has rank > V - m and never meets a top-k list with k <= V - m.
template <typename T>
std::vector<ItemId> BottomM(std::span<const T> scores, std::size_t m) {
  if (m < 1 || m > scores.size()) {
    throw std::out_of_range("BottomM: M=" + std::to_string(m) + " outside [1, " +
                            std::to_string(scores.size()) + "]");
  }
  auto order = RankingOrder(scores);
  return {order.end() - static_cast<std::ptrdiff_t>(m), order.end()};
}

template <typename T>
std::vector<ItemId> TopK(const std::vector<T>& s, std::size_t k) {
  return TopK(std::span<const T>(s), k);
}
template <typename T>
std::vector<ItemId> BottomM(const std::vector<T>& s, std::size_t m) {
  return BottomM(std::span<const T>(s), m);
}

}  // namespace aowrec

#endif  // AOWREC_SCORER_HPP_
