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

#ifndef AOWREC_METRICS_HPP_
#define AOWREC_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "aowrec/common.hpp"
#include "aowrec/corpus.hpp"

namespace aowrec {

using Scores = std::vector<float>;

// Anything that maps a non-empty prefix to one score per item.
template <typename M>
concept NextItemScorer = requires(const M& m, std::span<const ItemId> prefix) {
  { m.Score(prefix) } -> std::convertible_to<Scores>;
  { m.vocab_size() } -> std::convertible_to<std::int32_t>;
};

// 1-based position of `target` under descending score, ties going to the
// smaller item id.
template <typename T>
std::int64_t RankOf(std::span<const T> scores, ItemId target) {
  if (target < 0 || static_cast<std::size_t>(target) >= scores.size()) {
    throw std::out_of_range("RankOf: target " + std::to_string(target) +
                            " outside score vector of size " + std::to_string(scores.size()));
  }
  const T t = scores[static_cast<std::size_t>(target)];
  std::int64_t rank = 1;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    const T s = scores[j];
    if (!std::isfinite(static_cast<double>(s))) {
      throw std::domain_error("RankOf: non-finite score at item " + std::to_string(j));
    }
    if (s > t || (s == t && j < static_cast<std::size_t>(target))) ++rank;
  }
  return rank;
}

template <typename T>
std::int64_t RankOf(const std::vector<T>& scores, ItemId target) {
  return RankOf(std::span<const T>(scores), target);
}

// All items in ranking order: descending score, ascending id among ties.
template <typename T>
std::vector<ItemId> RankingOrder(std::span<const T> scores) {
  std::vector<ItemId> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](ItemId a, ItemId b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  return order;
}

inline int RecallAtK(std::int64_t rank, std::int64_t k) { return rank <= k ? 1 : 0; }

inline double NdcgAtK(std::int64_t rank, std::int64_t k) {
  return rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

// Per-k mean Recall / NDCG over a query set.
struct MetricsReport {
  std::string label;
  std::vector<int> ks;
  std::vector<double> recall;
  std::vector<double> ndcg;
  std::size_t num_queries = 0;

  bool operator==(const MetricsReport&) const = default;

  std::size_t IndexOf(int k) const {
    auto it = std::find(ks.begin(), ks.end(), k);
    if (it == ks.end()) throw std::out_of_range("MetricsReport: no k=" + std::to_string(k));
    return static_cast<std::size_t>(it - ks.begin());
  }
  double RecallAt(int k) const { return recall[IndexOf(k)]; }
  double NdcgAt(int k) const { return ndcg[IndexOf(k)]; }
};

// Aggregates from ranks. Sums are taken over a rank histogram, so the result
// does not depend on query order.
inline MetricsReport ReportFromRanks(std::span<const std::int64_t> ranks, std::vector<int> ks,
                                     std::string label = {}) {
  if (ranks.empty()) throw std::invalid_argument("metrics: empty query list");
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (ks.empty() || ks.front() < 1) throw std::invalid_argument("metrics: ks must be >= 1");
  const std::int64_t kmax = ks.back();
  std::vector<std::int64_t> hist(static_cast<std::size_t>(kmax) + 1, 0);
  for (std::int64_t r : ranks) {
    if (r < 1) throw std::invalid_argument("metrics: rank must be >= 1");
    if (r <= kmax) ++hist[static_cast<std::size_t>(r)];
  }
  MetricsReport rep;
  rep.label = std::move(label);
  rep.num_queries = ranks.size();
  const double n = static_cast<double>(ranks.size());
  for (int k : ks) {
    std::int64_t hits = 0;
    double gain = 0.0;
    for (std::int64_t r = 1; r <= k; ++r) {
      hits += hist[static_cast<std::size_t>(r)];
      gain += static_cast<double>(hist[static_cast<std::size_t>(r)]) * NdcgAtK(r, k);
    }
    rep.ks.push_back(k);
    rep.recall.push_back(static_cast<double>(hits) / n);
    rep.ndcg.push_back(gain / n);
  }
  return rep;
}

// Rank of each query's target. Queries are split across `threads` workers;
// the model must be safe for concurrent const use.
template <NextItemScorer Model>
std::vector<std::int64_t> RankQueries(const Model& model, std::span<const Query> queries,
                                      unsigned threads = 1) {
  std::vector<std::int64_t> ranks(queries.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Scores s = model.Score(queries[i].context);
      ranks[i] = RankOf(std::span<const float>(s), queries[i].target);
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(queries.size())));
  if (threads == 1) {
    work(0, queries.size());
    return ranks;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (queries.size() + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t b = std::min(queries.size(), t * chunk);
    const std::size_t e = std::min(queries.size(), b + chunk);
    pool.emplace_back(work, b, e);
  }
  for (auto& th : pool) th.join();
  return ranks;
}

template <NextItemScorer Model>
MetricsReport Evaluate(const Model& model, std::span<const Query> queries, std::vector<int> ks,
                       std::string label = {}, unsigned threads = 1) {
  if (queries.empty()) throw std::invalid_argument("evaluate: empty query list");
  const auto ranks = RankQueries(model, queries, threads);
  return ReportFromRanks(ranks, std::move(ks), std::move(label));
}

namespace detail {

inline std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string FormatReal(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace detail

inline void WriteMetricsCsvHeader(std::ostream& out) {
  out << "label,k,recall,ndcg,num_queries\n";
}

inline void WriteMetricsCsvRows(const MetricsReport& rep, std::ostream& out) {
  for (std::size_t i = 0; i < rep.ks.size(); ++i) {
    out << detail::CsvField(rep.label) << ',' << rep.ks[i] << ','
        << detail::FormatReal(rep.recall[i]) << ',' << detail::FormatReal(rep.ndcg[i]) << ','
        << rep.num_queries << '\n';
  }
}

inline void WriteMetricsCsv(std::span<const MetricsReport> reports, std::ostream& out) {
  WriteMetricsCsvHeader(out);
  for (const auto& r : reports) WriteMetricsCsvRows(r, out);
}

}  // namespace aowrec

#endif  // AOWREC_METRICS_HPP_
