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

#include "aowrec/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "test_util.hpp"

namespace aowrec {
namespace {

// Full sort with the ascending-id tie rule, then position lookup.
std::int64_t BruteRank(const std::vector<double>& scores, ItemId target) {
  std::vector<std::pair<double, ItemId>> v;
  for (std::size_t j = 0; j < scores.size(); ++j) v.emplace_back(scores[j], static_cast<ItemId>(j));
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  for (std::size_t p = 0; p < v.size(); ++p) {
    if (v[p].second == target) return static_cast<std::int64_t>(p) + 1;
  }
  return -1;
}

// DCG of a ranked list cut at k with a single relevant item (ideal DCG = 1).
double BruteNdcg(std::int64_t rank, int k) {
  double dcg = 0.0;
  for (int p = 1; p <= k; ++p) {
    if (p == rank) dcg += 1.0 / (std::log(p + 1.0) / std::log(2.0));
  }
  return dcg;
}

TEST(RankOfTest, Examples) {
  EXPECT_EQ(RankOf(std::vector<float>{0.1f, 0.9f, 0.5f}, 1), 1);
  EXPECT_EQ(RankOf(std::vector<float>{0.5f, 0.5f}, 1), 2);
  EXPECT_EQ(RankOf(std::vector<float>{0.5f, 0.5f}, 0), 1);
  EXPECT_EQ(RankOf(std::vector<float>{1, 2, 3, 4}, 0), 4);
}

TEST(RankOfTest, NonFiniteIsError) {
  EXPECT_THROW(RankOf(std::vector<float>{1.0f, std::numeric_limits<float>::quiet_NaN()}, 0),
               std::domain_error);
  EXPECT_THROW(RankOf(std::vector<double>{std::numeric_limits<double>::infinity(), 1.0}, 1),
               std::domain_error);
}

TEST(RankOfTest, TargetOutOfRange) {
  EXPECT_THROW(RankOf(std::vector<float>{1.0f}, 1), std::out_of_range);
  EXPECT_THROW(RankOf(std::vector<float>{1.0f}, -1), std::out_of_range);
}

TEST(RecallTest, Examples) {
  EXPECT_EQ(RecallAtK(1, 1), 1);
  EXPECT_EQ(RecallAtK(11, 10), 0);
  EXPECT_EQ(RecallAtK(20, 20), 1);
}

TEST(NdcgTest, Examples) {
  EXPECT_DOUBLE_EQ(NdcgAtK(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(NdcgAtK(1, 100), 1.0);
  EXPECT_NEAR(NdcgAtK(4, 10), 0.43068, 1e-5);
  EXPECT_EQ(NdcgAtK(4, 3), 0.0);
}

TEST(MetricsOracleTest, MatchesBruteForceOnRandomVectors) {
  Rng rng(2024);
  const std::vector<int> ks = {1, 5, 10, 20, 100};
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = static_cast<std::size_t>(rng.Between(1, 300));
    std::vector<double> scores(n);
    // Coarse values force plenty of ties.
    const bool coarse = trial % 2 == 0;
    for (auto& s : scores) s = coarse ? static_cast<double>(rng.Below(8)) : rng.Normal();
    const auto target = static_cast<ItemId>(rng.Below(n));
    const std::int64_t rank = RankOf(scores, target);
    ASSERT_EQ(rank, BruteRank(scores, target)) << "trial " << trial;
    for (int k : ks) {
      EXPECT_EQ(RecallAtK(rank, k), rank <= k ? 1 : 0);
      EXPECT_NEAR(NdcgAtK(rank, k), BruteNdcg(rank, k), 1e-12);
    }
  }
}

TEST(RankingOrderTest, ConsistentWithRankOf) {
  Rng rng(5);
  std::vector<float> s(64);
  for (auto& v : s) v = static_cast<float>(rng.Below(6));
  const auto order = RankingOrder(std::span<const float>(s));
  for (std::size_t p = 0; p < order.size(); ++p) {
    EXPECT_EQ(RankOf(s, order[p]), static_cast<std::int64_t>(p) + 1);
  }
}

class TableScorer {
 public:
  TableScorer(std::int32_t vocab, std::vector<Scores> rows) : vocab_(vocab), rows_(std::move(rows)) {}
  Scores Score(std::span<const ItemId> prefix) const { return rows_.at(static_cast<std::size_t>(prefix[0])); }
  std::int32_t vocab_size() const { return vocab_; }

 private:
  std::int32_t vocab_;
  std::vector<Scores> rows_;
};

TEST(EvaluateTest, SingleQueryAtRankOne) {
  TableScorer m(3, {{3, 2, 1}});
  const std::vector<Query> q = {{{0}, 0}};
  const auto rep = Evaluate(m, std::span<const Query>(q), {1});
  EXPECT_EQ(rep.RecallAt(1), 1.0);
  EXPECT_EQ(rep.NdcgAt(1), 1.0);
  EXPECT_EQ(rep.num_queries, 1u);
}

TEST(EvaluateTest, TwoQueriesRankedOneAndThree) {
  TableScorer m(3, {{3, 2, 1}});
  const std::vector<Query> q = {{{0}, 0}, {{0}, 2}};
  const auto rep = Evaluate(m, std::span<const Query>(q), {1, 3});
  EXPECT_EQ(rep.RecallAt(1), 0.5);
  EXPECT_EQ(rep.RecallAt(3), 1.0);
  EXPECT_DOUBLE_EQ(rep.NdcgAt(3), 0.5 * (1.0 + 0.5));
}

TEST(EvaluateTest, EmptyQueryListIsError) {
  TableScorer m(3, {{3, 2, 1}});
  const std::vector<Query> q;
  EXPECT_THROW(Evaluate(m, std::span<const Query>(q), {1}), std::invalid_argument);
}

TEST(EvaluateTest, ThreadedMatchesSerial) {
  Rng rng(9);
  std::vector<Scores> rows(20, Scores(50));
  for (auto& r : rows) {
    for (auto& v : r) v = static_cast<float>(rng.Normal());
  }
  TableScorer m(50, rows);
  std::vector<Query> q;
  for (int i = 0; i < 200; ++i) q.push_back({{static_cast<ItemId>(rng.Below(20))}, static_cast<ItemId>(rng.Below(50))});
  EXPECT_EQ(Evaluate(m, std::span<const Query>(q), {1, 5, 10}, "x", 1),
            Evaluate(m, std::span<const Query>(q), {1, 5, 10}, "x", 4));
}

TEST(MetricsPropertyTest, MonotoneInKAndNdcgBelowRecall) {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::int64_t> ranks(static_cast<std::size_t>(rng.Between(1, 50)));
    for (auto& r : ranks) r = rng.Between(1, 200);
    const auto rep = ReportFromRanks(ranks, {1, 5, 10, 20, 100});
    for (std::size_t i = 0; i < rep.ks.size(); ++i) {
      EXPECT_LE(rep.ndcg[i], rep.recall[i] + 1e-15);
      if (i > 0) {
        EXPECT_GE(rep.recall[i], rep.recall[i - 1]);
        EXPECT_GE(rep.ndcg[i], rep.ndcg[i - 1]);
      }
    }
    for (auto r : ranks) EXPECT_LE(NdcgAtK(r, 10), RecallAtK(r, 10));
  }
}

TEST(MetricsPropertyTest, PermutationInvariant) {
  Rng rng(23);
  std::vector<std::int64_t> ranks(500);
  for (auto& r : ranks) r = rng.Between(1, 120);
  const auto base = ReportFromRanks(ranks, {1, 5, 10, 20, 100});
  for (int t = 0; t < 20; ++t) {
    rng.Shuffle(ranks);
    EXPECT_EQ(ReportFromRanks(ranks, {1, 5, 10, 20, 100}), base);
  }
}

TEST(MetricsReportTest, KsNormalized) {
  const std::vector<std::int64_t> ranks = {1, 2};
  const auto rep = ReportFromRanks(ranks, {10, 1, 10});
  EXPECT_EQ(rep.ks, (std::vector<int>{1, 10}));
  EXPECT_THROW(rep.RecallAt(5), std::out_of_range);
  EXPECT_THROW(ReportFromRanks(ranks, {0}), std::invalid_argument);
}

TEST(MetricsCsvTest, Layout) {
  const std::vector<std::int64_t> ranks = {1, 3};
  std::vector<MetricsReport> reps = {ReportFromRanks(ranks, {1, 5}, "a,\"b\"")};
  std::ostringstream out;
  WriteMetricsCsv(reps, out);
  EXPECT_EQ(out.str(),
            "label,k,recall,ndcg,num_queries\n"
            "\"a,\"\"b\"\"\",1,0.500000,0.500000,2\n"
            "\"a,\"\"b\"\"\",5,1.000000,0.750000,2\n");
}

}  // namespace
}  // namespace aowrec
