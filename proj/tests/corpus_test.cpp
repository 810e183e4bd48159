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

#include "aowrec/corpus.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <numeric>
#include <sstream>

#include "test_util.hpp"

namespace aowrec {
namespace {

using testing::MakeDataset;
using testing::TempDir;

InteractionDataset Parse(const std::string& text, const LoadOptions& opts = {}) {
  std::istringstream in(text);
  return ParseDataset(in, opts, "mem");
}

TEST(LoadDatasetTest, SingleLine) {
  const auto ds = Parse("7\t3,1,4\n");
  ASSERT_EQ(ds.sequences.size(), 1u);
  EXPECT_EQ(ds.sequences[0].user_id, 7);
  EXPECT_EQ(ds.sequences[0].items, (std::vector<ItemId>{3, 1, 4}));
  EXPECT_EQ(ds.vocab_size, 5);
}

TEST(LoadDatasetTest, TwoLines) {
  const auto ds = Parse("1\t0\n2\t0,1\n");
  EXPECT_EQ(ds.sequences.size(), 2u);
  EXPECT_EQ(ds.vocab_size, 2);
}

TEST(LoadDatasetTest, MalformedTokenNamesLine) {
  try {
    Parse("1\t0,x\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos) << e.what();
  }
}

TEST(LoadDatasetTest, ErrorOnLaterLine) {
  try {
    Parse("1\t0,1\n2\t3\n3 4,5\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(LoadDatasetTest, RejectsNegativeAndEmptyAndDuplicate) {
  EXPECT_THROW(Parse("1\t-2\n"), ParseError);
  EXPECT_THROW(Parse("1\t\n"), ParseError);
  EXPECT_THROW(Parse("1\t1,,2\n"), ParseError);
  EXPECT_THROW(Parse("1\t1\n1\t2\n"), ParseError);
}

TEST(LoadDatasetTest, EmptyFileIsError) {
  EXPECT_THROW(Parse(""), ParseError);
  EXPECT_THROW(Parse("#vocab=4\n"), ParseError);
}

TEST(LoadDatasetTest, VocabHeaderOverride) {
  const auto ds = Parse("#vocab=10\n1\t0,1\n");
  EXPECT_EQ(ds.vocab_size, 10);
  EXPECT_THROW(Parse("#vocab=1\n1\t0,1\n"), ParseError);
}

TEST(LoadDatasetTest, MetaLinesCarried) {
  const auto ds = Parse("#vocab=3\n#generated_by=abc\n1\t0,2\n");
  EXPECT_EQ(ds.meta.at("generated_by"), "abc");
}

TEST(LoadDatasetTest, MaxLengthKeepsMostRecent) {
  LoadOptions opts;
  opts.max_length = 2;
  const auto ds = Parse("1\t5,6,7,8\n", opts);
  EXPECT_EQ(ds.sequences[0].items, (std::vector<ItemId>{7, 8}));
}

TEST(LoadDatasetTest, MinLengthFilters) {
  LoadOptions opts;
  opts.min_length = 3;
  const auto ds = Parse("1\t5,6,7\n2\t1\n", opts);
  ASSERT_EQ(ds.sequences.size(), 1u);
  EXPECT_EQ(ds.sequences[0].user_id, 1);
}

TEST(LoadDatasetTest, MissingFileIsIoError) {
  EXPECT_THROW(LoadDataset("/nonexistent/aowrec/data.tsv"), IoError);
}

TEST(SaveDatasetTest, RoundTrip) {
  TempDir dir;
  auto ds = MakeDataset(9, {{3, 1, 4}, {1, 5}, {8}});
  ds.meta["generated_by"] = "deadbeef";
  SaveDataset(ds, dir.File("d.tsv"));
  EXPECT_EQ(LoadDataset(dir.File("d.tsv")), ds);
}

TEST(SaveDatasetTest, UnwritablePath) {
  EXPECT_THROW(SaveDataset(MakeDataset(2, {{0, 1}}), "/nonexistent/aowrec/d.tsv"), IoError);
}

TEST(SaveDatasetTest, EmptyDatasetWritesEmptyFile) {
  TempDir dir;
  SaveDataset(InteractionDataset{}, dir.File("e.tsv"));
  EXPECT_EQ(std::filesystem::file_size(dir.File("e.tsv")), 0u);
  EXPECT_THROW(LoadDataset(dir.File("e.tsv")), ParseError);
}

TEST(SaveDatasetTest, RoundTripPropertyOverSyntheticData) {
  TempDir dir;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SyntheticConfig cfg;
    cfg.vocab_size = 50 + static_cast<std::int32_t>(seed) * 13;
    cfg.num_users = 20 + static_cast<std::int32_t>(seed) * 7;
    cfg.mean_length = 4.0 + static_cast<double>(seed);
    cfg.seed = seed;
    const auto ds = SynthGenerate(cfg);
    SaveDataset(ds, dir.File("s.tsv"));
    EXPECT_EQ(LoadDataset(dir.File("s.tsv")), ds) << "seed " << seed;
  }
}

TEST(SplitTest, LengthFour) {
  const auto split = LeaveOneOutSplit(MakeDataset(10, {{3, 7, 9, 4}}));
  ASSERT_EQ(split.train.sequences.size(), 1u);
  EXPECT_EQ(split.train.sequences[0].items, (std::vector<ItemId>{3, 7}));
  ASSERT_EQ(split.validation.size(), 1u);
  EXPECT_EQ(split.validation[0], (Query{{3, 7}, 9}));
  ASSERT_EQ(split.test.size(), 1u);
  EXPECT_EQ(split.test[0], (Query{{3, 7, 9}, 4}));
  EXPECT_EQ(split.train.vocab_size, 10);
}

TEST(SplitTest, LengthTwoGivesTestOnly) {
  const auto split = LeaveOneOutSplit(MakeDataset(10, {{5, 6}}));
  EXPECT_TRUE(split.train.sequences.empty());
  EXPECT_TRUE(split.validation.empty());
  ASSERT_EQ(split.test.size(), 1u);
  EXPECT_EQ(split.test[0], (Query{{5}, 6}));
}

TEST(SplitTest, LengthOneSkipped) {
  const auto split = LeaveOneOutSplit(MakeDataset(10, {{5}}));
  EXPECT_EQ(split.skipped, 1u);
  EXPECT_TRUE(split.test.empty());
}

TEST(SplitTest, LengthThree) {
  const auto split = LeaveOneOutSplit(MakeDataset(10, {{1, 2, 3}}));
  EXPECT_EQ(split.train.sequences[0].items, (std::vector<ItemId>{1}));
  EXPECT_EQ(split.validation[0], (Query{{1}, 2}));
  EXPECT_EQ(split.test[0], (Query{{1, 2}, 3}));
}

TEST(SplitTest, TargetsNeverInsideTrainPortion) {
  SyntheticConfig cfg;
  cfg.num_users = 200;
  cfg.seed = 3;
  const auto ds = SynthGenerate(cfg);
  const auto split = LeaveOneOutSplit(ds);
  std::size_t vi = 0, ti = 0, tr = 0;
  for (const auto& s : ds.sequences) {
    const std::size_t len = s.items.size();
    if (len >= 3) {
      const auto& train = split.train.sequences[tr++];
      EXPECT_EQ(train.items.size(), len - 2);
      EXPECT_EQ(split.validation[vi].context.size(), len - 2);
      EXPECT_EQ(split.validation[vi++].target, s.items[len - 2]);
    }
    if (len >= 2) {
      EXPECT_EQ(split.test[ti].context.size(), len - 1);
      EXPECT_EQ(split.test[ti++].target, s.items[len - 1]);
    }
  }
}

TEST(PopularityTest, Examples) {
  EXPECT_EQ(ItemPopularity(MakeDataset(3, {{1, 2}, {1}})), (std::vector<std::int64_t>{0, 2, 1}));
  EXPECT_EQ(ItemPopularity(MakeDataset(4, {})), (std::vector<std::int64_t>{0, 0, 0, 0}));
  EXPECT_EQ(ItemPopularity(MakeDataset(1, {{0, 0, 0}})), (std::vector<std::int64_t>{3}));
}

TEST(PopularityTest, Conservation) {
  SyntheticConfig cfg;
  cfg.num_users = 300;
  cfg.seed = 11;
  const auto ds = SynthGenerate(cfg);
  const auto pop = ItemPopularity(ds);
  EXPECT_EQ(static_cast<std::size_t>(std::accumulate(pop.begin(), pop.end(), std::int64_t{0})),
            ds.num_interactions());
}

TEST(SynthTest, Deterministic) {
  SyntheticConfig cfg;
  cfg.seed = 1;
  cfg.num_users = 100;
  std::ostringstream a, b;
  WriteDataset(SynthGenerate(cfg), a);
  WriteDataset(SynthGenerate(cfg), b);
  EXPECT_EQ(a.str(), b.str());
  cfg.seed = 2;
  std::ostringstream c;
  WriteDataset(SynthGenerate(cfg), c);
  EXPECT_NE(a.str(), c.str());
}

TEST(SynthTest, MeanLengthWithinTwentyPercent) {
  SyntheticConfig cfg;
  cfg.num_users = 2000;
  cfg.mean_length = 20;
  cfg.seed = 1;
  const auto ds = SynthGenerate(cfg);
  ASSERT_EQ(ds.sequences.size(), 2000u);
  const double mean = static_cast<double>(ds.num_interactions()) / 2000.0;
  EXPECT_GE(mean, 16.0);
  EXPECT_LE(mean, 24.0);
  EXPECT_NO_THROW(ds.Validate());
}

TEST(SynthTest, SmallVocabularyBounds) {
  SyntheticConfig cfg;
  cfg.vocab_size = 50;
  cfg.num_users = 100;
  const auto ds = SynthGenerate(cfg);
  EXPECT_EQ(ds.vocab_size, 50);
  for (const auto& s : ds.sequences) {
    for (ItemId i : s.items) EXPECT_LT(i, 50);
  }
}

TEST(SynthTest, HigherOrderChain) {
  SyntheticConfig cfg;
  cfg.markov_order = 2;
  cfg.num_users = 100;
  EXPECT_NO_THROW(SynthGenerate(cfg).Validate());
}

TEST(SynthTest, RejectsInvalidConfig) {
  SyntheticConfig cfg;
  cfg.vocab_size = 49;
  EXPECT_THROW(SynthGenerate(cfg), std::invalid_argument);
  cfg = {};
  cfg.num_users = 9;
  EXPECT_THROW(SynthGenerate(cfg), std::invalid_argument);
  cfg = {};
  cfg.mean_length = 3.5;
  EXPECT_THROW(SynthGenerate(cfg), std::invalid_argument);
}

TEST(RemapTest, CompactsAndRoundTrips) {
  TempDir dir;
  const auto ds = MakeDataset(100, {{90, 10, 90}, {42}});
  const auto [dense, remap] = CompactVocabulary(ds);
  EXPECT_EQ(dense.vocab_size, 3);
  EXPECT_NO_THROW(dense.Validate());
  for (std::size_t s = 0; s < ds.sequences.size(); ++s) {
    for (std::size_t i = 0; i < ds.sequences[s].items.size(); ++i) {
      EXPECT_EQ(remap.dense_to_raw[static_cast<std::size_t>(dense.sequences[s].items[i])],
                ds.sequences[s].items[i]);
    }
  }
  SaveRemap(remap, dir.File("r.tsv"));
  EXPECT_EQ(LoadRemap(dir.File("r.tsv")).dense_to_raw, remap.dense_to_raw);
}

}  // namespace
}  // namespace aowrec
