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

#ifndef AOWREC_TESTS_TEST_UTIL_HPP_
#define AOWREC_TESTS_TEST_UTIL_HPP_

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "aowrec/scorer.hpp"

namespace aowrec::testing {

// score[j] = vocab - j, whatever the prefix.
class DescendingScorer final : public Scorer {
 public:
  explicit DescendingScorer(std::int32_t vocab) : vocab_(vocab) {}
  ScorerKind kind() const override { return ScorerKind::kMarkov; }
  std::int32_t vocab_size() const override { return vocab_; }
  mutable std::atomic<std::size_t> calls{0};

 protected:
  Scores DoScore(std::span<const ItemId>) const override {
    ++calls;
    Scores s(static_cast<std::size_t>(vocab_));
    for (std::int32_t j = 0; j < vocab_; ++j) s[static_cast<std::size_t>(j)] = static_cast<float>(vocab_ - j);
    return s;
  }

 private:
  std::int32_t vocab_;
};

// Scores the successor of the last item highest: (last + 1) mod vocab.
class SuccessorScorer final : public Scorer {
 public:
  explicit SuccessorScorer(std::int32_t vocab) : vocab_(vocab) {}
  ScorerKind kind() const override { return ScorerKind::kMarkov; }
  std::int32_t vocab_size() const override { return vocab_; }

 protected:
  Scores DoScore(std::span<const ItemId> prefix) const override {
    Scores s(static_cast<std::size_t>(vocab_), 0.0f);
    s[static_cast<std::size_t>((prefix.back() + 1) % vocab_)] = 1.0f;
    return s;
  }

 private:
  std::int32_t vocab_;
};

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("aowrec_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string File(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline InteractionDataset MakeDataset(std::int32_t vocab, std::vector<std::vector<ItemId>> seqs) {
  InteractionDataset ds;
  ds.vocab_size = vocab;
  std::int64_t user = 1;
  for (auto& s : seqs) ds.sequences.push_back({user++, std::move(s)});
  return ds;
}

}  // namespace aowrec::testing

#endif  // AOWREC_TESTS_TEST_UTIL_HPP_
