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

#ifndef AOWREC_CORPUS_HPP_
#define AOWREC_CORPUS_HPP_

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "aowrec/common.hpp"

namespace aowrec {

struct UserSequence {
  std::int64_t user_id = 0;
  std::vector<ItemId> items;

  bool operator==(const UserSequence&) const = default;
};

// Users' interaction sequences over a dense item vocabulary.
struct InteractionDataset {
  std::vector<UserSequence> sequences;
  std::int32_t vocab_size = 0;
  // `#key=value` annotations carried through the file format (other than
  // `vocab`), e.g. `generated_by`.
  std::map<std::string, std::string> meta;

  bool operator==(const InteractionDataset&) const = default;

  bool empty() const { return sequences.empty(); }

  std::size_t num_interactions() const {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.items.size();
    return n;
  }

  // Throws std::invalid_argument if an invariant is broken.
  void Validate() const {
    std::set<std::int64_t> users;
    for (const auto& s : sequences) {
      if (s.items.empty()) {
        throw std::invalid_argument("dataset: user " + std::to_string(s.user_id) +
                                    " has an empty sequence");
      }
      if (!users.insert(s.user_id).second) {
        throw std::invalid_argument("dataset: duplicate user id " +
                                    std::to_string(s.user_id));
      }
      for (ItemId i : s.items) {
        if (i < 0 || i >= vocab_size) {
          throw std::invalid_argument("dataset: item " + std::to_string(i) +
                                      " outside vocabulary of size " +
                                      std::to_string(vocab_size));
        }
      }
    }
  }
};

// A next-item query: predict `target` after `context`.
struct Query {
  std::vector<ItemId> context;
  ItemId target = 0;

  bool operator==(const Query&) const = default;
};

struct SplitBundle {
  InteractionDataset train;
  std::vector<Query> validation;
  std::vector<Query> test;
  // Sequences of length 1, which can produce no query.
  std::size_t skipped = 0;
};

struct LoadOptions {
  // Longer sequences keep their most recent items.
  std::size_t max_length = 200;
  // Sequences shorter than this are dropped at load.
  std::size_t min_length = 1;
};

namespace detail {

inline bool ParseInt64(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

inline std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

// Parses the dataset text format: one `user_id<TAB>id1,id2,...` per line,
// optional `#vocab=<N>` and other `#key=value` annotation lines.
inline InteractionDataset ParseDataset(std::istream& in, const LoadOptions& opts = {},
                                       const std::string& source = "<stream>") {
  InteractionDataset ds;
  std::int64_t vocab_override = -1;
  std::int64_t max_item = -1;
  std::set<std::int64_t> users;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw ParseError(source + ": line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::Trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      view.remove_prefix(1);
      const auto eq = view.find('=');
      if (eq == std::string_view::npos) continue;  // plain comment
      const std::string key(view.substr(0, eq));
      const std::string value(view.substr(eq + 1));
      if (key == "vocab") {
        if (!detail::ParseInt64(value, vocab_override) || vocab_override < 0) {
          fail("bad #vocab header '" + value + "'");
        }
      } else {
        ds.meta[key] = value;
      }
      continue;
    }
    const auto tab = view.find('\t');
    if (tab == std::string_view::npos) fail("expected user_id<TAB>items");
    UserSequence seq;
    if (!detail::ParseInt64(view.substr(0, tab), seq.user_id)) fail("bad user id");
    if (!users.insert(seq.user_id).second) {
      fail("duplicate user id " + std::to_string(seq.user_id));
    }
    std::string_view rest = view.substr(tab + 1);
    while (true) {
      const auto comma = rest.find(',');
      const std::string_view tok = rest.substr(0, comma);
      std::int64_t id = 0;
      if (!detail::ParseInt64(tok, id) || id < 0 ||
          id > std::numeric_limits<ItemId>::max() - 1) {
        fail("bad item id '" + std::string(tok) + "'");
      }
      seq.items.push_back(static_cast<ItemId>(id));
      max_item = std::max(max_item, id);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (seq.items.size() < opts.min_length) continue;
    if (opts.max_length > 0 && seq.items.size() > opts.max_length) {
      seq.items.erase(seq.items.begin(),
                      seq.items.end() - static_cast<std::ptrdiff_t>(opts.max_length));
    }
    ds.sequences.push_back(std::move(seq));
  }
  if (ds.sequences.empty()) throw ParseError(source + ": empty dataset");
  if (vocab_override >= 0) {
    if (vocab_override <= max_item) {
      throw ParseError(source + ": #vocab=" + std::to_string(vocab_override) +
                       " does not cover item " + std::to_string(max_item));
    }
    ds.vocab_size = static_cast<std::int32_t>(vocab_override);
  } else {
    ds.vocab_size = static_cast<std::int32_t>(max_item + 1);
  }
  return ds;
}

inline InteractionDataset LoadDataset(const std::string& path, const LoadOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path + "'");
  return ParseDataset(in, opts, path);
}

inline void WriteDataset(const InteractionDataset& ds, std::ostream& out) {
  if (ds.sequences.empty()) return;
  out << "#vocab=" << ds.vocab_size << '\n';
  for (const auto& [k, v] : ds.meta) out << '#' << k << '=' << v << '\n';
  for (const auto& s : ds.sequences) {
    out << s.user_id << '\t';
    for (std::size_t i = 0; i < s.items.size(); ++i) {
      if (i) out << ',';
      out << s.items[i];
    }
    out << '\n';
  }
}

inline void SaveDataset(const InteractionDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write dataset '" + path + "'");
  WriteDataset(ds, out);
  out.flush();
  if (!out) throw IoError("write failed for '" + path + "'");
}

// Leave-one-out: last item is the test target, second-to-last the validation
// target, the rest is training data. Length-2 sequences give a test query
// only; length-1 sequences are skipped.
inline SplitBundle LeaveOneOutSplit(const InteractionDataset& ds) {
  SplitBundle out;
  out.train.vocab_size = ds.vocab_size;
  for (const auto& s : ds.sequences) {
    const std::size_t len = s.items.size();
    if (len < 2) {
      ++out.skipped;
      continue;
    }
    out.test.push_back({{s.items.begin(), s.items.end() - 1}, s.items[len - 1]});
    if (len < 3) continue;
    out.validation.push_back({{s.items.begin(), s.items.end() - 2}, s.items[len - 2]});
    out.train.sequences.push_back({s.user_id, {s.items.begin(), s.items.end() - 2}});
  }
  return out;
}

// Occurrence count per item; index is the item id.
inline std::vector<std::int64_t> ItemPopularity(const InteractionDataset& ds) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(std::max(ds.vocab_size, 0)), 0);
  for (const auto& s : ds.sequences) {
    for (ItemId i : s.items) ++counts.at(static_cast<std::size_t>(i));
  }
  return counts;
}

// Raw-id to dense-id mapping, persisted next to a dataset as `<raw>\t<dense>`.
struct VocabularyRemap {
  std::vector<std::int64_t> dense_to_raw;

  bool operator==(const VocabularyRemap&) const = default;
};

// Renumbers items densely in order of first appearance.
inline std::pair<InteractionDataset, VocabularyRemap> CompactVocabulary(
    const InteractionDataset& ds) {
  std::unordered_map<std::int64_t, ItemId> to_dense;
  VocabularyRemap remap;
  InteractionDataset out;
  out.meta = ds.meta;
  for (const auto& s : ds.sequences) {
    UserSequence dense{s.user_id, {}};
    for (ItemId raw : s.items) {
      auto [it, inserted] = to_dense.emplace(raw, static_cast<ItemId>(remap.dense_to_raw.size()));
      if (inserted) remap.dense_to_raw.push_back(raw);
      dense.items.push_back(it->second);
    }
    out.sequences.push_back(std::move(dense));
  }
  out.vocab_size = static_cast<std::int32_t>(remap.dense_to_raw.size());
  return {std::move(out), std::move(remap)};
}

inline void SaveRemap(const VocabularyRemap& remap, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write remap '" + path + "'");
  for (std::size_t i = 0; i < remap.dense_to_raw.size(); ++i) {
    out << remap.dense_to_raw[i] << '\t' << i << '\n';
  }
}

inline VocabularyRemap LoadRemap(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open remap '" + path + "'");
  VocabularyRemap remap;
  std::int64_t raw = 0, dense = 0;
  while (in >> raw >> dense) {
    if (dense != static_cast<std::int64_t>(remap.dense_to_raw.size())) {
      throw ParseError(path + ": remap entries out of order");
    }
    remap.dense_to_raw.push_back(raw);
  }
  return remap;
}

// Planted Markov chain generator.
struct SyntheticConfig {
  std::int32_t vocab_size = 500;
  std::int32_t num_users = 2000;
  double mean_length = 20.0;
  std::int32_t markov_order = 1;
  // Exponent of the rank-based successor weights: larger means each context
  // has a more dominant next item.
  double concentration = 1.0;
  std::uint64_t seed = 1;

  void Validate() const {
    if (vocab_size < 50) throw std::invalid_argument("synthetic: vocab_size must be >= 50");
    if (num_users < 10) throw std::invalid_argument("synthetic: num_users must be >= 10");
    if (!(mean_length >= 4.0)) throw std::invalid_argument("synthetic: mean_length must be >= 4");
    if (markov_order < 1) throw std::invalid_argument("synthetic: markov_order must be >= 1");
    if (!(concentration > 0.0)) throw std::invalid_argument("synthetic: concentration must be > 0");
  }
};

namespace detail {

// Successor candidates per context and the mixing rate with the global
// popularity draw. Fixed so the generator is a function of SyntheticConfig.
inline constexpr int kSuccessorFanout = 10;
inline constexpr double kBackgroundRate = 0.1;
inline constexpr double kZipfExponent = 0.9;
inline constexpr std::size_t kSyntheticMaxLength = 200;

class ZipfSampler {
 public:
  ZipfSampler(std::int32_t vocab, Rng& rng) : items_(static_cast<std::size_t>(vocab)) {
    for (std::int32_t i = 0; i < vocab; ++i) items_[static_cast<std::size_t>(i)] = i;
    rng.Shuffle(items_);
    cumulative_.resize(items_.size());
    double acc = 0.0;
    for (std::size_t r = 0; r < items_.size(); ++r) {
      acc += std::pow(static_cast<double>(r + 1), -kZipfExponent);
      cumulative_[r] = acc;
    }
  }

  ItemId Draw(Rng& rng) const {
    const double u = rng.Uniform() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return items_[static_cast<std::size_t>(it - cumulative_.begin())];
  }

 private:
  std::vector<ItemId> items_;
  std::vector<double> cumulative_;
};

}  // namespace detail

inline InteractionDataset SynthGenerate(const SyntheticConfig& cfg) {
  cfg.Validate();
  Rng rng(DeriveSeed(cfg.seed, "synth"));
  const detail::ZipfSampler zipf(cfg.vocab_size, rng);

  std::vector<double> successor_weights(detail::kSuccessorFanout);
  for (int r = 0; r < detail::kSuccessorFanout; ++r) {
    successor_weights[static_cast<std::size_t>(r)] = std::pow(r + 1.0, -cfg.concentration);
  }
  std::map<std::vector<ItemId>, std::vector<ItemId>> successors;
  auto successors_of = [&](const std::vector<ItemId>& ctx) -> const std::vector<ItemId>& {
    auto it = successors.find(ctx);
    if (it != successors.end()) return it->second;
    std::uint64_t h = cfg.seed;
    for (ItemId i : ctx) h = DeriveSeed(h, static_cast<std::uint64_t>(i));
    Rng local(h);
    std::vector<ItemId> cands;
    while (static_cast<int>(cands.size()) < detail::kSuccessorFanout) {
      const ItemId c = zipf.Draw(local);
      if (std::find(cands.begin(), cands.end(), c) == cands.end()) cands.push_back(c);
    }
    return successors.emplace(ctx, std::move(cands)).first->second;
  };

  // Lengths are 2 + Geometric with the requested mean.
  const double p = 1.0 / (cfg.mean_length - 2.0 + 1.0);
  InteractionDataset ds;
  ds.vocab_size = cfg.vocab_size;
  for (std::int32_t u = 0; u < cfg.num_users; ++u) {
    double g = rng.Uniform();
    while (g <= 0.0) g = rng.Uniform();
    const auto extra = static_cast<std::size_t>(std::floor(std::log(g) / std::log1p(-p)));
    const std::size_t len = std::min<std::size_t>(2 + extra, detail::kSyntheticMaxLength);
    UserSequence seq{u + 1, {}};
    seq.items.push_back(zipf.Draw(rng));
    while (seq.items.size() < len) {
      ItemId next;
      if (rng.Uniform() < detail::kBackgroundRate) {
        next = zipf.Draw(rng);
      } else {
        const std::size_t order = std::min<std::size_t>(
            static_cast<std::size_t>(cfg.markov_order), seq.items.size());
        std::vector<ItemId> ctx(seq.items.end() - static_cast<std::ptrdiff_t>(order),
                                seq.items.end());
        const auto& cands = successors_of(ctx);
        next = cands[rng.Categorical(successor_weights)];
      }
      seq.items.push_back(next);
    }
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

}  // namespace aowrec

#endif  // AOWREC_CORPUS_HPP_
