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

#ifndef AOWREC_WATERMARK_HPP_
#define AOWREC_WATERMARK_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "aowrec/common.hpp"
#include "aowrec/corpus.hpp"
#include "aowrec/metrics.hpp"
#include "aowrec/scorer.hpp"

namespace aowrec {

enum class InitialPolicy { kCold, kPop, kExplicit };

struct InitialItem {
  InitialPolicy policy = InitialPolicy::kCold;
  ItemId item = 0;  // only for kExplicit

  bool operator==(const InitialItem&) const = default;

  static InitialItem Cold() { return {InitialPolicy::kCold, 0}; }
  static InitialItem Pop() { return {InitialPolicy::kPop, 0}; }
  static InitialItem Explicit(ItemId i) { return {InitialPolicy::kExplicit, i}; }

  std::string ToString() const {
    switch (policy) {
      case InitialPolicy::kCold: return "cold";
      case InitialPolicy::kPop: return "pop";
      case InitialPolicy::kExplicit: return std::to_string(item);
    }
    return {};
  }

  // "cold", "pop", or an item id.
  static InitialItem Parse(const std::string& s) {
    if (s == "cold") return Cold();
    if (s == "pop") return Pop();
    std::int64_t v = 0;
    if (!detail::ParseInt64(s, v) || v < 0) {
      throw std::invalid_argument("initial policy must be cold, pop or an item id, got '" + s + "'");
    }
    return Explicit(static_cast<ItemId>(v));
  }
};

// Which end of the oracle's ranking candidates come from. kTopDiagnostic
// exists only for the range study and yields watermarks the oracle already
// predicts; never use it to protect a model.
enum class CandidateRange { kBottom, kTopDiagnostic };

struct WatermarkSpec {
  int n = 5;
  int m = 100;
  InitialItem initial = InitialItem::Cold();
  double wdr = 0.1;
  std::uint64_t seed = 1;
  bool allow_repeats = false;
  CandidateRange range = CandidateRange::kBottom;
  // Owner-chosen item for step j (1-based position in the sequence); it must
  // lie inside that step's candidate set.
  std::map<int, ItemId> overrides;

  bool operator==(const WatermarkSpec&) const = default;

  void Validate(std::int32_t vocab) const {
    if (n < 2) throw std::invalid_argument("watermark: n must be >= 2");
    if (m < 1 || m > vocab) {
      throw std::invalid_argument("watermark: M must be in [1, " + std::to_string(vocab) + "]");
    }
    if (!(wdr >= 0.0)) throw std::invalid_argument("watermark: wdr must be >= 0");
    if (!allow_repeats && n > vocab) {
      throw std::invalid_argument("watermark: n exceeds vocabulary without repeats");
    }
  }
};

struct ProvenanceStep {
  int prefix_len = 0;
  std::int64_t rank = 0;  // rank of the chosen item under the generating oracle

  bool operator==(const ProvenanceStep&) const = default;
};

struct WatermarkSequence {
  std::vector<ItemId> items;
  WatermarkSpec spec;
  std::int32_t vocab_size = 0;
  std::vector<ProvenanceStep> provenance;

  bool operator==(const WatermarkSequence&) const = default;
};

struct ValidityReport {
  MetricsReport metrics;
  std::vector<std::int64_t> ranks;  // one per truncation
};

// cold: fewest interactions; pop: most. Ties go to the smallest id.
inline ItemId SelectInitialItem(const InteractionDataset& ds, const InitialItem& policy) {
  if (policy.policy == InitialPolicy::kExplicit) {
    if (policy.item < 0 || policy.item >= ds.vocab_size) {
      throw std::invalid_argument("watermark: explicit initial item " + std::to_string(policy.item) +
                                  " outside vocabulary of size " + std::to_string(ds.vocab_size));
    }
    return policy.item;
  }
  if (ds.empty()) throw std::invalid_argument("watermark: empty dataset");
  const auto pop = ItemPopularity(ds);
  const auto it = policy.policy == InitialPolicy::kCold ? std::min_element(pop.begin(), pop.end())
                                                        : std::max_element(pop.begin(), pop.end());
  return static_cast<ItemId>(it - pop.begin());
}

// Autoregressive generation: start from the initial item, query the oracle
// with the current prefix, and append an item drawn uniformly from the M
// lowest-ranked items (minus items already used unless repeats are allowed).
inline WatermarkSequence GenerateWatermark(const Scorer& oracle, const WatermarkSpec& spec,
                                           const InteractionDataset& ds) {
  const std::int32_t vocab = oracle.vocab_size();
  spec.Validate(vocab);
  if (ds.vocab_size != vocab) throw std::invalid_argument("watermark: dataset/oracle vocabulary mismatch");
  WatermarkSequence wm;
  wm.spec = spec;
  wm.vocab_size = vocab;
  wm.items.push_back(SelectInitialItem(ds, spec.initial));
  Rng rng(DeriveSeed(spec.seed, "watermark"));
  const auto m = static_cast<std::ptrdiff_t>(spec.m);
  while (static_cast<int>(wm.items.size()) < spec.n) {
    const Scores scores = oracle.Score(wm.items);
    const auto order = RankingOrder(std::span<const float>(scores));
    // Candidates with their 1-based ranks.
    const std::ptrdiff_t first = spec.range == CandidateRange::kBottom ? vocab - m : 0;
    std::vector<std::pair<ItemId, std::int64_t>> candidates;
    for (std::ptrdiff_t pos = first; pos < first + m; ++pos) {
      const ItemId item = order[static_cast<std::size_t>(pos)];
      if (!spec.allow_repeats &&
          std::find(wm.items.begin(), wm.items.end(), item) != wm.items.end()) {
        continue;
      }
      candidates.emplace_back(item, pos + 1);
    }
    const int step = static_cast<int>(wm.items.size()) + 1;
    if (candidates.empty()) {
      throw std::runtime_error("watermark: no unused candidate at step " + std::to_string(step) +
                               "; increase M or allow repeats");
    }
    std::size_t pick;
    if (auto ov = spec.overrides.find(step); ov != spec.overrides.end()) {
      auto it = std::find_if(candidates.begin(), candidates.end(),
                             [&](const auto& c) { return c.first == ov->second; });
      if (it == candidates.end()) {
        throw std::invalid_argument("watermark: override item " + std::to_string(ov->second) +
                                    " is not a candidate at step " + std::to_string(step));
      }
      pick = static_cast<std::size_t>(it - candidates.begin());
    } else {
      pick = rng.Below(candidates.size());
    }
    wm.provenance.push_back({static_cast<int>(wm.items.size()), candidates[pick].second});
    wm.items.push_back(candidates[pick].first);
  }
  return wm;
}

// The n-1 prefixes of the watermark paired with their next item.
inline std::vector<Query> Truncations(const WatermarkSequence& wm) {
  std::vector<Query> out;
  for (std::size_t j = 1; j < wm.items.size(); ++j) {
    out.push_back({{wm.items.begin(), wm.items.begin() + static_cast<std::ptrdiff_t>(j)}, wm.items[j]});
  }
  return out;
}

inline std::size_t WatermarkCopies(std::size_t num_sequences, double wdr) {
  return static_cast<std::size_t>(std::floor(wdr * static_cast<double>(num_sequences) + 0.5));
}

// Appends round(wdr * |train|) copies of the watermark, half rounding up,
// under fresh user ids.
inline InteractionDataset Inject(const InteractionDataset& train, const WatermarkSequence& wm, double wdr) {
  if (!(wdr >= 0.0)) throw std::invalid_argument("inject: wdr must be >= 0");
  InteractionDataset out = train;
  std::int64_t next_user = 0;
  for (const auto& s : train.sequences) next_user = std::max(next_user, s.user_id + 1);
  const std::size_t copies = WatermarkCopies(train.sequences.size(), wdr);
  for (std::size_t c = 0; c < copies; ++c) out.sequences.push_back({next_user++, wm.items});
  out.vocab_size = std::max(out.vocab_size, wm.vocab_size);
  return out;
}

// Loss-weighted alternative to duplication: one watermark copy carrying
// weight wdr * |train|, every other sequence weight 1.
struct WeightedTrainingSet {
  InteractionDataset data;
  std::vector<double> weights;
};

inline WeightedTrainingSet InjectWeighted(const InteractionDataset& train, const WatermarkSequence& wm,
                                          double wdr) {
  if (!(wdr >= 0.0)) throw std::invalid_argument("inject: wdr must be >= 0");
  WeightedTrainingSet out{train, std::vector<double>(train.sequences.size(), 1.0)};
  if (wdr == 0.0) return out;
  std::int64_t next_user = 0;
  for (const auto& s : train.sequences) next_user = std::max(next_user, s.user_id + 1);
  out.data.sequences.push_back({next_user, wm.items});
  out.weights.push_back(wdr * static_cast<double>(train.sequences.size()));
  return out;
}

// Validation set for watermarked-model selection: the regular queries plus
// the watermark truncations repeated so both parts carry equal weight.
inline std::vector<Query> AugmentValidation(const std::vector<Query>& validation,
                                            const WatermarkSequence& wm) {
  std::vector<Query> out = validation;
  const auto truncs = Truncations(wm);
  const std::size_t copies =
      std::max<std::size_t>(1, (validation.size() + truncs.size() / 2) / truncs.size());
  for (std::size_t c = 0; c < copies; ++c) out.insert(out.end(), truncs.begin(), truncs.end());
  return out;
}

inline ValidityReport Verify(const Scorer& model, const WatermarkSequence& wm, std::vector<int> ks,
                             unsigned threads = 1) {
  if (model.vocab_size() != wm.vocab_size) {
    throw std::invalid_argument("verify: model vocabulary " + std::to_string(model.vocab_size()) +
                                " does not match watermark vocabulary " + std::to_string(wm.vocab_size));
  }
  const auto truncs = Truncations(wm);
  ValidityReport rep;
  rep.ranks = RankQueries(model, std::span<const Query>(truncs), threads);
  rep.metrics = ReportFromRanks(rep.ranks, std::move(ks), "validity");
  return rep;
}

// True iff every non-initial item ranks inside the oracle's bottom M at its
// prefix. Recomputes ranks instead of trusting stored provenance.
inline bool AuditWatermark(const Scorer& oracle, const WatermarkSequence& wm) {
  if (oracle.vocab_size() != wm.vocab_size) return false;
  const std::int64_t threshold = wm.vocab_size - wm.spec.m;
  for (const auto& q : Truncations(wm)) {
    const Scores s = oracle.Score(q.context);
    if (RankOf(std::span<const float>(s), q.target) <= threshold) return false;
  }
  return true;
}

// Text format:
//   n=..;M=..;policy=..;wdr=..;seed=..;vocab=..;allow_repeats=..;range=..[;overrides=j:i/...]
//   comma-separated items
//   prefix_len,rank            (one line per generated step)
inline void WriteWatermark(const WatermarkSequence& wm, std::ostream& out) {
  out << "n=" << wm.spec.n << ";M=" << wm.spec.m << ";policy=" << wm.spec.initial.ToString()
      << ";wdr=" << FormatShortest(wm.spec.wdr) << ";seed=" << wm.spec.seed << ";vocab=" << wm.vocab_size
      << ";allow_repeats=" << (wm.spec.allow_repeats ? 1 : 0)
      << ";range=" << (wm.spec.range == CandidateRange::kBottom ? "bottom" : "top");
  if (!wm.spec.overrides.empty()) {
    out << ";overrides=";
    bool first = true;
    for (const auto& [step, item] : wm.spec.overrides) {
      out << (first ? "" : "/") << step << ':' << item;
      first = false;
    }
  }
  out << '\n';
  for (std::size_t i = 0; i < wm.items.size(); ++i) out << (i ? "," : "") << wm.items[i];
  out << '\n';
  for (const auto& p : wm.provenance) out << p.prefix_len << ',' << p.rank << '\n';
}

inline WatermarkSequence ParseWatermark(std::istream& in, const std::string& source = "<stream>") {
  auto fail = [&](const std::string& what) { throw ParseError(source + ": " + what); };
  auto to_int = [&](std::string_view s, const char* what) {
    std::int64_t v = 0;
    if (!detail::ParseInt64(detail::Trim(s), v)) fail(std::string("bad ") + what + " '" + std::string(s) + "'");
    return v;
  };
  WatermarkSequence wm;
  std::string line;
  if (!std::getline(in, line)) fail("missing spec line");
  std::map<std::string, std::string> kv;
  std::string_view rest = detail::Trim(line);
  while (!rest.empty()) {
    const auto semi = rest.find(';');
    const std::string_view field = rest.substr(0, semi);
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) fail("bad spec field '" + std::string(field) + "'");
    kv[std::string(field.substr(0, eq))] = std::string(field.substr(eq + 1));
    if (semi == std::string_view::npos) break;
    rest.remove_prefix(semi + 1);
  }
  for (const char* key : {"n", "M", "policy", "wdr", "seed", "vocab"}) {
    if (!kv.count(key)) fail(std::string("spec line lacks '") + key + "'");
  }
  wm.spec.n = static_cast<int>(to_int(kv["n"], "n"));
  wm.spec.m = static_cast<int>(to_int(kv["M"], "M"));
  try {
    wm.spec.initial = InitialItem::Parse(kv["policy"]);
    wm.spec.wdr = std::stod(kv["wdr"]);
    wm.spec.seed = std::stoull(kv["seed"]);
  } catch (const std::exception& e) {
    fail(std::string("bad spec value: ") + e.what());
  }
  wm.vocab_size = static_cast<std::int32_t>(to_int(kv["vocab"], "vocab"));
  if (kv.count("allow_repeats")) wm.spec.allow_repeats = to_int(kv["allow_repeats"], "allow_repeats") != 0;
  if (kv.count("range")) {
    if (kv["range"] == "bottom") {
      wm.spec.range = CandidateRange::kBottom;
    } else if (kv["range"] == "top") {
      wm.spec.range = CandidateRange::kTopDiagnostic;
    } else {
      fail("bad range '" + kv["range"] + "'");
    }
  }
  if (kv.count("overrides")) {
    std::string_view ov = kv["overrides"];
    while (!ov.empty()) {
      const auto slash = ov.find('/');
      const std::string_view entry = ov.substr(0, slash);
      const auto colon = entry.find(':');
      if (colon == std::string_view::npos) fail("bad override '" + std::string(entry) + "'");
      wm.spec.overrides[static_cast<int>(to_int(entry.substr(0, colon), "override step"))] =
          static_cast<ItemId>(to_int(entry.substr(colon + 1), "override item"));
      if (slash == std::string_view::npos) break;
      ov.remove_prefix(slash + 1);
    }
  }
  if (!std::getline(in, line)) fail("missing item line");
  std::string_view items = detail::Trim(line);
  while (!items.empty()) {
    const auto comma = items.find(',');
    const auto v = to_int(items.substr(0, comma), "item");
    if (v < 0 || v >= wm.vocab_size) fail("item " + std::to_string(v) + " outside vocabulary");
    wm.items.push_back(static_cast<ItemId>(v));
    if (comma == std::string_view::npos) break;
    items.remove_prefix(comma + 1);
  }
  if (static_cast<int>(wm.items.size()) != wm.spec.n) fail("item count does not match n");
  while (std::getline(in, line)) {
    std::string_view l = detail::Trim(line);
    if (l.empty()) continue;
    const auto comma = l.find(',');
    if (comma == std::string_view::npos) fail("bad provenance line '" + line + "'");
    wm.provenance.push_back({static_cast<int>(to_int(l.substr(0, comma), "prefix length")),
                             to_int(l.substr(comma + 1), "rank")});
  }
  return wm;
}

inline void SaveWatermark(const WatermarkSequence& wm, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write watermark '" + path + "'");
  WriteWatermark(wm, out);
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline WatermarkSequence LoadWatermark(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open watermark '" + path + "'");
  return ParseWatermark(in, path);
}

}  // namespace aowrec

#endif  // AOWREC_WATERMARK_HPP_
