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

#ifndef AOWREC_HARNESS_CONFIG_HPP_
#define AOWREC_HARNESS_CONFIG_HPP_

// Experiment configuration: flat `key = value` text with dotted sections,
// e.g. `train.epochs = 30`. Unknown keys are errors.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "aowrec/attacks.hpp"
#include "aowrec/corpus.hpp"
#include "aowrec/training.hpp"
#include "aowrec/watermark.hpp"

namespace aowrec::harness {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class OracleKind { kNeural, kMarkov };
enum class InjectionMode { kDuplicate, kWeightedLoss };

// Desk-scale training defaults (not tuned to any published dataset).
inline TrainConfig DefaultTrain() {
  TrainConfig t;
  t.epochs = 40;
  t.learning_rate = 1.0;
  return t;
}

inline AttackConfig DefaultAttack() {
  AttackConfig a;
  a.train = DefaultTrain();
  return a;
}

struct ExperimentConfig {
  std::string name = "synthetic";
  std::uint64_t seed = 1;
  std::string out_dir = "aow_run";
  unsigned threads = 1;
  std::vector<int> ks = {1, 5, 10, 20, 100};

  // Dataset: a file when `dataset_path` is set, otherwise synthetic.
  std::string dataset_path;
  LoadOptions load;
  SyntheticConfig synth;

  OracleKind oracle_kind = OracleKind::kNeural;
  int markov_order = 1;
  double markov_smoothing = 0.1;

  TrainConfig train = DefaultTrain();

  WatermarkSpec watermark;
  InjectionMode injection = InjectionMode::kDuplicate;

  bool distill_enabled = true;
  AttackConfig distill = DefaultAttack();

  bool finetune_enabled = true;
  std::vector<double> finetune_fractions = {0.01};
  AttackConfig finetune = DefaultAttack();

  // Non-fatal notes raised while parsing (normalized ks, k above V - M).
  std::vector<std::string> warnings;

  // Vocabulary size known before loading data (synthetic source only).
  std::int32_t KnownVocab() const { return dataset_path.empty() ? synth.vocab_size : 0; }

  void CheckZeroBand(std::int32_t vocab) {
    if (vocab <= 0 || ks.empty()) return;
    if (ks.back() > vocab - watermark.m) {
      warnings.push_back("max k=" + std::to_string(ks.back()) + " exceeds vocab - M = " +
                         std::to_string(vocab - watermark.m) +
                         "; the oracle's zero-validity guarantee does not cover it");
    }
  }
};

namespace detail {

struct KeyDef {
  std::string key;
  std::string help;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

inline std::string Real(double v) { return FormatShortest(v); }

inline long long ToInt(const std::string& s) {
  std::int64_t v = 0;
  if (!aowrec::detail::ParseInt64(s, v)) throw std::invalid_argument("expected an integer, got '" + s + "'");
  return v;
}

inline std::uint64_t ToU64(const std::string& s) {
  if (s.empty() || s.front() == '-') throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
  std::size_t pos = 0;
  const auto v = std::stoull(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
  return v;
}

inline double ToReal(const std::string& s) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw std::invalid_argument("expected a number, got '" + s + "'");
  return v;
}

inline bool ToBool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("expected a boolean, got '" + s + "'");
}

template <typename T>
std::string Join(const std::vector<T>& v) {
  std::ostringstream ss;
  for (std::size_t i = 0; i < v.size(); ++i) ss << (i ? "," : "") << v[i];
  return ss.str();
}

inline std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');) {
    const auto t = std::string(aowrec::detail::Trim(tok));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

#define AOW_INT_KEY(name, field, help_text)                                                \
  KeyDef{name, help_text, [](const ExperimentConfig& c) { return std::to_string(c.field); }, \
         [](ExperimentConfig& c, const std::string& v) { c.field = static_cast<decltype(c.field)>(ToInt(v)); }}
#define AOW_REAL_KEY(name, field, help_text)                                         \
  KeyDef{name, help_text, [](const ExperimentConfig& c) { return Real(c.field); }, \
         [](ExperimentConfig& c, const std::string& v) { c.field = ToReal(v); }}
#define AOW_BOOL_KEY(name, field, help_text)                                                 \
  KeyDef{name, help_text, [](const ExperimentConfig& c) { return std::string(c.field ? "true" : "false"); }, \
         [](ExperimentConfig& c, const std::string& v) { c.field = ToBool(v); }}

inline std::string SamplingName(SamplingPolicy p) { return p == SamplingPolicy::kGreedy ? "greedy" : "topk"; }
inline SamplingPolicy ParseSampling(const std::string& s) {
  if (s == "greedy") return SamplingPolicy::kGreedy;
  if (s == "topk") return SamplingPolicy::kTopKSoftmax;
  throw std::invalid_argument("expected greedy or topk, got '" + s + "'");
}
inline std::string StartName(StartPolicy p) { return p == StartPolicy::kPopularity ? "popularity" : "uniform"; }
inline StartPolicy ParseStart(const std::string& s) {
  if (s == "popularity") return StartPolicy::kPopularity;
  if (s == "uniform") return StartPolicy::kUniform;
  throw std::invalid_argument("expected popularity or uniform, got '" + s + "'");
}

#define AOW_ATTACK_KEYS(prefix, member)                                                               \
  AOW_INT_KEY(prefix ".max_length", member.max_length, "longest generated attacker sequence"),          \
  AOW_INT_KEY(prefix ".min_length", member.min_length, "shortest generated attacker sequence"),         \
  AOW_INT_KEY(prefix ".top_k", member.top_k, "candidates kept for softmax sampling"),                  \
  AOW_REAL_KEY(prefix ".temperature", member.temperature, "softmax temperature for sampling"),         \
  AOW_BOOL_KEY(prefix ".allow_repeats", member.allow_repeats, "generated sequences may repeat items"), \
  AOW_INT_KEY(prefix ".epochs", member.epochs, "training epochs (0 = default)"),                       \
  AOW_REAL_KEY(prefix ".learning_rate", member.train.learning_rate, "attacker learning rate"),         \
  KeyDef{prefix ".sampling", "next-item sampling: greedy | topk",                                     \
         [](const ExperimentConfig& c) { return SamplingName(c.member.sampling); },                  \
         [](ExperimentConfig& c, const std::string& v) { c.member.sampling = ParseSampling(v); }},     \
  KeyDef{prefix ".start", "start item: popularity | uniform",                                         \
         [](const ExperimentConfig& c) { return StartName(c.member.start); },                        \
         [](ExperimentConfig& c, const std::string& v) { c.member.start = ParseStart(v); }}

inline const std::vector<KeyDef>& Keys() {
  static const std::vector<KeyDef> keys = {
      KeyDef{"name", "dataset label used in reports", [](const ExperimentConfig& c) { return c.name; },
             [](ExperimentConfig& c, const std::string& v) { c.name = v; }},
      KeyDef{"seed", "global seed; every stage derives its own sub-seed",
             [](const ExperimentConfig& c) { return std::to_string(c.seed); },
             [](ExperimentConfig& c, const std::string& v) { c.seed = ToU64(v); }},
      KeyDef{"out", "output directory", [](const ExperimentConfig& c) { return c.out_dir; },
             [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; }},
      AOW_INT_KEY("threads", threads, "evaluation worker threads"),
      KeyDef{"ks", "cutoffs for Recall@k / NDCG@k", [](const ExperimentConfig& c) { return Join(c.ks); },
             [](ExperimentConfig& c, const std::string& v) {
               c.ks.clear();
               for (const auto& t : SplitList(v)) c.ks.push_back(static_cast<int>(ToInt(t)));
               if (c.ks.empty()) throw std::invalid_argument("ks must not be empty");
             }},
      KeyDef{"dataset.path", "interaction file; empty means synthetic",
             [](const ExperimentConfig& c) { return c.dataset_path; },
             [](ExperimentConfig& c, const std::string& v) { c.dataset_path = v; }},
      AOW_INT_KEY("dataset.max_length", load.max_length, "keep only the most recent items per sequence"),
      AOW_INT_KEY("dataset.min_length", load.min_length, "drop shorter sequences at load"),
      AOW_INT_KEY("dataset.vocab_size", synth.vocab_size, "synthetic: number of items"),
      AOW_INT_KEY("dataset.num_users", synth.num_users, "synthetic: number of sequences"),
      AOW_REAL_KEY("dataset.mean_length", synth.mean_length, "synthetic: mean sequence length"),
      AOW_INT_KEY("dataset.markov_order", synth.markov_order, "synthetic: order of the planted chain"),
      AOW_REAL_KEY("dataset.concentration", synth.concentration, "synthetic: peakedness of transitions"),
      KeyDef{"oracle.kind", "oracle model: neural | markov",
             [](const ExperimentConfig& c) {
               return std::string(c.oracle_kind == OracleKind::kNeural ? "neural" : "markov");
             },
             [](ExperimentConfig& c, const std::string& v) {
               if (v == "neural") {
                 c.oracle_kind = OracleKind::kNeural;
               } else if (v == "markov") {
                 c.oracle_kind = OracleKind::kMarkov;
               } else {
                 throw std::invalid_argument("expected neural or markov, got '" + v + "'");
               }
             }},
      AOW_INT_KEY("oracle.markov_order", markov_order, "markov: context length"),
      AOW_REAL_KEY("oracle.smoothing", markov_smoothing, "markov: additive smoothing"),
      AOW_INT_KEY("train.epochs", train.epochs, "training epochs"),
      AOW_REAL_KEY("train.learning_rate", train.learning_rate, "step size"),
      AOW_INT_KEY("train.batch_size", train.batch_size, "sequences per gradient step"),
      AOW_INT_KEY("train.embed_dim", train.embed_dim, "embedding width"),
      AOW_INT_KEY("train.num_heads", train.num_heads, "attention heads"),
      AOW_INT_KEY("train.num_layers", train.num_layers, "attention blocks"),
      AOW_INT_KEY("train.max_context", train.max_context, "longest context the model sees"),
      AOW_REAL_KEY("train.l2", train.l2, "weight decay"),
      AOW_REAL_KEY("train.clip_norm", train.clip_norm, "gradient norm clip (0 = off)"),
      KeyDef{"train.optimizer", "sgd | adam", [](const ExperimentConfig& c) { return std::string(OptimizerName(c.train.optimizer)); },
             [](ExperimentConfig& c, const std::string& v) { c.train.optimizer = ParseOptimizer(v); }},
      AOW_INT_KEY("watermark.n", watermark.n, "watermark length"),
      AOW_INT_KEY("watermark.m", watermark.m, "bottom-M candidate range"),
      KeyDef{"watermark.policy", "initial item: cold | pop | <item id>",
             [](const ExperimentConfig& c) { return c.watermark.initial.ToString(); },
             [](ExperimentConfig& c, const std::string& v) { c.watermark.initial = InitialItem::Parse(v); }},
      AOW_REAL_KEY("watermark.wdr", watermark.wdr, "watermark-to-data ratio"),
      AOW_BOOL_KEY("watermark.allow_repeats", watermark.allow_repeats, "watermark may repeat items"),
      KeyDef{"watermark.mode", "duplicate | weighted (single copy with loss weight)",
             [](const ExperimentConfig& c) {
               return std::string(c.injection == InjectionMode::kDuplicate ? "duplicate" : "weighted");
             },
             [](ExperimentConfig& c, const std::string& v) {
               if (v == "duplicate") {
                 c.injection = InjectionMode::kDuplicate;
               } else if (v == "weighted") {
                 c.injection = InjectionMode::kWeightedLoss;
               } else {
                 throw std::invalid_argument("expected duplicate or weighted, got '" + v + "'");
               }
             }},
      KeyDef{"watermark.range", "bottom | top (top is a diagnostic, not a watermark)",
             [](const ExperimentConfig& c) {
               return std::string(c.watermark.range == CandidateRange::kBottom ? "bottom" : "top");
             },
             [](ExperimentConfig& c, const std::string& v) {
               if (v == "bottom") {
                 c.watermark.range = CandidateRange::kBottom;
               } else if (v == "top") {
                 c.watermark.range = CandidateRange::kTopDiagnostic;
               } else {
                 throw std::invalid_argument("expected bottom or top, got '" + v + "'");
               }
             }},
      AOW_BOOL_KEY("distill.enabled", distill_enabled, "run the distillation attack"),
      AOW_INT_KEY("distill.num_sequences", distill.num_sequences, "generated sequences"),
      AOW_ATTACK_KEYS("distill", distill),
      AOW_BOOL_KEY("finetune.enabled", finetune_enabled, "run the fine-tuning attack"),
      KeyDef{"finetune.fractions", "attacker data size as fractions of |S|",
             [](const ExperimentConfig& c) {
               std::string s;
               for (std::size_t i = 0; i < c.finetune_fractions.size(); ++i) {
                 s += (i ? "," : "") + Real(c.finetune_fractions[i]);
               }
               return s;
             },
             [](ExperimentConfig& c, const std::string& v) {
               c.finetune_fractions.clear();
               for (const auto& t : SplitList(v)) {
                 const double f = ToReal(t);
                 if (!(f > 0.0)) throw std::invalid_argument("fractions must be > 0");
                 c.finetune_fractions.push_back(f);
               }
             }},
      AOW_ATTACK_KEYS("finetune", finetune),
  };
  return keys;
}

#undef AOW_INT_KEY
#undef AOW_REAL_KEY
#undef AOW_BOOL_KEY
#undef AOW_ATTACK_KEYS

// Optimal string alignment distance (adjacent transpositions cost 1).
inline std::size_t EditDistance(std::string_view a, std::string_view b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) {
        d[i][j] = std::min(d[i][j], d[i - 2][j - 2] + 1);
      }
    }
  }
  return d[a.size()][b.size()];
}

inline std::string_view Leaf(std::string_view key) {
  const auto dot = key.rfind('.');
  return dot == std::string_view::npos ? key : key.substr(dot + 1);
}

}  // namespace detail

// Closest known key, or empty if nothing is plausibly close.
inline std::string SuggestKey(const std::string& unknown) {
  std::string best;
  std::size_t best_d = 3;
  for (const auto& k : detail::Keys()) {
    std::size_t d = detail::EditDistance(unknown, k.key);
    d = std::min(d, detail::EditDistance(detail::Leaf(unknown), detail::Leaf(k.key)) +
                        (detail::Leaf(unknown) == unknown ? 0 : detail::EditDistance(unknown, k.key)));
    if (d < best_d) {
      best_d = d;
      best = k.key;
    }
  }
  return best;
}

inline void SetKey(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : detail::Keys()) {
    if (k.key != key) continue;
    try {
      k.set(cfg, value);
    } catch (const std::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
    return;
  }
  std::string msg = "unknown config key '" + key + "'";
  if (const auto s = SuggestKey(key); !s.empty()) msg += " (did you mean '" + s + "'?)";
  throw ConfigError(msg);
}

// Range checks and normalization after all keys are applied.
inline void Finalize(ExperimentConfig& cfg) {
  auto check = [](auto&& fn, const std::string& section) {
    try {
      fn();
    } catch (const std::invalid_argument& e) {
      const std::string what = e.what();
      throw ConfigError("config " + (what.starts_with(section + ":") ? what : section + ": " + what));
    }
  };
  if (!std::is_sorted(cfg.ks.begin(), cfg.ks.end()) ||
      std::adjacent_find(cfg.ks.begin(), cfg.ks.end()) != cfg.ks.end()) {
    std::sort(cfg.ks.begin(), cfg.ks.end());
    cfg.ks.erase(std::unique(cfg.ks.begin(), cfg.ks.end()), cfg.ks.end());
    cfg.warnings.push_back("ks were not sorted ascending; normalized to " + detail::Join(cfg.ks));
  }
  if (cfg.ks.empty() || cfg.ks.front() < 1) throw ConfigError("config ks: values must be >= 1");
  if (cfg.threads < 1) throw ConfigError("config threads: must be >= 1");
  if (cfg.dataset_path.empty()) check([&] { cfg.synth.Validate(); }, "dataset");
  if (cfg.markov_order < 1) throw ConfigError("config oracle.markov_order: must be >= 1");
  if (!(cfg.markov_smoothing > 0.0)) throw ConfigError("config oracle.smoothing: must be > 0");
  check([&] { cfg.train.Validate(); }, "train");
  if (cfg.watermark.n < 2) throw ConfigError("config watermark.n: must be >= 2");
  if (cfg.watermark.m < 1) throw ConfigError("config watermark.m: must be >= 1");
  if (!(cfg.watermark.wdr >= 0.0)) throw ConfigError("config watermark.wdr: must be >= 0");
  check([&] { cfg.distill.Validate(); }, "distill");
  check([&] { cfg.finetune.Validate(); }, "finetune");
  cfg.CheckZeroBand(cfg.KnownVocab());
}

inline ExperimentConfig ParseConfig(std::istream& in, const std::string& source = "<config>") {
  ExperimentConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    std::string_view view = aowrec::detail::Trim(std::string_view(line).substr(0, hash));
    while (!view.empty() && (view.front() == '\t')) view.remove_prefix(1);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key = value");
    }
    auto trim = [](std::string_view s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
      return std::string(s);
    };
    SetKey(cfg, trim(view.substr(0, eq)), trim(view.substr(eq + 1)));
  }
  Finalize(cfg);
  return cfg;
}

inline ExperimentConfig ParseConfigFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return ParseConfig(in, path);
}

// `key = value` lines for every key; parses back to the same config.
inline std::string ConfigEcho(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& k : detail::Keys()) out += k.key + " = " + k.get(cfg) + "\n";
  return out;
}

// One line per key with its default, for --help.
inline std::string ConfigHelp() {
  const ExperimentConfig defaults;
  std::string out;
  for (const auto& k : detail::Keys()) {
    std::string def = k.get(defaults);
    if (def.empty()) def = "\"\"";
    out += "  " + k.key + std::string(k.key.size() < 28 ? 28 - k.key.size() : 1, ' ') + k.help +
           " [default: " + def + "]\n";
  }
  return out;
}

}  // namespace aowrec::harness

#endif  // AOWREC_HARNESS_CONFIG_HPP_
