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

#ifndef AOWREC_HARNESS_PIPELINE_HPP_
#define AOWREC_HARNESS_PIPELINE_HPP_

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aowrec/attacks.hpp"
#include "aowrec/checkpoint.hpp"
#include "aowrec/corpus.hpp"
#include "aowrec/harness/config.hpp"
#include "aowrec/markov.hpp"
#include "aowrec/metrics.hpp"
#include "aowrec/training.hpp"
#include "aowrec/watermark.hpp"
#include "json.hpp"

namespace aowrec::harness {

// A stage failed; `stage` names it. Artifacts written so far are kept.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct Artifact {
  std::string name;
  std::string file;  // relative to the run directory
  std::string digest;

  bool operator==(const Artifact&) const = default;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct FinetunePoint {
  double fraction = 0.0;
  double validity_r10 = 0.0;
  double utility_r10 = 0.0;
};

// Headline numbers, one row per run (validity R@1 of the watermarked model,
// test R@10 of oracle and watermarked model, watermark R@10 after attacks).
struct RunSummary {
  std::string dataset;
  std::optional<double> validity_r1;
  std::optional<double> oracle_r10;
  std::optional<double> wm_r10;
  std::optional<double> distill_r10;
  std::optional<double> finetune_r10;
};

struct RunManifest {
  std::string config_echo;
  std::vector<Artifact> artifacts;
  std::vector<MetricsReport> reports;
  std::vector<StageTiming> timings;
  std::vector<std::string> warnings;
  std::vector<FinetunePoint> finetune_scatter;
  RunSummary summary;

  const MetricsReport* Find(const std::string& label) const {
    for (const auto& r : reports) {
      if (r.label == label) return &r;
    }
    return nullptr;
  }

  const Artifact* FindArtifact(const std::string& name) const {
    for (const auto& a : artifacts) {
      if (a.name == name) return &a;
    }
    return nullptr;
  }
};

struct PreparedData {
  InteractionDataset full;
  SplitBundle split;
  std::vector<std::int64_t> popularity;
};

inline PreparedData PrepareFrom(InteractionDataset full) {
  PreparedData d;
  d.full = std::move(full);
  d.split = LeaveOneOutSplit(d.full);
  d.popularity = ItemPopularity(d.full);
  return d;
}

inline InteractionDataset SynthesizeFor(const ExperimentConfig& cfg) {
  SyntheticConfig sc = cfg.synth;
  sc.seed = DeriveSeed(cfg.seed, "dataset");
  return SynthGenerate(sc);
}

inline PreparedData PrepareData(const ExperimentConfig& cfg) {
  return PrepareFrom(cfg.dataset_path.empty() ? SynthesizeFor(cfg) : LoadDataset(cfg.dataset_path, cfg.load));
}

inline TrainConfig StageTrainConfig(const ExperimentConfig& cfg) {
  TrainConfig tc = cfg.train;
  tc.seed = DeriveSeed(cfg.seed, "train");
  return tc;
}

inline std::unique_ptr<Scorer> TrainOracle(const ExperimentConfig& cfg, const PreparedData& d) {
  if (cfg.oracle_kind == OracleKind::kMarkov) {
    return std::make_unique<MarkovScorer>(MarkovScorer::Train(d.split.train, cfg.markov_order, cfg.markov_smoothing));
  }
  return std::make_unique<NeuralScorer>(
      TrainNeural(d.split.train, StageTrainConfig(cfg), d.split.validation, {.eval_threads = cfg.threads}).model);
}

inline WatermarkSpec StageWatermarkSpec(const ExperimentConfig& cfg) {
  WatermarkSpec spec = cfg.watermark;
  spec.seed = DeriveSeed(cfg.seed, "watermark");
  return spec;
}

// Same seed and data path as the oracle, so wdr = 0 reproduces the oracle.
inline std::unique_ptr<Scorer> TrainWatermarked(const ExperimentConfig& cfg, const PreparedData& d,
                                                const WatermarkSequence& wm) {
  const bool embed = WatermarkCopies(d.split.train.sequences.size(), cfg.watermark.wdr) > 0 ||
                     (cfg.injection == InjectionMode::kWeightedLoss && cfg.watermark.wdr > 0.0);
  if (cfg.oracle_kind == OracleKind::kMarkov) {
    return std::make_unique<MarkovScorer>(
        MarkovScorer::Train(Inject(d.split.train, wm, cfg.watermark.wdr), cfg.markov_order, cfg.markov_smoothing));
  }
  const std::vector<Query> validation = embed ? AugmentValidation(d.split.validation, wm) : d.split.validation;
  TrainOptions opts;
  opts.eval_threads = cfg.threads;
  if (cfg.injection == InjectionMode::kWeightedLoss) {
    auto weighted = InjectWeighted(d.split.train, wm, cfg.watermark.wdr);
    opts.sequence_weights = std::move(weighted.weights);
    return std::make_unique<NeuralScorer>(
        TrainNeural(weighted.data, StageTrainConfig(cfg), validation, opts).model);
  }
  return std::make_unique<NeuralScorer>(
      TrainNeural(Inject(d.split.train, wm, cfg.watermark.wdr), StageTrainConfig(cfg), validation, opts).model);
}

inline AttackConfig StageAttackConfig(const ExperimentConfig& cfg, const AttackConfig& attack,
                                      const std::string& label) {
  AttackConfig a = attack;
  const TrainConfig base = cfg.train;
  a.train.epochs = base.epochs;
  a.train.batch_size = base.batch_size;
  a.train.embed_dim = base.embed_dim;
  a.train.num_heads = base.num_heads;
  a.train.num_layers = base.num_layers;
  a.train.max_context = base.max_context;
  a.train.l2 = base.l2;
  a.train.clip_norm = base.clip_norm;
  a.train.optimizer = base.optimizer;
  a.seed = DeriveSeed(cfg.seed, label);
  a.threads = cfg.threads;
  return a;
}

namespace detail {

class RunContext {
 public:
  RunContext(const ExperimentConfig& cfg, std::filesystem::path dir, RunManifest& manifest)
      : cfg_(cfg), dir_(std::move(dir)), manifest_(manifest) {
    std::filesystem::create_directories(dir_);
  }

  template <typename Fn>
  auto Stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        Record(name, t0);
      } else {
        auto r = fn();
        Record(name, t0);
        return r;
      }
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  }

  std::string Path(const std::string& file) const { return (dir_ / file).string(); }

  void AddArtifact(const std::string& name, const std::string& file) {
    manifest_.artifacts.push_back({name, file, FileDigest(Path(file))});
  }

  void SaveModel(const std::string& name, const std::string& file, const Scorer& m) {
    SaveCheckpoint(m, Path(file));
    AddArtifact(name, file);
  }

  void Report(MetricsReport r) { manifest_.reports.push_back(std::move(r)); }

  MetricsReport Utility(const Scorer& m, const std::vector<Query>& q, const std::string& label) {
    auto r = Evaluate(m, std::span<const Query>(q), cfg_.ks, label, cfg_.threads);
    Report(r);
    return r;
  }

  MetricsReport Validity(const Scorer& m, const WatermarkSequence& wm, const std::string& label) {
    auto r = Verify(m, wm, cfg_.ks, cfg_.threads).metrics;
    r.label = label;
    Report(r);
    return r;
  }

  const ExperimentConfig& cfg() const { return cfg_; }
  RunManifest& manifest() { return manifest_; }

 private:
  void Record(const std::string& name, std::chrono::steady_clock::time_point t0) {
    manifest_.timings.push_back(
        {name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
  }

  const ExperimentConfig& cfg_;
  std::filesystem::path dir_;
  RunManifest& manifest_;
};

inline std::optional<double> RecallIfPresent(const MetricsReport& r, int k) {
  if (std::find(r.ks.begin(), r.ks.end(), k) == r.ks.end()) return std::nullopt;
  return r.RecallAt(k);
}

inline std::string FractionLabel(double f) {
  std::ostringstream ss;
  ss << f * 100.0;
  return ss.str() + "%";
}

// Watermark generation through post-attack validity, given a trained oracle.
inline void RunWatermarkStages(RunContext& ctx, const PreparedData& d, const Scorer& oracle) {
  const ExperimentConfig& cfg = ctx.cfg();
  RunManifest& man = ctx.manifest();
  const WatermarkSequence wm = ctx.Stage("gen-watermark", [&] {
    auto w = GenerateWatermark(oracle, StageWatermarkSpec(cfg), d.full);
    SaveWatermark(w, ctx.Path("watermark.txt"));
    ctx.AddArtifact("watermark", "watermark.txt");
    return w;
  });
  ctx.Stage("eval-oracle-validity", [&] { ctx.Validity(oracle, wm, "oracle/validity"); });

  const std::unique_ptr<Scorer> wm_model = ctx.Stage("train-wm", [&] {
    auto m = TrainWatermarked(cfg, d, wm);
    ctx.SaveModel("watermarked", "watermarked.ckpt", *m);
    return m;
  });
  ctx.Stage("eval-wm", [&] {
    const auto validity = ctx.Validity(*wm_model, wm, "watermarked/validity");
    ctx.Utility(*wm_model, d.split.validation, "watermarked/utility/validation");
    const auto util = ctx.Utility(*wm_model, d.split.test, "watermarked/utility/test");
    man.summary.validity_r1 = RecallIfPresent(validity, 1);
    man.summary.wm_r10 = RecallIfPresent(util, 10);
  });

  if (cfg.distill_enabled) {
    ctx.Stage("attack-distill", [&] {
      const AttackConfig ac = StageAttackConfig(cfg, cfg.distill, "distill");
      auto res = Distill(*wm_model, ac, d.popularity);
      res.generated.data.meta["generated_by"] = man.FindArtifact("watermarked")->digest;
      SaveDataset(res.generated.data, ctx.Path("distill_data.tsv"));
      ctx.AddArtifact("distill_data", "distill_data.tsv");
      ctx.SaveModel("distill", "distill.ckpt", res.surrogate);
      const auto v = ctx.Validity(res.surrogate, wm, "distill/validity");
      ctx.Utility(res.surrogate, d.split.test, "distill/utility/test");
      man.summary.distill_r10 = RecallIfPresent(v, 10);
    });
  }

  if (cfg.finetune_enabled && !cfg.finetune_fractions.empty()) {
    const auto* victim = dynamic_cast<const NeuralScorer*>(wm_model.get());
    if (!victim) {
      man.warnings.push_back("fine-tuning skipped: the watermarked model is not neural");
      return;
    }
    for (std::size_t i = 0; i < cfg.finetune_fractions.size(); ++i) {
      const double frac = cfg.finetune_fractions[i];
      const std::string tag = "finetune@" + FractionLabel(frac);
      ctx.Stage("attack-" + tag, [&] {
        AttackConfig ac = StageAttackConfig(cfg, cfg.finetune, tag);
        ac.num_sequences = std::max(1, static_cast<int>(std::lround(frac * static_cast<double>(d.full.sequences.size()))));
        auto gen = AutoregressiveGenerate(oracle, ac, d.popularity);
        gen.data.meta["generated_by"] = man.FindArtifact("oracle")->digest;
        const std::string data_file = "finetune_" + std::to_string(i) + "_data.tsv";
        SaveDataset(gen.data, ctx.Path(data_file));
        ctx.AddArtifact(tag + "_data", data_file);
        const NeuralScorer tuned = Finetune(*victim, gen.data, ac);
        ctx.SaveModel(tag, "finetune_" + std::to_string(i) + ".ckpt", tuned);
        const auto v = ctx.Validity(tuned, wm, tag + "/validity");
        const auto u = ctx.Utility(tuned, d.split.test, tag + "/utility/test");
        man.finetune_scatter.push_back({frac, RecallIfPresent(v, 10).value_or(NAN), RecallIfPresent(u, 10).value_or(NAN)});
        if (i == 0) man.summary.finetune_r10 = RecallIfPresent(v, 10);
      });
    }
  }
}

inline std::unique_ptr<Scorer> RunOracleStages(RunContext& ctx, const PreparedData& d) {
  auto oracle = ctx.Stage("train-oracle", [&] {
    auto m = TrainOracle(ctx.cfg(), d);
    ctx.SaveModel("oracle", "oracle.ckpt", *m);
    return m;
  });
  ctx.Stage("eval-oracle", [&] {
    ctx.Utility(*oracle, d.split.validation, "oracle/utility/validation");
    const auto u = ctx.Utility(*oracle, d.split.test, "oracle/utility/test");
    ctx.manifest().summary.oracle_r10 = RecallIfPresent(u, 10);
  });
  return oracle;
}

inline PreparedData RunDataStage(RunContext& ctx) {
  return ctx.Stage("data", [&] {
    PreparedData d = PrepareData(ctx.cfg());
    SaveDataset(d.full, ctx.Path("dataset.tsv"));
    ctx.AddArtifact("dataset", "dataset.tsv");
    ctx.manifest().summary.dataset = ctx.cfg().name;
    if (d.split.skipped > 0) {
      ctx.manifest().warnings.push_back(std::to_string(d.split.skipped) + " sequence(s) of length 1 skipped");
    }
    if (ctx.cfg().KnownVocab() != d.full.vocab_size) {
      ExperimentConfig probe = ctx.cfg();
      probe.warnings.clear();
      probe.CheckZeroBand(d.full.vocab_size);
      for (auto& w : probe.warnings) ctx.manifest().warnings.push_back(std::move(w));
    }
    return d;
  });
}

}  // namespace detail

// JSON form of a manifest (also written as manifest.json).
inline nlohmann::json ManifestToJson(const RunManifest& m) {
  nlohmann::json j;
  j["config"] = m.config_echo;
  j["artifacts"] = nlohmann::json::array();
  for (const auto& a : m.artifacts) j["artifacts"].push_back({{"name", a.name}, {"file", a.file}, {"digest", a.digest}});
  j["reports"] = nlohmann::json::array();
  for (const auto& r : m.reports) {
    j["reports"].push_back({{"label", r.label}, {"ks", r.ks}, {"recall", r.recall}, {"ndcg", r.ndcg},
                            {"num_queries", r.num_queries}});
  }
  j["timings"] = nlohmann::json::array();
  for (const auto& t : m.timings) j["timings"].push_back({{"stage", t.stage}, {"seconds", t.seconds}});
  j["warnings"] = m.warnings;
  j["finetune_scatter"] = nlohmann::json::array();
  for (const auto& p : m.finetune_scatter) {
    j["finetune_scatter"].push_back(
        {{"fraction", p.fraction}, {"validity_r10", p.validity_r10}, {"utility_r10", p.utility_r10}});
  }
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  j["summary"] = {{"dataset", m.summary.dataset},
                  {"validity_r1", opt(m.summary.validity_r1)},
                  {"oracle_r10", opt(m.summary.oracle_r10)},
                  {"wm_r10", opt(m.summary.wm_r10)},
                  {"distill_r10", opt(m.summary.distill_r10)},
                  {"finetune_r10", opt(m.summary.finetune_r10)}};
  return j;
}

inline RunManifest ManifestFromJson(const nlohmann::json& j) {
  RunManifest m;
  m.config_echo = j.at("config").get<std::string>();
  for (const auto& a : j.at("artifacts")) m.artifacts.push_back({a.at("name"), a.at("file"), a.at("digest")});
  for (const auto& r : j.at("reports")) {
    MetricsReport rep;
    rep.label = r.at("label");
    rep.ks = r.at("ks").get<std::vector<int>>();
    rep.recall = r.at("recall").get<std::vector<double>>();
    rep.ndcg = r.at("ndcg").get<std::vector<double>>();
    rep.num_queries = r.at("num_queries");
    m.reports.push_back(std::move(rep));
  }
  for (const auto& t : j.at("timings")) m.timings.push_back({t.at("stage"), t.at("seconds")});
  m.warnings = j.at("warnings").get<std::vector<std::string>>();
  for (const auto& p : j.at("finetune_scatter")) {
    m.finetune_scatter.push_back({p.at("fraction"), p.at("validity_r10"), p.at("utility_r10")});
  }
  const auto& s = j.at("summary");
  auto opt = [&](const char* k) -> std::optional<double> {
    return s.at(k).is_null() ? std::nullopt : std::optional<double>(s.at(k).get<double>());
  };
  m.summary = {s.at("dataset"), opt("validity_r1"), opt("oracle_r10"), opt("wm_r10"), opt("distill_r10"),
               opt("finetune_r10")};
  return m;
}

inline void SaveManifest(const RunManifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest '" + path + "'");
  out << ManifestToJson(m).dump(2) << '\n';
}

inline RunManifest LoadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  try {
    return ManifestFromJson(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// Names of artifacts that are missing or whose digest no longer matches.
inline std::vector<std::string> VerifyManifest(const RunManifest& m, const std::filesystem::path& run_dir) {
  std::vector<std::string> bad;
  for (const auto& a : m.artifacts) {
    const auto p = run_dir / a.file;
    if (!std::filesystem::exists(p) || FileDigest(p.string()) != a.digest) bad.push_back(a.name);
  }
  return bad;
}

inline void EmitReport(const RunManifest& manifest, const std::string& out_dir);

// load/synthesize -> split -> oracle -> watermark -> watermarked model ->
// utility and validity -> attacks -> post-attack validity. Writes every
// artifact, metrics.csv, summary.{csv,txt} and manifest.json to cfg.out_dir.
inline RunManifest RunPipeline(const ExperimentConfig& cfg) {
  RunManifest manifest;
  manifest.config_echo = ConfigEcho(cfg);
  manifest.warnings = cfg.warnings;
  detail::RunContext ctx(cfg, cfg.out_dir, manifest);
  try {
    const PreparedData d = detail::RunDataStage(ctx);
    const auto oracle = detail::RunOracleStages(ctx, d);
    detail::RunWatermarkStages(ctx, d, *oracle);
  } catch (...) {
    SaveManifest(manifest, ctx.Path("manifest.json"));
    throw;
  }
  EmitReport(manifest, cfg.out_dir);
  SaveManifest(manifest, ctx.Path("manifest.json"));
  return manifest;
}

enum class SweepAxis { kN, kWdr, kM, kPolicy };

inline SweepAxis ParseSweepAxis(const std::string& s) {
  if (s == "n") return SweepAxis::kN;
  if (s == "wdr") return SweepAxis::kWdr;
  if (s == "m" || s == "M") return SweepAxis::kM;
  if (s == "policy") return SweepAxis::kPolicy;
  throw ConfigError("unknown sweep axis '" + s + "' (expected n, wdr, m or policy)");
}

inline std::string SweepAxisName(SweepAxis a) {
  switch (a) {
    case SweepAxis::kN: return "n";
    case SweepAxis::kWdr: return "wdr";
    case SweepAxis::kM: return "m";
    case SweepAxis::kPolicy: return "policy";
  }
  return {};
}

inline std::vector<std::string> DefaultSweepValues(SweepAxis a) {
  switch (a) {
    case SweepAxis::kN: return {"2", "5", "10", "20"};
    case SweepAxis::kWdr: return {"0.05", "0.1", "0.5", "1.0", "2.0"};
    case SweepAxis::kM: return {"50", "100", "200", "300"};
    case SweepAxis::kPolicy: return {"cold", "pop"};
  }
  return {};
}

struct SweepRow {
  std::string axis;
  std::string axis_value;
  std::string metric;  // report label + "/recall" or "/ndcg"
  int k = 0;
  double value = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<RunManifest> runs;
};

// One run per axis value. The oracle does not depend on any swept watermark
// parameter, so it is trained once and shared.
inline SweepResult RunSweep(const ExperimentConfig& base, SweepAxis axis, std::vector<std::string> values) {
  if (values.empty()) values = DefaultSweepValues(axis);
  const std::string key = axis == SweepAxis::kN ? "watermark.n"
                          : axis == SweepAxis::kWdr ? "watermark.wdr"
                          : axis == SweepAxis::kM ? "watermark.m"
                                                  : "watermark.policy";
  std::vector<ExperimentConfig> cfgs;
  for (const auto& v : values) {
    ExperimentConfig c = base;
    SetKey(c, key, v);
    Finalize(c);
    c.out_dir = (std::filesystem::path(base.out_dir) / ("sweep_" + SweepAxisName(axis) + "_" + v)).string();
    cfgs.push_back(std::move(c));
  }
  SweepResult result;
  RunManifest shared;
  shared.config_echo = ConfigEcho(base);
  detail::RunContext base_ctx(base, base.out_dir, shared);
  const PreparedData d = detail::RunDataStage(base_ctx);
  const auto oracle = detail::RunOracleStages(base_ctx, d);
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    RunManifest m = shared;
    m.config_echo = ConfigEcho(cfgs[i]);
    for (const auto& w : cfgs[i].warnings) m.warnings.push_back(w);
    // Shared artifacts live in the parent directory.
    for (auto& a : m.artifacts) a.file = "../" + a.file;
    detail::RunContext ctx(cfgs[i], cfgs[i].out_dir, m);
    detail::RunWatermarkStages(ctx, d, *oracle);
    EmitReport(m, cfgs[i].out_dir);
    SaveManifest(m, ctx.Path("manifest.json"));
    for (const auto& r : m.reports) {
      for (std::size_t j = 0; j < r.ks.size(); ++j) {
        result.rows.push_back({SweepAxisName(axis), values[i], r.label + "/recall", r.ks[j], r.recall[j]});
        result.rows.push_back({SweepAxisName(axis), values[i], r.label + "/ndcg", r.ks[j], r.ndcg[j]});
      }
    }
    result.runs.push_back(std::move(m));
  }
  std::ofstream out(std::filesystem::path(base.out_dir) / ("sweep_" + SweepAxisName(axis) + ".csv"), std::ios::trunc);
  out << "axis,axis_value,metric,k,value\n";
  for (const auto& r : result.rows) {
    out << r.axis << ',' << aowrec::detail::CsvField(r.axis_value) << ',' << aowrec::detail::CsvField(r.metric)
        << ',' << r.k << ',' << aowrec::detail::FormatReal(r.value) << '\n';
  }
  return result;
}

}  // namespace aowrec::harness

#include "aowrec/harness/report.hpp"

#endif  // AOWREC_HARNESS_PIPELINE_HPP_
