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

// aowrec: command-line workbench for sequential-recommender watermarking.
// Exit codes: 0 success, 2 configuration/usage error, 3 stage failure.

#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aowrec/aowrec.hpp"
#include "aowrec/harness/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using namespace aowrec;
using namespace aowrec::harness;

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct GlobalOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  bool deterministic = true;
};

ExperimentConfig BuildConfig(const GlobalOptions& g) {
  ExperimentConfig cfg = g.config_path.empty() ? ExperimentConfig{} : ParseConfigFile(g.config_path);
  cfg.warnings.clear();
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    SetKey(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  if (g.seed) cfg.seed = *g.seed;
  if (g.out) cfg.out_dir = *g.out;
  if (g.threads) cfg.threads = *g.threads;
  Finalize(cfg);
  for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << '\n';
  return cfg;
}

void WarnVocab(ExperimentConfig& cfg, std::int32_t vocab) {
  if (cfg.KnownVocab() == vocab) return;
  const std::size_t before = cfg.warnings.size();
  cfg.CheckZeroBand(vocab);
  for (std::size_t i = before; i < cfg.warnings.size(); ++i) std::cerr << "warning: " << cfg.warnings[i] << '\n';
}

PreparedData LoadPrepared(const ExperimentConfig& cfg, const std::string& data_path) {
  PreparedData d = PrepareFrom(LoadDataset(data_path, cfg.load));
  if (d.split.skipped > 0) std::cerr << "skipped " << d.split.skipped << " sequence(s) of length 1\n";
  return d;
}

std::string OutPath(const ExperimentConfig& cfg, const std::string& explicit_path, const std::string& file) {
  if (!explicit_path.empty()) return explicit_path;
  fs::create_directories(cfg.out_dir);
  return (fs::path(cfg.out_dir) / file).string();
}

void PrintReports(const std::vector<MetricsReport>& reports, const std::string& csv_path) {
  WriteMetricsCsv(reports, std::cout);
  if (!csv_path.empty()) {
    std::ofstream out(csv_path, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + csv_path + "'");
    WriteMetricsCsv(reports, out);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aowrec: embed, verify and attack autoregressive out-of-distribution watermarks "
               "in sequential recommenders"};
  app.require_subcommand(1);
  app.footer("Config keys (flat `key = value`, dotted sections):\n" + ConfigHelp());
  GlobalOptions g;
  app.add_option("--config", g.config_path, "experiment config file")->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "override a config key (key=value), repeatable");
  app.add_option("--seed", g.seed, "global seed (overrides config)");
  app.add_option("--out", g.out, "output directory (overrides config)");
  app.add_option("--threads", g.threads, "evaluation and generation worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--deterministic,!--no-deterministic", g.deterministic,
               "single-threaded training (default on; parallel paths are order-independent)");

  std::string data, output, oracle_path, wm_path, model_path, csv_path, target_path, victim_path,
      attacker_data, generate_from, manifest_path, format = "text", axis, data_output, kind;
  std::vector<std::string> values;
  double fraction = 0.01;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--output", output, "dataset file [default: <out>/dataset.tsv]");

  auto* train_oracle = app.add_subcommand("train-oracle", "train the oracle model on the leave-one-out train split");
  train_oracle->add_option("--data", data, "dataset file")->required()->check(CLI::ExistingFile);
  train_oracle->add_option("--output", output, "checkpoint [default: <out>/oracle.ckpt]");
  train_oracle->add_option("--kind", kind, "neural | markov (overrides oracle.kind)");

  auto* gen_wm = app.add_subcommand("gen-watermark", "generate a watermark sequence from an oracle");
  gen_wm->add_option("--oracle", oracle_path, "oracle checkpoint")->required()->check(CLI::ExistingFile);
  gen_wm->add_option("--data", data, "dataset file (for cold/pop item selection)")->required()->check(CLI::ExistingFile);
  gen_wm->add_option("--output", output, "watermark file [default: <out>/watermark.txt]");

  auto* train_wm = app.add_subcommand("train-wm", "train a watermarked model");
  train_wm->add_option("--data", data, "dataset file")->required()->check(CLI::ExistingFile);
  train_wm->add_option("--watermark", wm_path, "watermark file")->required()->check(CLI::ExistingFile);
  train_wm->add_option("--output", output, "checkpoint [default: <out>/watermarked.ckpt]");

  auto* eval = app.add_subcommand("eval", "evaluate utility and/or watermark validity");
  eval->add_option("--model", model_path, "checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data, "dataset file (utility on validation and test)")->check(CLI::ExistingFile);
  eval->add_option("--watermark", wm_path, "watermark file (validity)")->check(CLI::ExistingFile);
  eval->add_option("--output", csv_path, "also write the CSV here");

  auto* distill = app.add_subcommand("attack-distill", "black-box model extraction of a target");
  distill->add_option("--target", target_path, "target checkpoint")->required()->check(CLI::ExistingFile);
  distill->add_option("--data", data, "dataset file (start-item popularity and utility)")->check(CLI::ExistingFile);
  distill->add_option("--watermark", wm_path, "watermark file to check on the surrogate")->check(CLI::ExistingFile);
  distill->add_option("--output", output, "surrogate checkpoint [default: <out>/distill.ckpt]");
  distill->add_option("--data-output", data_output, "generated data [default: <out>/distill_data.tsv]");

  auto* finetune = app.add_subcommand("attack-finetune", "fine-tune a copy of a victim on attacker data");
  finetune->add_option("--victim", victim_path, "victim checkpoint (neural)")->required()->check(CLI::ExistingFile);
  finetune->add_option("--attacker-data", attacker_data, "attacker dataset file")->check(CLI::ExistingFile);
  finetune->add_option("--generate-from", generate_from, "generate attacker data from this checkpoint")
      ->check(CLI::ExistingFile);
  finetune->add_option("--fraction", fraction, "generated sequences as a fraction of |S| (needs --data)");
  finetune->add_option("--data", data, "dataset file (popularity, |S|, utility)")->check(CLI::ExistingFile);
  finetune->add_option("--watermark", wm_path, "watermark file to check after fine-tuning")->check(CLI::ExistingFile);
  finetune->add_option("--output", output, "checkpoint [default: <out>/finetune.ckpt]");

  auto* sweep = app.add_subcommand("sweep", "run one watermark pipeline per axis value with a shared oracle");
  sweep->add_option("--axis", axis, "n | wdr | m | policy")->required();
  sweep->add_option("--values", values, "axis values (default grid per axis)")->delimiter(',');

  auto* report = app.add_subcommand("report", "render a run manifest");
  report->add_option("--manifest", manifest_path, "manifest.json")->required()->check(CLI::ExistingFile);
  report->add_option("--format", format, "text | csv")->check(CLI::IsMember({"text", "csv"}));

  auto* pipeline = app.add_subcommand("pipeline", "run every stage end to end");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  ExperimentConfig cfg;
  try {
    cfg = BuildConfig(g);
    if (!kind.empty()) SetKey(cfg, "oracle.kind", kind);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (*synth) {
      const auto path = OutPath(cfg, output, "dataset.tsv");
      const auto ds = cfg.dataset_path.empty() ? SynthesizeFor(cfg) : LoadDataset(cfg.dataset_path, cfg.load);
      SaveDataset(ds, path);
      std::cout << path << ": " << ds.sequences.size() << " sequences, vocab " << ds.vocab_size << ", "
                << ds.num_interactions() << " interactions\n";
    } else if (*train_oracle) {
      const PreparedData d = LoadPrepared(cfg, data);
      const auto model = TrainOracle(cfg, d);
      const auto path = OutPath(cfg, output, "oracle.ckpt");
      SaveCheckpoint(*model, path);
      std::cerr << "saved " << path << '\n';
      PrintReports({Evaluate(*model, std::span<const Query>(d.split.validation), cfg.ks, "oracle/utility/validation", cfg.threads),
                    Evaluate(*model, std::span<const Query>(d.split.test), cfg.ks, "oracle/utility/test", cfg.threads)},
                   {});
    } else if (*gen_wm) {
      const auto oracle = LoadCheckpoint(oracle_path);
      const auto ds = LoadDataset(data, cfg.load);
      WarnVocab(cfg, ds.vocab_size);
      const auto wm = GenerateWatermark(*oracle, StageWatermarkSpec(cfg), ds);
      const auto path = OutPath(cfg, output, "watermark.txt");
      SaveWatermark(wm, path);
      WriteWatermark(wm, std::cout);
    } else if (*train_wm) {
      const PreparedData d = LoadPrepared(cfg, data);
      const auto wm = LoadWatermark(wm_path);
      const auto model = TrainWatermarked(cfg, d, wm);
      const auto path = OutPath(cfg, output, "watermarked.ckpt");
      SaveCheckpoint(*model, path);
      std::cerr << "saved " << path << '\n';
      PrintReports({Verify(*model, wm, cfg.ks, cfg.threads).metrics}, {});
    } else if (*eval) {
      if (data.empty() && wm_path.empty()) throw ConfigError("eval needs --data and/or --watermark");
      const auto model = LoadCheckpoint(model_path);
      std::vector<MetricsReport> reports;
      if (!data.empty()) {
        const PreparedData d = LoadPrepared(cfg, data);
        reports.push_back(Evaluate(*model, std::span<const Query>(d.split.validation), cfg.ks, "utility/validation", cfg.threads));
        reports.push_back(Evaluate(*model, std::span<const Query>(d.split.test), cfg.ks, "utility/test", cfg.threads));
      }
      if (!wm_path.empty()) {
        const auto wm = LoadWatermark(wm_path);
        WarnVocab(cfg, wm.vocab_size);
        const auto v = Verify(*model, wm, cfg.ks, cfg.threads);
        reports.push_back(v.metrics);
        std::cerr << "truncation ranks:";
        for (auto r : v.ranks) std::cerr << ' ' << r;
        std::cerr << '\n';
      }
      PrintReports(reports, csv_path);
    } else if (*distill) {
      const auto target = LoadCheckpoint(target_path);
      std::vector<std::int64_t> popularity;
      std::optional<PreparedData> d;
      if (!data.empty()) {
        d = LoadPrepared(cfg, data);
        popularity = d->popularity;
      }
      const AttackConfig ac = StageAttackConfig(cfg, cfg.distill, "distill");
      auto res = Distill(*target, ac, popularity);
      res.generated.data.meta["generated_by"] = FileDigest(target_path);
      SaveDataset(res.generated.data, OutPath(cfg, data_output, "distill_data.tsv"));
      SaveCheckpoint(res.surrogate, OutPath(cfg, output, "distill.ckpt"));
      std::cerr << "target queries: " << res.generated.num_queries << '\n';
      std::vector<MetricsReport> reports;
      if (d) reports.push_back(Evaluate(res.surrogate, std::span<const Query>(d->split.test), cfg.ks, "distill/utility/test", cfg.threads));
      if (!wm_path.empty()) {
        auto v = Verify(res.surrogate, LoadWatermark(wm_path), cfg.ks, cfg.threads).metrics;
        v.label = "distill/validity";
        reports.push_back(v);
      }
      if (!reports.empty()) PrintReports(reports, {});
    } else if (*finetune) {
      const NeuralScorer victim = LoadNeuralCheckpoint(victim_path);
      std::optional<PreparedData> d;
      if (!data.empty()) d = LoadPrepared(cfg, data);
      AttackConfig ac = StageAttackConfig(cfg, cfg.finetune, "finetune");
      InteractionDataset attack_data;
      if (!attacker_data.empty()) {
        attack_data = LoadDataset(attacker_data, cfg.load);
      } else if (!generate_from.empty()) {
        if (!d) throw ConfigError("--generate-from needs --data for |S| and popularity");
        ac.num_sequences = std::max(1, static_cast<int>(std::lround(fraction * static_cast<double>(d->full.sequences.size()))));
        attack_data = AutoregressiveGenerate(*LoadCheckpoint(generate_from), ac, d->popularity).data;
      } else {
        throw ConfigError("attack-finetune needs --attacker-data or --generate-from");
      }
      const NeuralScorer tuned = Finetune(victim, attack_data, ac);
      SaveCheckpoint(tuned, OutPath(cfg, output, "finetune.ckpt"));
      std::vector<MetricsReport> reports;
      if (d) reports.push_back(Evaluate(tuned, std::span<const Query>(d->split.test), cfg.ks, "finetune/utility/test", cfg.threads));
      if (!wm_path.empty()) {
        auto v = Verify(tuned, LoadWatermark(wm_path), cfg.ks, cfg.threads).metrics;
        v.label = "finetune/validity";
        reports.push_back(v);
      }
      if (!reports.empty()) PrintReports(reports, {});
    } else if (*sweep) {
      const auto res = RunSweep(cfg, ParseSweepAxis(axis), values);
      std::cout << "axis,axis_value,metric,k,value\n";
      for (const auto& r : res.rows) {
        std::cout << r.axis << ',' << r.axis_value << ',' << r.metric << ',' << r.k << ','
                  << aowrec::detail::FormatReal(r.value) << '\n';
      }
    } else if (*report) {
      const auto m = LoadManifest(manifest_path);
      const auto bad = VerifyManifest(m, fs::path(manifest_path).parent_path());
      for (const auto& b : bad) std::cerr << "warning: artifact '" << b << "' is missing or modified\n";
      if (format == "csv") {
        WriteSummaryCsv({m.summary}, std::cout);
      } else {
        WriteTextReport(m, std::cout);
      }
    } else if (*pipeline) {
      const auto m = RunPipeline(cfg);
      WriteTextReport(m, std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitStage;
  }
  return 0;
}
