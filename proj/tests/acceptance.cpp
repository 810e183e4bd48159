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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Usage: acceptance [work_dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include "aowrec/harness/pipeline.hpp"

namespace aowrec::acceptance {
namespace {

using harness::ExperimentConfig;
using harness::RunManifest;

const std::vector<int> kKs = {1, 5, 10, 20, 100};
constexpr std::uint64_t kSeeds[] = {1, 2, 3};

std::string Fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

class Suite {
 public:
  explicit Suite(std::filesystem::path dir) : dir_(std::move(dir)) {}

  // Runs `body`, which returns pass/fail and fills `detail`; a thrown
  // exception is a failure. `budget_s` <= 0 means no runtime bound.
  void Criterion(int id, const std::string& title, double budget_s,
                 const std::function<bool(std::string&)>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = body(detail);
    } catch (const std::exception& e) {
      detail += (detail.empty() ? "" : "; ") + std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string timing = Fixed(secs, 1) + " s";
    if (budget_s > 0) {
      timing += " (budget " + Fixed(budget_s, 0) + " s)";
      if (secs >= budget_s) {
        ok = false;
        detail += "; runtime budget exceeded";
      }
    }
    std::cout << (ok ? "PASS" : "FAIL") << "  criterion " << id << ": " << title << " | " << detail << " | "
              << timing << std::endl;
    failures_ += ok ? 0 : 1;
  }

  void Note(const std::string& line) { std::cout << "      " << line << std::endl; }

  const std::filesystem::path& dir() const { return dir_; }
  int failures() const { return failures_; }

 private:
  std::filesystem::path dir_;
  int failures_ = 0;
};

ExperimentConfig BaseConfig(std::uint64_t seed, const std::filesystem::path& out) {
  ExperimentConfig cfg;
  cfg.seed = seed;
  cfg.out_dir = out.string();
  harness::Finalize(cfg);
  return cfg;
}

// Watermarks W for n cycling through {2, 5, 10, 20}, seeds 1..count.
std::vector<WatermarkSequence> SeededWatermarks(const Scorer& oracle, const InteractionDataset& ds, int count,
                                                CandidateRange range) {
  const int ns[] = {2, 5, 10, 20};
  std::vector<WatermarkSequence> out;
  for (int i = 0; i < count; ++i) {
    WatermarkSpec spec;
    spec.n = ns[i % 4];
    spec.m = 100;
    spec.initial = i % 2 == 0 ? InitialItem::Cold() : InitialItem::Pop();
    spec.seed = static_cast<std::uint64_t>(i) + 1;
    spec.range = range;
    out.push_back(GenerateWatermark(oracle, spec, ds));
  }
  return out;
}

bool AllZero(const MetricsReport& r) {
  for (double v : r.recall) {
    if (v != 0.0) return false;
  }
  for (double v : r.ndcg) {
    if (v != 0.0) return false;
  }
  return true;
}

// 1. Exact zero-detection on the generating oracle.
bool OracleZeroDetection(std::string& detail) {
  const ExperimentConfig cfg = BaseConfig(1, {});
  const auto d = harness::PrepareData(cfg);
  const MarkovScorer markov = MarkovScorer::Train(d.split.train, 1, 0.1);
  ExperimentConfig ncfg = cfg;
  const auto neural = harness::TrainOracle(ncfg, d);
  int zero = 0, total = 0, audited = 0;
  for (const Scorer* oracle : std::vector<const Scorer*>{&markov, neural.get()}) {
    for (const auto& wm : SeededWatermarks(*oracle, d.full, 10, CandidateRange::kBottom)) {
      ++total;
      zero += AllZero(Verify(*oracle, wm, kKs).metrics) ? 1 : 0;
      audited += AuditWatermark(*oracle, wm) ? 1 : 0;
    }
  }
  detail = std::to_string(zero) + "/" + std::to_string(total) +
           " watermarks (10 Markov, 10 neural) give Recall@k = NDCG@k = 0 for k in {1,5,10,20,100}; " +
           std::to_string(audited) + "/" + std::to_string(total) + " pass the bottom-M audit";
  return zero == total && audited == total;
}

// 2. rank/recall/ndcg against a sort-and-DCG oracle.
bool MetricOracle(std::string& detail) {
  Rng rng(20240601);
  double worst = 0.0;
  int rank_mismatch = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto v = static_cast<std::size_t>(rng.Between(1, 500));
    std::vector<double> s(v);
    for (auto& x : s) x = trial % 3 == 0 ? static_cast<double>(rng.Below(10)) : rng.Normal();
    const auto target = static_cast<ItemId>(rng.Below(v));
    std::vector<ItemId> order(v);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](ItemId a, ItemId b) {
      return s[static_cast<std::size_t>(a)] != s[static_cast<std::size_t>(b)]
                 ? s[static_cast<std::size_t>(a)] > s[static_cast<std::size_t>(b)]
                 : a < b;
    });
    const auto brute_rank = static_cast<std::int64_t>(std::find(order.begin(), order.end(), target) - order.begin()) + 1;
    const std::int64_t rank = RankOf(s, target);
    if (rank != brute_rank) ++rank_mismatch;
    for (int k : kKs) {
      double dcg = 0.0;
      int hit = 0;
      for (int p = 0; p < k && p < static_cast<int>(v); ++p) {
        if (order[static_cast<std::size_t>(p)] == target) {
          dcg += 1.0 / std::log2(p + 2.0);
          hit = 1;
        }
      }
      worst = std::max(worst, std::abs(static_cast<double>(RecallAtK(rank, k) - hit)));
      worst = std::max(worst, std::abs(NdcgAtK(rank, k) - dcg));
    }
  }
  detail = "1000 random vectors: " + std::to_string(rank_mismatch) + " rank mismatches, max metric error " +
           std::to_string(worst) + " (tolerance 1e-12)";
  return rank_mismatch == 0 && worst <= 1e-12;
}

// 3. Analytic vs finite-difference gradients.
bool Gradients(std::string& detail) {
  double worst = 0.0;
  for (std::uint64_t seed : kSeeds) {
    const TrainConfig tc = harness::DefaultTrain();
    NeuralNet<float> net(tc.Shape(500));
    net.Initialize(seed);
    const NeuralScorer model(std::move(net), tc);
    const double err = GradientCheck(model, 100, 1e-4, seed);
    detail += (detail.empty() ? "" : ", ") + std::string("seed ") + std::to_string(seed) + ": " +
              Fixed(err * 1e6, 3) + "e-6";
    worst = std::max(worst, err);
  }
  detail = "max relative error over 100 parameters at eps 1e-4 (" + detail + ")";
  return worst < 1e-3;
}

// 4. Injection count for |S| = 6040, WDR = 0.1.
bool Injection(std::string& detail) {
  InteractionDataset train;
  train.vocab_size = 10;
  for (int u = 0; u < 6040; ++u) train.sequences.push_back({u + 1, {1, 2, 3}});
  WatermarkSequence wm;
  wm.items = {7, 8, 9};
  wm.vocab_size = 10;
  const auto out = Inject(train, wm, 0.1);
  std::size_t copies = 0;
  for (std::size_t i = 6040; i < out.sequences.size(); ++i) copies += out.sequences[i].items == wm.items ? 1 : 0;
  detail = std::to_string(copies) + " copies appended, " + std::to_string(out.sequences.size()) + " sequences total";
  return copies == 604 && out.sequences.size() == 6644;
}

}  // namespace
}  // namespace aowrec::acceptance

int main(int argc, char** argv) {
  using namespace aowrec;
  using namespace aowrec::acceptance;
  namespace fs = std::filesystem;
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_runs");
  fs::remove_all(work);
  fs::create_directories(work);
  Suite suite(work);
  std::cout << "Acceptance suite (synthetic profile: vocab 500, 2000 users, mean length 20; work dir "
            << work.string() << ")" << std::endl;

  suite.Criterion(1, "exact oracle zero-detection", 60, OracleZeroDetection);
  suite.Criterion(2, "metric oracle equivalence", 10, MetricOracle);
  suite.Criterion(3, "gradient correctness", 60, Gradients);
  suite.Criterion(4, "injection arithmetic", 0, Injection);

  // Main protocol runs shared by criteria 5, 6, 8 and 10.
  std::vector<RunManifest> runs;
  std::vector<double> run_seconds;
  for (std::uint64_t seed : kSeeds) {
    ExperimentConfig cfg = BaseConfig(seed, work / ("main_seed" + std::to_string(seed)));
    cfg.finetune_fractions = {0.01, 0.2};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      runs.push_back(harness::RunPipeline(cfg));
    } catch (const std::exception& e) {
      std::cout << "      main run seed " << seed << " failed: " << e.what() << std::endl;
      runs.emplace_back();
    }
    run_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::ostringstream row;
    harness::WriteSummaryCsv({runs[i].summary}, row);
    const std::string csv = row.str();
    suite.Note("seed " + std::to_string(kSeeds[i]) + " summary (" + Fixed(run_seconds[i], 1) + " s): " +
               csv.substr(csv.find('\n') + 1, csv.size() - csv.find('\n') - 2));
  }

  auto metric = [&](std::size_t run, const std::string& label, int k) -> double {
    const MetricsReport* r = runs[run].Find(label);
    if (!r) throw std::runtime_error("missing report '" + label + "' for seed " + std::to_string(kSeeds[run]));
    return r->RecallAt(k);
  };

  suite.Criterion(5, "watermark embedding (validity R@1 >= 0.9 in >= 2 of 3 seeds, n=5, WDR=0.1)", 0,
                  [&](std::string& detail) {
                    int ok = 0;
                    for (std::size_t i = 0; i < runs.size(); ++i) {
                      const double v = metric(i, "watermarked/validity", 1);
                      ok += v >= 0.9 ? 1 : 0;
                      detail += (i ? ", " : "") + std::string("seed ") + std::to_string(kSeeds[i]) + ": " + Fixed(v);
                      if (run_seconds[i] >= 600) return false;
                    }
                    detail = "R@1 " + detail + " (" + std::to_string(ok) + "/3 >= 0.9)";
                    return ok >= 2;
                  });

  suite.Criterion(6, "utility preservation (wm validation R@10 >= 0.9 x oracle, 3 seeds)", 0,
                  [&](std::string& detail) {
                    bool all = true;
                    for (std::size_t i = 0; i < runs.size(); ++i) {
                      const double o = metric(i, "oracle/utility/validation", 10);
                      const double w = metric(i, "watermarked/utility/validation", 10);
                      all = all && w >= 0.9 * o;
                      detail += (i ? ", " : "") + std::string("seed ") + std::to_string(kSeeds[i]) + ": " + Fixed(w) +
                                " vs " + Fixed(o) + " (ratio " + Fixed(o > 0 ? w / o : 0.0, 3) + ")";
                    }
                    return all;
                  });

  suite.Criterion(7, "distillation retention (n=2 R@10 >= 0.5 each seed; mean n=2 >= mean n=20)", 0,
                  [&](std::string& detail) {
                    double sum2 = 0.0, sum20 = 0.0;
                    bool each = true;
                    for (std::uint64_t seed : kSeeds) {
                      const auto t0 = std::chrono::steady_clock::now();
                      ExperimentConfig cfg = BaseConfig(seed, work / ("distill_seed" + std::to_string(seed)));
                      cfg.watermark.initial = InitialItem::Pop();
                      cfg.finetune_enabled = false;
                      const auto res = harness::RunSweep(cfg, harness::SweepAxis::kN, {"2", "20"});
                      const double r2 = res.runs[0].Find("distill/validity")->RecallAt(10);
                      const double r20 = res.runs[1].Find("distill/validity")->RecallAt(10);
                      const double secs =
                          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                      sum2 += r2;
                      sum20 += r20;
                      each = each && r2 >= 0.5 && secs < 900;
                      detail += (detail.empty() ? "" : ", ") + std::string("seed ") + std::to_string(seed) +
                                ": n=2 " + Fixed(r2) + " / n=20 " + Fixed(r20) + " (" + Fixed(secs, 0) + " s)";
                    }
                    detail += "; means " + Fixed(sum2 / 3) + " vs " + Fixed(sum20 / 3);
                    return each && sum2 >= sum20;
                  });

  suite.Criterion(8, "fine-tuning robustness (1% data: validity R@10 >= 0.8 in >= 2 of 3 seeds)", 0,
                  [&](std::string& detail) {
                    int ok = 0;
                    std::ofstream scatter(work / "finetune_scatter_20pct.csv");
                    scatter << "seed,fraction,validity_r10,utility_r10\n";
                    for (std::size_t i = 0; i < runs.size(); ++i) {
                      const double v1 = metric(i, "finetune@1%/validity", 10);
                      ok += v1 >= 0.8 ? 1 : 0;
                      detail += (i ? ", " : "") + std::string("seed ") + std::to_string(kSeeds[i]) + ": " + Fixed(v1);
                      for (const auto& p : runs[i].finetune_scatter) {
                        scatter << kSeeds[i] << ',' << p.fraction << ',' << Fixed(p.validity_r10, 6) << ','
                                << Fixed(p.utility_r10, 6) << '\n';
                      }
                    }
                    detail = "R@10 " + detail + " (" + std::to_string(ok) + "/3 >= 0.8)";
                    return ok >= 2;
                  });
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (const MetricsReport* u = runs[i].Find("finetune@1%/utility/test")) {
      suite.Note("seed " + std::to_string(kSeeds[i]) + " 1% fine-tune test utility R@10 " + Fixed(u->RecallAt(10)) +
                 " (watermarked " + Fixed(metric(i, "watermarked/utility/test", 10)) + ")");
    }
  }
  suite.Note("20% fine-tuning scatter (validity R@10, utility R@10), emitted not asserted:");
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (const auto& p : runs[i].finetune_scatter) {
      if (p.fraction == 0.2) {
        suite.Note("seed " + std::to_string(kSeeds[i]) + ": validity " + Fixed(p.validity_r10) + ", utility " +
                   Fixed(p.utility_r10));
      }
    }
  }

  suite.Criterion(9, "range-study separation (top-M cross-detection R@100 > 0 in >= 1 of 10 trials)", 600,
                  [&](std::string& detail) {
                    const ExperimentConfig base = BaseConfig(1, {});
                    const auto d = harness::PrepareData(base);
                    std::vector<std::unique_ptr<Scorer>> oracles;
                    for (std::uint64_t s = 101; s <= 105; ++s) {
                      ExperimentConfig c = base;
                      c.seed = s;
                      oracles.push_back(harness::TrainOracle(c, d));
                    }
                    int cross_hits = 0, self_zero = 0;
                    double top_sum = 0.0, bottom_cross_sum = 0.0;
                    for (int t = 0; t < 10; ++t) {
                      const std::size_t a = static_cast<std::size_t>(t % 5);
                      const std::size_t b = (a + 1 + static_cast<std::size_t>(t / 5)) % 5;
                      WatermarkSpec spec;
                      spec.seed = 1000 + static_cast<std::uint64_t>(t);
                      spec.range = CandidateRange::kTopDiagnostic;
                      const auto top = GenerateWatermark(*oracles[a], spec, d.full);
                      const double r = Verify(*oracles[b], top, {100}).metrics.RecallAt(100);
                      cross_hits += r > 0.0 ? 1 : 0;
                      top_sum += r;
                      spec.range = CandidateRange::kBottom;
                      const auto bottom = GenerateWatermark(*oracles[a], spec, d.full);
                      self_zero += AllZero(Verify(*oracles[a], bottom, kKs).metrics) ? 1 : 0;
                      bottom_cross_sum += Verify(*oracles[b], bottom, {100}).metrics.RecallAt(100);
                    }
                    detail = "top-100 cross R@100 > 0 in " + std::to_string(cross_hits) + "/10 trials (mean " +
                             Fixed(top_sum / 10) + "); bottom-100 self-detection zero in " +
                             std::to_string(self_zero) + "/10; bottom-100 cross R@100 mean " +
                             Fixed(bottom_cross_sum / 10) + " (reported)";
                    return cross_hits >= 1 && self_zero == 10;
                  });

  suite.Criterion(10, "determinism (rerun byte-reproduces checkpoints and metrics)", 0, [&](std::string& detail) {
    ExperimentConfig cfg = BaseConfig(kSeeds[0], work / "main_seed1_rerun");
    cfg.finetune_fractions = {0.01, 0.2};
    const RunManifest again = harness::RunPipeline(cfg);
    const RunManifest& first = runs[0];
    std::size_t same = 0, ckpts = 0;
    for (const auto& a : first.artifacts) {
      const auto* b = again.FindArtifact(a.name);
      const bool is_ckpt = a.file.ends_with(".ckpt");
      ckpts += is_ckpt ? 1 : 0;
      if (b && b->digest == a.digest &&
          ReadFileBytes((fs::path(first.artifacts.empty() ? "" : work / "main_seed1") / a.file).string()) ==
              ReadFileBytes((work / "main_seed1_rerun" / b->file).string())) {
        ++same;
      }
    }
    const bool metrics_equal = first.reports == again.reports;
    detail = std::to_string(same) + "/" + std::to_string(first.artifacts.size()) + " artifacts byte-identical (" +
             std::to_string(ckpts) + " checkpoints); " + std::to_string(first.reports.size()) + " metric reports " +
             (metrics_equal ? "identical" : "DIFFER");
    return !first.artifacts.empty() && same == first.artifacts.size() && again.artifacts.size() == same &&
           metrics_equal;
  });

  std::cout << (suite.failures() == 0 ? "ALL CRITERIA PASSED" : std::to_string(suite.failures()) + " CRITERIA FAILED")
            << std::endl;
  return suite.failures() == 0 ? 0 : 1;
}
