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

#ifndef AOWREC_HARNESS_REPORT_HPP_
#define AOWREC_HARNESS_REPORT_HPP_

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "aowrec/harness/pipeline.hpp"
#include "aowrec/metrics.hpp"

namespace aowrec::harness {

// 1.0 -> "100.00"; missing -> "-".
inline std::string FormatPercent(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *v * 100.0);
  return buf;
}

inline const std::vector<std::string>& SummaryColumns() {
  static const std::vector<std::string> cols = {"dataset",   "validity_R@1", "oracle_R@10",
                                                "wm_R@10",   "distill_R@10", "finetune_R@10"};
  return cols;
}

inline std::vector<std::string> SummaryCells(const RunSummary& s) {
  return {s.dataset,
          FormatPercent(s.validity_r1),
          FormatPercent(s.oracle_r10),
          FormatPercent(s.wm_r10),
          FormatPercent(s.distill_r10),
          FormatPercent(s.finetune_r10)};
}

inline void WriteSummaryCsv(const std::vector<RunSummary>& rows, std::ostream& out) {
  const auto& cols = SummaryColumns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : rows) {
    const auto cells = SummaryCells(r);
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << aowrec::detail::CsvField(cells[i]);
    out << '\n';
  }
}

// Right-aligned text table; the first column is left-aligned.
inline void WriteTextTable(const std::vector<std::string>& header,
                           const std::vector<std::vector<std::string>>& rows, std::ostream& out) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      const std::string& s = c < cells.size() ? cells[c] : std::string();
      const std::string pad(width[c] - s.size(), ' ');
      out << (c ? "  " : "") << (c == 0 ? s + pad : pad + s);
    }
    out << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (const auto& r : rows) line(r);
}

// Text rendering: the summary row, then every metrics report as R@k / N@k
// percentages.
inline void WriteTextReport(const RunManifest& m, std::ostream& out) {
  out << "Run summary (desk-scale defaults; percentages)\n\n";
  WriteTextTable(SummaryColumns(), {SummaryCells(m.summary)}, out);
  if (!m.reports.empty()) {
    out << "\nMetrics\n\n";
    std::vector<int> ks;
    for (const auto& r : m.reports) {
      for (int k : r.ks) {
        if (std::find(ks.begin(), ks.end(), k) == ks.end()) ks.push_back(k);
      }
    }
    std::sort(ks.begin(), ks.end());
    std::vector<std::string> header = {"label"};
    for (int k : ks) header.push_back("R@" + std::to_string(k));
    for (int k : ks) header.push_back("N@" + std::to_string(k));
    header.push_back("queries");
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : m.reports) {
      std::vector<std::string> row = {r.label};
      auto cell = [&](const std::vector<double>& v, int k) {
        auto it = std::find(r.ks.begin(), r.ks.end(), k);
        return it == r.ks.end() ? std::string("-")
                                : FormatPercent(v[static_cast<std::size_t>(it - r.ks.begin())]);
      };
      for (int k : ks) row.push_back(cell(r.recall, k));
      for (int k : ks) row.push_back(cell(r.ndcg, k));
      row.push_back(std::to_string(r.num_queries));
      rows.push_back(std::move(row));
    }
    WriteTextTable(header, rows, out);
  }
  if (!m.finetune_scatter.empty()) {
    out << "\nFine-tuning: watermark validity vs utility (R@10)\n\n";
    std::vector<std::vector<std::string>> rows;
    for (const auto& p : m.finetune_scatter) {
      char frac[32];
      std::snprintf(frac, sizeof(frac), "%g%%", p.fraction * 100.0);
      rows.push_back({frac, FormatPercent(p.validity_r10), FormatPercent(p.utility_r10)});
    }
    WriteTextTable({"attacker_data", "validity_R@10", "utility_R@10"}, rows, out);
  }
  if (!m.warnings.empty()) {
    out << "\nWarnings\n";
    for (const auto& w : m.warnings) out << "  - " << w << '\n';
  }
}

inline std::string ReportFileStem(const std::string& label) {
  std::string s = label;
  for (char& c : s) {
    if (c == '/' || c == '@' || c == '%' || c == ' ') c = '_';
  }
  return s;
}

// Writes metrics.csv (all stages), reports/<stage>.csv, summary.csv,
// summary.txt and finetune_scatter.csv under `out_dir`.
inline void EmitReport(const RunManifest& m, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "reports");
  {
    std::ofstream out(fs::path(out_dir) / "metrics.csv", std::ios::trunc);
    WriteMetricsCsv(m.reports, out);
  }
  for (const auto& r : m.reports) {
    std::ofstream out(fs::path(out_dir) / "reports" / (ReportFileStem(r.label) + ".csv"), std::ios::trunc);
    WriteMetricsCsv(std::span<const MetricsReport>(&r, 1), out);
  }
  {
    std::ofstream out(fs::path(out_dir) / "summary.csv", std::ios::trunc);
    WriteSummaryCsv({m.summary}, out);
  }
  {
    std::ofstream out(fs::path(out_dir) / "summary.txt", std::ios::trunc);
    WriteTextReport(m, out);
  }
  if (!m.finetune_scatter.empty()) {
    std::ofstream out(fs::path(out_dir) / "finetune_scatter.csv", std::ios::trunc);
    out << "fraction,validity_r10,utility_r10\n";
    for (const auto& p : m.finetune_scatter) {
      out << aowrec::detail::FormatReal(p.fraction) << ',' << aowrec::detail::FormatReal(p.validity_r10) << ','
          << aowrec::detail::FormatReal(p.utility_r10) << '\n';
    }
  }
}

}  // namespace aowrec::harness

#endif  // AOWREC_HARNESS_REPORT_HPP_
