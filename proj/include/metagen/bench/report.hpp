// Copyright 2026 The metagen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "metagen/bench/ledger.hpp"
#include "metagen/llm/usage.hpp"

namespace metagen::bench {

inline constexpr const char* kRunMetricsKind = "run_metrics";

enum class Layout { PassTable, CoverageTable, CorrectnessTable, AblationTable, TokenTable };

inline std::string_view to_string(Layout l) {
  switch (l) {
    case Layout::PassTable: return "pass";
    case Layout::CoverageTable: return "coverage";
    case Layout::CorrectnessTable: return "correctness";
    case Layout::AblationTable: return "ablation";
    case Layout::TokenTable: return "tokens";
  }
  return "pass";
}

inline Layout parse_layout(std::string_view s) {
  for (Layout l : {Layout::PassTable, Layout::CoverageTable, Layout::CorrectnessTable, Layout::AblationTable,
                   Layout::TokenTable})
    if (to_string(l) == s) return l;
  throw ConfigError("unknown report layout '" + std::string(s) + "' (pass|coverage|correctness|ablation|tokens)");
}

/// Payload of a run_metrics record. Series names: Base / CMA / MRn for code
/// generation and ablation, Oracle / CMA / Baseline for test suites.
struct MetricsRecord {
  std::string experiment;  // codegen | testgen | ablation
  std::string series;
  std::string model;
  std::string dataset;
  std::optional<double> pass_at_1, pass_at_5, branch_coverage_pct, correctness_rate_pct;
};

inline json to_json(const MetricsRecord& m) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{{"experiment", m.experiment},
              {"series", m.series},
              {"model", m.model},
              {"dataset", m.dataset},
              {"metrics",
               {{"pass_at_1", opt(m.pass_at_1)},
                {"pass_at_5", opt(m.pass_at_5)},
                {"branch_coverage_pct", opt(m.branch_coverage_pct)},
                {"correctness_rate_pct", opt(m.correctness_rate_pct)}}}};
}

inline MetricsRecord metrics_from_json(const json& j) {
  auto opt = [&](const char* key) -> std::optional<double> {
    const auto& m = j.at("metrics");
    if (!m.contains(key) || m.at(key).is_null()) return std::nullopt;
    return m.at(key).get<double>();
  };
  try {
    return {j.at("experiment").get<std::string>(), j.at("series").get<std::string>(), j.at("model").get<std::string>(),
            j.at("dataset").get<std::string>(),    opt("pass_at_1"),                  opt("pass_at_5"),
            opt("branch_coverage_pct"),            opt("correctness_rate_pct")};
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed run_metrics record: ") + e.what());
  }
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct Report {
  std::string text;  // "a & b & c" rows under a header line
  std::string csv;   // RFC 4180
};

struct ReportOptions {
  std::string series = "CMA";  // which MR-guided series the coverage/correctness tables show
};

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string join(const std::vector<std::string>& cells, const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out += sep;
    out += cells[i];
  }
  return out;
}

inline Report render(const Table& t) {
  Report r;
  r.text = join(t.header, " & ") + "\n";
  for (const auto& row : t.rows) r.text += join(row, " & ") + "\n";
  auto csv_row = [](const std::vector<std::string>& cells) {
    std::vector<std::string> q;
    for (const auto& c : cells) q.push_back(csv_field(c));
    return join(q, ",") + "\r\n";
  };
  r.csv = csv_row(t.header);
  for (const auto& row : t.rows) r.csv += csv_row(row);
  return r;
}

inline int percent(double fraction) { return static_cast<int>(std::lround(fraction * 100.0)); }

inline std::string two_dp(double v) { return fmt::format("{:.2f}", v); }

inline std::string number(double v) {
  if (std::floor(v) == v && std::fabs(v) < 1e15) return fmt::format("{}", static_cast<long long>(v));
  return fmt::format("{:.2f}", v);
}

// Keys in first-appearance order.
template <typename Key>
void remember(std::vector<Key>& order, const Key& k) {
  if (std::find(order.begin(), order.end(), k) == order.end()) order.push_back(k);
}

inline std::vector<MetricsRecord> metrics(const std::vector<LedgerRecord>& records, const std::string& experiment) {
  std::vector<MetricsRecord> out;
  for (const auto& r : records)
    if (r.kind == kRunMetricsKind) {
      auto m = metrics_from_json(r.payload);
      if (m.experiment == experiment) out.push_back(std::move(m));
    }
  return out;
}

// Last record wins for a (model, dataset, series) key.
inline const MetricsRecord* find(const std::vector<MetricsRecord>& ms, const std::string& model,
                                 const std::string& dataset, const std::string& series) {
  const MetricsRecord* hit = nullptr;
  for (const auto& m : ms)
    if (m.model == model && m.dataset == dataset && m.series == series) hit = &m;
  return hit;
}

inline double need(const std::optional<double>& v, const std::string& what) {
  if (!v) throw MissingMetric(what);
  return *v;
}

inline Table pass_table(const std::vector<LedgerRecord>& records) {
  auto ms = metrics(records, "codegen");
  if (ms.empty()) throw MissingMetric("no codegen run_metrics records");
  std::vector<std::pair<std::string, std::string>> keys;
  for (const auto& m : ms) remember(keys, {m.model, m.dataset});
  Table t{{"Model", "Dataset", "Pass@1 Base", "Pass@1 CMA", "Pass@1 Improvement", "Pass@5 Base", "Pass@5 CMA",
           "Pass@5 Improvement"},
          {}};
  for (const auto& [model, dataset] : keys) {
    auto where = model + "/" + dataset;
    const auto* base = find(ms, model, dataset, "Base");
    const auto* cma = find(ms, model, dataset, "CMA");
    if (!base) throw MissingMetric("Base series for " + where);
    if (!cma) throw MissingMetric("CMA series for " + where);
    std::vector<std::string> row{model, dataset};
    for (auto field : {&MetricsRecord::pass_at_1, &MetricsRecord::pass_at_5}) {
      const char* name = field == &MetricsRecord::pass_at_1 ? "pass@1" : "pass@5";
      int b = percent(need(base->*field, fmt::format("Base {} for {}", name, where)));
      int c = percent(need(cma->*field, fmt::format("CMA {} for {}", name, where)));
      row.push_back(std::to_string(b));
      row.push_back(std::to_string(c));
      row.push_back(fmt::format("{:+d}", c - b));  // from the rounded values
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline Table coverage_table(const std::vector<LedgerRecord>& records, const ReportOptions& opts) {
  auto ms = metrics(records, "testgen");
  std::vector<std::string> datasets, models;
  for (const auto& m : ms) {
    if (!m.branch_coverage_pct) continue;
    if (m.series == "Oracle") remember(datasets, m.dataset);
    if (m.series == opts.series) {
      remember(datasets, m.dataset);
      remember(models, m.model);
    }
  }
  if (models.empty()) throw MissingMetric(opts.series + " branch coverage (no testgen records)");
  Table t{{"Dataset", "Oracle tests"}, {}};
  for (const auto& m : models) t.header.push_back(m);
  for (const auto& d : datasets) {
    const MetricsRecord* oracle = nullptr;
    for (const auto& m : ms)
      if (m.dataset == d && m.series == "Oracle" && m.branch_coverage_pct) oracle = &m;
    if (!oracle) throw MissingMetric("Oracle coverage for " + d);
    std::vector<std::string> row{d, two_dp(*oracle->branch_coverage_pct)};
    for (const auto& model : models) {
      const auto* m = find(ms, model, d, opts.series);
      row.push_back(m ? two_dp(need(m->branch_coverage_pct, opts.series + " coverage for " + model + "/" + d)) : "-");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline Table correctness_table(const std::vector<LedgerRecord>& records, const ReportOptions& opts) {
  auto ms = metrics(records, "testgen");
  std::vector<std::string> datasets, models;
  for (const auto& m : ms)
    if (m.series == opts.series && m.correctness_rate_pct) {
      remember(models, m.model);
      remember(datasets, m.dataset);
    }
  if (models.empty()) throw MissingMetric(opts.series + " correctness rate (no testgen records)");
  Table t{{"Model"}, {}};
  for (const auto& d : datasets) t.header.push_back(d);
  for (const auto& model : models) {
    std::vector<std::string> row{model};
    for (const auto& d : datasets) {
      const auto* m = find(ms, model, d, opts.series);
      row.push_back(m && m->correctness_rate_pct ? two_dp(*m->correctness_rate_pct) : "-");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline Table ablation_table(const std::vector<LedgerRecord>& records) {
  auto ms = metrics(records, "ablation");
  if (ms.empty()) throw MissingMetric("no ablation run_metrics records");
  Table t{{"Model", "Dataset", "Configuration", "Pass@1", "Pass@5"}, {}};
  std::vector<std::tuple<std::string, std::string, std::string>> keys;
  for (const auto& m : ms) remember(keys, {m.model, m.dataset, m.series});
  for (const auto& [model, dataset, series] : keys) {
    const auto* m = find(ms, model, dataset, series);
    auto where = series + " for " + model + "/" + dataset;
    t.rows.push_back({model, dataset, series, std::to_string(percent(need(m->pass_at_1, "pass@1 " + where))),
                      m->pass_at_5 ? std::to_string(percent(*m->pass_at_5)) : "-"});
  }
  return t;
}

inline Table token_table(const std::vector<LedgerRecord>& records) {
  auto summary = llm::usage_summary(records);
  if (summary.modules.empty()) throw MissingMetric("no llm_call records");
  Table t{{"Module", "Input tokens", "Output tokens"}, {}};
  for (const auto& m : summary.modules) t.rows.push_back({m.module, number(m.avg_prompt), number(m.avg_completion)});
  return t;
}

}  // namespace detail

inline Table build_table(const std::vector<LedgerRecord>& records, Layout layout, const ReportOptions& opts = {}) {
  switch (layout) {
    case Layout::PassTable: return detail::pass_table(records);
    case Layout::CoverageTable: return detail::coverage_table(records, opts);
    case Layout::CorrectnessTable: return detail::correctness_table(records, opts);
    case Layout::AblationTable: return detail::ablation_table(records);
    case Layout::TokenTable: return detail::token_table(records);
  }
  throw ConfigError("unknown layout");
}

/// Render one result table from ledger records; a pure function of the records.
inline Report emit_report(const std::vector<LedgerRecord>& records, Layout layout, const ReportOptions& opts = {}) {
  return detail::render(build_table(records, layout, opts));
}

}  // namespace metagen::bench
