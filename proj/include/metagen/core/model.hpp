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

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "metagen/core/errors.hpp"
#include "metagen/testcase/parser.hpp"

namespace metagen {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Metamorphic relations

enum class MrCode { MR1 = 1, MR2, MR3, MR4, MR5, MR6, MR7, MR8, MR9 };
enum class MrTarget { Description, TestCase };

inline constexpr std::array<MrCode, 9> kAllMrs = {MrCode::MR1, MrCode::MR2, MrCode::MR3,
                                                  MrCode::MR4, MrCode::MR5, MrCode::MR6,
                                                  MrCode::MR7, MrCode::MR8, MrCode::MR9};
inline constexpr std::array<MrCode, 4> kDescriptionMrs = {MrCode::MR1, MrCode::MR2, MrCode::MR3,
                                                          MrCode::MR4};
inline constexpr std::array<MrCode, 5> kTestCaseMrs = {MrCode::MR5, MrCode::MR6, MrCode::MR7,
                                                       MrCode::MR8, MrCode::MR9};

inline int mr_number(MrCode c) { return static_cast<int>(c); }

inline MrTarget mr_target(MrCode c) {
  return mr_number(c) <= 4 ? MrTarget::Description : MrTarget::TestCase;
}

inline std::string_view mr_name(MrCode c) {
  switch (c) {
    case MrCode::MR1: return "Negation";
    case MrCode::MR2: return "Translation";
    case MrCode::MR3: return "StepwiseRedefinition";
    case MrCode::MR4: return "Paraphrase";
    case MrCode::MR5: return "VariableSwap";
    case MrCode::MR6: return "InputPermutation";
    case MrCode::MR7: return "AlgebraicDistributive";
    case MrCode::MR8: return "DomainSubset";
    case MrCode::MR9: return "IncrementalData";
  }
  return "?";
}

inline std::string mr_label(MrCode c) { return "MR" + std::to_string(mr_number(c)); }

/// Accepts "MR5", "mr5" or "5". Throws DomainError otherwise.
inline MrCode parse_mr(std::string_view text) {
  std::string s(text);
  if (s.size() > 2 && (s[0] == 'M' || s[0] == 'm') && (s[1] == 'R' || s[1] == 'r')) s = s.substr(2);
  if (s.size() == 1 && s[0] >= '1' && s[0] <= '9') return static_cast<MrCode>(s[0] - '0');
  throw DomainError("unknown metamorphic relation '" + std::string(text) + "'");
}

struct MRKind {
  MrCode code = MrCode::MR1;

  MrTarget target() const { return mr_target(code); }
  std::string_view name() const { return mr_name(code); }
  std::string label() const { return mr_label(code); }
  friend bool operator==(const MRKind&, const MRKind&) = default;
};

// ---------------------------------------------------------------------------
// Tasks and variants

enum class DatasetTag { HumanEvalPro, MbppPro, Custom };

inline std::string_view to_string(DatasetTag t) {
  switch (t) {
    case DatasetTag::HumanEvalPro: return "humaneval-pro";
    case DatasetTag::MbppPro: return "mbpp-pro";
    case DatasetTag::Custom: return "custom";
  }
  return "custom";
}

inline DatasetTag parse_dataset_tag(std::string_view s) {
  if (s == "humaneval-pro") return DatasetTag::HumanEvalPro;
  if (s == "mbpp-pro") return DatasetTag::MbppPro;
  if (s == "custom") return DatasetTag::Custom;
  throw DomainError("unknown dataset tag '" + std::string(s) + "'");
}

struct Task {
  std::string id;
  std::string description;
  std::string entry_point;
  std::string oracle_solution;
  std::vector<std::string> oracle_tests;
  DatasetTag dataset = DatasetTag::Custom;
};

enum class VariantStatus { Pending, Accepted, Rejected, Exhausted };

struct DescriptionVariant {
  std::string task_id;
  MRKind mr;
  std::string text;
  std::optional<double> similarity;
  VariantStatus status = VariantStatus::Pending;
  int attempt = 1;
};

enum class ExpectedState { AsTransformed, PendingOracle, OracleFilled };
enum class TestStatus { Pending, Valid, Invalid, Duplicate };
enum class VariantSource { RuleBased, LLMBased };

struct TestVariant {
  std::string task_id;
  size_t origin_index = 0;
  MRKind mr;
  int rule_index = 0;  // sub-rule within an MR (MR9 has two)
  testcase::AssertionCase assertion;
  ExpectedState expected_state = ExpectedState::PendingOracle;
  TestStatus status = TestStatus::Pending;
  VariantSource source = VariantSource::RuleBased;
  std::string reason;  // why a variant was marked Invalid
};

/// Which description pool a candidate was generated from.
struct Origin {
  enum class Kind { Base, SingleMR, CMA };
  Kind kind = Kind::Base;
  MrCode mr = MrCode::MR1;  // meaningful only for SingleMR

  static Origin base() { return {}; }
  static Origin single(MrCode c) { return {Kind::SingleMR, c}; }
  static Origin cma() { return {Kind::CMA, MrCode::MR1}; }

  std::string label() const {
    switch (kind) {
      case Kind::Base: return "Base";
      case Kind::CMA: return "CMA";
      case Kind::SingleMR: return mr_label(mr);
    }
    return "Base";
  }
  static Origin parse(std::string_view s) {
    if (s == "Base") return base();
    if (s == "CMA") return cma();
    return single(parse_mr(s));
  }
  friend bool operator==(const Origin& a, const Origin& b) {
    return a.kind == b.kind && (a.kind != Kind::SingleMR || a.mr == b.mr);
  }
};

enum class ExtractionMethod { Fenced, FunctionRun, Failed };

struct CandidateSolution {
  std::string task_id;
  Origin origin;
  int sample_index = 0;
  std::string source_code;
  std::string raw_response_id;
  ExtractionMethod extraction = ExtractionMethod::Failed;
  std::string error;  // provider or extraction failure, empty on success

  bool usable() const { return !source_code.empty(); }
};

struct RunMetrics {
  double pass_at_1 = 0.0;
  double pass_at_5 = 0.0;
  double branch_coverage_pct = 0.0;
  double correctness_rate_pct = 0.0;
  std::uint64_t tokens_in = 0;
  std::uint64_t tokens_out = 0;
};

/// Sanity gate over aggregated metrics: bounds and pass@1 <= pass@5.
inline bool pass_upper_bound_check(const RunMetrics& m) {
  auto in = [](double v, double lo, double hi) { return std::isfinite(v) && v >= lo && v <= hi; };
  return in(m.pass_at_1, 0.0, 1.0) && in(m.pass_at_5, 0.0, 1.0) && m.pass_at_1 <= m.pass_at_5 &&
         in(m.branch_coverage_pct, 0.0, 100.0) && in(m.correctness_rate_pct, 0.0, 100.0);
}

// ---------------------------------------------------------------------------
// JSON (run-ledger payloads)

NLOHMANN_JSON_SERIALIZE_ENUM(VariantStatus, {{VariantStatus::Pending, "Pending"},
                                             {VariantStatus::Accepted, "Accepted"},
                                             {VariantStatus::Rejected, "Rejected"},
                                             {VariantStatus::Exhausted, "Exhausted"}})
NLOHMANN_JSON_SERIALIZE_ENUM(ExpectedState, {{ExpectedState::AsTransformed, "AsTransformed"},
                                             {ExpectedState::PendingOracle, "PendingOracle"},
                                             {ExpectedState::OracleFilled, "OracleFilled"}})
NLOHMANN_JSON_SERIALIZE_ENUM(TestStatus, {{TestStatus::Pending, "Pending"},
                                          {TestStatus::Valid, "Valid"},
                                          {TestStatus::Invalid, "Invalid"},
                                          {TestStatus::Duplicate, "Duplicate"}})
NLOHMANN_JSON_SERIALIZE_ENUM(VariantSource, {{VariantSource::RuleBased, "RuleBased"},
                                             {VariantSource::LLMBased, "LLMBased"}})
NLOHMANN_JSON_SERIALIZE_ENUM(ExtractionMethod, {{ExtractionMethod::Fenced, "Fenced"},
                                                {ExtractionMethod::FunctionRun, "FunctionRun"},
                                                {ExtractionMethod::Failed, "Failed"}})

inline void to_json(json& j, const MRKind& m) { j = m.label(); }
inline void from_json(const json& j, MRKind& m) { m.code = parse_mr(j.get<std::string>()); }

inline void to_json(json& j, const Origin& o) { j = o.label(); }
inline void from_json(const json& j, Origin& o) { o = Origin::parse(j.get<std::string>()); }

inline void to_json(json& j, const DatasetTag& t) { j = std::string(to_string(t)); }
inline void from_json(const json& j, DatasetTag& t) { t = parse_dataset_tag(j.get<std::string>()); }

inline void to_json(json& j, const Task& t) {
  j = json{{"id", t.id},
           {"description", t.description},
           {"entry_point", t.entry_point},
           {"oracle_solution", t.oracle_solution},
           {"oracle_tests", t.oracle_tests},
           {"dataset", t.dataset}};
}
inline void from_json(const json& j, Task& t) {
  j.at("id").get_to(t.id);
  j.at("description").get_to(t.description);
  j.at("entry_point").get_to(t.entry_point);
  j.at("oracle_solution").get_to(t.oracle_solution);
  j.at("oracle_tests").get_to(t.oracle_tests);
  j.at("dataset").get_to(t.dataset);
}

inline void to_json(json& j, const DescriptionVariant& v) {
  j = json{{"task_id", v.task_id}, {"mr", v.mr},         {"text", v.text},
           {"similarity", nullptr}, {"status", v.status}, {"attempt", v.attempt}};
  if (v.similarity) j["similarity"] = *v.similarity;
}
inline void from_json(const json& j, DescriptionVariant& v) {
  j.at("task_id").get_to(v.task_id);
  j.at("mr").get_to(v.mr);
  j.at("text").get_to(v.text);
  v.similarity.reset();
  if (!j.at("similarity").is_null()) v.similarity = j.at("similarity").get<double>();
  j.at("status").get_to(v.status);
  j.at("attempt").get_to(v.attempt);
}

// Cases are stored in source form and re-parsed on read.
inline json assertion_to_json(const testcase::AssertionCase& c) {
  json j{{"call", testcase::render_call(c)}, {"expected", nullptr}, {"raw", c.raw}};
  if (c.expected) j["expected"] = c.expected->render();
  return j;
}
inline testcase::AssertionCase assertion_from_json(const json& j) {
  std::string expected = j.at("expected").is_null() ? "None" : j.at("expected").get<std::string>();
  auto c = testcase::parse_test_case("assert " + j.at("call").get<std::string>() + " == " + expected);
  if (j.at("expected").is_null()) c.expected.reset();
  c.raw = j.at("raw").get<std::string>();
  return c;
}

inline void to_json(json& j, const TestVariant& v) {
  j = json{{"task_id", v.task_id},
           {"origin_index", v.origin_index},
           {"mr", v.mr},
           {"rule_index", v.rule_index},
           {"case", assertion_to_json(v.assertion)},
           {"expected_state", v.expected_state},
           {"status", v.status},
           {"source", v.source},
           {"reason", v.reason}};
}
inline void from_json(const json& j, TestVariant& v) {
  j.at("task_id").get_to(v.task_id);
  j.at("origin_index").get_to(v.origin_index);
  j.at("mr").get_to(v.mr);
  j.at("rule_index").get_to(v.rule_index);
  v.assertion = assertion_from_json(j.at("case"));
  j.at("expected_state").get_to(v.expected_state);
  j.at("status").get_to(v.status);
  j.at("source").get_to(v.source);
  j.at("reason").get_to(v.reason);
}

inline void to_json(json& j, const CandidateSolution& c) {
  j = json{{"task_id", c.task_id},
           {"origin", c.origin},
           {"sample_index", c.sample_index},
           {"source_code", c.source_code},
           {"raw_response_id", c.raw_response_id},
           {"extraction", c.extraction},
           {"error", c.error}};
}
inline void from_json(const json& j, CandidateSolution& c) {
  j.at("task_id").get_to(c.task_id);
  j.at("origin").get_to(c.origin);
  j.at("sample_index").get_to(c.sample_index);
  j.at("source_code").get_to(c.source_code);
  j.at("raw_response_id").get_to(c.raw_response_id);
  j.at("extraction").get_to(c.extraction);
  j.at("error").get_to(c.error);
}

inline void to_json(json& j, const RunMetrics& m) {
  j = json{{"pass_at_1", m.pass_at_1},
           {"pass_at_5", m.pass_at_5},
           {"branch_coverage_pct", m.branch_coverage_pct},
           {"correctness_rate_pct", m.correctness_rate_pct},
           {"tokens_in", m.tokens_in},
           {"tokens_out", m.tokens_out}};
}
inline void from_json(const json& j, RunMetrics& m) {
  j.at("pass_at_1").get_to(m.pass_at_1);
  j.at("pass_at_5").get_to(m.pass_at_5);
  j.at("branch_coverage_pct").get_to(m.branch_coverage_pct);
  j.at("correctness_rate_pct").get_to(m.correctness_rate_pct);
  j.at("tokens_in").get_to(m.tokens_in);
  j.at("tokens_out").get_to(m.tokens_out);
}

}  // namespace metagen
