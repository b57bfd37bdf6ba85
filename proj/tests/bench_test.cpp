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

#include "metagen/bench/dataset.hpp"
#include "metagen/bench/report.hpp"

#include <gtest/gtest.h>

#include <fstream>

namespace metagen::bench {
namespace {

namespace fs = std::filesystem;

fs::path fixture(const std::string& name) { return fs::path(METAGEN_TEST_DIR) / "fixtures" / name; }

fs::path write_temp(const std::string& name, const std::string& content) {
  auto p = fs::temp_directory_path() / ("metagen_bench_" + std::to_string(::getpid()) + "_" + name);
  std::ofstream(p) << content;
  return p;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start < text.size()) {
    size_t end = text.find('\n', start);
    out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

TEST(LoadTasks, PalindromeFixtureHasFourOracleTests) {
  auto tasks = load_tasks({fixture("palindrome.jsonl"), {}, DatasetTag::Custom});
  ASSERT_EQ(tasks.size(), 1u);
  EXPECT_EQ(tasks[0].entry_point, "sum_of_next_smallest_palindromes");
  EXPECT_EQ(tasks[0].oracle_tests.size(), 4u);
  EXPECT_EQ(tasks[0].dataset, DatasetTag::Custom);
}

TEST(LoadTasks, ArrayTestsField) {
  auto tasks = load_tasks({fixture("octagonal.jsonl"), {}, DatasetTag::MbppPro});
  ASSERT_EQ(tasks.size(), 1u);
  EXPECT_EQ(tasks[0].oracle_tests.size(), 3u);
  EXPECT_EQ(tasks[0].dataset, DatasetTag::MbppPro);
}

TEST(LoadTasks, MappedFieldsAndInferredEntryPoint) {
  FieldMapping m;
  m.id = "task_id";
  m.description = "new_problem";
  m.solution = "new_solution";
  m.tests = "test_code";
  m.entry_point = "";
  auto tasks = load_tasks({fixture("humaneval_pro_shape.jsonl"), m, DatasetTag::HumanEvalPro});
  ASSERT_EQ(tasks.size(), 3u);
  EXPECT_EQ(tasks[0].id, "HumanEvalPro/0");
  EXPECT_EQ(tasks[0].entry_point, "sum_abs_lists");
  EXPECT_EQ(tasks[1].entry_point, "total_vowels");
  EXPECT_EQ(tasks[2].entry_point, "largest_evens");
  EXPECT_EQ(tasks[0].oracle_tests.size(), 2u);
}

TEST(LoadTasks, MappingFromJson) {
  FieldMapping m = json{{"id", "task_id"}, {"tests", "test_code"}}.get<FieldMapping>();
  EXPECT_EQ(m.id, "task_id");
  EXPECT_EQ(m.tests, "test_code");
  EXPECT_EQ(m.description, "description");
}

TEST(LoadTasks, MissingTestsCitesRecord) {
  auto p = write_temp("missing.jsonl",
                      R"({"id": "t-17", "description": "d", "entry_point": "f", "solution": "def f():\n    pass\n"})"
                      "\n");
  try {
    load_tasks({p, {}, DatasetTag::Custom});
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("t-17"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("tests"), std::string::npos) << e.what();
  }
}

TEST(LoadTasks, Rejections) {
  std::string good = R"({"id": "a", "description": "d", "entry_point": "f", "solution": "def f():\n    return 1\n", "tests": "assert f() == 1"})";
  EXPECT_THROW(load_tasks({write_temp("dup.jsonl", good + "\n" + good + "\n"), {}, DatasetTag::Custom}), SchemaError);
  std::string undefined = R"({"id": "a", "description": "d", "entry_point": "g", "solution": "def f():\n    return 1\n", "tests": "assert g() == 1"})";
  EXPECT_THROW(load_tasks({write_temp("undef.jsonl", undefined + "\n"), {}, DatasetTag::Custom}), SchemaError);
  EXPECT_THROW(load_tasks({write_temp("bad.jsonl", "{not json\n"), {}, DatasetTag::Custom}), SchemaError);
  std::string no_asserts = R"J({"id": "a", "description": "d", "entry_point": "f", "solution": "def f():\n    return 1\n", "tests": "print(1)"})J";
  EXPECT_THROW(load_tasks({write_temp("noassert.jsonl", no_asserts + "\n"), {}, DatasetTag::Custom}), SchemaError);
  EXPECT_THROW(load_tasks({"/nonexistent/file.jsonl", {}, DatasetTag::Custom}), IoError);
}

TEST(LoadTasks, PrefixNamedFunctionIsNotTheEntryPoint) {
  EXPECT_FALSE(defines_function("def foobar(x):\n    pass\n", "foo"));
  EXPECT_TRUE(defines_function("import os\ndef foo (x):\n    pass\n", "foo"));
  EXPECT_TRUE(defines_function("class A:\n    def foo(self):\n        pass\n", "foo"));
}

TEST(Report, PassTableRow) {
  auto r = emit_report(read_ledger(fixture("pass_ledger.jsonl")), Layout::PassTable);
  auto ls = lines(r.text);
  ASSERT_EQ(ls.size(), 3u);
  EXPECT_EQ(ls[1], "GPT-OSS & HumanEval Pro & 60 & 69 & +9 & 61 & 70 & +9");
  EXPECT_EQ(ls[2], "GPT-OSS & MBPP Pro & 53 & 70 & +17 & 54 & 71 & +17");
  EXPECT_NE(r.csv.find("GPT-OSS,HumanEval Pro,60,69,+9,61,70,+9\r\n"), std::string::npos);
}

TEST(Report, ImprovementFromRoundedValues) {
  std::vector<LedgerRecord> recs;
  MetricsRecord base{"codegen", "Base", "m", "d", 0.604, 0.606};
  MetricsRecord cma{"codegen", "CMA", "m", "d", 0.596, 0.601};
  recs.push_back({kRunMetricsKind, "r", 0, to_json(base)});
  recs.push_back({kRunMetricsKind, "r", 1, to_json(cma)});
  EXPECT_EQ(lines(emit_report(recs, Layout::PassTable).text)[1], "m & d & 60 & 60 & +0 & 61 & 60 & -1");
}

TEST(Report, PassTableMissingSeries) {
  std::vector<LedgerRecord> recs{{kRunMetricsKind, "r", 0, to_json(MetricsRecord{"codegen", "Base", "m", "d", 0.5, 0.5})}};
  try {
    emit_report(recs, Layout::PassTable);
    FAIL();
  } catch (const MissingMetric& e) {
    EXPECT_NE(std::string(e.what()).find("CMA"), std::string::npos);
  }
}

TEST(Report, CoverageAndCorrectnessRows) {
  auto recs = read_ledger(fixture("testgen_ledger.jsonl"));
  auto cov = lines(emit_report(recs, Layout::CoverageTable).text);
  EXPECT_EQ(cov[0], "Dataset & Oracle tests & GPT-4o & Qwen3-Coder");
  EXPECT_EQ(cov[1], "HumanEval Pro & 99.43 & 99.75 & 99.76");
  EXPECT_EQ(cov[2], "MBPP Pro & 99.36 & 99.81 & 99.73");
  auto corr = lines(emit_report(recs, Layout::CorrectnessTable).text);
  EXPECT_EQ(corr[0], "Model & HumanEval Pro & MBPP Pro");
  EXPECT_EQ(corr[2], "Qwen3-Coder & 85.01 & 93.14");
  EXPECT_THROW(emit_report(recs, Layout::CorrectnessTable, {"Baseline"}), MissingMetric);
}

TEST(Report, TokenRows) {
  auto t = lines(emit_report(read_ledger(fixture("token_ledger.jsonl")), Layout::TokenTable).text);
  ASSERT_EQ(t.size(), 4u);
  EXPECT_EQ(t[1], "base & 106 & 91");
  EXPECT_EQ(t[2], "generator & 258 & 328");
  EXPECT_EQ(t[3], "mutator & 205 & 287");
}

TEST(Report, AblationRows) {
  std::vector<LedgerRecord> recs;
  recs.push_back({kRunMetricsKind, "r", 0, to_json(MetricsRecord{"ablation", "Base", "m", "d", 0.4, 0.5})});
  recs.push_back({kRunMetricsKind, "r", 1, to_json(MetricsRecord{"ablation", "MR3", "m", "d", 0.7, std::nullopt})});
  auto t = lines(emit_report(recs, Layout::AblationTable).text);
  EXPECT_EQ(t[1], "m & d & Base & 40 & 50");
  EXPECT_EQ(t[2], "m & d & MR3 & 70 & -");
}

TEST(Report, EmptyLedgerIsMissingMetric) {
  for (Layout l : {Layout::PassTable, Layout::CoverageTable, Layout::CorrectnessTable, Layout::AblationTable,
                   Layout::TokenTable})
    EXPECT_THROW(emit_report({}, l), MissingMetric) << to_string(l);
}

TEST(Report, DeterministicAcrossRuns) {
  auto recs = read_ledger(fixture("pass_ledger.jsonl"));
  auto a = emit_report(recs, Layout::PassTable);
  auto b = emit_report(read_ledger(fixture("pass_ledger.jsonl")), Layout::PassTable);
  EXPECT_EQ(a.text, b.text);
  EXPECT_EQ(a.csv, b.csv);
}

TEST(Report, CsvQuoting) {
  std::vector<LedgerRecord> recs;
  recs.push_back({kRunMetricsKind, "r", 0, to_json(MetricsRecord{"ablation", "Base", "GPT, \"big\"", "d", 0.4, 0.5})});
  auto r = emit_report(recs, Layout::AblationTable);
  EXPECT_NE(r.csv.find("\"GPT, \"\"big\"\"\",d,Base,40,50\r\n"), std::string::npos) << r.csv;
}

TEST(Report, LayoutNames) {
  EXPECT_EQ(parse_layout("pass"), Layout::PassTable);
  EXPECT_EQ(parse_layout("tokens"), Layout::TokenTable);
  EXPECT_THROW(parse_layout("nope"), ConfigError);
}

}  // namespace
}  // namespace metagen::bench
