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

#include "metagen/reviewer.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "metagen/mutator.hpp"
#include "support/fakes.hpp"
#include "support/reference.hpp"

namespace metagen::reviewer {
namespace {

// Scripted gate: attempt i gets scores[i - 1].
GateOutcome run_gate(const std::vector<double>& scores, ReviewConfig cfg = {}) {
  auto mutate = [&](int attempt, std::optional<double>) {
    DescriptionVariant v;
    v.task_id = "t";
    v.mr = MRKind{MrCode::MR4};
    v.text = "candidate " + std::to_string(attempt);
    return v;
  };
  auto score = [&](const std::string& text) {
    int attempt = std::stoi(text.substr(text.find(' ') + 1));
    return scores.at(static_cast<size_t>(attempt - 1));
  };
  return gate_description(mutate, score, cfg);
}

TEST(Gate, AcceptsFirstAttempt) {
  auto g = run_gate({0.93});
  EXPECT_EQ(g.variant.status, VariantStatus::Accepted);
  EXPECT_EQ(g.variant.attempt, 1);
  EXPECT_DOUBLE_EQ(*g.variant.similarity, 0.93);
  EXPECT_EQ(g.history.size(), 1u);
}

TEST(Gate, ExhaustsAfterThreeKeepingBest) {
  auto g = run_gate({0.70, 0.79, 0.75});
  EXPECT_EQ(g.variant.status, VariantStatus::Exhausted);
  EXPECT_EQ(g.variant.attempt, 3);
  EXPECT_DOUBLE_EQ(*g.variant.similarity, 0.79);
  EXPECT_EQ(g.variant.text, "candidate 2");
  ASSERT_EQ(g.history.size(), 3u);
  for (const auto& h : g.history) EXPECT_EQ(h.status, VariantStatus::Rejected);
}

TEST(Gate, AcceptsOnSecondAttempt) {
  auto g = run_gate({0.62, 0.85});
  EXPECT_EQ(g.variant.status, VariantStatus::Accepted);
  EXPECT_EQ(g.variant.attempt, 2);
  EXPECT_EQ(g.history[0].status, VariantStatus::Rejected);
}

TEST(Gate, ThresholdIsInclusive) {
  EXPECT_EQ(run_gate({0.8}).variant.status, VariantStatus::Accepted);
}

TEST(Gate, PreviousScoreFedBack) {
  std::vector<std::optional<double>> fed;
  auto mutate = [&](int, std::optional<double> prev) {
    fed.push_back(prev);
    return DescriptionVariant{"t", MRKind{MrCode::MR1}, "x", std::nullopt, VariantStatus::Pending, 1};
  };
  std::vector<double> scores{0.5, 0.6, 0.9};
  size_t i = 0;
  gate_description(mutate, [&](const std::string&) { return scores[i++]; }, {});
  ASSERT_EQ(fed.size(), 3u);
  EXPECT_FALSE(fed[0]);
  EXPECT_DOUBLE_EQ(*fed[1], 0.5);
  EXPECT_DOUBLE_EQ(*fed[2], 0.6);
}

TEST(Gate, InvalidConfig) {
  ReviewConfig cfg;
  cfg.max_iterations = 0;
  EXPECT_THROW(run_gate({0.9}, cfg), ConfigError);
  cfg = {};
  cfg.similarity_threshold = 1.5;
  EXPECT_THROW(run_gate({0.9}, cfg), ConfigError);
}

// For every sequence: accepted iff some score within budget reaches the
// threshold, at the first such attempt; lowering the threshold never delays
// acceptance; an Accepted variant always carries a score >= threshold.
TEST(Gate, MonotoneThresholdProperty) {
  std::mt19937_64 rng(20261015);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> scores(3);
    for (auto& s : scores) s = u(rng);
    double hi = u(rng), lo = hi * u(rng);
    if (lo <= 0.0) lo = 1e-6;
    ReviewConfig chi, clo;
    chi.similarity_threshold = hi;
    clo.similarity_threshold = lo;
    auto a = run_gate(scores, chi);
    auto b = run_gate(scores, clo);
    std::optional<int> first;
    for (int i = 0; i < 3 && !first; ++i)
      if (scores[static_cast<size_t>(i)] >= hi) first = i + 1;
    if (first) {
      ASSERT_EQ(a.variant.status, VariantStatus::Accepted);
      ASSERT_EQ(a.variant.attempt, *first);
      ASSERT_GE(*a.variant.similarity, hi);
      ASSERT_EQ(b.variant.status, VariantStatus::Accepted);
      ASSERT_LE(b.variant.attempt, a.variant.attempt);
    } else {
      ASSERT_EQ(a.variant.status, VariantStatus::Exhausted);
      ASSERT_EQ(a.variant.attempt, 3);
      ASSERT_DOUBLE_EQ(*a.variant.similarity, *std::max_element(scores.begin(), scores.end()));
    }
  }
}

TEST(Similarity, IdenticalIsOneAndBounded) {
  HashedNgramEmbedder e;
  EXPECT_DOUBLE_EQ(similarity_score(testdata::kOctagonalDescription, testdata::kOctagonalDescription, e), 1.0);
  double s = similarity_score(testdata::kOctagonalDescription, testdata::kOctagonalStepwise, e);
  EXPECT_GT(s, 0.5);
  EXPECT_LT(s, 1.0);
  double far = similarity_score(testdata::kOctagonalDescription, "Reverse a linked list in place.", e);
  EXPECT_LT(far, s);
  EXPECT_THROW(similarity_score("", "x", e), EmptyText);
}

TEST(Similarity, EmbedderIsDeterministicAndNormalised) {
  HashedNgramEmbedder e(256);
  auto a = e.embed("Sum the first ten octagonal numbers");
  EXPECT_EQ(a, e.embed("Sum the first ten octagonal numbers"));
  double n = 0.0;
  for (double x : a) n += x * x;
  EXPECT_NEAR(n, 1.0, 1e-12);
  EXPECT_EQ(a, e.embed("sum THE first ten octagonal numbers!"));
}

TEST(ReviewDescriptions, GatesEachMrAndTreatsBlankAsZero) {
  testdata::ScriptedProvider llm([](const llm::ChatRequest& r) {
    const auto& u = testdata::user_message(r).content;
    if (u.find("numbered list") != std::string::npos) return testdata::kOctagonalStepwise;
    if (u.find("negation") != std::string::npos) return std::string("   ");
    return std::string("Given a list of integers, determine for each integer the sum of the first 10 octagonal "
                       "numbers. If an integer is below 1, return 0 for it.");
  });
  HashedNgramEmbedder e;
  ReviewConfig cfg;
  cfg.similarity_threshold = 0.75;
  Task t{"mbpp/1", testdata::kOctagonalDescription, "sum_of_octagonal_numbers", testdata::kOctagonalCmaCode,
         testdata::kOctagonalOracleTests, DatasetTag::MbppPro};
  auto out = review_descriptions(t, {MrCode::MR1, MrCode::MR4}, llm, e, cfg);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].variant.status, VariantStatus::Exhausted);
  EXPECT_DOUBLE_EQ(*out[0].variant.similarity, 0.0);
  EXPECT_EQ(out[1].variant.status, VariantStatus::Accepted);
  EXPECT_EQ(out[1].variant.attempt, 1);
  EXPECT_EQ(llm.requests().size(), 4u);  // three MR1 attempts + one MR4
  EXPECT_THROW(review_descriptions(t, {MrCode::MR6}, llm, e, cfg), DomainError);
}

Task palindrome_task() {
  return {"palindrome", "Sum the next smallest palindromes.", "sum_of_next_smallest_palindromes",
          testdata::kPalindromeProgram, testdata::kPalindromeOracleTests, DatasetTag::Custom};
}

TEST(ReadProbe, Outcomes) {
  using sandbox::Status;
  auto v = read_probe({"t", Status::Fail, std::string(kProbeMarker) + "[1, 'a']"});
  ASSERT_TRUE(v.value);
  EXPECT_EQ(v.value->render(), "[1, 'a']");
  EXPECT_FALSE(read_probe({"t", Status::Fail, "inner assertion"}).value);
  EXPECT_FALSE(read_probe({"t", Status::Error, "ZeroDivisionError"}).value);
  EXPECT_FALSE(read_probe({"t", Status::Timeout, ""}).value);
  auto obj = read_probe({"t", Status::Fail, std::string(kProbeMarker) + "<object at 0x1>"});
  EXPECT_FALSE(obj.value);
  EXPECT_NE(obj.reason.find("literal"), std::string::npos);
}

TEST(ValidateTestVariants, FillsAllFifteenPalindromeVariants) {
  sandbox::ProcessSandbox sb(testdata::stub_runner_argv());
  auto exp = mutator::expand_suite(palindrome_task(), {MrCode::MR5, MrCode::MR6, MrCode::MR8, MrCode::MR9});
  auto reviewed = validate_test_variants(exp.variants, palindrome_task(), sb);
  ASSERT_EQ(reviewed.size(), 15u);
  std::set<std::string> got, want;
  for (const auto& v : reviewed) {
    EXPECT_EQ(v.status, TestStatus::Valid) << v.reason;
    EXPECT_EQ(v.expected_state, ExpectedState::OracleFilled);
    got.insert(testcase::canonical_key(v.assertion));
  }
  for (const auto& line : testdata::kPalindromeCmaTests)
    want.insert(testcase::canonical_key(testcase::parse_test_case(line)));
  EXPECT_EQ(got, want);
}

TEST(ValidateTestVariants, CorruptedExpectationIsInvalid) {
  sandbox::ProcessSandbox sb(testdata::stub_runner_argv());
  std::vector<TestVariant> vs;
  for (const auto& line : testdata::kPalindromeCmaTests) {
    TestVariant v;
    v.task_id = "palindrome";
    v.assertion = testcase::parse_test_case(line);
    v.expected_state = ExpectedState::AsTransformed;
    vs.push_back(v);
  }
  vs[3].assertion = testcase::parse_test_case("assert sum_of_next_smallest_palindromes([123, 121, 999, 123]) == 1");
  auto reviewed = validate_test_variants(vs, palindrome_task(), sb);
  int valid = 0;
  for (const auto& v : reviewed) valid += v.status == TestStatus::Valid;
  EXPECT_EQ(valid, 14);
  EXPECT_EQ(reviewed[3].status, TestStatus::Invalid);
  EXPECT_FALSE(reviewed[3].reason.empty());
}

TEST(ValidateTestVariants, RaisingOracleAndTimeoutAreInvalid) {
  sandbox::ProcessSandbox sb(testdata::stub_runner_argv());
  Task t{"t", "d", "f", "def f(x):\n    if x < 0:\n        while True:\n            pass\n    return 10 // x\n",
         {"assert f(1) == 10"}, DatasetTag::Custom};
  ReviewConfig cfg;
  cfg.test_timeout_s = 0.5;
  std::vector<TestVariant> vs(3);
  vs[0].assertion = testcase::parse_test_case("assert f(0) == None");
  vs[0].assertion.expected.reset();
  vs[1].assertion = testcase::parse_test_case("assert f(-1) == None");
  vs[1].assertion.expected.reset();
  vs[2].assertion = testcase::parse_test_case("assert f(2) == None");
  vs[2].assertion.expected.reset();
  auto start = std::chrono::steady_clock::now();
  auto r = validate_test_variants(vs, t, sb, cfg);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(1500));
  EXPECT_EQ(r[0].status, TestStatus::Invalid);
  EXPECT_NE(r[0].reason.find("raised"), std::string::npos);
  EXPECT_EQ(r[1].status, TestStatus::Invalid);
  EXPECT_NE(r[1].reason.find("timeout"), std::string::npos);
  EXPECT_EQ(r[2].status, TestStatus::Valid);
  EXPECT_EQ(r[2].assertion.expected->value(), testcase::LiteralValue::integer(5));
}

TEST(ValidateTestVariants, DuplicatesUntouched) {
  sandbox::ProcessSandbox sb(testdata::stub_runner_argv());
  TestVariant d;
  d.assertion = testcase::parse_test_case("assert sum_of_next_smallest_palindromes([]) == 5");
  d.status = TestStatus::Duplicate;
  auto r = validate_test_variant(d, palindrome_task(), sb);
  EXPECT_EQ(r.status, TestStatus::Duplicate);
}

}  // namespace
}  // namespace metagen::reviewer
