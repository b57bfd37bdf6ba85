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

#include "metagen/sandbox.hpp"

#include <gtest/gtest.h>

#include <chrono>

#include "support/fakes.hpp"
#include "support/reference.hpp"

namespace metagen::sandbox {
namespace {

ExecRequest request(const std::string& program, const std::vector<std::string>& lines, bool coverage = false,
                    double timeout = 5.0) {
  ExecRequest r;
  r.id = "req";
  r.program = program;
  r.timeout_s = timeout;
  r.measure_coverage = coverage;
  for (size_t i = 0; i < lines.size(); ++i) r.tests.push_back({"t" + std::to_string(i), lines[i]});
  return r;
}

TEST(Protocol, RequestShape) {
  auto j = to_json(request("x = 1", {"assert x == 1"}, true, 2.5));
  EXPECT_EQ(j["id"], "req");
  EXPECT_EQ(j["program"], "x = 1");
  EXPECT_EQ(j["tests"][0]["test_id"], "t0");
  EXPECT_EQ(j["tests"][0]["line"], "assert x == 1");
  EXPECT_EQ(j["timeout_s"], 2.5);
  EXPECT_EQ(j["measure_coverage"], true);
}

TEST(Protocol, ResponseChecks) {
  auto req = request("", {"a", "b"});
  json ok{{"id", "req"},
          {"results", {{{"test_id", "t0"}, {"status", "pass"}}, {{"test_id", "t1"}, {"status", "fail"}, {"message", "m"}}}},
          {"coverage", {{"branch_covered", 3}, {"branch_total", 4}, {"branch_pct", 75.0}}}};
  auto r = response_from_json(ok, req);
  EXPECT_EQ(r.results[1].status, Status::Fail);
  EXPECT_EQ(r.results[1].message, "m");
  ASSERT_TRUE(r.coverage);
  EXPECT_DOUBLE_EQ(r.coverage->branch_pct, 75.0);

  auto wrong_id = ok;
  wrong_id["id"] = "other";
  EXPECT_THROW(response_from_json(wrong_id, req), SandboxError);
  auto short_results = ok;
  short_results["results"].erase(1);
  EXPECT_THROW(response_from_json(short_results, req), SandboxError);
  auto reordered = ok;
  std::swap(reordered["results"][0], reordered["results"][1]);
  EXPECT_THROW(response_from_json(reordered, req), SandboxError);
  auto bad_status = ok;
  bad_status["results"][0]["status"] = "maybe";
  EXPECT_THROW(response_from_json(bad_status, req), SandboxError);
  EXPECT_THROW(response_from_json(json{{"id", "req"}, {"error", "bad"}}, req), SandboxError);
  EXPECT_THROW(response_from_json(json{{"id", "req"}}, req), SandboxError);
}

TEST(Protocol, BranchlessCoverageIsHundred) {
  auto req = request("", {"a"});
  json j{{"id", "req"},
         {"results", {{{"test_id", "t0"}, {"status", "pass"}}}},
         {"coverage", {{"branch_covered", 0}, {"branch_total", 0}, {"branch_pct", 0.0}}}};
  EXPECT_DOUBLE_EQ(response_from_json(j, req).coverage->branch_pct, 100.0);
}

TEST(ProcessSandbox, RunsAssertsAgainstStubRunner) {
  ProcessSandbox sb(testdata::stub_runner_argv());
  auto resp = sb.execute(request("def f(x):\n    return x + 1\n",
                                 {"assert f(1) == 2", "assert f(1) == 3", "assert g(1) == 2"}));
  ASSERT_EQ(resp.results.size(), 3u);
  EXPECT_EQ(resp.results[0].status, Status::Pass);
  EXPECT_EQ(resp.results[1].status, Status::Fail);
  EXPECT_EQ(resp.results[2].status, Status::Error);
  // The runner process is reused for the next request.
  auto again = sb.execute(request("def f(x):\n    return x\n", {"assert f(4) == 4"}));
  EXPECT_EQ(again.results[0].status, Status::Pass);
}

TEST(ProcessSandbox, TimeoutIsReportedPerTest) {
  ProcessSandbox sb(testdata::stub_runner_argv());
  auto start = std::chrono::steady_clock::now();
  auto resp = sb.execute(request("def spin():\n    while True:\n        pass\n", {"assert spin() == 1"}, false, 0.5));
  auto elapsed = std::chrono::steady_clock::now() - start;
  EXPECT_EQ(resp.results[0].status, Status::Timeout);
  EXPECT_LT(elapsed, std::chrono::milliseconds(1500));
}

TEST(ProcessSandbox, SyntaxErrorMakesEveryTestError) {
  ProcessSandbox sb(testdata::stub_runner_argv());
  auto resp = sb.execute(request("def f(:\n", {"assert f() == 1", "assert True"}));
  for (const auto& r : resp.results) EXPECT_EQ(r.status, Status::Error);
}

TEST(ProcessSandbox, PalindromeCoverageGrowsWithCmaSuite) {
  ProcessSandbox sb(testdata::stub_runner_argv());
  auto oracle = sb.execute(request(testdata::kPalindromeProgram, testdata::kPalindromeOracleTests, true));
  auto cma = sb.execute(request(testdata::kPalindromeProgram, testdata::kPalindromeCmaTests, true));
  for (const auto& r : oracle.results) EXPECT_EQ(r.status, Status::Pass) << r.message;
  for (const auto& r : cma.results) EXPECT_EQ(r.status, Status::Pass) << r.message;
  ASSERT_TRUE(oracle.coverage && cma.coverage);
  EXPECT_GT(cma.coverage->branch_pct, oracle.coverage->branch_pct);
}

TEST(ProcessSandbox, MissingBinaryIsSandboxError) {
  ProcessSandbox sb({"/nonexistent/metagen-runner"});
  EXPECT_THROW(sb.execute(request("x = 1", {"assert x == 1"})), SandboxError);
}

TEST(SandboxPool, ParallelRequests) {
  SandboxPool pool(testdata::stub_runner_argv(), 3);
  std::vector<std::thread> threads;
  std::atomic<int> passes{0};
  for (int i = 0; i < 6; ++i)
    threads.emplace_back([&, i] {
      auto r = pool.execute(request("v = " + std::to_string(i), {"assert v == " + std::to_string(i)}));
      if (r.results[0].status == Status::Pass) ++passes;
    });
  for (auto& t : threads) t.join();
  EXPECT_EQ(passes.load(), 6);
}

TEST(SplitCommand, Whitespace) {
  EXPECT_EQ(split_command("  python3   runner.py  --x "), (std::vector<std::string>{"python3", "runner.py", "--x"}));
  EXPECT_TRUE(split_command("   ").empty());
}

}  // namespace
}  // namespace metagen::sandbox
