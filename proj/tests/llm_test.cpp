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

#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include "metagen/bench/ledger.hpp"
#include "metagen/llm/http_provider.hpp"
#include "metagen/llm/replay.hpp"
#include "metagen/llm/usage.hpp"
#include "support/fakes.hpp"

namespace metagen::llm {
namespace {

namespace fs = std::filesystem;

ChatRequest hello(std::int64_t seed = 7) {
  ChatRequest r;
  r.params.model = "m";
  r.params.seed = seed;
  r.messages = {{"system", "be brief"}, {"user", "hello"}};
  return r;
}

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("metagen_llm_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

TEST(ChatRequest, ValidateRejectsMalformed) {
  auto r = hello();
  EXPECT_NO_THROW(validate(r));
  r.messages = {{"system", "x"}};
  EXPECT_THROW(validate(r), DomainError);
  r.messages = {{"user", ""}};
  EXPECT_THROW(validate(r), DomainError);
  r.messages = {{"robot", "x"}, {"user", "y"}};
  EXPECT_THROW(validate(r), DomainError);
}

TEST(ChatRequest, DigestIsStableAndSensitive) {
  EXPECT_EQ(request_digest(hello()), request_digest(hello()));
  EXPECT_NE(request_digest(hello(7)), request_digest(hello(8)));
  auto r = hello();
  r.params.temperature = 0.3;
  EXPECT_NE(request_digest(r), request_digest(hello()));
  EXPECT_EQ(request_digest(request_from_json(to_json(hello()))), request_digest(hello()));
  EXPECT_EQ(request_digest(hello()).size(), 64u);
}

TEST(ChatRequest, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Usage, EstimateIsCeilCharsOverFour) {
  EXPECT_EQ(estimate_tokens(0), 0u);
  EXPECT_EQ(estimate_tokens(1), 1u);
  EXPECT_EQ(estimate_tokens(4), 1u);
  EXPECT_EQ(estimate_tokens(5), 2u);
  auto u = estimate_usage(hello(), "abcdefgh");
  EXPECT_EQ(u.prompt_tokens, 4u);  // "be brief" + "hello" = 13 chars
  EXPECT_EQ(u.completion_tokens, 2u);
  EXPECT_TRUE(u.estimated);
}

TEST(Replay, MissThrowsWithDigest) {
  ReplayProvider replay(fresh_dir("miss"));
  try {
    replay.chat(hello());
    FAIL() << "expected ReplayMiss";
  } catch (const ReplayMiss& e) {
    EXPECT_EQ(e.digest(), request_digest(hello()));
  }
}

TEST(Replay, RecordThenReplayRoundTrip) {
  auto dir = fresh_dir("roundtrip");
  testdata::ScriptedProvider live([](const ChatRequest& r) { return "echo:" + testdata::user_message(r).content; });
  RecordingProvider rec(live, dir);
  auto recorded = rec.chat(hello());
  ReplayProvider replay(dir);
  auto replayed = replay.chat(hello());
  EXPECT_EQ(replayed.text, "echo:hello");
  EXPECT_EQ(replayed.text, recorded.text);
  EXPECT_EQ(replayed.usage.prompt_tokens, recorded.usage.prompt_tokens);
  EXPECT_EQ(replayed.usage.completion_tokens, recorded.usage.completion_tokens);
  EXPECT_EQ(replayed.digest, recorded.digest);
  EXPECT_THROW(replay.chat(hello(8)), ReplayMiss);
  EXPECT_TRUE(fs::exists(dir / (request_digest(hello()) + ".json")));
}

TEST(Retry, BacksOffOneTwoFourThenGivesUp) {
  std::vector<long> slept;
  RetryPolicy p;
  p.sleep = [&](std::chrono::milliseconds d) { slept.push_back(d.count()); };
  int calls = 0;
  EXPECT_THROW(detail::with_retries(p, [&]() -> int {
                 ++calls;
                 throw RateLimited("429");
               }),
               RateLimited);
  EXPECT_EQ(calls, 4);
  EXPECT_EQ(slept, (std::vector<long>{1000, 2000, 4000}));
}

TEST(Retry, SucceedsAfterTransientFailures) {
  RetryPolicy p;
  p.sleep = [](std::chrono::milliseconds) {};
  int calls = 0;
  int v = detail::with_retries(p, [&] {
    if (++calls < 3) throw ProviderError("503");
    return 42;
  });
  EXPECT_EQ(v, 42);
  EXPECT_EQ(calls, 3);
}

TEST(Retry, AuthErrorIsNotRetried) {
  RetryPolicy p;
  int sleeps = 0;
  p.sleep = [&](std::chrono::milliseconds) { ++sleeps; };
  int calls = 0;
  EXPECT_THROW(detail::with_retries(p, [&]() -> int {
                 ++calls;
                 throw AuthError("401");
               }),
               AuthError);
  EXPECT_EQ(calls, 1);
  EXPECT_EQ(sleeps, 0);
}

TEST(Retry, StatusMapping) {
  EXPECT_THROW(detail::raise_for_status({401, ""}, "x"), AuthError);
  EXPECT_THROW(detail::raise_for_status({403, ""}, "x"), AuthError);
  EXPECT_THROW(detail::raise_for_status({429, ""}, "x"), RateLimited);
  EXPECT_THROW(detail::raise_for_status({500, ""}, "x"), ProviderError);
  EXPECT_NO_THROW(detail::raise_for_status({200, ""}, "x"));
}

TEST(HttpProvider, SplitBaseUrl) {
  EXPECT_EQ(detail::split_base_url("https://api.example.com/v1/"),
            (std::pair<std::string, std::string>{"https://api.example.com", "/v1"}));
  EXPECT_EQ(detail::split_base_url("http://127.0.0.1:8080"),
            (std::pair<std::string, std::string>{"http://127.0.0.1:8080", ""}));
}

class LocalServer {
 public:
  LocalServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      last_auth = req.get_header_value("Authorization");
      if (fail_remaining > 0) {
        --fail_remaining;
        res.status = fail_status;
        return;
      }
      auto body = nlohmann::json::parse(req.body);
      last_body = body;
      nlohmann::json out{{"choices", {{{"message", {{"role", "assistant"}, {"content", "pong"}}}}}}};
      if (with_usage) out["usage"] = {{"prompt_tokens", 11}, {"completion_tokens", 3}};
      res.set_content(out.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

  std::atomic<int> hits{0};
  std::atomic<int> fail_remaining{0};
  int fail_status = 429;
  bool with_usage = true;
  std::string last_auth;
  nlohmann::json last_body;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

RetryPolicy no_sleep() {
  RetryPolicy p;
  p.sleep = [](std::chrono::milliseconds) {};
  return p;
}

TEST(HttpProvider, ChatCompletionRoundTrip) {
  LocalServer srv;
  OpenAiCompatibleProvider p({srv.base_url(), "sk-test-secret", std::chrono::seconds(5)}, no_sleep());
  auto resp = p.chat(hello());
  EXPECT_EQ(resp.text, "pong");
  EXPECT_EQ(resp.usage.prompt_tokens, 11u);
  EXPECT_EQ(resp.usage.completion_tokens, 3u);
  EXPECT_FALSE(resp.usage.estimated);
  EXPECT_EQ(resp.digest, request_digest(hello()));
  EXPECT_EQ(srv.last_auth, "Bearer sk-test-secret");
  EXPECT_EQ(srv.last_body["model"], "m");
  EXPECT_EQ(srv.last_body["seed"], 7);
  EXPECT_EQ(srv.last_body["messages"].size(), 2u);
}

TEST(HttpProvider, EstimatesUsageWhenMissing) {
  LocalServer srv;
  srv.with_usage = false;
  OpenAiCompatibleProvider p({srv.base_url(), "", std::chrono::seconds(5)}, no_sleep());
  auto resp = p.chat(hello());
  EXPECT_TRUE(resp.usage.estimated);
  EXPECT_EQ(resp.usage.prompt_tokens, 4u);
  EXPECT_EQ(resp.usage.completion_tokens, 1u);
}

TEST(HttpProvider, RetriesRateLimitThenSucceeds) {
  LocalServer srv;
  srv.fail_remaining = 2;
  OpenAiCompatibleProvider p({srv.base_url(), "", std::chrono::seconds(5)}, no_sleep());
  EXPECT_EQ(p.chat(hello()).text, "pong");
  EXPECT_EQ(srv.hits.load(), 3);
}

TEST(HttpProvider, AuthFailureIsImmediate) {
  LocalServer srv;
  srv.fail_remaining = 100;
  srv.fail_status = 401;
  OpenAiCompatibleProvider p({srv.base_url(), "bad", std::chrono::seconds(5)}, no_sleep());
  EXPECT_THROW(p.chat(hello()), AuthError);
  EXPECT_EQ(srv.hits.load(), 1);
}

TEST(HttpProvider, CredentialNeverPersisted) {
  LocalServer srv;
  auto dir = fresh_dir("scrub");
  const std::string secret = "sk-very-secret-value-123";
  OpenAiCompatibleProvider live({srv.base_url(), secret, std::chrono::seconds(5)}, no_sleep());
  RecordingProvider rec(live, dir);
  auto resp = rec.chat(hello());
  {
    bench::Ledger ledger(dir / "ledger.jsonl", "run", true, false);
    ledger.append(kLlmCallKind, llm_call_payload("generator", "t1", "m", resp));
  }
  for (const auto& entry : fs::directory_iterator(dir))
    EXPECT_EQ(bench::read_file(entry.path()).find(secret), std::string::npos) << entry.path();
}

TEST(HttpProvider, ApiKeyFromEnvironment) {
  ::setenv("ACME_AI_API_KEY", "k123", 1);
  EXPECT_EQ(api_key_from_env("acme-ai"), "k123");
  ::unsetenv("ACME_AI_API_KEY");
  EXPECT_EQ(api_key_from_env("acme-ai"), "");
}

TEST(BoundedProvider, CapsConcurrency) {
  std::atomic<int> inflight{0}, peak{0};
  testdata::ScriptedProvider slow([&](const ChatRequest&) {
    int now = ++inflight;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    --inflight;
    return std::string("ok");
  });
  BoundedProvider bounded(slow, 2);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&] { bounded.chat(hello()); });
  for (auto& t : threads) t.join();
  EXPECT_LE(peak.load(), 2);
  EXPECT_EQ(slow.requests().size(), 8u);
}

bench::LedgerRecord call(const std::string& module, const std::string& task, std::uint64_t in, std::uint64_t out) {
  ChatResponse r;
  r.usage = {in, out, false};
  return {kLlmCallKind, "run", 0, llm_call_payload(module, task, "m", r)};
}

TEST(UsageSummary, PerModuleMeansPerRequest) {
  std::vector<bench::LedgerRecord> recs = {call("mutator", "a", 100, 140), call("mutator", "b", 110, 147),
                                           call("base", "a", 50, 60), {"candidate", "run", 0, {}}};
  auto s = usage_summary(recs);
  ASSERT_EQ(s.modules.size(), 2u);
  EXPECT_EQ(s.modules[0].module, "base");
  EXPECT_EQ(s.modules[1].module, "mutator");
  EXPECT_EQ(s.modules[1].calls, 2u);
  EXPECT_EQ(s.modules[1].problems, 2u);
  EXPECT_DOUBLE_EQ(s.modules[1].avg_prompt, 105.0);
  EXPECT_DOUBLE_EQ(s.modules[1].avg_completion, 143.5);
  EXPECT_EQ(s.modules[1].total.prompt_tokens, 210u);
  ASSERT_EQ(s.problems.size(), 3u);
  EXPECT_EQ(s.problems[0].module, "base");
}

TEST(UsageSummary, OrderIndependent) {
  std::vector<bench::LedgerRecord> recs = {call("a", "x", 1, 2), call("b", "y", 3, 4), call("a", "z", 5, 6)};
  auto s1 = usage_summary(recs);
  std::reverse(recs.begin(), recs.end());
  auto s2 = usage_summary(recs);
  ASSERT_EQ(s1.modules.size(), s2.modules.size());
  for (size_t i = 0; i < s1.modules.size(); ++i) {
    EXPECT_EQ(s1.modules[i].module, s2.modules[i].module);
    EXPECT_EQ(s1.modules[i].avg_prompt, s2.modules[i].avg_prompt);
    EXPECT_EQ(s1.modules[i].avg_completion, s2.modules[i].avg_completion);
  }
}

}  // namespace
}  // namespace metagen::llm
