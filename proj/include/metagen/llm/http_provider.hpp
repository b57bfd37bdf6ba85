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

#include <chrono>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "metagen/llm/chat.hpp"

namespace metagen::llm {

/// Retry schedule for transient provider failures (rate limits, 5xx,
/// transport errors). Auth failures are never retried.
struct RetryPolicy {
  std::vector<std::chrono::milliseconds> backoff{std::chrono::milliseconds(1000),
                                                 std::chrono::milliseconds(2000),
                                                 std::chrono::milliseconds(4000)};
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };
};

namespace detail {

struct HttpResult {
  int status = 0;
  std::string body;
};

inline void raise_for_status(const HttpResult& r, const std::string& what) {
  if (r.status == 401 || r.status == 403) throw AuthError(fmt::format("{}: HTTP {} (check credentials)", what, r.status));
  if (r.status == 429) throw RateLimited(fmt::format("{}: HTTP 429 rate limited", what));
  if (r.status < 200 || r.status >= 300)
    throw ProviderError(fmt::format("{}: HTTP {}: {}", what, r.status, r.body.substr(0, 200)));
}

inline bool retryable(const ProviderError& e) { return dynamic_cast<const AuthError*>(&e) == nullptr; }

template <typename Fn>
auto with_retries(const RetryPolicy& policy, Fn&& fn) -> decltype(fn()) {
  for (size_t attempt = 0;; ++attempt) {
    try {
      return fn();
    } catch (const ProviderError& e) {
      if (!retryable(e) || attempt >= policy.backoff.size()) throw;
      policy.sleep(policy.backoff[attempt]);
    }
  }
}

// Split "https://host:port/prefix" into the scheme-host part and a path prefix.
inline std::pair<std::string, std::string> split_base_url(const std::string& url) {
  auto scheme = url.find("://");
  auto slash = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (slash == std::string::npos) return {url, ""};
  std::string prefix = url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, slash), prefix};
}

}  // namespace detail

struct HttpEndpoint {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;  // never logged or persisted
  std::chrono::seconds timeout{120};
};

/// Chat provider speaking the OpenAI-compatible `/chat/completions` wire
/// format (also served by Ollama, vLLM, Mistral and most gateways).
class OpenAiCompatibleProvider : public ChatProvider {
 public:
  explicit OpenAiCompatibleProvider(HttpEndpoint endpoint, RetryPolicy retry = {})
      : endpoint_(std::move(endpoint)), retry_(std::move(retry)) {}

  ChatResponse chat(const ChatRequest& req) override {
    validate(req);
    json body{{"model", req.params.model},
              {"temperature", req.params.temperature},
              {"max_tokens", req.params.max_tokens},
              {"stream", false}};
    if (req.params.seed) body["seed"] = *req.params.seed;
    body["messages"] = json::array();
    for (const auto& m : req.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});

    auto res = detail::with_retries(retry_, [&] { return post("/chat/completions", body.dump()); });
    json j;
    try {
      j = json::parse(res.body);
    } catch (const json::exception& e) {
      throw ProviderError(std::string("malformed chat response: ") + e.what());
    }
    ChatResponse out;
    out.digest = request_digest(req);
    try {
      const auto& content = j.at("choices").at(0).at("message").at("content");
      out.text = content.is_null() ? "" : content.get<std::string>();
    } catch (const json::exception&) {
      throw ProviderError("chat response has no choices[0].message.content");
    }
    if (j.contains("usage") && j["usage"].is_object() && j["usage"].contains("prompt_tokens")) {
      out.usage.prompt_tokens = j["usage"]["prompt_tokens"].get<std::uint64_t>();
      out.usage.completion_tokens = j["usage"].value("completion_tokens", std::uint64_t{0});
    } else {
      out.usage = estimate_usage(req, out.text);
    }
    return out;
  }

 private:
  detail::HttpResult post(const std::string& path, const std::string& body) {
    auto [host, prefix] = detail::split_base_url(endpoint_.base_url);
    httplib::Client cli(host);
    cli.set_connection_timeout(std::chrono::seconds(10));
    cli.set_read_timeout(endpoint_.timeout);
    httplib::Headers headers;
    if (!endpoint_.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint_.api_key);
    auto res = cli.Post(prefix + path, headers, body, "application/json");
    if (!res) throw ProviderError("transport error: " + httplib::to_string(res.error()));
    detail::HttpResult r{res->status, res->body};
    detail::raise_for_status(r, "chat completion");
    return r;
  }

  HttpEndpoint endpoint_;
  RetryPolicy retry_;
};

/// Reads `<PROVIDER>_API_KEY` from the environment; empty when unset.
inline std::string api_key_from_env(const std::string& provider) {
  std::string var;
  for (char c : provider) var += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::toupper(c)) : '_';
  var += "_API_KEY";
  const char* v = std::getenv(var.c_str());
  return v ? std::string(v) : std::string();
}

}  // namespace metagen::llm
