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

#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "metagen/core/errors.hpp"

namespace metagen::llm {

using json = nlohmann::json;

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
};

struct ChatParams {
  std::string model;
  double temperature = 0.2;
  int max_tokens = 1024;
  std::optional<std::int64_t> seed;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  ChatParams params;
};

struct Usage {
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;
  bool estimated = false;

  Usage& operator+=(const Usage& o) {
    prompt_tokens += o.prompt_tokens;
    completion_tokens += o.completion_tokens;
    estimated = estimated || o.estimated;
    return *this;
  }
};

struct ChatResponse {
  std::string text;
  Usage usage;
  std::string digest;
};

/// Chat-completion transport. Implementations must be safe to call from
/// several threads at once.
class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual ChatResponse chat(const ChatRequest& req) = 0;
};

inline void validate(const ChatRequest& req) {
  bool has_user = false;
  for (const auto& m : req.messages) {
    if (m.role != "system" && m.role != "user" && m.role != "assistant")
      throw DomainError("invalid chat role '" + m.role + "'");
    if (m.content.empty()) throw DomainError("chat message content must be non-empty");
    has_user = has_user || m.role == "user";
  }
  if (!has_user) throw DomainError("chat request needs at least one user message");
}

inline json to_json(const ChatRequest& req) {
  json msgs = json::array();
  for (const auto& m : req.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  json params{{"model", req.params.model},
              {"temperature", req.params.temperature},
              {"max_tokens", req.params.max_tokens},
              {"seed", nullptr}};
  if (req.params.seed) params["seed"] = *req.params.seed;
  return json{{"messages", msgs}, {"params", params}};
}

inline ChatRequest request_from_json(const json& j) {
  ChatRequest req;
  for (const auto& m : j.at("messages"))
    req.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
  const auto& p = j.at("params");
  req.params.model = p.at("model").get<std::string>();
  req.params.temperature = p.at("temperature").get<double>();
  req.params.max_tokens = p.at("max_tokens").get<int>();
  if (!p.at("seed").is_null()) req.params.seed = p.at("seed").get<std::int64_t>();
  return req;
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 digest failed");
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
  return out;
}

/// Stable content digest of a request. nlohmann objects keep keys sorted, so
/// the dump is canonical.
inline std::string request_digest(const ChatRequest& req) { return sha256_hex(to_json(req).dump()); }

/// Tokenizer-free estimate used when a provider omits usage: ceil(chars / 4).
inline std::uint64_t estimate_tokens(std::size_t chars) { return (chars + 3) / 4; }

inline Usage estimate_usage(const ChatRequest& req, const std::string& completion) {
  std::size_t chars = 0;
  for (const auto& m : req.messages) chars += m.content.size();
  return Usage{estimate_tokens(chars), estimate_tokens(completion.size()), true};
}

/// Caps the number of in-flight requests against a shared provider.
class BoundedProvider : public ChatProvider {
 public:
  BoundedProvider(ChatProvider& inner, int limit) : inner_(inner), available_(limit < 1 ? 1 : limit) {}

  ChatResponse chat(const ChatRequest& req) override {
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return available_ > 0; });
      --available_;
    }
    struct Release {
      BoundedProvider* self;
      ~Release() {
        {
          std::lock_guard lock(self->mu_);
          ++self->available_;
        }
        self->cv_.notify_one();
      }
    } release{this};
    return inner_.chat(req);
  }

 private:
  ChatProvider& inner_;
  std::mutex mu_;
  std::condition_variable cv_;
  int available_;
};

}  // namespace metagen::llm
