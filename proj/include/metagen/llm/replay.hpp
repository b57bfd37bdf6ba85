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

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>

#include "metagen/llm/chat.hpp"

namespace metagen::llm {

/// Content-addressed response store: one `<digest>.json` file per request,
/// holding {request, response, usage}. Reads may run concurrently; writes are
/// serialized and land via rename so readers never see partial files.
class ReplayStore {
 public:
  explicit ReplayStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const { return dir_; }

  std::filesystem::path path_for(const std::string& digest) const { return dir_ / (digest + ".json"); }

  std::optional<ChatResponse> get(const std::string& digest) const {
    std::ifstream in(path_for(digest));
    if (!in) return std::nullopt;
    std::stringstream ss;
    ss << in.rdbuf();
    json j = json::parse(ss.str());
    ChatResponse r;
    r.text = j.at("response").get<std::string>();
    const auto& u = j.at("usage");
    r.usage.prompt_tokens = u.at("prompt_tokens").get<std::uint64_t>();
    r.usage.completion_tokens = u.at("completion_tokens").get<std::uint64_t>();
    r.usage.estimated = u.value("estimated", false);
    r.digest = digest;
    return r;
  }

  void put(const ChatRequest& req, const ChatResponse& resp) {
    std::string digest = request_digest(req);
    json j{{"request", to_json(req)},
           {"response", resp.text},
           {"usage",
            {{"prompt_tokens", resp.usage.prompt_tokens},
             {"completion_tokens", resp.usage.completion_tokens},
             {"estimated", resp.usage.estimated}}}};
    std::lock_guard lock(write_mu_);
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    auto tmp = path_for(digest);
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) throw IoError("cannot write replay entry " + tmp.string());
      out << j.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path_for(digest), ec);
    if (ec) throw IoError("cannot commit replay entry: " + ec.message());
  }

 private:
  std::filesystem::path dir_;
  std::mutex write_mu_;
};

/// Offline provider answering only from recorded responses.
class ReplayProvider : public ChatProvider {
 public:
  explicit ReplayProvider(std::filesystem::path dir) : store_(std::move(dir)) {}

  ChatResponse chat(const ChatRequest& req) override {
    validate(req);
    std::string digest = request_digest(req);
    auto hit = store_.get(digest);
    if (!hit) throw ReplayMiss(digest);
    return *hit;
  }

 private:
  ReplayStore store_;
};

/// Forwards to a live provider and stores every response for later replay.
class RecordingProvider : public ChatProvider {
 public:
  RecordingProvider(ChatProvider& live, std::filesystem::path dir) : live_(live), store_(std::move(dir)) {}

  ChatResponse chat(const ChatRequest& req) override {
    validate(req);
    ChatResponse resp = live_.chat(req);
    resp.digest = request_digest(req);
    store_.put(req, resp);
    return resp;
  }

 private:
  ChatProvider& live_;
  ReplayStore store_;
};

}  // namespace metagen::llm
