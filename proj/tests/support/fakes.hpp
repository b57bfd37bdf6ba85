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

#include <atomic>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "metagen/llm/chat.hpp"
#include "metagen/sandbox.hpp"

namespace metagen::testdata {

/// Answers chat requests from a function of the request.
class ScriptedProvider : public llm::ChatProvider {
 public:
  using Responder = std::function<std::string(const llm::ChatRequest&)>;
  explicit ScriptedProvider(Responder r) : respond_(std::move(r)) {}

  llm::ChatResponse chat(const llm::ChatRequest& req) override {
    llm::validate(req);
    {
      std::lock_guard lock(mu_);
      requests_.push_back(req);
    }
    llm::ChatResponse out;
    out.text = respond_(req);
    out.usage = llm::estimate_usage(req, out.text);
    out.usage.estimated = false;
    out.digest = llm::request_digest(req);
    return out;
  }

  std::vector<llm::ChatRequest> requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }

 private:
  Responder respond_;
  mutable std::mutex mu_;
  std::vector<llm::ChatRequest> requests_;
};

inline const llm::ChatMessage& user_message(const llm::ChatRequest& req) {
  for (const auto& m : req.messages)
    if (m.role == "user") return m;
  return req.messages.back();
}

inline std::vector<std::string> stub_runner_argv() {
  return {"python3", std::string(METAGEN_TEST_DIR) + "/support/stub_runner.py"};
}

}  // namespace metagen::testdata
