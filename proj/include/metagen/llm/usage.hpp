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

#include <map>
#include <string>
#include <vector>

#include "metagen/bench/ledger.hpp"
#include "metagen/llm/chat.hpp"

namespace metagen::llm {

inline constexpr const char* kLlmCallKind = "llm_call";

/// Ledger payload for one LLM request, tagged with the pipeline stage that
/// issued it ("mutator", "generator" for MR descriptions, "base" for the
/// original description).
inline json llm_call_payload(const std::string& module, const std::string& task_id, const std::string& model,
                             const ChatResponse& resp) {
  return json{{"module", module},
              {"task_id", task_id},
              {"model", model},
              {"digest", resp.digest},
              {"prompt_tokens", resp.usage.prompt_tokens},
              {"completion_tokens", resp.usage.completion_tokens},
              {"estimated", resp.usage.estimated}};
}

struct ModuleUsage {
  std::string module;
  std::uint64_t calls = 0;
  std::uint64_t problems = 0;
  Usage total;
  double avg_prompt = 0.0;      // mean per request
  double avg_completion = 0.0;  // mean per request
};

struct ProblemUsage {
  std::string module;
  std::string task_id;
  std::uint64_t calls = 0;
  Usage total;
  double avg_prompt = 0.0;
  double avg_completion = 0.0;
};

struct UsageSummary {
  std::vector<ModuleUsage> modules;    // sorted by module name
  std::vector<ProblemUsage> problems;  // sorted by (module, task_id)
};

/// Exact per-module totals and averages over the `llm_call` records of a
/// ledger slice. Independent of record order.
inline UsageSummary usage_summary(const std::vector<bench::LedgerRecord>& records) {
  std::map<std::string, ModuleUsage> modules;
  std::map<std::pair<std::string, std::string>, ProblemUsage> problems;
  for (const auto& r : records) {
    if (r.kind != kLlmCallKind) continue;
    const auto& p = r.payload;
    std::string module = p.at("module").get<std::string>();
    std::string task = p.at("task_id").get<std::string>();
    Usage u{p.at("prompt_tokens").get<std::uint64_t>(), p.at("completion_tokens").get<std::uint64_t>(),
            p.value("estimated", false)};
    auto& m = modules[module];
    m.module = module;
    m.calls += 1;
    m.total += u;
    auto& pu = problems[{module, task}];
    pu.module = module;
    pu.task_id = task;
    pu.calls += 1;
    pu.total += u;
  }
  UsageSummary out;
  for (auto& [key, pu] : problems) {
    pu.avg_prompt = static_cast<double>(pu.total.prompt_tokens) / static_cast<double>(pu.calls);
    pu.avg_completion = static_cast<double>(pu.total.completion_tokens) / static_cast<double>(pu.calls);
    modules[key.first].problems += 1;
    out.problems.push_back(pu);
  }
  for (auto& [name, m] : modules) {
    m.avg_prompt = static_cast<double>(m.total.prompt_tokens) / static_cast<double>(m.calls);
    m.avg_completion = static_cast<double>(m.total.completion_tokens) / static_cast<double>(m.calls);
    out.modules.push_back(m);
  }
  return out;
}

}  // namespace metagen::llm
