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

#include <functional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "metagen/core/model.hpp"
#include "metagen/llm/chat.hpp"
#include "metagen/mutator.hpp"
#include "metagen/util/parallel.hpp"
#include "metagen/util/text.hpp"

namespace metagen::generator {

enum class PromptMode { CodeGen, TestGen };

struct GenerationParams {
  double temperature = 0.2;
  int max_tokens = 1024;
  int sample_count = 5;
};

struct PromptSpec {
  PromptMode mode = PromptMode::CodeGen;
  std::string system;
  std::string user;
  GenerationParams params;
};

/// Zero-shot templates; placeholders are {{description}}, {{signature}} and
/// {{entry_point}}.
struct PromptTemplates {
  std::string codegen_system =
      "You are an expert Python programmer. Write a correct, self-contained solution. Return only the code in a "
      "single ```python fenced block.";
  std::string codegen_user =
      "Solve the following problem.\n\n{{description}}\n\nImplement the function with this signature:\n"
      "{{signature}}";
  std::string testgen_system =
      "You are an expert software tester. Return only Python assert statements in a single ```python fenced "
      "block, one assert per line.";
  std::string testgen_user =
      "Write a complete test suite for the function `{{entry_point}}` described below. Cover normal cases, edge "
      "cases and boundary values. Each test must be one line of the form `assert {{entry_point}}(...) == "
      "EXPECTED`.\n\nProblem:\n{{description}}\n\nSignature:\n{{signature}}";
};

/// The `def entry_point(...):` line of the oracle solution, or empty.
inline std::string find_signature(const Task& task) {
  std::regex re("^[ \\t]*(async[ \\t]+)?def[ \\t]+" + task.entry_point + "[ \\t]*\\([^\\n]*\\)[^\\n]*:[ \\t]*$",
                std::regex::multiline);
  std::smatch m;
  if (task.entry_point.empty() || !std::regex_search(task.oracle_solution, m, re)) return {};
  return util::trim(m.str(0));
}

inline PromptSpec build_prompt(const Task& task, const std::string& description, PromptMode mode,
                               const PromptTemplates& templates = {}, const GenerationParams& params = {}) {
  if (util::trim(description).empty()) throw TemplateError("description must be non-empty");
  if (params.sample_count < 1) throw TemplateError("sample_count must be >= 1");
  std::map<std::string, std::string> vars{{"description", description}, {"entry_point", task.entry_point}};
  std::string signature = find_signature(task);
  if (!signature.empty()) vars["signature"] = signature;
  PromptSpec spec;
  spec.mode = mode;
  spec.params = params;
  if (mode == PromptMode::CodeGen) {
    if (signature.empty()) throw TemplateError("no signature for entry point '" + task.entry_point + "'");
    spec.system = templates.codegen_system;
    spec.user = util::render_template(templates.codegen_user, vars);
  } else {
    spec.system = templates.testgen_system;
    spec.user = util::render_template(templates.testgen_user, vars);
  }
  return spec;
}

struct Extraction {
  std::string source;
  ExtractionMethod method = ExtractionMethod::Failed;
};

namespace detail {

inline std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (start <= s.size()) {
    size_t end = s.find('\n', start);
    if (end == std::string_view::npos) end = s.size();
    std::string_view line = s.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    if (end == s.size()) break;
    start = end + 1;
  }
  return out;
}

inline bool starts_with_word(std::string_view line, std::string_view word) {
  return line.substr(0, word.size()) == word && line.size() > word.size() &&
         (line[word.size()] == ' ' || line[word.size()] == '\t');
}

inline bool is_def(std::string_view line) { return starts_with_word(line, "def") || starts_with_word(line, "async"); }

inline bool continues_code(std::string_view line) {
  if (line.empty() || line.front() == ' ' || line.front() == '\t' || line.front() == '#' || line.front() == '@')
    return true;
  return is_def(line) || starts_with_word(line, "class") || starts_with_word(line, "import") ||
         starts_with_word(line, "from");
}

}  // namespace detail

/// Pull source code out of a model response: the first fenced block's body,
/// else the longest run of code lines starting at a top-level `def`.
inline Extraction extract_code(std::string_view response) {
  if (util::trim(response).empty()) throw NoCodeFound("empty response");
  auto lines = detail::split_lines(response);

  for (size_t i = 0; i < lines.size(); ++i) {
    std::string open = util::trim(lines[i]);
    if (open.rfind("```", 0) != 0) continue;
    std::string body;
    for (size_t j = i + 1; j < lines.size(); ++j) {
      if (util::trim(lines[j]).rfind("```", 0) == 0) return {body, ExtractionMethod::Fenced};
      body.append(lines[j]);
      body += '\n';
    }
    // Unterminated fence: take the rest.
    return {body, ExtractionMethod::Fenced};
  }

  size_t best_start = 0, best_len = 0;
  for (size_t i = 0; i < lines.size(); ++i) {
    if (!detail::is_def(lines[i])) continue;
    size_t j = i + 1;
    while (j < lines.size() && detail::continues_code(lines[j])) ++j;
    while (j > i + 1 && util::trim(lines[j - 1]).empty()) --j;
    if (j - i > best_len) {
      best_start = i;
      best_len = j - i;
    }
    i = j - 1;
  }
  if (best_len == 0) throw NoCodeFound("response contains neither a fenced block nor a function definition");
  // Imports (and blank lines between them) directly above the definition belong to it.
  size_t top = best_start;
  while (top > 0 && (detail::starts_with_word(lines[top - 1], "import") ||
                     detail::starts_with_word(lines[top - 1], "from") || util::trim(lines[top - 1]).empty()))
    --top;
  while (top < best_start && util::trim(lines[top]).empty()) ++top;
  best_len += best_start - top;
  best_start = top;
  std::string body;
  for (size_t k = best_start; k < best_start + best_len; ++k) {
    body.append(lines[k]);
    body += '\n';
  }
  return {body, ExtractionMethod::FunctionRun};
}

/// A description to generate from, tagged with its pool.
struct SourceDescription {
  Origin origin;
  std::string text;
};

struct CandidateOptions {
  PromptTemplates templates;
  GenerationParams params;
  std::string model;
  std::int64_t base_seed = 0;
  int parallelism = 1;
  mutator::CallObserver observer;
};

inline llm::ChatRequest to_chat(const PromptSpec& spec, const std::string& model, std::int64_t seed) {
  llm::ChatRequest req;
  req.params.model = model;
  req.params.temperature = spec.params.temperature;
  req.params.max_tokens = spec.params.max_tokens;
  req.params.seed = seed;
  req.messages.push_back({"system", spec.system});
  req.messages.push_back({"user", spec.user});
  return req;
}

/// n samples per description, ordered by (description, sample index). Provider
/// and extraction failures are recorded on the candidate, never thrown.
inline std::vector<CandidateSolution> generate_candidates(const Task& task,
                                                          const std::vector<SourceDescription>& descriptions,
                                                          llm::ChatProvider& llm, const CandidateOptions& opts) {
  const int n = opts.params.sample_count;
  if (n < 1) throw DomainError("sample count must be >= 1");
  std::vector<PromptSpec> specs;
  for (const auto& d : descriptions) specs.push_back(build_prompt(task, d.text, PromptMode::CodeGen, opts.templates, opts.params));

  std::vector<CandidateSolution> out(descriptions.size() * static_cast<size_t>(n));
  std::vector<std::optional<llm::ChatResponse>> responses(out.size());
  util::parallel_for(out.size(), opts.parallelism, [&](size_t slot) {
    size_t d = slot / static_cast<size_t>(n);
    int sample = static_cast<int>(slot % static_cast<size_t>(n));
    auto& cand = out[slot];
    cand.task_id = task.id;
    cand.origin = descriptions[d].origin;
    cand.sample_index = sample;
    auto req = to_chat(specs[d], opts.model, opts.base_seed + sample);
    cand.raw_response_id = llm::request_digest(req);
    try {
      responses[slot] = llm.chat(req);
    } catch (const ProviderError& e) {
      cand.error = e.what();
      cand.extraction = ExtractionMethod::Failed;
      return;
    }
    try {
      auto ex = extract_code(responses[slot]->text);
      cand.source_code = ex.source;
      cand.extraction = ex.method;
    } catch (const NoCodeFound& e) {
      cand.error = e.what();
      cand.extraction = ExtractionMethod::Failed;
    }
  });
  if (opts.observer) {
    for (size_t slot = 0; slot < out.size(); ++slot)
      if (responses[slot])
        opts.observer(out[slot].origin.kind == Origin::Kind::Base ? "base" : "generator", task.id, *responses[slot]);
  }
  return out;
}

/// Description-only test generation (no MR guidance): assert lines the model
/// wrote for the task.
inline std::vector<std::string> generate_test_suite(const Task& task, const std::string& description,
                                                    llm::ChatProvider& llm, const CandidateOptions& opts) {
  auto spec = build_prompt(task, description, PromptMode::TestGen, opts.templates, opts.params);
  auto resp = llm.chat(to_chat(spec, opts.model, opts.base_seed));
  if (opts.observer) opts.observer("testgen", task.id, resp);
  std::string body;
  try {
    body = extract_code(resp.text).source;
  } catch (const NoCodeFound&) {
    body = resp.text;
  }
  return testcase::split_assert_lines(body);
}

}  // namespace metagen::generator
