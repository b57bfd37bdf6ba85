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

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <httplib.h>

#include "metagen/core/model.hpp"
#include "metagen/llm/http_provider.hpp"
#include "metagen/mutator.hpp"
#include "metagen/sandbox.hpp"
#include "metagen/testcase/parser.hpp"

namespace metagen::reviewer {

struct ReviewConfig {
  double similarity_threshold = 0.8;
  int max_iterations = 3;
  double test_timeout_s = 5.0;

  void validate() const {
    if (!(similarity_threshold > 0.0 && similarity_threshold <= 1.0))
      throw ConfigError("similarity_threshold must be in (0, 1]");
    if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
    if (!(test_timeout_s > 0.0)) throw ConfigError("test timeout must be positive");
  }
};

// ---------------------------------------------------------------------------
// Semantic similarity

/// Maps text to a fixed-dimension vector.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(const std::string& text) = 0;
};

/// Offline embedder: L2-normalised feature-hashed bag of lowercase word
/// unigrams and within-word character trigrams. Deterministic and
/// dependency-free; a lexical stand-in for a sentence encoder.
class HashedNgramEmbedder : public Embedder {
 public:
  explicit HashedNgramEmbedder(size_t dim = 1024) : dim_(dim) {}

  std::vector<double> embed(const std::string& text) override {
    std::vector<double> v(dim_, 0.0);
    std::string word;
    auto flush = [&] {
      if (word.empty()) return;
      add(v, "w:" + word, 1.0);
      std::string padded = "^" + word + "$";
      for (size_t i = 0; i + 3 <= padded.size(); ++i) add(v, "c:" + padded.substr(i, 3), 0.5);
      word.clear();
    };
    for (unsigned char c : text) {
      if (std::isalnum(c) || c >= 0x80)
        word += static_cast<char>(std::tolower(c));
      else
        flush();
    }
    flush();
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0)
      for (double& x : v) x /= std::sqrt(norm);
    return v;
  }

 private:
  void add(std::vector<double>& v, const std::string& feature, double weight) const {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char c : feature) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    v[h % dim_] += weight;
  }

  size_t dim_;
};

/// Embedder backed by an OpenAI-compatible `/embeddings` endpoint.
class HttpEmbedder : public Embedder {
 public:
  HttpEmbedder(llm::HttpEndpoint endpoint, std::string model, llm::RetryPolicy retry = {})
      : endpoint_(std::move(endpoint)), model_(std::move(model)), retry_(std::move(retry)) {}

  std::vector<double> embed(const std::string& text) override {
    nlohmann::json body{{"model", model_}, {"input", text}};
    auto res = llm::detail::with_retries(retry_, [&] {
      auto [host, prefix] = llm::detail::split_base_url(endpoint_.base_url);
      httplib::Client cli(host);
      cli.set_read_timeout(endpoint_.timeout);
      httplib::Headers headers;
      if (!endpoint_.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint_.api_key);
      auto r = cli.Post(prefix + "/embeddings", headers, body.dump(), "application/json");
      if (!r) throw ProviderError("transport error: " + httplib::to_string(r.error()));
      llm::detail::HttpResult out{r->status, r->body};
      llm::detail::raise_for_status(out, "embedding");
      return out;
    });
    try {
      return nlohmann::json::parse(res.body).at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(std::string("malformed embedding response: ") + e.what());
    }
  }

 private:
  llm::HttpEndpoint endpoint_;
  std::string model_;
  llm::RetryPolicy retry_;
};

/// Cosine similarity mapped to [0, 1] via (1 + cos) / 2. Identical texts
/// score exactly 1.
inline double similarity_score(const std::string& a, const std::string& b, Embedder& embedder) {
  if (a.empty() || b.empty()) throw EmptyText("similarity needs two non-empty texts");
  if (a == b) return 1.0;
  auto va = embedder.embed(a);
  auto vb = embedder.embed(b);
  if (va.size() != vb.size()) throw ProviderError("embedding dimensions differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < va.size(); ++i) {
    dot += va[i] * vb[i];
    na += va[i] * va[i];
    nb += vb[i] * vb[i];
  }
  double cos = (na > 0.0 && nb > 0.0) ? dot / std::sqrt(na * nb) : 0.0;
  return std::clamp((1.0 + cos) / 2.0, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Description gate

/// Produces one candidate per call: (attempt number, score of the previous
/// rejected candidate if any).
using MutateFn = std::function<DescriptionVariant(int, std::optional<double>)>;
using ScoreFn = std::function<double(const std::string&)>;

struct GateOutcome {
  DescriptionVariant variant;               // Accepted, or Exhausted with the best candidate
  std::vector<DescriptionVariant> history;  // every scored attempt, Rejected or Accepted
};

/// Mutate-and-score loop bounded by cfg.max_iterations. Returns the first
/// candidate reaching the threshold; otherwise the best-scoring one, Exhausted.
inline GateOutcome gate_description(const MutateFn& mutate, const ScoreFn& score, const ReviewConfig& cfg) {
  cfg.validate();
  GateOutcome out;
  std::optional<DescriptionVariant> best;
  std::optional<double> previous;
  for (int attempt = 1; attempt <= cfg.max_iterations; ++attempt) {
    DescriptionVariant cand = mutate(attempt, previous);
    cand.attempt = attempt;
    cand.similarity = score(cand.text);
    if (*cand.similarity >= cfg.similarity_threshold) {
      cand.status = VariantStatus::Accepted;
      out.history.push_back(cand);
      out.variant = cand;
      return out;
    }
    cand.status = VariantStatus::Rejected;
    out.history.push_back(cand);
    if (!best || *cand.similarity > *best->similarity) best = cand;
    previous = cand.similarity;
  }
  out.variant = *best;
  out.variant.status = VariantStatus::Exhausted;
  out.variant.attempt = cfg.max_iterations;
  return out;
}

/// Gate against an original description using an embedder.
inline GateOutcome gate_description(const std::string& original, const MutateFn& mutate, Embedder& embedder,
                                    const ReviewConfig& cfg) {
  return gate_description(mutate, [&](const std::string& text) { return similarity_score(original, text, embedder); },
                          cfg);
}

/// Mutate a task description under each MR and gate every result. A blank or
/// unchanged mutation counts as a zero-similarity attempt.
inline std::vector<GateOutcome> review_descriptions(const Task& task, const std::vector<MrCode>& mrs,
                                                    llm::ChatProvider& llm, Embedder& embedder,
                                                    const ReviewConfig& cfg,
                                                    const mutator::DescriptionPrompts& prompts = {},
                                                    const llm::ChatParams& params = {},
                                                    const mutator::CallObserver& observer = {}) {
  cfg.validate();
  std::vector<GateOutcome> out;
  for (MrCode mr : mrs) {
    if (mr_target(mr) != MrTarget::Description) throw DomainError(mr_label(mr) + " does not apply to descriptions");
    auto mutate = [&](int attempt, std::optional<double> previous) {
      mutator::MutationRequest req{task.id, MRKind{mr}, task.description, attempt, previous,
                                   cfg.similarity_threshold};
      try {
        return mutator::mutate_description(req, llm, prompts, params, observer);
      } catch (const EmptyMutation&) {
        DescriptionVariant v;
        v.task_id = task.id;
        v.mr = MRKind{mr};
        v.attempt = attempt;
        return v;
      }
    };
    auto score = [&](const std::string& text) {
      return text.empty() ? 0.0 : similarity_score(task.description, text, embedder);
    };
    out.push_back(gate_description(mutate, score, cfg));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Behavioural validation of test variants

/// Marker prefixed to probe output. A probe is `assert False, MARK + repr(call)`:
/// the runner reports it as a failure whose message carries the value.
inline constexpr const char* kProbeMarker = "__metagen_value__:";

inline std::string probe_line(const std::string& call) {
  return std::string("assert False, \"") + kProbeMarker + "\" + repr(" + call + ")";
}

/// Outcome of evaluating a probe: the returned value, or why there is none.
struct ProbeOutcome {
  std::optional<testcase::LiteralValue> value;
  std::string reason;
  sandbox::Status status = sandbox::Status::Error;
};

inline ProbeOutcome read_probe(const sandbox::TestResult& r) {
  ProbeOutcome out;
  out.status = r.status;
  switch (r.status) {
    case sandbox::Status::Timeout: out.reason = "timeout: " + r.message; return out;
    case sandbox::Status::Error: out.reason = "oracle raised: " + r.message; return out;
    case sandbox::Status::Pass: out.reason = "probe unexpectedly passed"; return out;
    case sandbox::Status::Fail: break;
  }
  auto pos = r.message.find(kProbeMarker);
  if (pos == std::string::npos) {
    out.reason = "assertion inside oracle: " + r.message;
    return out;
  }
  try {
    out.value = testcase::parse_literal(r.message.substr(pos + std::char_traits<char>::length(kProbeMarker)));
  } catch (const ParseError& e) {
    out.reason = std::string("output has no literal form: ") + e.what();
  }
  return out;
}

/// Validate a batch of variants against the oracle solution in one sandbox
/// request. PendingOracle variants get their expected value filled from the
/// oracle's output; variants with an expected value are Valid iff the oracle
/// agrees. Duplicates are passed through untouched.
inline std::vector<TestVariant> validate_test_variants(std::vector<TestVariant> variants, const Task& oracle,
                                                       sandbox::Sandbox& sb, const ReviewConfig& cfg = {}) {
  sandbox::ExecRequest req;
  req.id = "validate:" + oracle.id;
  req.program = oracle.oracle_solution;
  req.timeout_s = cfg.test_timeout_s;
  std::vector<size_t> slots;
  for (size_t i = 0; i < variants.size(); ++i) {
    auto& v = variants[i];
    if (v.status == TestStatus::Duplicate) continue;
    std::string line;
    if (v.assertion.pending_oracle()) {
      line = probe_line(testcase::render_call(v.assertion));
    } else {
      try {
        line = testcase::render_test_case(v.assertion);
      } catch (const RenderError& e) {
        v.status = TestStatus::Invalid;
        v.reason = e.what();
        continue;
      }
    }
    req.tests.push_back({"v" + std::to_string(i), line});
    slots.push_back(i);
  }
  if (req.tests.empty()) return variants;
  auto resp = sb.execute(req);
  for (size_t k = 0; k < slots.size(); ++k) {
    auto& v = variants[slots[k]];
    const auto& r = resp.results[k];
    if (v.assertion.pending_oracle()) {
      auto probe = read_probe(r);
      if (!probe.value) {
        v.status = TestStatus::Invalid;
        v.reason = probe.reason;
        continue;
      }
      try {
        probe.value->render();  // must be expressible as a literal
      } catch (const RenderError& e) {
        v.status = TestStatus::Invalid;
        v.reason = e.what();
        continue;
      }
      v.assertion.expected = testcase::ConstExpr::leaf(*probe.value);
      v.expected_state = ExpectedState::OracleFilled;
      v.status = TestStatus::Valid;
      v.reason.clear();
    } else if (r.status == sandbox::Status::Pass) {
      v.status = TestStatus::Valid;
      v.reason.clear();
    } else {
      v.status = TestStatus::Invalid;
      v.reason = fmt::format("{}: {}", sandbox::to_string(r.status),
                             r.status == sandbox::Status::Fail ? "oracle output differs from expected" : r.message);
    }
  }
  return variants;
}

inline TestVariant validate_test_variant(const TestVariant& variant, const Task& oracle, sandbox::Sandbox& sb,
                                         const ReviewConfig& cfg = {}) {
  return validate_test_variants({variant}, oracle, sb, cfg).front();
}

}  // namespace metagen::reviewer
