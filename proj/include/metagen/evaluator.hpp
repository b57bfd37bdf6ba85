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
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "metagen/core/model.hpp"
#include "metagen/generator.hpp"
#include "metagen/reviewer.hpp"
#include "metagen/sandbox.hpp"
#include "metagen/util/parallel.hpp"

namespace metagen::evaluator {

struct ExecutionReport {
  std::string id;
  std::vector<sandbox::TestResult> per_test;
  std::optional<double> branch_coverage_pct;
  std::int64_t wall_time_ms = 0;

  bool passed() const {
    if (per_test.empty()) return false;
    for (const auto& r : per_test)
      if (r.status != sandbox::Status::Pass) return false;
    return true;
  }
};

inline std::string candidate_id(const CandidateSolution& c) {
  return fmt::format("{}/{}/{}", c.task_id, c.origin.label(), c.sample_index);
}

inline sandbox::ExecRequest make_request(std::string id, const std::string& program,
                                         const std::vector<std::string>& tests, bool want_coverage,
                                         double timeout_s) {
  sandbox::ExecRequest req;
  req.id = std::move(id);
  req.program = program;
  req.timeout_s = timeout_s;
  req.measure_coverage = want_coverage;
  for (size_t i = 0; i < tests.size(); ++i) req.tests.push_back({"t" + std::to_string(i), tests[i]});
  return req;
}

inline ExecutionReport to_report(const sandbox::ExecResponse& resp, std::int64_t wall_ms) {
  ExecutionReport rep;
  rep.id = resp.id;
  rep.per_test = resp.results;
  if (resp.coverage) rep.branch_coverage_pct = resp.coverage->branch_pct;
  rep.wall_time_ms = wall_ms;
  return rep;
}

/// Run one candidate against rendered test lines. Infrastructure failures
/// surface as SandboxError; they are never reported as test failures.
inline ExecutionReport run_candidate(const CandidateSolution& candidate, const std::vector<std::string>& tests,
                                     sandbox::Sandbox& sb, bool want_coverage = false, double timeout_s = 5.0) {
  if (candidate.source_code.empty()) throw DomainError("candidate " + candidate_id(candidate) + " has no source");
  if (tests.empty()) throw DomainError("no tests to run");
  auto start = std::chrono::steady_clock::now();
  auto resp = sb.execute(make_request(candidate_id(candidate), candidate.source_code, tests, want_coverage, timeout_s));
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  return to_report(resp, ms);
}

/// Unbiased pass@k estimator 1 - C(n-c, k) / C(n, k).
inline double pass_at_k(int n, int c, int k) {
  if (n < 0 || c < 0 || c > n) throw DomainError(fmt::format("pass_at_k needs 0 <= c <= n (n={}, c={})", n, c));
  if (k < 1 || k > n) throw DomainError(fmt::format("pass_at_k needs 1 <= k <= n (n={}, k={})", n, k));
  if (n - c < k) return 1.0;
  double miss = 1.0;  // C(n-c, k) / C(n, k) = prod_{i=n-c+1}^{n} (1 - k/i)
  for (int i = n - c + 1; i <= n; ++i) miss *= 1.0 - static_cast<double>(k) / i;
  return 1.0 - miss;
}

/// Suite-level branch coverage: all tests in one measured session.
inline double coverage_of_suite(const std::string& program, const std::vector<std::string>& tests,
                                sandbox::Sandbox& sb, double timeout_s = 5.0) {
  if (tests.empty()) throw DomainError("coverage needs at least one test");
  auto resp = sb.execute(make_request("coverage", program, tests, true, timeout_s));
  if (!resp.coverage) throw SandboxError("runner returned no coverage");
  return resp.coverage->branch_pct;
}

/// 100 * Valid / (Valid + Invalid); duplicates are ignored.
inline double correctness_rate(const std::vector<TestVariant>& variants) {
  long valid = 0, invalid = 0;
  for (const auto& v : variants) {
    switch (v.status) {
      case TestStatus::Valid: ++valid; break;
      case TestStatus::Invalid: ++invalid; break;
      case TestStatus::Duplicate: break;
      case TestStatus::Pending: throw DomainError("variant still pending review");
    }
  }
  if (valid + invalid == 0) throw DomainError("no reviewed variants");
  return 100.0 * static_cast<double>(valid) / static_cast<double>(valid + invalid);
}

// ---------------------------------------------------------------------------
// Cross-variant consistency

struct OutputGroup {
  std::string outcome;               // rendered value, or "<status>: message"
  std::vector<size_t> candidates;    // indices into the candidate list
};

struct Disagreement {
  std::string probe;                 // the rendered call
  std::vector<OutputGroup> groups;   // at least two, ordered by first candidate
};

inline std::string probe_call(const std::string& entry_point, const std::vector<testcase::LiteralValue>& args) {
  std::string out = entry_point + "(";
  for (size_t i = 0; i < args.size(); ++i) {
    if (i) out += ", ";
    out += args[i].render();
  }
  return out + ")";
}

/// Run every probe through every candidate; list probes on which candidates
/// disagree, partitioned by output.
inline std::vector<Disagreement> cross_variant_consistency(
    const std::vector<CandidateSolution>& candidates, const std::string& entry_point,
    const std::vector<std::vector<testcase::LiteralValue>>& probes, sandbox::Sandbox& sb, double timeout_s = 5.0) {
  if (probes.empty()) return {};
  if (candidates.size() < 2) throw DomainError("consistency check needs at least two candidates");
  std::vector<std::string> calls, lines;
  for (const auto& p : probes) {
    calls.push_back(probe_call(entry_point, p));
    lines.push_back(reviewer::probe_line(calls.back()));
  }
  // outcomes[candidate][probe]: canonical key and display form
  std::vector<std::vector<std::pair<std::string, std::string>>> outcomes(candidates.size());
  for (size_t ci = 0; ci < candidates.size(); ++ci) {
    auto resp = sb.execute(make_request("probe:" + candidate_id(candidates[ci]), candidates[ci].source_code, lines,
                                        false, timeout_s));
    for (const auto& r : resp.results) {
      auto probe = reviewer::read_probe(r);
      if (probe.value)
        outcomes[ci].emplace_back(probe.value->canonical(), probe.value->render());
      else
        outcomes[ci].emplace_back("!" + probe.reason, probe.reason);
    }
  }
  std::vector<Disagreement> out;
  for (size_t pi = 0; pi < probes.size(); ++pi) {
    std::vector<std::string> keys;
    Disagreement d{calls[pi], {}};
    for (size_t ci = 0; ci < candidates.size(); ++ci) {
      const auto& [key, shown] = outcomes[ci][pi];
      auto it = std::find(keys.begin(), keys.end(), key);
      if (it == keys.end()) {
        keys.push_back(key);
        d.groups.push_back({shown, {ci}});
      } else {
        d.groups[static_cast<size_t>(it - keys.begin())].candidates.push_back(ci);
      }
    }
    if (d.groups.size() > 1) out.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pool evaluation and ablation

/// How a multi-description pool is scored: pass@k over all candidates pooled,
/// or the best single description's pass@k.
enum class Pooling { Pooled, BestDescription };

struct CandidateOutcome {
  CandidateSolution candidate;
  bool passed = false;
  std::optional<ExecutionReport> report;  // unset when the candidate had no source
};

/// Execute every candidate against the task's oracle tests.
inline std::vector<CandidateOutcome> evaluate_candidates(const Task& task,
                                                         const std::vector<CandidateSolution>& candidates,
                                                         sandbox::Sandbox& sb, int parallelism = 1,
                                                         double timeout_s = 5.0) {
  std::vector<CandidateOutcome> out(candidates.size());
  util::parallel_for(candidates.size(), parallelism, [&](size_t i) {
    out[i].candidate = candidates[i];
    if (!candidates[i].usable()) return;
    out[i].report = run_candidate(candidates[i], task.oracle_tests, sb, false, timeout_s);
    out[i].passed = out[i].report->passed();
  });
  return out;
}

struct PassRates {
  double pass_at_1 = 0.0;
  std::optional<double> pass_at_5;  // unset when fewer than 5 samples
};

inline PassRates pass_rates(int n, int c) {
  PassRates r;
  r.pass_at_1 = pass_at_k(n, c, 1);
  if (n >= 5) r.pass_at_5 = pass_at_k(n, c, 5);
  return r;
}

/// pass@1/pass@5 of a set of outcomes for one task, under the pooling rule.
inline PassRates task_pass_rates(const std::vector<CandidateOutcome>& outcomes, Pooling pooling = Pooling::Pooled) {
  if (outcomes.empty()) throw DomainError("no candidates to score");
  if (pooling == Pooling::Pooled) {
    int c = 0;
    for (const auto& o : outcomes) c += o.passed ? 1 : 0;
    return pass_rates(static_cast<int>(outcomes.size()), c);
  }
  std::map<std::string, std::pair<int, int>> by_origin;  // label -> (n, c)
  for (const auto& o : outcomes) {
    auto& [n, c] = by_origin[o.candidate.origin.label()];
    ++n;
    c += o.passed ? 1 : 0;
  }
  std::optional<PassRates> best;
  for (const auto& [label, nc] : by_origin) {
    auto r = pass_rates(nc.first, nc.second);
    if (!best) {
      best = r;
      continue;
    }
    best->pass_at_1 = std::max(best->pass_at_1, r.pass_at_1);
    if (best->pass_at_5 && r.pass_at_5) best->pass_at_5 = std::max(*best->pass_at_5, *r.pass_at_5);
    else best->pass_at_5.reset();
  }
  return *best;
}

/// Arithmetic mean of per-task rates. pass@5 is set only if set for every task.
inline PassRates mean_rates(const std::vector<PassRates>& per_task) {
  if (per_task.empty()) throw DomainError("no tasks to average");
  PassRates out;
  double p5 = 0.0;
  bool all5 = true;
  for (const auto& r : per_task) {
    out.pass_at_1 += r.pass_at_1;
    if (r.pass_at_5) p5 += *r.pass_at_5;
    else all5 = false;
  }
  out.pass_at_1 /= static_cast<double>(per_task.size());
  if (all5) out.pass_at_5 = p5 / static_cast<double>(per_task.size());
  return out;
}

struct AblationPoint {
  Origin point;  // Base, a single MR, or CMA
  double pass_at_1 = 0.0;
  std::optional<double> pass_at_5;
  std::string error;  // set when this point's pass failed; metrics are then zero
};

struct AblationContext {
  llm::ChatProvider* llm = nullptr;
  sandbox::Sandbox* sandbox = nullptr;
  reviewer::Embedder* embedder = nullptr;
  reviewer::ReviewConfig review;
  mutator::DescriptionPrompts mutation_prompts;
  llm::ChatParams mutation_params;
  generator::CandidateOptions generation;
  Pooling pooling = Pooling::Pooled;
  mutator::CallObserver observer;
  /// Receives each task's reviewed variants and candidate outcomes, in task order.
  std::function<void(const Task&, const std::vector<reviewer::GateOutcome>&,
                     const std::vector<CandidateOutcome>&)>
      on_task;
};

/// One point per single MR, plus Base, plus CMA when at least one MR is given.
/// Every point draws the same number of samples per description. A task whose
/// MR variant never passed review contributes its Base candidates to that
/// MR's point.
inline std::vector<AblationPoint> ablate(const std::vector<Task>& tasks, const std::vector<MrCode>& mrs,
                                         const AblationContext& ctx) {
  if (!ctx.llm || !ctx.sandbox || !ctx.embedder) throw ConfigError("ablation needs an LLM, a sandbox and an embedder");
  for (MrCode mr : mrs)
    if (mr_target(mr) != MrTarget::Description)
      throw DomainError(mr_label(mr) + " is not a description MR and cannot be ablated");
  if (tasks.empty()) throw DomainError("no tasks to ablate");

  std::vector<Origin> points{Origin::base()};
  for (MrCode mr : mrs) points.push_back(Origin::single(mr));
  if (!mrs.empty()) points.push_back(Origin::cma());

  // per_point[p][t]: rates of point p on task t, or an error message.
  std::vector<std::vector<PassRates>> per_point(points.size());
  std::vector<std::string> errors(points.size());

  for (const auto& task : tasks) {
    std::vector<reviewer::GateOutcome> reviewed;
    std::vector<CandidateOutcome> outcomes;
    std::map<std::string, std::string> failed;  // origin label -> error
    try {
      reviewed = reviewer::review_descriptions(task, mrs, *ctx.llm, *ctx.embedder, ctx.review, ctx.mutation_prompts,
                                               ctx.mutation_params, ctx.observer);
    } catch (const Error& e) {
      for (size_t p = 1; p < points.size(); ++p) failed[points[p].label()] = e.what();
    }
    std::vector<generator::SourceDescription> descriptions{{Origin::base(), task.description}};
    for (const auto& g : reviewed)
      if (g.variant.status == VariantStatus::Accepted)
        descriptions.push_back({Origin::single(g.variant.mr.code), g.variant.text});
    auto gen = ctx.generation;
    gen.observer = ctx.observer;
    try {
      auto candidates = generator::generate_candidates(task, descriptions, *ctx.llm, gen);
      outcomes = evaluate_candidates(task, candidates, *ctx.sandbox, gen.parallelism, ctx.review.test_timeout_s);
    } catch (const Error& e) {
      for (const auto& pt : points) failed[pt.label()] = e.what();
    }
    if (ctx.on_task) ctx.on_task(task, reviewed, outcomes);

    auto select = [&](const Origin& o) {
      std::vector<CandidateOutcome> sel;
      for (const auto& c : outcomes)
        if (c.candidate.origin == o) sel.push_back(c);
      return sel;
    };
    auto base = select(Origin::base());
    for (size_t p = 0; p < points.size(); ++p) {
      const auto& pt = points[p];
      if (auto it = failed.find(pt.label()); it != failed.end()) {
        if (errors[p].empty()) errors[p] = task.id + ": " + it->second;
        continue;
      }
      try {
        if (pt.kind == Origin::Kind::Base) {
          per_point[p].push_back(task_pass_rates(base));
        } else if (pt.kind == Origin::Kind::SingleMR) {
          auto sel = select(pt);
          per_point[p].push_back(task_pass_rates(sel.empty() ? base : sel));
        } else {
          per_point[p].push_back(task_pass_rates(outcomes, ctx.pooling));
        }
      } catch (const Error& e) {
        if (errors[p].empty()) errors[p] = task.id + ": " + e.what();
      }
    }
  }

  std::vector<AblationPoint> out;
  for (size_t p = 0; p < points.size(); ++p) {
    AblationPoint ap{points[p], 0.0, std::nullopt, errors[p]};
    if (errors[p].empty()) {
      auto m = mean_rates(per_point[p]);
      ap.pass_at_1 = m.pass_at_1;
      ap.pass_at_5 = m.pass_at_5;
    }
    out.push_back(ap);
  }
  return out;
}

}  // namespace metagen::evaluator
