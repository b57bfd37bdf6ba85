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
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "metagen/core/model.hpp"
#include "metagen/llm/chat.hpp"
#include "metagen/testcase/parser.hpp"
#include "metagen/util/text.hpp"

namespace metagen::mutator {

using testcase::AssertionCase;
using testcase::ConstExpr;
using testcase::LiteralValue;

/// Observer invoked after every LLM response: (module tag, task id, response).
using CallObserver = std::function<void(const std::string&, const std::string&, const llm::ChatResponse&)>;

// ---------------------------------------------------------------------------
// Description mutation (MR1-MR4, LLM-backed)

/// Prompt wording for description rewrites. All of it is configuration.
struct DescriptionPrompts {
  std::string system =
      "You rewrite programming problem descriptions. Keep the required behaviour, inputs, outputs, edge cases "
      "and function name exactly as specified. Reply with the rewritten description only.";
  std::map<MrCode, std::string> instructions = {
      {MrCode::MR1,
       "Rewrite the description so that its conditions are stated through negation (for example \"unless\", "
       "\"not less than\", \"must not\") while the required behaviour stays identical."},
      {MrCode::MR2,
       "Translate the description into {{language}}. Leave identifiers, code fragments and numbers unchanged."},
      {MrCode::MR3,
       "Restate the task as a numbered list of short, concrete steps that an implementation should follow, in "
       "order."},
      {MrCode::MR4,
       "Reword the description with different vocabulary and sentence structure, keeping every requirement."},
  };
  std::string user = "{{instruction}}\n\nOriginal description:\n{{description}}{{feedback}}";
  std::string feedback =
      "\n\nA previous rewrite scored {{score}} semantic similarity against the original, below the required "
      "{{threshold}}. Stay closer to the original meaning.";
  std::string pivot_language = "French";
};

struct MutationRequest {
  std::string task_id;
  MRKind mr;
  std::string source_text;
  int attempt = 1;
  std::optional<double> previous_score;  // set when re-prompting after a rejection
  double threshold = 0.8;
};

inline llm::ChatRequest description_request(const MutationRequest& req, const DescriptionPrompts& prompts,
                                            const llm::ChatParams& params) {
  if (req.mr.target() != MrTarget::Description)
    throw DomainError(req.mr.label() + " does not transform descriptions");
  auto it = prompts.instructions.find(req.mr.code);
  if (it == prompts.instructions.end()) throw TemplateError("no instruction for " + req.mr.label());
  std::string instruction = util::render_template(it->second, {{"language", prompts.pivot_language}});
  std::string feedback;
  if (req.previous_score)
    feedback = util::render_template(prompts.feedback, {{"score", fmt::format("{:.3f}", *req.previous_score)},
                                                        {"threshold", fmt::format("{:.2f}", req.threshold)}});
  llm::ChatRequest chat;
  chat.params = params;
  chat.messages.push_back({"system", prompts.system});
  chat.messages.push_back(
      {"user", util::render_template(prompts.user, {{"instruction", instruction},
                                                    {"description", req.source_text},
                                                    {"feedback", feedback}})});
  return chat;
}

/// Ask the model for one MR-transformed description. The result is Pending;
/// review happens downstream.
inline DescriptionVariant mutate_description(const MutationRequest& req, llm::ChatProvider& llm,
                                             const DescriptionPrompts& prompts, const llm::ChatParams& params,
                                             const CallObserver& observer = {}) {
  auto chat = description_request(req, prompts, params);
  auto resp = llm.chat(chat);
  if (observer) observer("mutator", req.task_id, resp);
  std::string text = util::trim(resp.text);
  if (text.empty()) throw EmptyMutation(req.mr.label() + " returned a blank description");
  if (text == util::trim(req.source_text))
    throw EmptyMutation(req.mr.label() + " returned the description unchanged");
  DescriptionVariant v;
  v.task_id = req.task_id;
  v.mr = req.mr;
  v.text = std::move(text);
  v.status = VariantStatus::Pending;
  v.attempt = req.attempt;
  return v;
}

// ---------------------------------------------------------------------------
// Test-case mutation (MR5-MR9, rule-based)

namespace detail {

inline std::optional<size_t> first_sequence_arg(const AssertionCase& c) {
  for (size_t i = 0; i < c.args.size(); ++i)
    if (c.args[i].value().kind() == LiteralValue::Kind::Sequence) return i;
  return std::nullopt;
}

inline TestVariant make_variant(const AssertionCase& origin, MrCode mr, int rule, std::vector<ConstExpr> args) {
  TestVariant v;
  v.mr = MRKind{mr};
  v.rule_index = rule;
  v.assertion.callee = origin.callee;
  v.assertion.args = std::move(args);
  v.assertion.raw = origin.raw;
  v.expected_state = ExpectedState::PendingOracle;
  v.status = TestStatus::Pending;
  v.source = VariantSource::RuleBased;
  return v;
}

// Replace argument `index` with a leaf holding a transformed copy of its
// sequence value.
template <typename Edit>
std::optional<TestVariant> edit_sequence(const AssertionCase& c, MrCode mr, int rule, size_t min_len, Edit edit) {
  auto idx = first_sequence_arg(c);
  if (!idx) return std::nullopt;
  const auto& seq = c.args[*idx].value().as_sequence();
  if (seq.items.size() < min_len) return std::nullopt;
  auto items = seq.items;
  edit(items);
  auto args = c.args;
  args[*idx] = ConstExpr::leaf(LiteralValue::sequence(std::move(items), seq.tuple));
  return make_variant(c, mr, rule, std::move(args));
}

inline bool is_scalar(const LiteralValue& v) {
  return v.kind() != LiteralValue::Kind::Sequence && v.kind() != LiteralValue::Kind::Mapping;
}

// Increment the last integer/float (not bool) in depth-first order.
inline bool increment_last_numeric(LiteralValue& v) {
  switch (v.kind()) {
    case LiteralValue::Kind::Integer: v = LiteralValue::integer(v.as_integer() + 1); return true;
    case LiteralValue::Kind::Float: v = LiteralValue::floating(v.as_float() + 1.0); return true;
    case LiteralValue::Kind::Sequence: {
      auto seq = v.as_sequence();
      for (auto it = seq.items.rbegin(); it != seq.items.rend(); ++it) {
        if (increment_last_numeric(*it)) {
          v = LiteralValue::sequence(std::move(seq.items), seq.tuple);
          return true;
        }
      }
      return false;
    }
    case LiteralValue::Kind::Mapping: {
      auto entries = v.as_mapping().entries;
      for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
        if (increment_last_numeric(it->second)) {
          v = LiteralValue::mapping(std::move(entries));
          return true;
        }
      }
      return false;
    }
    default: return false;
  }
}

inline ConstExpr rebuild(const ConstExpr& node, std::vector<ConstExpr> children) {
  using K = ConstExpr::Kind;
  switch (node.kind()) {
    case K::Leaf: return node;
    case K::Binary: return ConstExpr::binary(node.op(), children[0], children[1]);
    case K::Negate: return ConstExpr::negate(children[0]);
    default: return ConstExpr::display(node.kind(), std::move(children));
  }
}

inline bool is_additive(const ConstExpr& e) {
  return e.kind() == ConstExpr::Kind::Binary &&
         (e.op() == testcase::BinaryOp::Add || e.op() == testcase::BinaryOp::Sub);
}

// Rewrite the first product-of-sum in pre-order: a*(b+c) -> a*b + a*c and
// (b+c)*a -> b*a + c*a.
inline std::optional<ConstExpr> distribute_first(const ConstExpr& e) {
  using testcase::BinaryOp;
  if (e.kind() == ConstExpr::Kind::Binary && e.op() == BinaryOp::Mul) {
    const auto& l = e.children()[0];
    const auto& r = e.children()[1];
    if (is_additive(r)) {
      return ConstExpr::binary(r.op(), ConstExpr::binary(BinaryOp::Mul, l, r.children()[0]),
                               ConstExpr::binary(BinaryOp::Mul, l, r.children()[1]));
    }
    if (is_additive(l)) {
      return ConstExpr::binary(l.op(), ConstExpr::binary(BinaryOp::Mul, l.children()[0], r),
                               ConstExpr::binary(BinaryOp::Mul, l.children()[1], r));
    }
  }
  for (size_t i = 0; i < e.children().size(); ++i) {
    if (auto sub = distribute_first(e.children()[i])) {
      auto kids = e.children();
      kids[i] = *sub;
      return rebuild(e, std::move(kids));
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Apply one test-case MR to a parsed case. Only inputs change; every variant
/// comes back PendingOracle so the oracle solution decides the expected value.
/// An inapplicable MR yields an empty list.
///
/// Rules: MR5 swaps the first two elements of the first sequence argument (or
/// the first two scalar arguments when there is no sequence); MR6 swaps the
/// last two elements; MR7 distributes the first product-of-sum inside an
/// argument expression; MR8 drops the last element; MR9 appends a copy of the
/// first element (rule 0) and increments the last numeric scalar (rule 1).
inline std::vector<TestVariant> apply_test_mr(const AssertionCase& c, MRKind mr) {
  if (mr.target() != MrTarget::TestCase) throw DomainError(mr.label() + " does not transform test cases");
  std::vector<TestVariant> out;
  auto push = [&](std::optional<TestVariant> v) {
    if (v) out.push_back(std::move(*v));
  };
  switch (mr.code) {
    case MrCode::MR5: {
      auto v = detail::edit_sequence(c, MrCode::MR5, 0, 2, [](auto& items) { std::swap(items[0], items[1]); });
      if (!v && c.args.size() >= 2 && detail::is_scalar(c.args[0].value()) && detail::is_scalar(c.args[1].value())) {
        auto args = c.args;
        std::swap(args[0], args[1]);
        v = detail::make_variant(c, MrCode::MR5, 0, std::move(args));
      }
      push(std::move(v));
      break;
    }
    case MrCode::MR6:
      push(detail::edit_sequence(c, MrCode::MR6, 0, 2, [](auto& items) {
        std::swap(items[items.size() - 2], items[items.size() - 1]);
      }));
      break;
    case MrCode::MR7:
      for (size_t i = 0; i < c.args.size(); ++i) {
        std::optional<ConstExpr> rewritten;
        try {
          rewritten = detail::distribute_first(c.args[i]);
        } catch (const ParseError&) {
          continue;
        }
        if (!rewritten || !(rewritten->value() == c.args[i].value())) continue;
        auto args = c.args;
        args[i] = *rewritten;
        out.push_back(detail::make_variant(c, MrCode::MR7, static_cast<int>(i), std::move(args)));
      }
      break;
    case MrCode::MR8:
      push(detail::edit_sequence(c, MrCode::MR8, 0, 2, [](auto& items) { items.pop_back(); }));
      break;
    case MrCode::MR9: {
      push(detail::edit_sequence(c, MrCode::MR9, 0, 2, [](auto& items) { items.push_back(items.front()); }));
      for (size_t i = c.args.size(); i-- > 0;) {
        LiteralValue v = c.args[i].value();
        if (detail::increment_last_numeric(v)) {
          auto args = c.args;
          args[i] = ConstExpr::leaf(std::move(v));
          out.push_back(detail::make_variant(c, MrCode::MR9, 1, std::move(args)));
          break;
        }
      }
      break;
    }
    default: break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// LLM fallback for test lines the rule engine cannot parse

struct TestPrompts {
  std::string system =
      "You transform unit tests with metamorphic relations. Reply only with Python assert statements, one per "
      "line, each of the form: assert CALL(...) == EXPECTED";
  std::map<MrCode, std::string> relations = {
      {MrCode::MR5, "swap the positions of two input values"},
      {MrCode::MR6, "permute the order of the input elements"},
      {MrCode::MR7, "rewrite a numeric input as an algebraically equivalent expression"},
      {MrCode::MR8, "restrict the input to a smaller subset of its elements"},
      {MrCode::MR9, "grow or shift the input data by a small increment"},
  };
  std::string user =
      "Metamorphic relation: {{relation}}.\nApply it to the test below. Change only the inputs, keep the same "
      "function, and recompute the expected value for the new input.\n\nTest:\n{{test}}";
};

struct ExpansionOptions {
  llm::ChatProvider* fallback = nullptr;  // null: unparseable lines are skipped
  TestPrompts prompts;
  llm::ChatParams params;
  CallObserver observer;
};

struct SuiteExpansion {
  std::vector<TestVariant> variants;    // deduplicated, in (oracle index, MR, rule) order
  std::vector<TestVariant> duplicates;  // status Duplicate
  std::vector<std::pair<size_t, std::string>> skipped;  // oracle index, reason
};

/// Expand a task's oracle suite with the selected test-case MRs, dropping any
/// variant whose inputs repeat an oracle case or an earlier variant.
inline SuiteExpansion expand_suite(const Task& task, const std::set<MrCode>& mrs, const ExpansionOptions& opts = {}) {
  SuiteExpansion out;
  if (mrs.empty()) return out;
  for (MrCode mr : mrs)
    if (mr_target(mr) != MrTarget::TestCase) throw DomainError(mr_label(mr) + " does not transform test cases");

  std::vector<std::optional<AssertionCase>> parsed;
  std::set<std::string> seen;
  for (size_t i = 0; i < task.oracle_tests.size(); ++i) {
    try {
      parsed.push_back(testcase::parse_test_case(task.oracle_tests[i]));
      seen.insert(testcase::input_key(*parsed.back()));
    } catch (const ParseError& e) {
      parsed.push_back(std::nullopt);
      if (!opts.fallback) out.skipped.emplace_back(i, e.what());
    }
  }

  auto admit = [&](TestVariant v, size_t origin) {
    v.task_id = task.id;
    v.origin_index = origin;
    if (!seen.insert(testcase::input_key(v.assertion)).second) {
      v.status = TestStatus::Duplicate;
      out.duplicates.push_back(std::move(v));
    } else {
      out.variants.push_back(std::move(v));
    }
  };

  for (size_t i = 0; i < parsed.size(); ++i) {
    for (MrCode mr : mrs) {
      if (parsed[i]) {
        for (auto& v : apply_test_mr(*parsed[i], MRKind{mr})) admit(std::move(v), i);
        continue;
      }
      if (!opts.fallback) continue;
      llm::ChatRequest chat;
      chat.params = opts.params;
      chat.messages.push_back({"system", opts.prompts.system});
      chat.messages.push_back(
          {"user", util::render_template(opts.prompts.user,
                                         {{"relation", opts.prompts.relations.at(mr)}, {"test", task.oracle_tests[i]}})});
      llm::ChatResponse resp;
      try {
        resp = opts.fallback->chat(chat);
      } catch (const ProviderError& e) {
        out.skipped.emplace_back(i, fmt::format("{} fallback failed: {}", mr_label(mr), e.what()));
        continue;
      }
      if (opts.observer) opts.observer("mutator", task.id, resp);
      int rule = 0;
      for (const auto& line : testcase::split_assert_lines(resp.text)) {
        try {
          TestVariant v;
          v.mr = MRKind{mr};
          v.rule_index = rule++;
          v.assertion = testcase::parse_test_case(line);
          v.expected_state = ExpectedState::AsTransformed;
          v.source = VariantSource::LLMBased;
          admit(std::move(v), i);
        } catch (const ParseError&) {
          // The model's line is outside the literal subset; nothing to validate.
        }
      }
    }
  }
  return out;
}

}  // namespace metagen::mutator
