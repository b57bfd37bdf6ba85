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
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "metagen/bench/dataset.hpp"
#include "metagen/bench/ledger.hpp"
#include "metagen/bench/report.hpp"
#include "metagen/evaluator.hpp"
#include "metagen/generator.hpp"
#include "metagen/llm/http_provider.hpp"
#include "metagen/llm/replay.hpp"
#include "metagen/llm/usage.hpp"
#include "metagen/mutator.hpp"
#include "metagen/reviewer.hpp"
#include "metagen/sandbox.hpp"

namespace metagen::pipeline {

using json = nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

struct ProviderConfig {
  std::string name = "openai";
  std::string base_url = "https://api.openai.com/v1";
  std::string model;
  std::optional<std::string> api_key_env;  // default <NAME>_API_KEY; "" = no credential
  int timeout_s = 120;
  double temperature = 0.2;
  int max_tokens = 1024;
};

struct RunConfig {
  fs::path dataset;
  bench::FieldMapping fields;
  DatasetTag dataset_tag = DatasetTag::Custom;
  std::string dataset_name;  // report label; defaults from the tag

  ProviderConfig provider;
  std::string model_label;  // report label; defaults to provider.model
  std::optional<fs::path> replay_dir;
  std::optional<fs::path> record_dir;

  std::string embedder = "hashed";  // hashed | http
  std::string embedding_model = "text-embedding-3-small";

  std::vector<MrCode> mrs{kAllMrs.begin(), kAllMrs.end()};
  int samples = 5;
  double similarity_threshold = 0.8;
  int max_iterations = 3;
  std::string pivot_language = "French";
  evaluator::Pooling pooling = evaluator::Pooling::Pooled;
  bool llm_fallback = true;
  bool baseline = false;

  std::string sandbox_command = "metagen-runner";
  double test_timeout_s = 5.0;

  int parallelism = 4;
  std::optional<std::int64_t> seed;
  fs::path out = "out";

  std::int64_t base_seed() const { return seed.value_or(0); }
  bool deterministic() const { return seed.has_value(); }

  std::string api_key_env() const {
    if (provider.api_key_env) return *provider.api_key_env;
    std::string var;
    for (char c : provider.name) var += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::toupper(c)) : '_';
    return var + "_API_KEY";
  }

  std::string dataset_label() const {
    if (!dataset_name.empty()) return dataset_name;
    switch (dataset_tag) {
      case DatasetTag::HumanEvalPro: return "HumanEval Pro";
      case DatasetTag::MbppPro: return "MBPP Pro";
      case DatasetTag::Custom: break;
    }
    return dataset.stem().string();
  }
  std::string model_name() const { return model_label.empty() ? provider.model : model_label; }

  std::vector<MrCode> mrs_for(MrTarget target) const {
    std::vector<MrCode> out;
    for (MrCode m : mrs)
      if (mr_target(m) == target) out.push_back(m);
    return out;
  }

  void validate() const {
    if (!(similarity_threshold > 0.0 && similarity_threshold <= 1.0))
      throw ConfigError("similarity_threshold: must be in (0, 1], got " + fmt::format("{}", similarity_threshold));
    if (samples < 1) throw ConfigError("samples: must be >= 1");
    if (max_iterations < 1) throw ConfigError("max_iterations: must be >= 1");
    if (parallelism < 1) throw ConfigError("parallelism: must be >= 1");
    if (!(test_timeout_s > 0.0)) throw ConfigError("sandbox.timeout_s: must be positive");
    if (replay_dir && record_dir) throw ConfigError("replay_dir and record_dir are mutually exclusive");
    if (embedder != "hashed" && embedder != "http") throw ConfigError("embedder: expected 'hashed' or 'http'");
    std::set<MrCode> seen;
    for (MrCode m : mrs)
      if (!seen.insert(m).second) throw ConfigError("mrs: " + mr_label(m) + " listed twice");
  }
};

/// Parse "MR1,5,mr6" style lists. Unknown codes are configuration errors.
inline std::vector<MrCode> parse_mr_list(const std::string& text) {
  std::vector<MrCode> out;
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    std::string item = util::trim(std::string_view(text).substr(start, end - start));
    if (!item.empty()) {
      try {
        out.push_back(parse_mr(item));
      } catch (const DomainError&) {
        throw ConfigError("mrs: unknown metamorphic relation '" + item + "' (expected MR1..MR9)");
      }
    }
    start = end + 1;
  }
  if (out.empty()) throw ConfigError("mrs: empty list");
  return out;
}

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(where + key + ": unknown key");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + key + ": wrong type (" + std::string(j.at(key).type_name()) + ")");
  }
}

}  // namespace detail

/// Apply a JSON config document on top of `cfg`.
inline void apply_config(const json& j, RunConfig& cfg) {
  using detail::read;
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  detail::reject_unknown(j,
                         {"dataset", "provider", "model_label", "replay_dir", "record_dir", "embedder", "mrs",
                          "samples", "similarity_threshold", "max_iterations", "pivot_language", "pooling",
                          "llm_fallback", "baseline", "sandbox", "parallelism", "seed", "out"},
                         "");
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    detail::reject_unknown(d, {"path", "tag", "name", "fields"}, "dataset.");
    std::string path, tag;
    read(d, "path", path, "dataset.");
    if (!path.empty()) cfg.dataset = path;
    read(d, "tag", tag, "dataset.");
    if (!tag.empty()) {
      try {
        cfg.dataset_tag = parse_dataset_tag(tag);
      } catch (const DomainError& e) {
        throw ConfigError(std::string("dataset.tag: ") + e.what());
      }
    }
    read(d, "name", cfg.dataset_name, "dataset.");
    if (d.contains("fields")) {
      detail::reject_unknown(d["fields"], {"id", "description", "entry_point", "solution", "tests"}, "dataset.fields.");
      try {
        cfg.fields = d["fields"].get<bench::FieldMapping>();
      } catch (const json::exception&) {
        throw ConfigError("dataset.fields: field names must be strings");
      }
    }
  }
  if (j.contains("provider")) {
    const auto& p = j["provider"];
    detail::reject_unknown(p, {"name", "base_url", "model", "api_key_env", "timeout_s", "temperature", "max_tokens"},
                           "provider.");
    if (p.contains("api_key")) throw ConfigError("provider.api_key: credentials are read from the environment only");
    read(p, "name", cfg.provider.name, "provider.");
    read(p, "base_url", cfg.provider.base_url, "provider.");
    read(p, "model", cfg.provider.model, "provider.");
    if (p.contains("api_key_env") && p["api_key_env"].is_string()) cfg.provider.api_key_env = p["api_key_env"].get<std::string>();
    read(p, "timeout_s", cfg.provider.timeout_s, "provider.");
    read(p, "temperature", cfg.provider.temperature, "provider.");
    read(p, "max_tokens", cfg.provider.max_tokens, "provider.");
  }
  read(j, "model_label", cfg.model_label, "");
  std::string dir;
  read(j, "replay_dir", dir, "");
  if (!dir.empty()) cfg.replay_dir = dir;
  dir.clear();
  read(j, "record_dir", dir, "");
  if (!dir.empty()) cfg.record_dir = dir;
  if (j.contains("embedder")) {
    const auto& e = j["embedder"];
    detail::reject_unknown(e, {"kind", "model"}, "embedder.");
    read(e, "kind", cfg.embedder, "embedder.");
    read(e, "model", cfg.embedding_model, "embedder.");
  }
  if (j.contains("mrs")) {
    const auto& m = j["mrs"];
    if (m.is_string()) {
      cfg.mrs = parse_mr_list(m.get<std::string>());
    } else if (m.is_array()) {
      std::string joined;
      for (const auto& x : m) joined += (x.is_string() ? x.get<std::string>() : x.dump()) + ",";
      cfg.mrs = parse_mr_list(joined);
    } else {
      throw ConfigError("mrs: expected a list or a comma-separated string");
    }
  }
  read(j, "samples", cfg.samples, "");
  read(j, "similarity_threshold", cfg.similarity_threshold, "");
  read(j, "max_iterations", cfg.max_iterations, "");
  read(j, "pivot_language", cfg.pivot_language, "");
  if (j.contains("pooling")) {
    std::string p;
    read(j, "pooling", p, "");
    if (p == "pooled") cfg.pooling = evaluator::Pooling::Pooled;
    else if (p == "best-description") cfg.pooling = evaluator::Pooling::BestDescription;
    else throw ConfigError("pooling: expected 'pooled' or 'best-description'");
  }
  read(j, "llm_fallback", cfg.llm_fallback, "");
  read(j, "baseline", cfg.baseline, "");
  if (j.contains("sandbox")) {
    const auto& s = j["sandbox"];
    detail::reject_unknown(s, {"command", "timeout_s"}, "sandbox.");
    read(s, "command", cfg.sandbox_command, "sandbox.");
    read(s, "timeout_s", cfg.test_timeout_s, "sandbox.");
  }
  read(j, "parallelism", cfg.parallelism, "");
  if (j.contains("seed") && !j["seed"].is_null()) {
    std::int64_t s = 0;
    read(j, "seed", s, "");
    cfg.seed = s;
  }
  std::string out;
  read(j, "out", out, "");
  if (!out.empty()) cfg.out = out;
}

inline void load_config_file(const fs::path& path, RunConfig& cfg) {
  std::string bytes;
  try {
    bytes = bench::read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": invalid JSON: " + e.what());
  }
  apply_config(j, cfg);
}

/// The configuration as recorded in the ledger. Holds no credential, only the
/// name of the variable it is read from.
inline json describe(const RunConfig& cfg, const std::string& command) {
  json mrs = json::array();
  for (MrCode m : cfg.mrs) mrs.push_back(mr_label(m));
  return json{{"command", command},
              {"dataset", cfg.dataset.string()},
              {"dataset_label", cfg.dataset_label()},
              {"provider", cfg.provider.name},
              {"model", cfg.provider.model},
              {"api_key_env", cfg.api_key_env()},
              {"mode", cfg.replay_dir ? "replay" : cfg.record_dir ? "record" : "live"},
              {"mrs", mrs},
              {"samples", cfg.samples},
              {"similarity_threshold", cfg.similarity_threshold},
              {"max_iterations", cfg.max_iterations},
              {"embedder", cfg.embedder},
              {"pooling", cfg.pooling == evaluator::Pooling::Pooled ? "pooled" : "best-description"},
              {"baseline", cfg.baseline},
              {"seed", cfg.seed ? json(*cfg.seed) : json(nullptr)}};
}

// ---------------------------------------------------------------------------
// Runtime wiring

/// Owns the provider stack, sandbox and embedder for one run.
class Runtime {
 public:
  explicit Runtime(const RunConfig& cfg, std::unique_ptr<sandbox::Sandbox> sb = nullptr,
                   std::unique_ptr<llm::ChatProvider> live = nullptr)
      : cfg_(cfg) {
    if (cfg.replay_dir) {
      provider_ = std::make_unique<llm::ReplayProvider>(*cfg.replay_dir);
    } else {
      if (!live) {
        std::string key;
        std::string var = cfg.api_key_env();
        if (!var.empty()) {
          const char* v = std::getenv(var.c_str());
          if (!v || !*v) throw ConfigError("provider: environment variable " + var + " is not set");
          key = v;
        }
        endpoint_ = llm::HttpEndpoint{cfg.provider.base_url, key, std::chrono::seconds(cfg.provider.timeout_s)};
        live = std::make_unique<llm::OpenAiCompatibleProvider>(*endpoint_);
      }
      live_ = std::move(live);
      if (cfg.record_dir)
        provider_ = std::make_unique<llm::RecordingProvider>(*live_, *cfg.record_dir);
      else
        provider_ = std::make_unique<Forward>(*live_);
    }
    bounded_ = std::make_unique<llm::BoundedProvider>(*provider_, cfg.parallelism);
    if (sb) {
      sandbox_ = std::move(sb);
    } else {
      auto argv = sandbox::split_command(cfg.sandbox_command);
      if (argv.empty()) throw ConfigError("sandbox.command: empty");
      sandbox_ = std::make_unique<sandbox::SandboxPool>(argv, cfg.parallelism);
    }
    if (cfg.embedder == "http") {
      if (!endpoint_) throw ConfigError("embedder: 'http' needs a live provider endpoint");
      embedder_ = std::make_unique<reviewer::HttpEmbedder>(*endpoint_, cfg.embedding_model);
    } else {
      embedder_ = std::make_unique<reviewer::HashedNgramEmbedder>();
    }
  }

  llm::ChatProvider& llm() { return *bounded_; }
  sandbox::Sandbox& sandbox() { return *sandbox_; }
  reviewer::Embedder& embedder() { return *embedder_; }

 private:
  class Forward : public llm::ChatProvider {
   public:
    explicit Forward(llm::ChatProvider& p) : p_(p) {}
    llm::ChatResponse chat(const llm::ChatRequest& r) override { return p_.chat(r); }

   private:
    llm::ChatProvider& p_;
  };

  const RunConfig& cfg_;
  std::optional<llm::HttpEndpoint> endpoint_;
  std::unique_ptr<llm::ChatProvider> live_;
  std::unique_ptr<llm::ChatProvider> provider_;
  std::unique_ptr<llm::BoundedProvider> bounded_;
  std::unique_ptr<sandbox::Sandbox> sandbox_;
  std::unique_ptr<reviewer::Embedder> embedder_;
};

/// Ledger records of one task, written in task order once all tasks finish.
struct TaskLog {
  std::vector<std::pair<std::string, json>> records;
  std::optional<std::string> error;

  void add(std::string kind, json payload) { records.emplace_back(std::move(kind), std::move(payload)); }
  mutator::CallObserver observer(const std::string& model) {
    return [this, model](const std::string& module, const std::string& task, const llm::ChatResponse& resp) {
      add(llm::kLlmCallKind, llm::llm_call_payload(module, task, model, resp));
    };
  }
};

struct RunResult {
  int exit_code = 0;
  fs::path ledger;
  std::vector<bench::LedgerRecord> records;
};

namespace detail {

inline llm::ChatParams chat_params(const RunConfig& cfg) {
  llm::ChatParams p;
  p.model = cfg.provider.model;
  p.temperature = cfg.provider.temperature;
  p.max_tokens = cfg.provider.max_tokens;
  p.seed = cfg.base_seed();
  return p;
}

inline generator::CandidateOptions candidate_options(const RunConfig& cfg) {
  generator::CandidateOptions o;
  o.params.temperature = cfg.provider.temperature;
  o.params.max_tokens = cfg.provider.max_tokens;
  o.params.sample_count = cfg.samples;
  o.model = cfg.provider.model;
  o.base_seed = cfg.base_seed();
  o.parallelism = cfg.parallelism;
  return o;
}

inline reviewer::ReviewConfig review_config(const RunConfig& cfg) {
  return {cfg.similarity_threshold, cfg.max_iterations, cfg.test_timeout_s};
}

inline void log_review(TaskLog& log, const std::vector<reviewer::GateOutcome>& reviewed) {
  for (const auto& g : reviewed) {
    for (const auto& h : g.history) log.add("description_variant", json(h));
    if (g.variant.status == VariantStatus::Exhausted) log.add("description_variant", json(g.variant));
  }
}

inline json execution_payload(const evaluator::CandidateOutcome& o, bool deterministic) {
  json statuses = json::array();
  if (o.report)
    for (const auto& r : o.report->per_test)
      statuses.push_back({{"test_id", r.test_id}, {"status", sandbox::to_string(r.status)}, {"message", r.message}});
  json j{{"candidate", evaluator::candidate_id(o.candidate)},
         {"task_id", o.candidate.task_id},
         {"origin", o.candidate.origin},
         {"sample_index", o.candidate.sample_index},
         {"passed", o.passed},
         {"executed", o.report.has_value()},
         {"results", statuses}};
  if (!deterministic && o.report) j["wall_time_ms"] = o.report->wall_time_ms;
  return j;
}

inline void log_candidates(TaskLog& log, const std::vector<evaluator::CandidateOutcome>& outcomes, bool deterministic) {
  for (const auto& o : outcomes) log.add("candidate", json(o.candidate));
  for (const auto& o : outcomes) log.add("execution", execution_payload(o, deterministic));
}

inline std::optional<double> opt(const std::optional<double>& v) { return v; }

}  // namespace detail

/// Runs one command over a dataset, writing `<out>/ledger.jsonl`.
class Pipeline {
 public:
  Pipeline(RunConfig cfg, Runtime& rt, std::ostream& out) : cfg_(std::move(cfg)), rt_(rt), out_(out) {}

  RunResult run(const std::string& command) {
    cfg_.validate();
    if (command == "mutate" && cfg_.mrs_for(MrTarget::Description).empty())
      throw ConfigError("mrs: mutate needs at least one of MR1-MR4");
    if (command == "testgen" && cfg_.mrs_for(MrTarget::TestCase).empty())
      throw ConfigError("mrs: testgen needs at least one of MR5-MR9");
    auto tasks = bench::load_tasks({cfg_.dataset, cfg_.fields, cfg_.dataset_tag});
    if (tasks.empty()) throw SchemaError("dataset " + cfg_.dataset.string() + " has no tasks");

    fs::create_directories(cfg_.out);
    RunResult result;
    result.ledger = cfg_.out / "ledger.jsonl";
    fs::remove(result.ledger);
    std::string run_id = cfg_.deterministic() ? fmt::format("{}-seed{}", command, *cfg_.seed)
                                              : fmt::format("{}-{}", command, std::chrono::duration_cast<std::chrono::milliseconds>(
                                                                                   std::chrono::system_clock::now().time_since_epoch())
                                                                                   .count());
    bench::Ledger ledger(result.ledger, run_id, cfg_.deterministic());
    ledger.append("run_config", describe(cfg_, command));

    bool failed = false;
    if (command == "mutate") failed = mutate(tasks, ledger);
    else if (command == "gen") failed = gen(tasks, ledger);
    else if (command == "testgen") failed = testgen(tasks, ledger);
    else if (command == "ablate") failed = ablate(tasks, ledger);
    else throw ConfigError("unknown command '" + command + "'");

    result.records = bench::read_ledger(result.ledger);
    result.exit_code = failed ? 1 : 0;
    return result;
  }

 private:
  // Run `fn` per task in parallel, then write each task's records in order.
  template <typename Fn>
  std::vector<TaskLog> for_tasks(const std::vector<Task>& tasks, bench::Ledger& ledger, Fn&& fn) {
    std::vector<TaskLog> logs(tasks.size());
    util::parallel_for(tasks.size(), cfg_.parallelism, [&](size_t i) {
      try {
        fn(tasks[i], logs[i]);
      } catch (const Error& e) {
        logs[i].error = e.what();
      }
    });
    for (size_t i = 0; i < tasks.size(); ++i) {
      for (auto& [kind, payload] : logs[i].records) ledger.append(kind, std::move(payload));
      if (logs[i].error) {
        ledger.append("task_error", {{"task_id", tasks[i].id}, {"message", *logs[i].error}});
        out_ << "error: task " << tasks[i].id << ": " << *logs[i].error << "\n";
      }
    }
    return logs;
  }

  static bool any_error(const std::vector<TaskLog>& logs) {
    for (const auto& l : logs)
      if (l.error) return true;
    return false;
  }

  std::vector<reviewer::GateOutcome> review(const Task& task, TaskLog& log) {
    mutator::DescriptionPrompts prompts;
    prompts.pivot_language = cfg_.pivot_language;
    return reviewer::review_descriptions(task, cfg_.mrs_for(MrTarget::Description), rt_.llm(), rt_.embedder(),
                                         detail::review_config(cfg_), prompts, detail::chat_params(cfg_),
                                         log.observer(cfg_.provider.model));
  }

  bool mutate(const std::vector<Task>& tasks, bench::Ledger& ledger) {
    auto logs = for_tasks(tasks, ledger, [&](const Task& task, TaskLog& log) {
      auto reviewed = review(task, log);
      detail::log_review(log, reviewed);
    });
    int accepted = 0, exhausted = 0;
    for (const auto& l : logs)
      for (const auto& [kind, p] : l.records)
        if (kind == "description_variant") {
          if (p["status"] == "Accepted") ++accepted;
          if (p["status"] == "Exhausted") ++exhausted;
        }
    out_ << fmt::format("{} tasks, {} variants accepted, {} exhausted\n", tasks.size(), accepted, exhausted);
    return any_error(logs);
  }

  void append_metrics(bench::Ledger& ledger, const std::string& experiment, const std::string& series,
                      const std::string& model, std::optional<double> p1, std::optional<double> p5,
                      std::optional<double> cov, std::optional<double> corr) {
    bench::MetricsRecord m{experiment, series, model, cfg_.dataset_label(), p1, p5, cov, corr};
    ledger.append(bench::kRunMetricsKind, bench::to_json(m));
  }

  bool gen(const std::vector<Task>& tasks, bench::Ledger& ledger) {
    std::vector<std::optional<std::pair<evaluator::PassRates, evaluator::PassRates>>> rates(tasks.size());
    auto logs = for_tasks(tasks, ledger, [&](const Task& task, TaskLog& log) {
      auto reviewed = review(task, log);
      detail::log_review(log, reviewed);
      std::vector<generator::SourceDescription> ds{{Origin::base(), task.description}};
      for (const auto& g : reviewed)
        if (g.variant.status == VariantStatus::Accepted) ds.push_back({Origin::single(g.variant.mr.code), g.variant.text});
      auto opts = detail::candidate_options(cfg_);
      opts.observer = log.observer(cfg_.provider.model);
      auto candidates = generator::generate_candidates(task, ds, rt_.llm(), opts);
      auto outcomes = evaluator::evaluate_candidates(task, candidates, rt_.sandbox(), cfg_.parallelism,
                                                     cfg_.test_timeout_s);
      detail::log_candidates(log, outcomes, cfg_.deterministic());
      std::vector<evaluator::CandidateOutcome> base;
      for (const auto& o : outcomes)
        if (o.candidate.origin == Origin::base()) base.push_back(o);
      auto b = evaluator::task_pass_rates(base);
      auto c = evaluator::task_pass_rates(outcomes, cfg_.pooling);
      log.add("task_metrics", {{"task_id", task.id},
                               {"Base", {{"pass_at_1", b.pass_at_1}, {"pass_at_5", b.pass_at_5 ? json(*b.pass_at_5) : json(nullptr)}}},
                               {"CMA", {{"pass_at_1", c.pass_at_1}, {"pass_at_5", c.pass_at_5 ? json(*c.pass_at_5) : json(nullptr)}}}});
      rates[&task - tasks.data()] = std::pair{b, c};
    });
    std::vector<evaluator::PassRates> base, cma;
    for (const auto& r : rates)
      if (r) {
        base.push_back(r->first);
        cma.push_back(r->second);
      }
    if (base.empty()) return true;
    auto mb = evaluator::mean_rates(base), mc = evaluator::mean_rates(cma);
    append_metrics(ledger, "codegen", "Base", cfg_.model_name(), mb.pass_at_1, mb.pass_at_5, std::nullopt, std::nullopt);
    append_metrics(ledger, "codegen", "CMA", cfg_.model_name(), mc.pass_at_1, mc.pass_at_5, std::nullopt, std::nullopt);
    return any_error(logs);
  }

  struct SuiteStats {
    double oracle_cov = 0.0, augmented_cov = 0.0;
    long valid = 0, invalid = 0;
    std::optional<double> baseline_cov;
    long baseline_valid = 0, baseline_invalid = 0;
  };

  bool testgen(const std::vector<Task>& tasks, bench::Ledger& ledger) {
    std::vector<std::optional<SuiteStats>> stats(tasks.size());
    auto mrs_list = cfg_.mrs_for(MrTarget::TestCase);
    std::set<MrCode> mrs(mrs_list.begin(), mrs_list.end());
    auto logs = for_tasks(tasks, ledger, [&](const Task& task, TaskLog& log) {
      SuiteStats s;
      mutator::ExpansionOptions eo;
      if (cfg_.llm_fallback) eo.fallback = &rt_.llm();
      eo.params = detail::chat_params(cfg_);
      eo.observer = log.observer(cfg_.provider.model);
      auto exp = mutator::expand_suite(task, mrs, eo);
      for (const auto& [idx, reason] : exp.skipped)
        log.add("skipped_test", {{"task_id", task.id}, {"origin_index", idx}, {"reason", reason}});
      auto reviewed = reviewer::validate_test_variants(exp.variants, task, rt_.sandbox(), detail::review_config(cfg_));
      std::vector<std::string> augmented = task.oracle_tests;
      for (const auto& v : reviewed) {
        log.add("test_variant", json(v));
        if (v.status == TestStatus::Valid) {
          augmented.push_back(testcase::render_test_case(v.assertion));
          ++s.valid;
        } else if (v.status == TestStatus::Invalid) {
          ++s.invalid;
        }
      }
      for (const auto& v : exp.duplicates) log.add("test_variant", json(v));
      s.oracle_cov = evaluator::coverage_of_suite(task.oracle_solution, task.oracle_tests, rt_.sandbox(), cfg_.test_timeout_s);
      s.augmented_cov = evaluator::coverage_of_suite(task.oracle_solution, augmented, rt_.sandbox(), cfg_.test_timeout_s);
      json cov{{"task_id", task.id}, {"oracle_pct", s.oracle_cov}, {"augmented_pct", s.augmented_cov},
               {"valid", s.valid}, {"invalid", s.invalid}};

      if (cfg_.baseline) {
        auto opts = detail::candidate_options(cfg_);
        opts.observer = log.observer(cfg_.provider.model);
        auto lines = generator::generate_test_suite(task, task.description, rt_.llm(), opts);
        std::vector<std::string> passing;
        if (!lines.empty()) {
          auto req = evaluator::make_request("baseline:" + task.id, task.oracle_solution, lines, false, cfg_.test_timeout_s);
          auto resp = rt_.sandbox().execute(req);
          for (size_t i = 0; i < lines.size(); ++i) {
            bool ok = resp.results[i].status == sandbox::Status::Pass;
            log.add("baseline_test", {{"task_id", task.id},
                                      {"line", lines[i]},
                                      {"status", ok ? "Valid" : "Invalid"},
                                      {"reason", ok ? "" : resp.results[i].message}});
            if (ok) passing.push_back(lines[i]);
          }
        }
        s.baseline_valid = static_cast<long>(passing.size());
        s.baseline_invalid = static_cast<long>(lines.size() - passing.size());
        if (!passing.empty())
          s.baseline_cov = evaluator::coverage_of_suite(task.oracle_solution, passing, rt_.sandbox(), cfg_.test_timeout_s);
        cov["baseline_pct"] = s.baseline_cov ? json(*s.baseline_cov) : json(nullptr);
        cov["baseline_valid"] = s.baseline_valid;
        cov["baseline_invalid"] = s.baseline_invalid;
      }
      log.add("suite_coverage", cov);
      stats[&task - tasks.data()] = s;
    });

    double oracle = 0.0, augmented = 0.0, baseline = 0.0;
    long n = 0, valid = 0, invalid = 0, bn = 0, bvalid = 0, binvalid = 0;
    for (size_t i = 0; i < stats.size(); ++i) {
      if (!stats[i]) continue;
      const auto& s = *stats[i];
      ++n;
      oracle += s.oracle_cov;
      augmented += s.augmented_cov;
      valid += s.valid;
      invalid += s.invalid;
      if (s.baseline_cov) {
        baseline += *s.baseline_cov;
        ++bn;
      }
      bvalid += s.baseline_valid;
      binvalid += s.baseline_invalid;
      out_ << fmt::format("{}: {} valid / {} invalid variants, coverage {:.2f}% -> {:.2f}%\n", tasks[i].id, s.valid,
                          s.invalid, s.oracle_cov, s.augmented_cov);
    }
    if (n == 0) return true;
    auto rate = [](long v, long iv) -> std::optional<double> {
      if (v + iv == 0) return std::nullopt;
      return 100.0 * static_cast<double>(v) / static_cast<double>(v + iv);
    };
    append_metrics(ledger, "testgen", "Oracle", "", std::nullopt, std::nullopt, oracle / static_cast<double>(n),
                   std::nullopt);
    append_metrics(ledger, "testgen", "CMA", cfg_.model_name(), std::nullopt, std::nullopt,
                   augmented / static_cast<double>(n), rate(valid, invalid));
    if (cfg_.baseline)
      append_metrics(ledger, "testgen", "Baseline", cfg_.model_name(), std::nullopt, std::nullopt,
                     bn ? std::optional<double>(baseline / static_cast<double>(bn)) : std::nullopt,
                     rate(bvalid, binvalid));
    return any_error(logs);
  }

  bool ablate(const std::vector<Task>& tasks, bench::Ledger& ledger) {
    evaluator::AblationContext ctx;
    ctx.llm = &rt_.llm();
    ctx.sandbox = &rt_.sandbox();
    ctx.embedder = &rt_.embedder();
    ctx.review = detail::review_config(cfg_);
    ctx.mutation_prompts.pivot_language = cfg_.pivot_language;
    ctx.mutation_params = detail::chat_params(cfg_);
    ctx.generation = detail::candidate_options(cfg_);
    ctx.pooling = cfg_.pooling;
    TaskLog pending;
    ctx.observer = pending.observer(cfg_.provider.model);
    ctx.on_task = [&](const Task&, const std::vector<reviewer::GateOutcome>& reviewed,
                      const std::vector<evaluator::CandidateOutcome>& outcomes) {
      for (auto& [kind, payload] : pending.records) ledger.append(kind, std::move(payload));
      pending.records.clear();
      TaskLog log;
      detail::log_review(log, reviewed);
      detail::log_candidates(log, outcomes, cfg_.deterministic());
      for (auto& [kind, payload] : log.records) ledger.append(kind, std::move(payload));
    };
    auto points = evaluator::ablate(tasks, cfg_.mrs_for(MrTarget::Description), ctx);
    bool failed = false;
    for (const auto& p : points) {
      if (!p.error.empty()) {
        failed = true;
        ledger.append("point_error", {{"point", p.point.label()}, {"message", p.error}});
        out_ << "error: " << p.point.label() << ": " << p.error << "\n";
        continue;
      }
      append_metrics(ledger, "ablation", p.point.label(), cfg_.model_name(), p.pass_at_1, p.pass_at_5, std::nullopt,
                     std::nullopt);
    }
    return failed;
  }

  RunConfig cfg_;
  Runtime& rt_;
  std::ostream& out_;
};

}  // namespace metagen::pipeline
