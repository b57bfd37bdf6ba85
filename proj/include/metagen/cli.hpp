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

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "metagen/pipeline.hpp"

namespace metagen::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

// Flags shared by the pipeline commands. Unset flags leave config values alone.
struct RunFlags {
  std::string config, dataset, dataset_tag, dataset_name, out, replay, record, provider, base_url, model, model_label,
      mrs, sandbox, pooling, embedder;
  std::optional<std::int64_t> seed;
  std::optional<int> parallelism, samples, max_iters;
  std::optional<double> threshold, timeout;
  bool baseline = false, no_fallback = false;

  void attach(CLI::App& app) {
    app.add_option("--config", config, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--dataset", dataset, "JSONL dataset");
    app.add_option("--dataset-tag", dataset_tag, "humaneval-pro | mbpp-pro | custom");
    app.add_option("--dataset-name", dataset_name, "dataset label used in reports");
    app.add_option("--out", out, "output directory (ledger, reports)");
    app.add_option("--seed", seed, "fixed seed; also makes the ledger deterministic");
    app.add_option("--parallelism", parallelism, "concurrent model calls and sandbox runs");
    auto* r = app.add_option("--replay", replay, "serve model calls from a replay directory");
    auto* w = app.add_option("--record", record, "record live model calls into a directory");
    r->excludes(w);
    app.add_option("--provider", provider, "provider name; the key is read from <NAME>_API_KEY");
    app.add_option("--base-url", base_url, "OpenAI-compatible endpoint");
    app.add_option("--model", model, "model identifier sent to the provider");
    app.add_option("--model-label", model_label, "model name used in reports");
    app.add_option("--mrs", mrs, "metamorphic relations, e.g. MR1,MR3 or 5,6,8,9");
    app.add_option("--samples", samples, "completions per description");
    app.add_option("--threshold", threshold, "similarity threshold for description variants");
    app.add_option("--max-iters", max_iters, "regeneration attempts per description variant");
    app.add_option("--sandbox", sandbox, "runner command line");
    app.add_option("--timeout", timeout, "per-test timeout in seconds");
    app.add_option("--pooling", pooling, "pooled | best-description");
    app.add_option("--embedder", embedder, "hashed | http");
    app.add_flag("--baseline", baseline, "also score a directly generated test suite");
    app.add_flag("--no-fallback", no_fallback, "skip unparseable oracle tests instead of asking the model");
  }

  pipeline::RunConfig resolve() const {
    pipeline::RunConfig cfg;
    if (!config.empty()) pipeline::load_config_file(config, cfg);
    json j = json::object();
    if (!dataset.empty()) j["dataset"]["path"] = dataset;
    if (!dataset_tag.empty()) j["dataset"]["tag"] = dataset_tag;
    if (!dataset_name.empty()) j["dataset"]["name"] = dataset_name;
    if (!out.empty()) j["out"] = out;
    if (seed) j["seed"] = *seed;
    if (parallelism) j["parallelism"] = *parallelism;
    if (!replay.empty()) j["replay_dir"] = replay;
    if (!record.empty()) j["record_dir"] = record;
    if (!provider.empty()) j["provider"]["name"] = provider;
    if (!base_url.empty()) j["provider"]["base_url"] = base_url;
    if (!model.empty()) j["provider"]["model"] = model;
    if (!model_label.empty()) j["model_label"] = model_label;
    if (!mrs.empty()) j["mrs"] = mrs;
    if (samples) j["samples"] = *samples;
    if (threshold) j["similarity_threshold"] = *threshold;
    if (max_iters) j["max_iterations"] = *max_iters;
    if (!sandbox.empty()) j["sandbox"]["command"] = sandbox;
    if (timeout) j["sandbox"]["timeout_s"] = *timeout;
    if (!pooling.empty()) j["pooling"] = pooling;
    if (!embedder.empty()) j["embedder"]["kind"] = embedder;
    if (baseline) j["baseline"] = true;
    if (no_fallback) j["llm_fallback"] = false;
    pipeline::apply_config(j, cfg);
    if (!replay.empty()) cfg.record_dir.reset();
    if (!record.empty()) cfg.replay_dir.reset();
    if (cfg.dataset.empty()) throw ConfigError("dataset: no dataset given (--dataset or dataset.path)");
    return cfg;
  }
};

inline void print_tables(const std::vector<bench::LedgerRecord>& records, std::initializer_list<bench::Layout> layouts,
                         std::ostream& out) {
  for (auto layout : layouts) {
    try {
      out << bench::emit_report(records, layout).text;
    } catch (const MissingMetric&) {
      // Nothing to show when every task failed; the errors are already printed.
    }
  }
}

}  // namespace detail

/// Entry point. Returns 0 on success, 1 on pipeline errors, 2 on usage or
/// configuration errors.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Metamorphic description and test augmentation for code generation benchmarks", "metagen"};
  app.require_subcommand(1);

  struct Command {
    const char* name;
    const char* help;
    std::initializer_list<bench::Layout> tables;
  };
  const Command commands[] = {
      {"mutate", "generate and review description variants", {}},
      {"gen", "generate and evaluate code from original and variant descriptions", {bench::Layout::PassTable}},
      {"testgen", "augment oracle test suites and measure coverage",
       {bench::Layout::CoverageTable, bench::Layout::CorrectnessTable}},
      {"ablate", "per-relation ablation of code generation", {bench::Layout::AblationTable}},
  };
  detail::RunFlags flags[std::size(commands)];
  for (size_t i = 0; i < std::size(commands); ++i) flags[i].attach(*app.add_subcommand(commands[i].name, commands[i].help));

  std::string ledger, layout_name = "pass", series = "CMA", report_out = "out";
  auto* report = app.add_subcommand("report", "render a result table from a ledger");
  report->add_option("--ledger", ledger, "ledger JSONL")->required();
  report->add_option("--layout", layout_name, "pass | coverage | correctness | ablation | tokens");
  report->add_option("--series", series, "series shown in coverage/correctness tables");
  report->add_option("--out", report_out, "directory for report_<layout>.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (report->parsed()) {
      auto layout = bench::parse_layout(layout_name);
      auto rendered = bench::emit_report(bench::read_ledger(ledger), layout, {series});
      out << rendered.text;
      fs::create_directories(report_out);
      auto path = fs::path(report_out) / ("report_" + std::string(bench::to_string(layout)) + ".csv");
      std::ofstream f(path, std::ios::binary);
      f << rendered.csv;
      if (!f) throw IoError("cannot write " + path.string());
      return kExitOk;
    }
    for (size_t i = 0; i < std::size(commands); ++i) {
      if (!app.got_subcommand(commands[i].name)) continue;
      auto cfg = flags[i].resolve();
      pipeline::Runtime rt(cfg);
      pipeline::Pipeline p(cfg, rt, out);
      auto result = p.run(commands[i].name);
      detail::print_tables(result.records, commands[i].tables, out);
      out << "ledger: " << result.ledger.string() << "\n";
      return result.exit_code == 0 ? kExitOk : kExitFailure;
    }
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace metagen::cli
