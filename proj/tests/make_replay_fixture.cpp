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

// Regenerates tests/fixtures/replay from the scripted octagonal model.
// Usage: make_replay_fixture <replay-dir>

#include <iostream>

#include "metagen/pipeline.hpp"
#include "support/scenario.hpp"

int main(int argc, char** argv) {
  using namespace metagen;
  if (argc != 2) {
    std::cerr << "usage: make_replay_fixture <replay-dir>\n";
    return 2;
  }
  const std::string fixtures = std::string(METAGEN_TEST_DIR) + "/fixtures/";
  try {
    for (const char* command : {"gen", "ablate", "testgen"}) {
      pipeline::RunConfig cfg;
      pipeline::load_config_file(fixtures + "octagonal_run.json", cfg);
      cfg.dataset = fixtures + "octagonal.jsonl";
      cfg.record_dir = argv[1];
      cfg.out = std::filesystem::temp_directory_path() / "metagen_fixture_run";
      cfg.sandbox_command = "python3 " + std::string(METAGEN_TEST_DIR) + "/support/stub_runner.py";
      pipeline::Runtime rt(cfg, nullptr, std::make_unique<testdata::ScriptedProvider>(testdata::octagonal_model));
      pipeline::Pipeline p(cfg, rt, std::cout);
      auto r = p.run(command);
      if (r.exit_code != 0) return r.exit_code;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
