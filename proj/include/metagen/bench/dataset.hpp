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
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metagen/bench/ledger.hpp"
#include "metagen/core/model.hpp"
#include "metagen/testcase/parser.hpp"

namespace metagen::bench {

/// JSON field names of one dataset's records. An empty entry_point field
/// means "take the callee of the first test".
struct FieldMapping {
  std::string id = "id";
  std::string description = "description";
  std::string entry_point = "entry_point";
  std::string solution = "solution";
  std::string tests = "tests";
};

struct DatasetFile {
  std::filesystem::path path;
  FieldMapping fields;
  DatasetTag tag = DatasetTag::Custom;
};

inline void from_json(const json& j, FieldMapping& m) {
  m.id = j.value("id", m.id);
  m.description = j.value("description", m.description);
  m.entry_point = j.value("entry_point", m.entry_point);
  m.solution = j.value("solution", m.solution);
  m.tests = j.value("tests", m.tests);
}

inline bool defines_function(const std::string& source, const std::string& name) {
  for (size_t pos = source.find("def " + name); pos != std::string::npos; pos = source.find("def " + name, pos + 1)) {
    bool line_start = pos == 0 || source[pos - 1] == '\n' || source[pos - 1] == ' ' || source[pos - 1] == '\t';
    size_t after = pos + 4 + name.size();
    while (after < source.size() && source[after] == ' ') ++after;
    if (line_start && after < source.size() && source[after] == '(') return true;
  }
  return false;
}

/// Tasks in file order. Test fields may be an array of assert lines or one
/// blob, which is split per assert.
inline std::vector<Task> load_tasks(const DatasetFile& file) {
  std::string bytes = read_file(file.path);
  std::vector<Task> out;
  std::set<std::string> ids;
  size_t start = 0, lineno = 0;
  while (start < bytes.size()) {
    size_t end = bytes.find('\n', start);
    if (end == std::string::npos) end = bytes.size();
    std::string line = bytes.substr(start, end - start);
    start = end + 1;
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string where = file.path.filename().string() + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw SchemaError(where + ": not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw SchemaError(where + ": record is not an object");

    auto text_field = [&](const std::string& key, const std::string& record) -> std::string {
      if (!j.contains(key)) throw SchemaError("record " + record + " (" + where + "): missing field '" + key + "'");
      const auto& v = j.at(key);
      if (v.is_string()) return v.get<std::string>();
      if (v.is_number_integer()) return std::to_string(v.get<long long>());
      throw SchemaError("record " + record + " (" + where + "): field '" + key + "' is not a string");
    };

    Task t;
    t.dataset = file.tag;
    t.id = text_field(file.fields.id, where);
    const std::string record = "'" + t.id + "'";
    if (t.id.empty()) throw SchemaError(where + ": empty id");
    if (!ids.insert(t.id).second) throw SchemaError("record " + record + " (" + where + "): duplicate id");
    t.description = text_field(file.fields.description, record);
    t.oracle_solution = text_field(file.fields.solution, record);

    if (!j.contains(file.fields.tests))
      throw SchemaError("record " + record + " (" + where + "): missing field '" + file.fields.tests + "'");
    const auto& tests = j.at(file.fields.tests);
    if (tests.is_string()) {
      t.oracle_tests = testcase::split_assert_lines(tests.get<std::string>());
    } else if (tests.is_array()) {
      for (const auto& item : tests) {
        if (!item.is_string())
          throw SchemaError("record " + record + ": field '" + file.fields.tests + "' has a non-string entry");
        for (auto& l : testcase::split_assert_lines(item.get<std::string>())) t.oracle_tests.push_back(std::move(l));
      }
    } else {
      throw SchemaError("record " + record + ": field '" + file.fields.tests + "' is neither a string nor a list");
    }
    if (t.oracle_tests.empty()) throw SchemaError("record " + record + ": field '" + file.fields.tests + "' has no asserts");

    if (!file.fields.entry_point.empty()) {
      t.entry_point = text_field(file.fields.entry_point, record);
    } else {
      try {
        t.entry_point = testcase::parse_test_case(t.oracle_tests.front()).callee;
      } catch (const ParseError& e) {
        throw SchemaError("record " + record + ": cannot infer entry point: " + e.what());
      }
    }
    if (!defines_function(t.oracle_solution, t.entry_point))
      throw SchemaError("record " + record + ": entry point '" + t.entry_point + "' is not defined in the solution");
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace metagen::bench
