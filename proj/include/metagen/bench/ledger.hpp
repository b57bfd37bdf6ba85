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

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "metagen/core/errors.hpp"

namespace metagen::bench {

using json = nlohmann::json;

/// One line of the run ledger: {kind, run_id, timestamp, payload}.
struct LedgerRecord {
  std::string kind;
  std::string run_id;
  std::int64_t timestamp = 0;
  json payload;
};

inline json to_json(const LedgerRecord& r) {
  return json{{"kind", r.kind}, {"run_id", r.run_id}, {"timestamp", r.timestamp}, {"payload", r.payload}};
}

/// Append-only JSON-lines writer. Each record is emitted with a single
/// write(2) on an O_APPEND descriptor, so concurrent appends never interleave
/// within a line.
///
/// In deterministic mode the timestamp is the record's sequence number rather
/// than wall-clock time, which makes seeded runs byte-reproducible.
class Ledger {
 public:
  Ledger(std::filesystem::path path, std::string run_id, bool deterministic = false, bool durable = true)
      : path_(std::move(path)), run_id_(std::move(run_id)), deterministic_(deterministic), durable_(durable) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open ledger " + path_.string() + ": " + std::strerror(errno));
  }
  Ledger(const Ledger&) = delete;
  Ledger& operator=(const Ledger&) = delete;
  ~Ledger() {
    if (fd_ >= 0) ::close(fd_);
  }

  const std::filesystem::path& path() const { return path_; }
  const std::string& run_id() const { return run_id_; }
  bool deterministic() const { return deterministic_; }

  /// Returns the record's sequence number once the line is written.
  std::uint64_t append(std::string_view kind, json payload) {
    std::lock_guard lock(mu_);
    LedgerRecord rec{std::string(kind), run_id_, 0, std::move(payload)};
    rec.timestamp = deterministic_ ? static_cast<std::int64_t>(seq_)
                                   : std::chrono::duration_cast<std::chrono::milliseconds>(
                                         std::chrono::system_clock::now().time_since_epoch())
                                         .count();
    std::string line = to_json(rec).dump() + "\n";
    const char* p = line.data();
    size_t left = line.size();
    while (left > 0) {
      ssize_t n = ::write(fd_, p, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError("ledger write failed: " + std::string(std::strerror(errno)));
      }
      p += n;
      left -= static_cast<size_t>(n);
    }
    if (durable_) ::fdatasync(fd_);
    return seq_++;
  }

 private:
  std::filesystem::path path_;
  std::string run_id_;
  bool deterministic_;
  bool durable_;
  int fd_ = -1;
  std::mutex mu_;
  std::uint64_t seq_ = 0;
};

inline std::vector<LedgerRecord> parse_ledger(std::string_view bytes) {
  std::vector<LedgerRecord> out;
  size_t start = 0, lineno = 0;
  while (start < bytes.size()) {
    size_t end = bytes.find('\n', start);
    if (end == std::string_view::npos) end = bytes.size();
    ++lineno;
    std::string_view line = bytes.substr(start, end - start);
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      json j = json::parse(line);
      out.push_back({j.at("kind").get<std::string>(), j.at("run_id").get<std::string>(),
                     j.at("timestamp").get<std::int64_t>(), j.at("payload")});
    } catch (const json::exception& e) {
      throw SchemaError("ledger line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<LedgerRecord> read_ledger(const std::filesystem::path& path) {
  return parse_ledger(read_file(path));
}

}  // namespace metagen::bench
