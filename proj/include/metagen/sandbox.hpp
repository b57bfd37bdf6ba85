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

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "metagen/core/errors.hpp"

namespace metagen::sandbox {

using json = nlohmann::json;

// Wire types of the line-delimited JSON execution protocol.

struct ExecTest {
  std::string test_id;
  std::string line;
};

struct ExecRequest {
  std::string id;
  std::string program;
  std::vector<ExecTest> tests;
  double timeout_s = 5.0;
  bool measure_coverage = false;
};

enum class Status { Pass, Fail, Error, Timeout };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Pass: return "pass";
    case Status::Fail: return "fail";
    case Status::Error: return "error";
    case Status::Timeout: return "timeout";
  }
  return "error";
}

inline Status parse_status(const std::string& s) {
  if (s == "pass") return Status::Pass;
  if (s == "fail") return Status::Fail;
  if (s == "error") return Status::Error;
  if (s == "timeout") return Status::Timeout;
  throw SandboxError("unknown test status '" + s + "'");
}

struct TestResult {
  std::string test_id;
  Status status = Status::Error;
  std::string message;
};

struct Coverage {
  long branch_covered = 0;
  long branch_total = 0;
  double branch_pct = 100.0;
};

struct ExecResponse {
  std::string id;
  std::vector<TestResult> results;
  std::optional<Coverage> coverage;
};

inline json to_json(const ExecRequest& r) {
  json tests = json::array();
  for (const auto& t : r.tests) tests.push_back({{"test_id", t.test_id}, {"line", t.line}});
  return json{{"id", r.id},
              {"program", r.program},
              {"tests", tests},
              {"timeout_s", r.timeout_s},
              {"measure_coverage", r.measure_coverage}};
}

/// Decode and check a response against the request it answers.
inline ExecResponse response_from_json(const json& j, const ExecRequest& req) {
  try {
    if (j.contains("error")) throw SandboxError("runner rejected request: " + j.at("error").dump());
    ExecResponse out;
    out.id = j.at("id").get<std::string>();
    if (out.id != req.id) throw SandboxError("response id " + out.id + " does not match request " + req.id);
    for (const auto& r : j.at("results"))
      out.results.push_back({r.at("test_id").get<std::string>(), parse_status(r.at("status").get<std::string>()),
                             r.value("message", std::string())});
    if (out.results.size() != req.tests.size())
      throw SandboxError(fmt::format("runner returned {} results for {} tests", out.results.size(), req.tests.size()));
    for (size_t i = 0; i < out.results.size(); ++i)
      if (out.results[i].test_id != req.tests[i].test_id) throw SandboxError("runner reordered test results");
    if (j.contains("coverage") && j["coverage"].is_object()) {
      const auto& c = j["coverage"];
      Coverage cov;
      cov.branch_covered = c.at("branch_covered").get<long>();
      cov.branch_total = c.at("branch_total").get<long>();
      cov.branch_pct = cov.branch_total == 0 ? 100.0 : c.at("branch_pct").get<double>();
      out.coverage = cov;
    }
    return out;
  } catch (const json::exception& e) {
    throw SandboxError(std::string("malformed runner response: ") + e.what());
  }
}

/// Executes a program plus assert tests in isolation.
class Sandbox {
 public:
  virtual ~Sandbox() = default;
  virtual ExecResponse execute(const ExecRequest& req) = 0;
};

/// Talks to one long-lived runner process over its stdin/stdout. The runner
/// is (re)started lazily and killed when it stops answering in time.
class ProcessSandbox : public Sandbox {
 public:
  explicit ProcessSandbox(std::vector<std::string> argv, std::chrono::milliseconds grace = std::chrono::seconds(10))
      : argv_(std::move(argv)), grace_(grace) {
    if (argv_.empty()) throw SandboxError("empty sandbox command");
  }
  ProcessSandbox(const ProcessSandbox&) = delete;
  ProcessSandbox& operator=(const ProcessSandbox&) = delete;
  ~ProcessSandbox() override { stop(); }

  ExecResponse execute(const ExecRequest& req) override {
    std::lock_guard lock(mu_);
    if (pid_ <= 0) start();
    std::string line = to_json(req).dump() + "\n";
    if (!send_all(line)) {
      stop();
      throw SandboxError("runner stdin closed");
    }
    auto budget = std::chrono::milliseconds(static_cast<long>(req.timeout_s * 1000.0 * (req.tests.size() + 1))) + grace_;
    auto reply = read_line(std::chrono::steady_clock::now() + budget);
    if (!reply) {
      stop();
      throw SandboxError("runner did not answer request " + req.id);
    }
    json j;
    try {
      j = json::parse(*reply);
    } catch (const json::exception& e) {
      throw SandboxError(std::string("runner wrote invalid JSON: ") + e.what());
    }
    return response_from_json(j, req);
  }

 private:
  void start() {
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0)
      throw SandboxError(std::string("socketpair: ") + std::strerror(errno));
    // Build argv before fork: the child may only make async-signal-safe calls.
    std::vector<char*> args;
    for (auto& a : argv_) args.push_back(a.data());
    args.push_back(nullptr);
    pid_t pid = ::fork();
    if (pid < 0) {
      ::close(sv[0]);
      ::close(sv[1]);
      throw SandboxError(std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
      ::dup2(sv[1], STDIN_FILENO);
      ::dup2(sv[1], STDOUT_FILENO);
      ::execvp(args[0], args.data());
      ::_exit(127);
    }
    ::close(sv[1]);
    fd_ = sv[0];
    pid_ = pid;
    buffer_.clear();
  }

  void stop() {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
    if (pid_ > 0) {
      // EOF asks the runner to exit; give it a moment before killing.
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid_, nullptr, WNOHANG) == pid_) {
          pid_ = -1;
          return;
        }
        ::usleep(10000);
      }
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
      pid_ = -1;
    }
  }

  bool send_all(const std::string& data) {
    const char* p = data.data();
    size_t left = data.size();
    while (left > 0) {
      ssize_t n = ::send(fd_, p, left, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      p += n;
      left -= static_cast<size_t>(n);
    }
    return true;
  }

  std::optional<std::string> read_line(std::chrono::steady_clock::time_point deadline) {
    for (;;) {
      auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      pollfd pfd{fd_, POLLIN, 0};
      int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long>(left.count(), 1000)));
      if (rc < 0 && errno != EINTR) return std::nullopt;
      if (rc <= 0) continue;
      char chunk[65536];
      ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n <= 0) return std::nullopt;
      buffer_.append(chunk, static_cast<size_t>(n));
    }
  }

  std::vector<std::string> argv_;
  std::chrono::milliseconds grace_;
  std::mutex mu_;
  pid_t pid_ = -1;
  int fd_ = -1;
  std::string buffer_;
};

/// Spreads requests over several runner processes.
class SandboxPool : public Sandbox {
 public:
  SandboxPool(const std::vector<std::string>& argv, int size) {
    for (int i = 0; i < std::max(1, size); ++i) {
      workers_.push_back(std::make_unique<ProcessSandbox>(argv));
      idle_.push_back(static_cast<size_t>(i));
    }
  }

  ExecResponse execute(const ExecRequest& req) override {
    size_t slot;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return !idle_.empty(); });
      slot = idle_.back();
      idle_.pop_back();
    }
    struct Return {
      SandboxPool* pool;
      size_t slot;
      ~Return() {
        {
          std::lock_guard lock(pool->mu_);
          pool->idle_.push_back(slot);
        }
        pool->cv_.notify_one();
      }
    } give_back{this, slot};
    return workers_[slot]->execute(req);
  }

 private:
  std::vector<std::unique_ptr<ProcessSandbox>> workers_;
  std::vector<size_t> idle_;
  std::mutex mu_;
  std::condition_variable cv_;
};

/// Split a shell-like command string on whitespace (no quoting support).
inline std::vector<std::string> split_command(const std::string& cmd) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : cmd) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace metagen::sandbox
