// Copyright (c) 2026, vannot authors
// SPDX-License-Identifier: Apache-2.0
//
// Child-process execution with captured output and a wall-clock deadline.

#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace vannot {

struct ProcessResult {
  int exit_code = -1;
  std::string out;
  std::string err;
  bool timed_out = false;
  bool launch_failed = false;
  std::string launch_error;
};

class ProcessRunner {
 public:
  virtual ~ProcessRunner() = default;
  /// argv[0] is resolved through PATH when it has no slash. On deadline
  /// expiry the whole process group is killed.
  virtual ProcessResult run(const std::vector<std::string>& argv,
                            std::chrono::milliseconds deadline) const = 0;
};

class PosixProcessRunner final : public ProcessRunner {
 public:
  ProcessResult run(const std::vector<std::string>& argv,
                    std::chrono::milliseconds deadline) const override;
};

/// Absolute path of an executable, searching PATH for bare names.
std::optional<std::string> find_executable(const std::string& name);

}  // namespace vannot
