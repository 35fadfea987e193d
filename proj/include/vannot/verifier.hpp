// Copyright (c) 2026, vannot authors
// SPDX-License-Identifier: Apache-2.0
//
// Runs the Dafny verifier on program text and classifies the result.

#pragma once

#include <atomic>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "vannot/process.hpp"

namespace vannot {

enum class VerificationStatus {
  FullyVerified,
  VerificationErrors,
  ParseOrResolutionError,
  Timeout,
  ToolFailure,
};

std::string_view to_string(VerificationStatus status);
std::optional<VerificationStatus> verification_status_from_string(std::string_view name);

enum class Severity { Error, Warning };

struct RelatedLocation {
  std::size_t line = 0;
  std::optional<std::size_t> column;
  std::string message;
  bool operator==(const RelatedLocation&) const = default;
};

struct Diagnostic {
  std::size_t line = 0;  // 1-based
  std::optional<std::size_t> column;
  Severity severity = Severity::Error;
  std::string message;
  std::vector<RelatedLocation> related;
  bool operator==(const Diagnostic&) const = default;
};

struct VerificationOutcome {
  VerificationStatus status = VerificationStatus::ToolFailure;
  int error_count = 0;  // meaningful for VerificationErrors
  std::vector<Diagnostic> diagnostics;
  double duration_s = 0.0;
  std::string detail;  // short reason for ToolFailure/Timeout

  /// 0 for FullyVerified, the count for VerificationErrors, nullopt otherwise.
  std::optional<int> errors() const;
  bool has_error_at_line(std::size_t line) const;
  /// Equality ignoring duration.
  bool same_result(const VerificationOutcome& other) const;
};

/// Classifies captured verifier output. Pure.
VerificationOutcome parse_verifier_output(std::string_view out, std::string_view err,
                                          int exit_code);

/// An inserted annotation is accepted when the result stays parseable and
/// within the time limit, no Error is reported on the inserted lines, and
/// the error count does not grow (strictly shrinks in strict mode).
bool annotation_is_accepted(const VerificationOutcome& before, const VerificationOutcome& after,
                            std::size_t first_line, std::size_t last_line, bool strict = false);

struct VerifierConfig {
  std::string executable = "dafny";
  double time_limit_s = 30.0;
  std::vector<std::string> extra_args;
  int max_workers = 1;
  double wall_clock_grace_s = 10.0;
  std::string version = "unpinned";

  /// Throws ConfigError.
  void validate() const;
  /// Hash of every field that can change a verifier result.
  std::string fingerprint() const;
};

struct VerifierStats {
  std::size_t requests = 0;
  std::size_t cache_hits = 0;
  std::size_t processes = 0;
};

class VerifierHarness {
 public:
  explicit VerifierHarness(VerifierConfig config,
                           std::shared_ptr<const ProcessRunner> runner = nullptr);

  const VerifierConfig& config() const { return config_; }

  /// Never throws for verifier-side problems; they map to ToolFailure.
  VerificationOutcome verify(const std::string& program);

  /// Index-aligned with the input; runs up to max_workers at once.
  std::vector<VerificationOutcome> verify_batch(const std::vector<std::string>& programs);

  /// `<exe> --version`, first line. Empty when the call fails.
  std::string probe_version() const;

  /// Resolved executable path or nullopt when it cannot be found.
  std::optional<std::string> resolved_executable() const;

  VerifierStats stats() const;
  void clear_cache();

 private:
  VerificationOutcome run_uncached(const std::string& program);

  VerifierConfig config_;
  std::shared_ptr<const ProcessRunner> runner_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
  mutable std::mutex mu_;
  std::string config_fingerprint_;
  std::map<std::string, VerificationOutcome> cache_;
  VerifierStats stats_;
};

}  // namespace vannot
