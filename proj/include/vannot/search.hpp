// Copyright (c) 2026, vannot authors
// SPDX-License-Identifier: Apache-2.0
//
// Greedy annotation search: propose, try every candidate at every compatible
// point, keep the first accepted splice, repeat.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vannot/proposer.hpp"
#include "vannot/text_model.hpp"
#include "vannot/verifier.hpp"

namespace vannot {

enum class SearchStatus { FullyVerified, Exhausted, StalledNoAcceptance };

std::string_view to_string(SearchStatus status);

struct SearchError : Error {
  explicit SearchError(const std::string& w) : Error(ErrorCategory::Input, w) {}
};

struct SearchConfig {
  int max_iterations = 5;
  ProposerConfig proposer;
  bool strict_progress = false;
  /// Restrict insertion to one callable instead of every failing one.
  std::optional<std::string> target_method;

  void validate() const;
};

struct AcceptedEdit {
  Annotation annotation;
  InsertionPoint point;
  std::string method;
  std::size_t line = 0;  // of the clause in the resulting text
  int before_errors = 0;
  int after_errors = 0;
};

struct IterationRecord {
  ProposalSet proposals;
  std::size_t attempts = 0;            // candidate x point verifications requested
  std::size_t skipped_duplicates = 0;  // pairs repeating an annotation already at the site
  int errors_before = 0;
  std::optional<AcceptedEdit> accepted;
  double wall_s = 0.0;
};

struct SearchTrace {
  std::string channel;
  SearchConfig config;
  VerifierConfig verifier;
  VerificationOutcome baseline;
  std::vector<IterationRecord> iterations;
  SearchStatus final_status = SearchStatus::Exhausted;
  VerificationOutcome final_outcome;
  std::string stall_reason;
  std::size_t verifier_calls = 0;
  std::size_t llm_calls = 0;
  double wall_s = 0.0;
};

/// Timing and worker count live under "runtime"; `canonical` drops it so
/// traces can be compared across runs and worker counts.
nlohmann::json to_json(const SearchTrace& trace, bool canonical = false);
nlohmann::json to_json(const VerificationOutcome& outcome);
nlohmann::json to_json(const InsertionPoint& point);

struct StepResult {
  std::optional<AcceptedEdit> edit;
  SourceText text;              // unchanged when nothing was accepted
  VerificationOutcome outcome;  // of `text`
  std::size_t attempts = 0;
  std::size_t skipped_duplicates = 0;
};

/// Callables whose span contains an Error diagnostic; all callables with a
/// body when no diagnostic falls inside one.
std::vector<std::size_t> target_methods(const ParsedUnit& unit, const VerificationOutcome& outcome,
                                        const std::optional<std::string>& only = std::nullopt);

StepResult greedy_step(const SourceText& program, const VerificationOutcome& before,
                       const ProposalSet& proposals, VerifierHarness& verifier,
                       const SearchConfig& config);

struct SearchResult {
  SourceText text;
  SearchTrace trace;
};

/// Throws SearchError when the input cannot be verified at all, and
/// TransportError from the backend.
SearchResult annotate(const SourceText& program, CompletionBackend& backend,
                      VerifierHarness& verifier, const SearchConfig& config,
                      const std::string& channel = "");

}  // namespace vannot
