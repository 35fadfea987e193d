// Copyright (c) 2026, vannot authors
// SPDX-License-Identifier: Apache-2.0
//
// Held-out evaluation: strip a corpus, drop files that verify bare, run the
// annotation search on the rest and report per-file success.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vannot/proposer.hpp"
#include "vannot/search.hpp"
#include "vannot/verifier.hpp"

namespace vannot {

inline constexpr int kReportSchemaVersion = 1;

/// Relative paths of every .dfy file under `dir`, sorted. Throws InputError
/// when `dir` is not a directory.
std::vector<std::string> list_dafny_files(const std::string& dir);

struct StripRow {
  std::string path;  // relative to the corpus
  std::size_t annotations = 0;
  std::optional<VerificationStatus> original_status;  // unset without a verifier
  std::optional<VerificationStatus> stripped_status;
  bool verifies_after_strip = false;
  bool original_flagged = false;  // original does not fully verify
};

struct StripReport {
  std::vector<StripRow> rows;
  std::size_t total_annotations = 0;
  std::size_t flagged = 0;
  std::size_t verify_after_strip = 0;
};

/// Writes stripped copies of every corpus file under `out_dir`, keeping
/// relative paths. `verifier` may be null to skip the status columns.
StripReport strip_corpus(const std::string& corpus_dir, const std::string& out_dir,
                         VerifierHarness* verifier);

nlohmann::json to_json(const StripReport& report);

/// Scripted-backend script replaying each file's own annotations, shuffled
/// by `seed`, on the channel named by its relative path.
nlohmann::json oracle_script(const std::string& corpus_dir, std::uint64_t seed);

struct EvalRow {
  std::string path;
  std::size_t iterations = 0;
  std::string final_status;  // SearchStatus name, or "error"
  std::size_t verifier_calls = 0;
  std::size_t llm_calls = 0;
  double wall_s = 0.0;
  std::string error;
  std::optional<SearchTrace> trace;
};

struct EvalOptions {
  SearchConfig search;
  int jobs = 1;  // files searched concurrently
  std::optional<std::string> annotated_dir;
};

struct EvalReport {
  std::size_t total_test_files = 0;
  std::size_t verified_after_strip = 0;
  std::size_t eval_set_size = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;
  std::vector<std::string> excluded;
  std::vector<EvalRow> rows;
  nlohmann::json config = nlohmann::json::object();
  double wall_s = 0.0;
};

/// Throws TransportError from the backend; other per-file failures are
/// recorded in the row.
EvalReport run_eval(const std::string& stripped_dir, CompletionBackend& backend,
                    VerifierHarness& verifier, const EvalOptions& options);

/// `canonical` drops timings so reports compare across runs.
nlohmann::json to_json(const EvalReport& report, bool canonical = false);
std::string render_table(const EvalReport& report);

}  // namespace vannot
