// Copyright (c) 2026, vannot authors
// SPDX-License-Identifier: Apache-2.0
//
// Training pairs by repeated removal of the textually last annotation.
//
// JSONL contract: each line is {"prompt", "completion", "meta"}. Trainers
// apply loss to completion tokens only. The training string is
// prompt + " " + completion, matching how completions are read back at
// inference (leading whitespace is ignored there).

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vannot/text_model.hpp"
#include "vannot/verifier.hpp"

namespace vannot {

enum class PromptMode { FullProgram, MethodPrefix };

std::string_view to_string(PromptMode mode);

struct Provenance {
  std::string source;
  std::size_t ordinal = 0;  // of the annotation in the original program
  std::size_t step = 0;     // 1-based removal step
  std::string kind;
  std::string method;
  std::size_t offset = 0;   // where owned_text goes back into the step's program
  std::string owned_text;   // bytes removed at this step
  bool operator==(const Provenance&) const = default;
};

struct TrainingExample {
  std::string prompt;
  std::string completion;
  Provenance meta;
  bool operator==(const TrainingExample&) const = default;
};

std::vector<TrainingExample> extract_pairs(const SourceText& program,
                                           PromptMode mode = PromptMode::FullProgram);

/// The program embedded in a rendered prompt; nullopt if it is not one.
std::optional<std::string> program_of_prompt(std::string_view prompt);

/// Undoes one removal step: the program before `example` was extracted.
std::string restore_step(std::string_view program, const Provenance& meta);

struct SkippedFile {
  std::string path;
  std::string reason;
};

struct DatasetManifest {
  std::size_t examples = 0;
  std::size_t invariants = 0;
  std::size_t asserts = 0;
  std::size_t decreases = 0;
  std::size_t unique_completions = 0;
  std::vector<std::string> files;  // contributing sources
  std::vector<SkippedFile> skipped;
  bool filter_verified = false;
  PromptMode prompt_mode = PromptMode::FullProgram;
  std::string verifier_version;
  std::string timestamp;  // UTC, ISO 8601
  std::string origin;     // free-form tag, e.g. "corpus" or "synth"
  nlohmann::json extra;   // merged into the JSON form when set
};

nlohmann::json to_json(const DatasetManifest& manifest);

/// Counts, uniques and prompt mode recomputed from the examples.
DatasetManifest summarize(const std::vector<TrainingExample>& examples, PromptMode mode);

struct CorpusOptions {
  bool filter_verified = false;
  PromptMode prompt_mode = PromptMode::FullProgram;
  std::optional<std::string> timestamp;  // defaults to now
};

struct CorpusResult {
  std::vector<TrainingExample> examples;
  DatasetManifest manifest;
};

/// `verifier` is required when filter_verified is set. Unreadable or
/// unparseable files are skipped and listed in the manifest.
CorpusResult extract_corpus(const std::vector<std::string>& paths, const CorpusOptions& options,
                            VerifierHarness* verifier = nullptr);

/// Writes `path` and the sidecar `path + ".manifest.json"`. Throws InputError
/// when either cannot be written.
void export_jsonl(const std::vector<TrainingExample>& examples, const DatasetManifest& manifest,
                  const std::string& path);

std::vector<TrainingExample> read_jsonl(const std::string& path);

struct FileSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Lexicographic order, optionally shuffled by a seed; first n_train go to train.
FileSplit split_files(std::vector<std::string> paths, std::size_t n_train,
                      std::optional<std::uint64_t> seed = std::nullopt);

std::string utc_timestamp();

}  // namespace vannot
