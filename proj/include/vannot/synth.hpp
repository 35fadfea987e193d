// Copyright (c) 2026, vannot authors
// SPDX-License-Identifier: Apache-2.0
//
// Edit graph for synthetic program generation.
//
// A checkpoint directory holds graph.json and blobs/<sha256>.dfy for every
// program text the pipeline has seen, kept or not. graph.json is rewritten
// by atomic rename after each editor invocation.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vannot/dataset.hpp"
#include "vannot/proposer.hpp"
#include "vannot/verifier.hpp"

namespace vannot {

enum class NodeType { Root, Idea, Program };
enum class EditorName { IdeaProposer, IdeaImplementer, Annotator, ChangeProposer };

std::string_view to_string(NodeType type);
std::string_view to_string(EditorName editor);
std::optional<EditorName> editor_from_string(std::string_view name);

struct GraphNode {
  std::string id;
  NodeType type = NodeType::Root;
  std::string content;
  std::optional<VerificationOutcome> verification;  // Program nodes
  std::string created_by;                           // editor name, "init" for Root
  std::uint64_t created_at = 0;                     // logical clock
};

struct GraphEdge {
  std::string parent;
  std::string child;
  std::string editor;
  bool operator==(const GraphEdge&) const = default;
};

/// One keep/drop judgement on an editor output.
struct Decision {
  std::uint64_t seq = 0;
  std::size_t round = 0;
  EditorName editor = EditorName::IdeaProposer;
  std::string parent;
  std::string candidate;  // idea text, or blob hash of the program text
  bool kept = false;
  std::string reason;
  std::optional<std::string> node;  // id of the node created when kept
  // Annotator salvage retry, when one was made.
  std::optional<std::string> salvage_candidate;
  bool salvage_kept = false;
  std::string salvage_reason;
};

struct PipelineState {
  std::size_t next_round = 0;
  int llm_calls = 0;
  std::uint64_t clock = 0;
  std::string rng_state;
  nlohmann::json backend_cursors = nlohmann::json::object();
  std::string schedule_hash;
  std::string templates_hash;
  std::vector<std::string> errors;  // skipped LLM calls and similar
  bool finished = false;
};

class EditGraph {
 public:
  /// A graph holding only Root.
  EditGraph();

  const std::vector<GraphNode>& nodes() const { return nodes_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  const std::vector<Decision>& decisions() const { return decisions_; }
  PipelineState& state() { return state_; }
  const PipelineState& state() const { return state_; }

  const GraphNode& root() const { return nodes_.front(); }
  const GraphNode* find(const std::string& id) const;
  std::vector<std::string> children(const std::string& id) const;
  std::vector<std::string> parents(const std::string& id) const;
  /// Root-first chain through first parents, ending with `id`.
  std::vector<std::string> lineage(const std::string& id) const;

  const GraphNode& add_node(NodeType type, std::string content, const std::string& parent,
                            EditorName editor, std::optional<VerificationOutcome> verification);
  void add_decision(Decision d);

  /// Single Root, DAG, every non-root node reachable. Throws CheckpointError.
  void check_invariants() const;

  /// Writes any missing program blobs, then dir/graph.json by atomic rename.
  void save(const std::string& dir) const;
  /// Throws CheckpointError with the byte offset of a parse failure.
  static EditGraph load(const std::string& dir);

  nlohmann::json to_json() const;

 private:
  std::vector<GraphNode> nodes_;
  std::vector<GraphEdge> edges_;
  std::vector<Decision> decisions_;
  PipelineState state_;
};

/// Stores `text` under dir/blobs if absent and returns its hash.
std::string write_blob(const std::string& dir, const std::string& text);
/// Content of a stored blob; throws CheckpointError if absent or corrupt.
std::string read_blob(const std::string& dir, const std::string& hash);

struct EditorSpec {
  EditorName name = EditorName::IdeaProposer;
  int selection_limit = 1;
  int fanout = 1;
  double temperature = 0.8;
  int max_tokens = 1024;
};

struct ScheduleConfig {
  std::vector<EditorSpec> rounds;
  int max_llm_calls = 100;
  std::optional<std::size_t> max_nodes;
  std::uint64_t seed = 0;
  bool salvage = true;
  std::size_t idea_negatives_cap = 100;

  /// Throws ConfigError.
  void validate() const;
  std::string hash() const;
  static ScheduleConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Editor prompt templates with {{name}} placeholders.
struct PromptTemplates {
  std::map<EditorName, std::string> text;

  /// Reads idea_proposer.txt, idea_implementer.txt, annotator.txt and
  /// change_proposer.txt. Throws ConfigError when one is missing.
  static PromptTemplates load(const std::string& dir);
  std::string hash() const;
  std::string render(EditorName editor, const std::map<std::string, std::string>& vars) const;
};

/// Dafny source inside a completion: the first fenced block if any, else
/// the whole text. A trailing newline is ensured.
std::string extract_program(std::string_view completion);

/// Idea lines from a completion, list markers and quotes removed.
std::vector<std::string> parse_ideas(std::string_view completion);

/// Scripted backends key replies on this channel name.
std::string editor_channel(EditorName editor, const std::string& node_content);

/// Keep rule for implementer and change proposer outputs.
struct KeepVerdict {
  bool kept = false;
  std::string reason;
};
KeepVerdict program_keep_rule(const std::string& program, const VerificationOutcome& outcome);

/// Annotator rule: the rewrite only adds annotation (or blank) lines to the
/// parent, adds at least one annotation, and every added annotation is
/// accepted against the parent's outcome. `failing` receives the lines of
/// added annotations carrying an error.
KeepVerdict annotator_keep_rule(const std::string& parent, const VerificationOutcome& parent_outcome,
                                const std::string& rewrite, const VerificationOutcome& outcome,
                                std::vector<std::size_t>* failing = nullptr);

/// The rewrite with the given (1-based) lines removed.
std::string drop_lines(const std::string& text, const std::vector<std::size_t>& lines);

struct PipelineOptions {
  std::string dir;
  std::optional<std::size_t> stop_after;  // editor invocations in this call
};

struct PipelineReport {
  std::size_t invocations = 0;
  bool finished = false;
  std::string stop_reason;
};

/// Runs (or resumes) the schedule in `options.dir`. A fresh directory
/// starts from Root; an existing checkpoint must match the schedule and
/// templates. Throws CheckpointError or ConfigError.
PipelineReport run_pipeline(const ScheduleConfig& schedule, const PromptTemplates& templates,
                            CompletionBackend& backend, VerifierHarness& verifier,
                            const PipelineOptions& options);

struct RevalidationReport {
  std::size_t checked = 0;
  std::vector<std::string> discrepancies;
};

/// Recomputes every keep/drop decision from the stored blobs.
RevalidationReport revalidate(const EditGraph& graph, const std::string& dir,
                              VerifierHarness& verifier, const ScheduleConfig& schedule);

struct SynthDataset {
  std::vector<TrainingExample> examples;
  DatasetManifest manifest;
};

/// Each annotation goes to the first node of its lineage holding its
/// normalized text; copies further down are skipped.
SynthDataset export_dataset(const EditGraph& graph, PromptMode mode = PromptMode::FullProgram);

}  // namespace vannot
