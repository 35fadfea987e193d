// Copyright (c) 2026, vannot authors
// SPDX-License-Identifier: Apache-2.0
//
// Candidate annotations from a completion backend.

#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <map>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vannot/errors.hpp"
#include "vannot/text_model.hpp"

namespace vannot {

inline constexpr std::string_view kPromptInstruction =
    "Given each Dafny program, propose an assertion, invariant or decreases statement in order "
    "to verify the program.";
inline constexpr int kPromptTemplateVersion = 1;

struct PromptRendering {
  std::string text;
  std::size_t program_len = 0;
};

/// instruction + "\n\nProgram:\n" + program + "Annotation:"
PromptRendering render_prompt(std::string_view program);

/// Program text up to the end of the given callable (whole file when the
/// unit is malformed or the index is out of range).
std::string program_prefix(const ParsedUnit& unit, std::size_t method);

struct CompletionRequest {
  std::string channel;  // scripted backends key their replies on it
  std::string prompt;
  int n = 1;
  double temperature = 0.8;
  int max_tokens = 128;
};

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  /// Raw completions. Throws TransportError on endpoint failure.
  virtual std::vector<std::string> complete(const CompletionRequest& request) = 0;
  virtual std::string describe() const = 0;
};

/// Thrown by a scripted backend whose channel has no replies left.
struct ScriptExhausted : Error {
  explicit ScriptExhausted(const std::string& w) : Error(ErrorCategory::Input, w) {}
};

/// Replays completions from a JSON script:
///   {"version": 1,
///    "channels": {"<channel>": {"responses": [[...], ...], "fallback": [...]}},
///    "default": {"responses": [...], "fallback": [...]}}
/// The i-th request on a channel gets responses[i]; later requests get the
/// fallback, and a channel without one throws ScriptExhausted. Channels not
/// listed use "default" with their own cursor.
class ScriptedBackend final : public CompletionBackend {
 public:
  /// Throws InputError on a malformed script.
  static std::unique_ptr<ScriptedBackend> from_json(const nlohmann::json& script);
  static std::unique_ptr<ScriptedBackend> from_file(const std::string& path);

  std::vector<std::string> complete(const CompletionRequest& request) override;
  std::string describe() const override;

  nlohmann::json cursors() const;
  void restore_cursors(const nlohmann::json& cursors);

 private:
  struct Channel {
    std::vector<std::vector<std::string>> responses;
    std::optional<std::vector<std::string>> fallback;
  };
  ScriptedBackend() = default;

  std::map<std::string, Channel> channels_;
  std::optional<Channel> default_;
  std::map<std::string, std::size_t> cursor_;
  std::string origin_;
  mutable std::mutex mu_;
};

struct HttpBackendConfig {
  std::string endpoint;  // full URL of the chat-completions route
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  int max_concurrent = 4;
  double timeout_s = 120.0;
  int max_retries = 4;
  double backoff_initial_s = 1.0;
};

/// OpenAI-compatible chat completions; the prompt is one user message.
class HttpBackend final : public CompletionBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  std::vector<std::string> complete(const CompletionRequest& request) override;
  std::string describe() const override;

 private:
  std::vector<std::string> request_once(const CompletionRequest& request, int n);

  HttpBackendConfig config_;
  std::string scheme_host_port_;
  std::string path_;
  std::counting_semaphore<> slots_;
};

struct ProposerConfig {
  int k = 5;
  double temperature = 0.8;
  int max_tokens = 128;
  bool prompt_prefix_only = false;

  /// Throws ConfigError.
  void validate() const;
};

struct ProposalSet {
  std::vector<Annotation> candidates;  // classified, deduplicated, sampling order
  std::vector<std::string> raw;        // at most k
};

ProposalSet propose(CompletionBackend& backend, const std::string& channel, std::string_view prompt,
                    const ProposerConfig& config);

nlohmann::json to_json(const ProposalSet& proposals);

}  // namespace vannot
