// Copyright (c) 2026, vannot authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace vannot {

enum class ErrorCategory { Config, VerifierMissing, Transport, Checkpoint, Input, Internal };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorCategory::Config, w) {}
};
struct VerifierMissingError : Error {
  explicit VerifierMissingError(const std::string& w) : Error(ErrorCategory::VerifierMissing, w) {}
};
struct TransportError : Error {
  explicit TransportError(const std::string& w) : Error(ErrorCategory::Transport, w) {}
};
struct CheckpointError : Error {
  explicit CheckpointError(const std::string& w) : Error(ErrorCategory::Checkpoint, w) {}
};
struct InputError : Error {
  explicit InputError(const std::string& w) : Error(ErrorCategory::Input, w) {}
};

}  // namespace vannot
