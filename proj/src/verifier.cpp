// Copyright (c) 2026, vannot authors
// SPDX-License-Identifier: Apache-2.0

#include "vannot/verifier.hpp"

#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <climits>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <regex>
#include <sstream>
#include <thread>

#include "vannot/errors.hpp"
#include "vannot/hash.hpp"

namespace vannot {

namespace fs = std::filesystem;

std::string_view to_string(VerificationStatus status) {
  switch (status) {
    case VerificationStatus::FullyVerified: return "FullyVerified";
    case VerificationStatus::VerificationErrors: return "VerificationErrors";
    case VerificationStatus::ParseOrResolutionError: return "ParseOrResolutionError";
    case VerificationStatus::Timeout: return "Timeout";
    case VerificationStatus::ToolFailure: return "ToolFailure";
  }
  return "ToolFailure";
}

std::optional<VerificationStatus> verification_status_from_string(std::string_view name) {
  for (auto s : {VerificationStatus::FullyVerified, VerificationStatus::VerificationErrors,
                 VerificationStatus::ParseOrResolutionError, VerificationStatus::Timeout,
                 VerificationStatus::ToolFailure}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

std::optional<int> VerificationOutcome::errors() const {
  if (status == VerificationStatus::FullyVerified) return 0;
  if (status == VerificationStatus::VerificationErrors) return error_count;
  return std::nullopt;
}

bool VerificationOutcome::has_error_at_line(std::size_t line) const {
  return std::any_of(diagnostics.begin(), diagnostics.end(), [&](const Diagnostic& d) {
    return d.severity == Severity::Error && d.line == line;
  });
}

bool VerificationOutcome::same_result(const VerificationOutcome& o) const {
  return status == o.status && error_count == o.error_count && diagnostics == o.diagnostics &&
         detail == o.detail;
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

VerificationOutcome tool_failure(std::string detail) {
  VerificationOutcome o;
  o.status = VerificationStatus::ToolFailure;
  o.detail = std::move(detail);
  return o;
}

}  // namespace

VerificationOutcome parse_verifier_output(std::string_view out, std::string_view err,
                                          int exit_code) {
  static const std::regex diag_re(
      R"(^.*\((\d+),(\d+)\):\s*(Error|Warning|Related location)[^:]*:\s?(.*)$)");
  static const std::regex summary_re(
      R"(finished with (\d+) verified, (\d+) errors?(?:, (\d+) time outs?)?(?:, (\d+) out of resource)?)");
  static const std::regex front_re(R"((\d+) (resolution/type|parse) errors? detected in)");

  VerificationOutcome o;
  std::string all;
  all.reserve(out.size() + err.size() + 1);
  all.append(out);
  if (!all.empty() && all.back() != '\n') all.push_back('\n');
  all.append(err);

  bool front_end_error = false;
  std::optional<int> summary_errors;
  int timeouts = 0;
  std::istringstream in(all);
  std::string line;
  std::smatch m;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (std::regex_match(line, m, diag_re)) {
      const std::size_t ln = std::stoul(m[1]);
      const std::size_t col = std::stoul(m[2]);
      const std::string kind = m[3];
      std::string msg = trim(m[4].str());
      if (kind == "Related location") {
        if (!o.diagnostics.empty()) {
          o.diagnostics.back().related.push_back({ln, col, std::move(msg)});
        }
        continue;
      }
      Diagnostic d;
      d.line = ln;
      d.column = col;
      d.severity = kind == "Error" ? Severity::Error : Severity::Warning;
      d.message = std::move(msg);
      o.diagnostics.push_back(std::move(d));
      continue;
    }
    if (std::regex_search(line, m, front_re)) {
      front_end_error = true;
      continue;
    }
    if (std::regex_search(line, m, summary_re)) {
      summary_errors = std::stoi(m[2]);
      if (m[3].matched) timeouts += std::stoi(m[3]);
      if (m[4].matched) timeouts += std::stoi(m[4]);
    }
  }

  const auto n_err = static_cast<int>(std::count_if(
      o.diagnostics.begin(), o.diagnostics.end(),
      [](const Diagnostic& d) { return d.severity == Severity::Error; }));

  if (front_end_error) {
    o.status = VerificationStatus::ParseOrResolutionError;
  } else if (summary_errors) {
    if (*summary_errors > 0) {
      o.status = VerificationStatus::VerificationErrors;
      o.error_count = *summary_errors;
    } else if (timeouts > 0) {
      o.status = VerificationStatus::Timeout;
      o.detail = "verifier reported time out";
    } else if (n_err > 0) {
      o.status = VerificationStatus::VerificationErrors;
      o.error_count = n_err;
    } else {
      o.status = VerificationStatus::FullyVerified;
    }
  } else if (n_err > 0) {
    o.status = VerificationStatus::ParseOrResolutionError;
  } else {
    std::string first = trim(all.substr(0, std::min<std::size_t>(all.size(), 200)));
    auto d = tool_failure("unrecognized verifier output (exit " + std::to_string(exit_code) +
                          (first.empty() ? ", no output)" : "): " + first));
    d.diagnostics = std::move(o.diagnostics);
    return d;
  }
  return o;
}

bool annotation_is_accepted(const VerificationOutcome& before, const VerificationOutcome& after,
                            std::size_t first_line, std::size_t last_line, bool strict) {
  switch (after.status) {
    case VerificationStatus::ParseOrResolutionError:
    case VerificationStatus::ToolFailure:
    case VerificationStatus::Timeout:
      return false;
    default:
      break;
  }
  for (const auto& d : after.diagnostics) {
    if (d.severity == Severity::Error && d.line >= first_line && d.line <= last_line) return false;
  }
  const int b = before.errors().value_or(INT_MAX);
  const int a = *after.errors();
  return strict ? a < b : a <= b;
}

void VerifierConfig::validate() const {
  if (executable.empty()) throw ConfigError("verifier executable must not be empty");
  if (!(time_limit_s > 0)) throw ConfigError("time limit must be positive");
  if (max_workers < 1) throw ConfigError("max_workers must be at least 1");
  if (wall_clock_grace_s < 0) throw ConfigError("wall-clock grace must not be negative");
}

std::string VerifierConfig::fingerprint() const {
  std::ostringstream ss;
  ss << executable << '\n' << time_limit_s << '\n' << wall_clock_grace_s << '\n' << version;
  for (const auto& a : extra_args) ss << '\n' << a;
  return sha256_hex(ss.str());
}

namespace {

class TempSource {
 public:
  explicit TempSource(const std::string& content) {
    std::string templ = (fs::temp_directory_path() / "vannot-XXXXXX.dfy").string();
    const int fd = ::mkstemps(templ.data(), 4);
    if (fd < 0) throw std::runtime_error("cannot create temporary program file");
    path_ = templ;
    std::size_t done = 0;
    while (done < content.size()) {
      const ssize_t n = ::write(fd, content.data() + done, content.size() - done);
      if (n <= 0) {
        ::close(fd);
        throw std::runtime_error("cannot write temporary program file");
      }
      done += static_cast<std::size_t>(n);
    }
    ::close(fd);
  }
  ~TempSource() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  TempSource(const TempSource&) = delete;
  TempSource& operator=(const TempSource&) = delete;
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace

VerifierHarness::VerifierHarness(VerifierConfig config, std::shared_ptr<const ProcessRunner> runner)
    : config_(std::move(config)), runner_(std::move(runner)) {
  config_.validate();
  if (!runner_) runner_ = std::make_shared<PosixProcessRunner>();
  slots_ = std::make_unique<std::counting_semaphore<>>(config_.max_workers);
  config_fingerprint_ = config_.fingerprint();
}

std::optional<std::string> VerifierHarness::resolved_executable() const {
  return find_executable(config_.executable);
}

VerificationOutcome VerifierHarness::verify(const std::string& program) {
  const std::string key = sha256_hex(config_fingerprint_ + '\0' + program);
  {
    std::lock_guard lk(mu_);
    ++stats_.requests;
    if (auto it = cache_.find(key); it != cache_.end()) {
      ++stats_.cache_hits;
      return it->second;
    }
  }
  VerificationOutcome o;
  try {
    o = run_uncached(program);
  } catch (const std::exception& e) {
    o = tool_failure(e.what());
  }
  std::lock_guard lk(mu_);
  cache_.emplace(key, o);
  return o;
}

VerificationOutcome VerifierHarness::run_uncached(const std::string& program) {
  const std::string exe = resolved_executable().value_or(config_.executable);
  TempSource file(program);
  const long limit = std::max(1L, static_cast<long>(std::ceil(config_.time_limit_s)));
  std::vector<std::string> argv{exe, "verify", file.path(), "--verification-time-limit",
                                std::to_string(limit)};
  argv.insert(argv.end(), config_.extra_args.begin(), config_.extra_args.end());
  const auto deadline = std::chrono::milliseconds(
      static_cast<long long>((config_.time_limit_s + config_.wall_clock_grace_s) * 1000.0));

  slots_->acquire();
  struct Release {
    std::counting_semaphore<>* s;
    ~Release() { s->release(); }
  } release{slots_.get()};
  {
    std::lock_guard lk(mu_);
    ++stats_.processes;
  }
  const auto t0 = std::chrono::steady_clock::now();
  ProcessResult r = runner_->run(argv, deadline);
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  VerificationOutcome o;
  if (r.launch_failed) {
    o = tool_failure("cannot launch verifier: " + r.launch_error);
  } else if (r.timed_out) {
    o.status = VerificationStatus::Timeout;
    o.detail = "wall-clock deadline exceeded";
  } else {
    o = parse_verifier_output(r.out, r.err, r.exit_code);
  }
  o.duration_s = dt;
  return o;
}

std::vector<VerificationOutcome> VerifierHarness::verify_batch(
    const std::vector<std::string>& programs) {
  std::vector<VerificationOutcome> results(programs.size());
  if (programs.empty()) return results;
  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(config_.max_workers), programs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < programs.size(); i = next++) {
      results[i] = verify(programs[i]);
    }
  };
  if (n_threads <= 1) {
    work();
    return results;
  }
  std::vector<std::jthread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
  pool.clear();
  return results;
}

std::string VerifierHarness::probe_version() const {
  const std::string exe = resolved_executable().value_or(config_.executable);
  const ProcessResult r = runner_->run({exe, "--version"}, std::chrono::seconds(60));
  if (r.launch_failed || r.timed_out || r.exit_code != 0) return {};
  std::istringstream in(r.out);
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (!line.empty()) return line;
  }
  return {};
}

VerifierStats VerifierHarness::stats() const {
  std::lock_guard lk(mu_);
  return stats_;
}

void VerifierHarness::clear_cache() {
  std::lock_guard lk(mu_);
  cache_.clear();
}

}  // namespace vannot
