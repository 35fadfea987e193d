// Copyright (c) 2026, vannot authors
// SPDX-License-Identifier: Apache-2.0

#include "httplib.h"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <regex>
#include <thread>

#include "vannot/proposer.hpp"

namespace vannot {

using nlohmann::json;

HttpBackend::HttpBackend(HttpBackendConfig config)
    : config_(std::move(config)), slots_(std::max(1, config_.max_concurrent)) {
  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.endpoint, m, url)) {
    throw ConfigError("endpoint must be an http(s) URL: '" + config_.endpoint + "'");
  }
  scheme_host_port_ = m[1];
  path_ = m[2].matched ? m[2].str() : "/v1/chat/completions";
  if (config_.model.empty()) throw ConfigError("HTTP backend needs a model name");
  if (config_.max_concurrent < 1) throw ConfigError("max_concurrent must be at least 1");
  if (config_.max_retries < 0) throw ConfigError("max_retries must not be negative");
}

std::string HttpBackend::describe() const {
  return "http:" + scheme_host_port_ + path_ + " model=" + config_.model;
}

namespace {

struct Retryable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace

std::vector<std::string> HttpBackend::request_once(const CompletionRequest& request, int n) {
  json body = {{"model", config_.model},
               {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
               {"n", n},
               {"temperature", request.temperature},
               {"max_tokens", request.max_tokens}};
  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  httplib::Client cli(scheme_host_port_);
  const auto secs = static_cast<time_t>(config_.timeout_s);
  const auto usecs = static_cast<time_t>((config_.timeout_s - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);

  slots_.acquire();
  auto res = cli.Post(path_, headers, body.dump(), "application/json");
  slots_.release();

  if (!res) throw Retryable("transport: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500) {
    throw Retryable("HTTP " + std::to_string(res->status));
  }
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("HTTP " + std::to_string(res->status) + " from " + scheme_host_port_ +
                         path_ + ": " + res->body.substr(0, 300));
  }
  std::vector<std::string> out;
  try {
    const json j = json::parse(res->body);
    for (const auto& c : j.at("choices")) {
      if (c.contains("message")) {
        const auto& content = c["message"].at("content");
        out.push_back(content.is_string() ? content.get<std::string>() : std::string());
      } else {
        out.push_back(c.at("text").get<std::string>());
      }
    }
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed completion response: ") + e.what());
  }
  return out;
}

std::vector<std::string> HttpBackend::complete(const CompletionRequest& request) {
  std::vector<std::string> all;
  // Servers that ignore `n` return one choice; keep asking until n arrive.
  for (int round = 0; round < request.n && static_cast<int>(all.size()) < request.n; ++round) {
    const int want = request.n - static_cast<int>(all.size());
    std::string last_error;
    for (int attempt = 0;; ++attempt) {
      try {
        auto got = request_once(request, want);
        all.insert(all.end(), got.begin(), got.end());
        break;
      } catch (const Retryable& e) {
        last_error = e.what();
        if (attempt >= config_.max_retries) {
          throw TransportError(last_error + " from " + scheme_host_port_ + path_ + " after " +
                               std::to_string(attempt + 1) + " attempts");
        }
        const double wait = config_.backoff_initial_s * std::pow(2.0, attempt);
        std::this_thread::sleep_for(std::chrono::duration<double>(wait));
      }
    }
  }
  if (static_cast<int>(all.size()) > request.n) all.resize(static_cast<std::size_t>(request.n));
  return all;
}

}  // namespace vannot
