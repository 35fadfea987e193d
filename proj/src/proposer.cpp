// Copyright (c) 2026, vannot authors
// SPDX-License-Identifier: Apache-2.0

#include "vannot/proposer.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace vannot {

using nlohmann::json;

PromptRendering render_prompt(std::string_view program) {
  PromptRendering r;
  r.text.reserve(kPromptInstruction.size() + program.size() + 32);
  r.text.append(kPromptInstruction);
  r.text.append("\n\nProgram:\n");
  r.text.append(program);
  r.text.append("Annotation:");
  r.program_len = program.size();
  return r;
}

std::string program_prefix(const ParsedUnit& unit, std::size_t method) {
  const auto& s = unit.source.content;
  if (unit.malformed || method >= unit.methods.size()) return s;
  std::size_t end = unit.methods[method].span.end;
  while (end < s.size() && (s[end] == ' ' || s[end] == '\t' || s[end] == '\r')) ++end;
  if (end < s.size() && s[end] == '\n') ++end;
  return s.substr(0, end);
}

namespace {

std::vector<std::string> string_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw InputError("script: " + where + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) throw InputError("script: " + where + " must be an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_json(const json& script) {
  std::unique_ptr<ScriptedBackend> b(new ScriptedBackend);
  if (!script.is_object()) throw InputError("script: top level must be an object");
  if (script.value("version", 1) != 1) throw InputError("script: unsupported version");
  auto channel = [](const json& j, const std::string& name) {
    if (!j.is_object()) throw InputError("script: channel " + name + " must be an object");
    Channel c;
    if (j.contains("responses")) {
      if (!j["responses"].is_array()) throw InputError("script: responses must be an array");
      for (const auto& r : j["responses"]) c.responses.push_back(string_list(r, name + ".responses"));
    }
    if (j.contains("fallback")) c.fallback = string_list(j["fallback"], name + ".fallback");
    return c;
  };
  if (script.contains("channels")) {
    for (const auto& [name, v] : script["channels"].items()) b->channels_[name] = channel(v, name);
  }
  if (script.contains("default")) b->default_ = channel(script["default"], "default");
  b->origin_ = "scripted";
  return b;
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read script " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("script " + path + ": " + e.what());
  }
  auto b = from_json(j);
  b->origin_ = "scripted:" + path;
  return b;
}

std::vector<std::string> ScriptedBackend::complete(const CompletionRequest& request) {
  std::lock_guard lk(mu_);
  const Channel* c = nullptr;
  if (auto it = channels_.find(request.channel); it != channels_.end()) {
    c = &it->second;
  } else if (default_) {
    c = &*default_;
  } else {
    throw ScriptExhausted("no script for channel '" + request.channel + "'");
  }
  std::size_t& cur = cursor_[request.channel];
  if (cur < c->responses.size()) return c->responses[cur++];
  if (c->fallback) {
    ++cur;
    return *c->fallback;
  }
  throw ScriptExhausted("script for channel '" + request.channel + "' is exhausted");
}

std::string ScriptedBackend::describe() const { return origin_; }

json ScriptedBackend::cursors() const {
  std::lock_guard lk(mu_);
  json j = json::object();
  for (const auto& [k, v] : cursor_) j[k] = v;
  return j;
}

void ScriptedBackend::restore_cursors(const json& cursors) {
  std::lock_guard lk(mu_);
  cursor_.clear();
  for (const auto& [k, v] : cursors.items()) cursor_[k] = v.get<std::size_t>();
}

void ProposerConfig::validate() const {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (!(temperature >= 0)) throw ConfigError("temperature must be >= 0");
  if (max_tokens < 1) throw ConfigError("max_tokens must be positive");
}

ProposalSet propose(CompletionBackend& backend, const std::string& channel, std::string_view prompt,
                    const ProposerConfig& config) {
  config.validate();
  CompletionRequest req{channel, std::string(prompt), config.k, config.temperature,
                        config.max_tokens};
  ProposalSet out;
  out.raw = backend.complete(req);
  if (out.raw.size() > static_cast<std::size_t>(config.k)) out.raw.resize(config.k);
  std::set<std::string> seen;
  for (const auto& r : out.raw) {
    auto a = classify_annotation(r);
    if (!a) continue;
    if (!seen.insert(std::string(to_string(a->kind)) + "\n" + a->normalized).second) continue;
    out.candidates.push_back(std::move(*a));
  }
  return out;
}

json to_json(const ProposalSet& p) {
  json c = json::array();
  for (const auto& a : p.candidates) c.push_back({{"kind", to_string(a.kind)}, {"text", a.text}});
  return {{"raw", p.raw}, {"candidates", c}};
}

}  // namespace vannot
