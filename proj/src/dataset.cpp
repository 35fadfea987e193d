// Copyright (c) 2026, vannot authors
// SPDX-License-Identifier: Apache-2.0

#include "vannot/dataset.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "vannot/errors.hpp"
#include "vannot/proposer.hpp"

namespace vannot {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(PromptMode mode) {
  return mode == PromptMode::FullProgram ? "full_program" : "method_prefix";
}

std::vector<TrainingExample> extract_pairs(const SourceText& program, PromptMode mode) {
  std::vector<TrainingExample> out;
  SourceText cur = program;
  const std::string source = program.path.value_or("");
  for (std::size_t step = 1;; ++step) {
    const ParsedUnit unit = parse(cur);
    if (unit.annotations.empty()) break;
    const AnnotationInstance& last = unit.annotations.back();
    SourceText next = remove_annotation(cur, last);
    std::string shown = next.content;
    if (mode == PromptMode::MethodPrefix) shown = program_prefix(parse(next), last.method);
    TrainingExample ex;
    ex.prompt = render_prompt(shown).text;
    ex.completion = last.annotation.text;
    ex.meta.source = source;
    ex.meta.ordinal = last.ordinal;
    ex.meta.step = step;
    ex.meta.kind = std::string(to_string(last.annotation.kind));
    ex.meta.method = unit.methods.at(last.method).name;
    ex.meta.offset = last.span.begin;
    ex.meta.owned_text = last.owned_text;
    out.push_back(std::move(ex));
    cur = std::move(next);
  }
  return out;
}

std::optional<std::string> program_of_prompt(std::string_view prompt) {
  const std::string head = std::string(kPromptInstruction) + "\n\nProgram:\n";
  const std::string_view tail = "Annotation:";
  if (prompt.size() < head.size() + tail.size()) return std::nullopt;
  if (prompt.substr(0, head.size()) != head) return std::nullopt;
  if (prompt.substr(prompt.size() - tail.size()) != tail) return std::nullopt;
  return std::string(prompt.substr(head.size(), prompt.size() - head.size() - tail.size()));
}

std::string restore_step(std::string_view program, const Provenance& meta) {
  if (meta.offset > program.size()) throw InputError("provenance offset past end of program");
  std::string out;
  out.reserve(program.size() + meta.owned_text.size());
  out.append(program.substr(0, meta.offset));
  out.append(meta.owned_text);
  out.append(program.substr(meta.offset));
  return out;
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

DatasetManifest summarize(const std::vector<TrainingExample>& examples, PromptMode mode) {
  DatasetManifest m;
  m.prompt_mode = mode;
  m.examples = examples.size();
  std::set<std::string> uniq;
  std::set<std::string> files;
  for (const auto& e : examples) {
    if (e.meta.kind == "invariant") ++m.invariants;
    else if (e.meta.kind == "assert") ++m.asserts;
    else if (e.meta.kind == "decreases") ++m.decreases;
    uniq.insert(normalize_whitespace(e.completion));
    if (files.insert(e.meta.source).second) m.files.push_back(e.meta.source);
  }
  m.unique_completions = uniq.size();
  return m;
}

json to_json(const DatasetManifest& m) {
  json skipped = json::array();
  for (const auto& s : m.skipped) skipped.push_back({{"path", s.path}, {"reason", s.reason}});
  json j = {{"schema_version", 1},
          {"examples", m.examples},
          {"per_kind",
           {{"invariant", m.invariants}, {"assert", m.asserts}, {"decreases", m.decreases}}},
          {"unique_completions", m.unique_completions},
          {"files", m.files},
          {"skipped", skipped},
          {"filter_verified", m.filter_verified},
          {"prompt_mode", to_string(m.prompt_mode)},
          {"prompt_template_version", kPromptTemplateVersion},
          {"verifier_version", m.verifier_version},
          {"timestamp", m.timestamp},
          {"origin", m.origin},
          {"loss_mask", "completion_only"},
          {"join", "prompt + \" \" + completion"}};
  if (m.extra.is_object()) {
    for (const auto& [k, v] : m.extra.items()) j[k] = v;
  }
  return j;
}

namespace {

std::optional<std::string> try_read(const std::string& path, std::string& why) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    why = "not a readable file";
    return std::nullopt;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    why = "cannot open";
    return std::nullopt;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) {
    why = "read error";
    return std::nullopt;
  }
  return ss.str();
}

}  // namespace

CorpusResult extract_corpus(const std::vector<std::string>& paths, const CorpusOptions& options,
                            VerifierHarness* verifier) {
  if (options.filter_verified && !verifier) {
    throw ConfigError("filtering by verification needs a verifier");
  }
  std::vector<SkippedFile> skipped;
  std::vector<SourceText> sources;
  for (const auto& p : paths) {
    std::string why;
    auto text = try_read(p, why);
    if (!text) {
      skipped.push_back({p, why});
      continue;
    }
    if (parse(*text).malformed) {
      skipped.push_back({p, "does not parse"});
      continue;
    }
    sources.push_back(SourceText{std::move(*text), p});
  }
  if (options.filter_verified) {
    std::vector<std::string> texts;
    for (const auto& s : sources) texts.push_back(s.content);
    const auto outcomes = verifier->verify_batch(texts);
    std::vector<SourceText> kept;
    for (std::size_t i = 0; i < sources.size(); ++i) {
      if (outcomes[i].status == VerificationStatus::FullyVerified) {
        kept.push_back(std::move(sources[i]));
      } else {
        skipped.push_back({*sources[i].path,
                           "not fully verified (" + std::string(to_string(outcomes[i].status)) + ")"});
      }
    }
    sources = std::move(kept);
  }
  CorpusResult res;
  for (const auto& s : sources) {
    auto ex = extract_pairs(s, options.prompt_mode);
    res.examples.insert(res.examples.end(), std::make_move_iterator(ex.begin()),
                        std::make_move_iterator(ex.end()));
  }
  res.manifest = summarize(res.examples, options.prompt_mode);
  res.manifest.skipped = std::move(skipped);
  res.manifest.filter_verified = options.filter_verified;
  res.manifest.verifier_version = verifier ? verifier->config().version : "";
  res.manifest.timestamp = options.timestamp.value_or(utc_timestamp());
  res.manifest.origin = "corpus";
  return res;
}

namespace {

json meta_json(const Provenance& p) {
  return {{"source", p.source}, {"ordinal", p.ordinal}, {"step", p.step},
          {"kind", p.kind},     {"method", p.method},   {"offset", p.offset},
          {"owned_text", p.owned_text}};
}

void write_file(const std::string& path, const std::string& content) {
  const fs::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  out << content;
  out.flush();
  if (!out) throw InputError("write failed for " + path);
}

}  // namespace

void export_jsonl(const std::vector<TrainingExample>& examples, const DatasetManifest& manifest,
                  const std::string& path) {
  std::string body;
  for (const auto& e : examples) {
    body += json{{"prompt", e.prompt}, {"completion", e.completion}, {"meta", meta_json(e.meta)}}
                .dump();
    body += '\n';
  }
  write_file(path, body);
  write_file(path + ".manifest.json", to_json(manifest).dump(2) + "\n");
}

std::vector<TrainingExample> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::vector<TrainingExample> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      TrainingExample e;
      e.prompt = j.at("prompt").get<std::string>();
      e.completion = j.at("completion").get<std::string>();
      const auto& m = j.at("meta");
      e.meta.source = m.at("source").get<std::string>();
      e.meta.ordinal = m.at("ordinal").get<std::size_t>();
      e.meta.step = m.at("step").get<std::size_t>();
      e.meta.kind = m.at("kind").get<std::string>();
      e.meta.method = m.at("method").get<std::string>();
      e.meta.offset = m.at("offset").get<std::size_t>();
      e.meta.owned_text = m.at("owned_text").get<std::string>();
      out.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw InputError(path + ":" + std::to_string(n) + ": " + ex.what());
    }
  }
  return out;
}

FileSplit split_files(std::vector<std::string> paths, std::size_t n_train,
                      std::optional<std::uint64_t> seed) {
  std::sort(paths.begin(), paths.end());
  if (seed) {
    std::mt19937_64 rng(*seed);
    for (std::size_t i = paths.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(paths[i - 1], paths[j]);
    }
  }
  FileSplit s;
  const std::size_t cut = std::min(n_train, paths.size());
  s.train.assign(paths.begin(), paths.begin() + static_cast<std::ptrdiff_t>(cut));
  s.test.assign(paths.begin() + static_cast<std::ptrdiff_t>(cut), paths.end());
  return s;
}

}  // namespace vannot
