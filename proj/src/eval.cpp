// Copyright (c) 2026, vannot authors
// SPDX-License-Identifier: Apache-2.0

#include "vannot/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "vannot/errors.hpp"
#include "vannot/text_model.hpp"

namespace vannot {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + p.string());
  out << text;
  if (!out.flush()) throw InputError("write failed for " + p.string());
}

json status_json(const std::optional<VerificationStatus>& s) {
  return s ? json(to_string(*s)) : json();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<std::string> list_dafny_files(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw InputError(dir + " is not a directory");
  std::vector<std::string> out;
  for (auto it = fs::recursive_directory_iterator(dir, ec); !ec && it != fs::end(it);
       it.increment(ec)) {
    if (it->is_regular_file() && it->path().extension() == ".dfy") {
      out.push_back(fs::relative(it->path(), dir).generic_string());
    }
  }
  if (ec) throw InputError("cannot list " + dir + ": " + ec.message());
  std::sort(out.begin(), out.end());
  return out;
}

StripReport strip_corpus(const std::string& corpus_dir, const std::string& out_dir,
                         VerifierHarness* verifier) {
  StripReport rep;
  std::vector<std::string> originals, stripped;
  for (const auto& rel : list_dafny_files(corpus_dir)) {
    const std::string text = read_text(fs::path(corpus_dir) / rel);
    const auto s = strip_all_annotations(SourceText{text, rel});
    write_text(fs::path(out_dir) / rel, s.text.content);
    StripRow row;
    row.path = rel;
    row.annotations = s.removed.size();
    rep.total_annotations += row.annotations;
    rep.rows.push_back(std::move(row));
    originals.push_back(text);
    stripped.push_back(s.text.content);
  }
  if (verifier) {
    // One batch so the worker pool sees both halves at once.
    std::vector<std::string> all = originals;
    all.insert(all.end(), stripped.begin(), stripped.end());
    const auto outcomes = verifier->verify_batch(all);
    const std::size_t n = rep.rows.size();
    for (std::size_t i = 0; i < n; ++i) {
      auto& row = rep.rows[i];
      row.original_status = outcomes[i].status;
      row.stripped_status = outcomes[n + i].status;
      row.original_flagged = outcomes[i].status != VerificationStatus::FullyVerified;
      row.verifies_after_strip = outcomes[n + i].status == VerificationStatus::FullyVerified;
      rep.flagged += row.original_flagged;
      rep.verify_after_strip += row.verifies_after_strip;
    }
  }
  return rep;
}

json to_json(const StripReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"path", row.path},
                    {"annotations", row.annotations},
                    {"original_status", status_json(row.original_status)},
                    {"stripped_status", status_json(row.stripped_status)},
                    {"verifies_after_strip", row.verifies_after_strip},
                    {"original_flagged", row.original_flagged}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"files", r.rows.size()},
          {"total_annotations", r.total_annotations},
          {"flagged_originals", r.flagged},
          {"verify_after_strip", r.verify_after_strip},
          {"rows", rows}};
}

json oracle_script(const std::string& corpus_dir, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  json channels = json::object();
  for (const auto& rel : list_dafny_files(corpus_dir)) {
    const auto s = strip_all_annotations(SourceText{read_text(fs::path(corpus_dir) / rel), rel});
    std::vector<std::string> texts;
    for (const auto& r : s.removed) texts.push_back(r.annotation.text);
    for (std::size_t i = texts.size(); i > 1; --i) {
      std::swap(texts[i - 1], texts[static_cast<std::size_t>(rng() % i)]);
    }
    channels[rel] = {{"fallback", texts}};
  }
  return {{"version", 1}, {"channels", channels}};
}

EvalReport run_eval(const std::string& stripped_dir, CompletionBackend& backend,
                    VerifierHarness& verifier, const EvalOptions& options) {
  options.search.validate();
  if (options.jobs < 1) throw ConfigError("jobs must be at least 1");
  const auto t0 = std::chrono::steady_clock::now();
  EvalReport rep;
  const auto files = list_dafny_files(stripped_dir);
  rep.total_test_files = files.size();
  std::vector<std::string> texts;
  for (const auto& rel : files) texts.push_back(read_text(fs::path(stripped_dir) / rel));
  const auto baseline = verifier.verify_batch(texts);

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (baseline[i].status == VerificationStatus::FullyVerified) {
      rep.excluded.push_back(files[i]);
    } else {
      todo.push_back(i);
    }
  }
  rep.verified_after_strip = rep.excluded.size();
  rep.eval_set_size = todo.size();
  rep.rows.resize(todo.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr transport;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= todo.size()) return;
      const std::size_t i = todo[k];
      EvalRow& row = rep.rows[k];
      row.path = files[i];
      const auto f0 = std::chrono::steady_clock::now();
      try {
        auto res = annotate(SourceText{texts[i], files[i]}, backend, verifier, options.search,
                            files[i]);
        row.iterations = res.trace.iterations.size();
        row.final_status = std::string(to_string(res.trace.final_status));
        row.verifier_calls = res.trace.verifier_calls;
        row.llm_calls = res.trace.llm_calls;
        if (options.annotated_dir) {
          write_text(fs::path(*options.annotated_dir) / files[i], res.text.content);
        }
        row.trace = std::move(res.trace);
      } catch (const TransportError&) {
        std::lock_guard lk(mu);
        if (!transport) transport = std::current_exception();
        next = todo.size();
        return;
      } catch (const Error& e) {
        row.final_status = "error";
        row.error = e.what();
      }
      row.wall_s = seconds_since(f0);
    }
  };
  const std::size_t n = std::min<std::size_t>(options.jobs, std::max<std::size_t>(todo.size(), 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
  }
  if (transport) std::rethrow_exception(transport);

  for (const auto& row : rep.rows) {
    rep.successes += row.final_status == to_string(SearchStatus::FullyVerified);
  }
  rep.success_rate =
      rep.eval_set_size == 0 ? 0.0 : static_cast<double>(rep.successes) / rep.eval_set_size;
  const auto& v = verifier.config();
  const auto& p = options.search.proposer;
  rep.config = {{"backend", backend.describe()},
                {"k", p.k},
                {"temperature", p.temperature},
                {"max_tokens", p.max_tokens},
                {"prompt_prefix_only", p.prompt_prefix_only},
                {"max_iterations", options.search.max_iterations},
                {"strict_progress", options.search.strict_progress},
                {"jobs", options.jobs},
                {"verifier",
                 {{"executable", v.executable},
                  {"version", v.version},
                  {"time_limit_s", v.time_limit_s},
                  {"extra_args", v.extra_args},
                  {"max_workers", v.max_workers}}}};
  rep.wall_s = seconds_since(t0);
  return rep;
}

json to_json(const EvalReport& r, bool canonical) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json j = {{"path", row.path},
              {"iterations", row.iterations},
              {"final_status", row.final_status},
              {"verifier_calls", row.verifier_calls},
              {"llm_calls", row.llm_calls}};
    if (!canonical) j["wall_s"] = row.wall_s;
    if (!row.error.empty()) j["error"] = row.error;
    rows.push_back(std::move(j));
  }
  json config = r.config;
  if (canonical && config.contains("verifier")) {
    config["verifier"].erase("max_workers");
    config.erase("jobs");
  }
  json j = {{"schema_version", kReportSchemaVersion},
            {"total_test_files", r.total_test_files},
            {"verified_after_strip", r.verified_after_strip},
            {"eval_set_size", r.eval_set_size},
            {"successes", r.successes},
            {"success_rate", r.success_rate},
            {"excluded", r.excluded},
            {"rows", rows},
            {"config", config}};
  if (!canonical) j["wall_s"] = r.wall_s;
  return j;
}

std::string render_table(const EvalReport& r) {
  std::size_t w = 4;
  for (const auto& row : r.rows) w = std::max(w, row.path.size());
  std::ostringstream out;
  char buf[64];
  out << std::left;
  out.width(static_cast<std::streamsize>(w));
  out << "file" << "  iters  status                calls   wall_s\n";
  for (const auto& row : r.rows) {
    out.width(static_cast<std::streamsize>(w));
    out << row.path;
    std::snprintf(buf, sizeof buf, "  %5zu  %-20s  %5zu  %7.2f\n", row.iterations,
                  row.final_status.c_str(), row.verifier_calls, row.wall_s);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "%.3f", r.success_rate);
  out << "\n"
      << r.total_test_files << " files, " << r.verified_after_strip
      << " verify without annotations, " << r.eval_set_size << " evaluated, " << r.successes
      << " verified: success rate " << buf << "\n";
  return out.str();
}

}  // namespace vannot
