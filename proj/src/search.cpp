// Copyright (c) 2026, vannot authors
// SPDX-License-Identifier: Apache-2.0

#include "vannot/search.hpp"

#include <algorithm>
#include <chrono>
#include <set>

namespace vannot {

using nlohmann::json;

std::string_view to_string(SearchStatus status) {
  switch (status) {
    case SearchStatus::FullyVerified: return "FullyVerified";
    case SearchStatus::Exhausted: return "Exhausted";
    case SearchStatus::StalledNoAcceptance: return "StalledNoAcceptance";
  }
  return "Exhausted";
}

void SearchConfig::validate() const {
  if (max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
  proposer.validate();
}

json to_json(const VerificationOutcome& o) {
  json diags = json::array();
  for (const auto& d : o.diagnostics) {
    json rel = json::array();
    for (const auto& r : d.related) {
      rel.push_back({{"line", r.line}, {"column", r.column ? json(*r.column) : json()},
                     {"message", r.message}});
    }
    diags.push_back({{"line", d.line},
                     {"column", d.column ? json(*d.column) : json()},
                     {"severity", d.severity == Severity::Error ? "error" : "warning"},
                     {"message", d.message},
                     {"related", rel}});
  }
  const auto e = o.errors();
  json j = {{"status", to_string(o.status)}, {"errors", e ? json(*e) : json()},
            {"diagnostics", diags}};
  if (!o.detail.empty()) j["detail"] = o.detail;
  return j;
}

json to_json(const InsertionPoint& p) {
  return {{"kind", p.kind == InsertionKind::LoopSpec ? "loop_spec" : "after_statement"},
          {"method", p.method},
          {"target", p.target},
          {"offset", p.offset}};
}

namespace {

json config_json(const SearchConfig& c, const VerifierConfig& v) {
  return {{"max_iterations", c.max_iterations},
          {"strict_progress", c.strict_progress},
          {"target_method", c.target_method ? json(*c.target_method) : json()},
          {"k", c.proposer.k},
          {"temperature", c.proposer.temperature},
          {"max_tokens", c.proposer.max_tokens},
          {"prompt_prefix_only", c.proposer.prompt_prefix_only},
          {"prompt_template_version", kPromptTemplateVersion},
          {"verifier",
           {{"executable", v.executable},
            {"time_limit_s", v.time_limit_s},
            {"extra_args", v.extra_args},
            {"version", v.version}}}};
}

json count_or_null(int n) { return n < 0 ? json() : json(n); }

}  // namespace

json to_json(const SearchTrace& t, bool canonical) {
  json its = json::array();
  json timings = json::array();
  for (const auto& it : t.iterations) {
    json acc;
    if (it.accepted) {
      const auto& a = *it.accepted;
      acc = {{"kind", to_string(a.annotation.kind)},
             {"text", a.annotation.text},
             {"method", a.method},
             {"line", a.line},
             {"point", to_json(a.point)},
             {"before_errors", count_or_null(a.before_errors)},
             {"after_errors", a.after_errors}};
    }
    its.push_back({{"proposals", to_json(it.proposals)},
                   {"attempts", it.attempts},
                   {"skipped_duplicates", it.skipped_duplicates},
                   {"errors_before", count_or_null(it.errors_before)},
                   {"accepted", acc}});
    timings.push_back(it.wall_s);
  }
  json j = {{"channel", t.channel},
            {"config", config_json(t.config, t.verifier)},
            {"baseline", to_json(t.baseline)},
            {"iterations", its},
            {"final_status", to_string(t.final_status)},
            {"final_outcome", to_json(t.final_outcome)},
            {"verifier_calls", t.verifier_calls},
            {"llm_calls", t.llm_calls}};
  if (!t.stall_reason.empty()) j["stall_reason"] = t.stall_reason;
  if (!canonical) {
    j["runtime"] = {{"wall_s", t.wall_s},
                    {"iteration_wall_s", timings},
                    {"max_workers", t.verifier.max_workers},
                    {"baseline_duration_s", t.baseline.duration_s}};
  }
  return j;
}

std::vector<std::size_t> target_methods(const ParsedUnit& unit, const VerificationOutcome& outcome,
                                        const std::optional<std::string>& only) {
  const auto& s = unit.source.content;
  std::vector<std::size_t> all, failing;
  for (std::size_t m = 0; m < unit.methods.size(); ++m) {
    const auto& mi = unit.methods[m];
    if (!mi.statement_body || !mi.body) continue;
    if (only && mi.name != *only) continue;
    all.push_back(m);
    const std::size_t first = line_of(s, mi.span.begin);
    const std::size_t last = line_of(s, mi.span.end == 0 ? 0 : mi.span.end - 1);
    for (const auto& d : outcome.diagnostics) {
      if (d.severity == Severity::Error && d.line >= first && d.line <= last) {
        failing.push_back(m);
        break;
      }
    }
  }
  return failing.empty() ? all : failing;
}

namespace {

bool already_at_site(const ParsedUnit& unit, const InsertionPoint& p, const Annotation& a) {
  for (const auto& e : unit.annotations) {
    if (e.annotation.kind != a.kind || e.annotation.normalized != a.normalized) continue;
    if (p.kind == InsertionKind::LoopSpec && e.loop == p.target) return true;
    if (p.kind == InsertionKind::AfterStatement && !e.loop && e.after_statement == p.target) {
      return true;
    }
  }
  return false;
}

}  // namespace

StepResult greedy_step(const SourceText& program, const VerificationOutcome& before,
                       const ProposalSet& proposals, VerifierHarness& verifier,
                       const SearchConfig& config) {
  StepResult r;
  r.text = program;
  r.outcome = before;
  if (proposals.candidates.empty()) return r;
  const ParsedUnit unit = parse(program);
  const auto methods = target_methods(unit, before, config.target_method);

  struct Pair {
    std::size_t candidate;
    InsertionPoint point;
  };
  std::vector<Pair> grid;
  std::vector<std::string> texts;
  for (std::size_t c = 0; c < proposals.candidates.size(); ++c) {
    const auto& cand = proposals.candidates[c];
    std::vector<InsertionPoint> points;
    for (auto m : methods) {
      auto ps = enumerate_insertion_points(unit, m, cand.kind);
      points.insert(points.end(), ps.begin(), ps.end());
    }
    std::stable_sort(points.begin(), points.end(),
                     [](const auto& a, const auto& b) { return a.offset < b.offset; });
    for (auto& p : points) {
      if (already_at_site(unit, p, cand)) {
        ++r.skipped_duplicates;
        continue;
      }
      texts.push_back(insert_annotation(program, p, cand).content);
      grid.push_back({c, std::move(p)});
    }
  }
  r.attempts = grid.size();
  const auto outcomes = verifier.verify_batch(texts);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::size_t line = inserted_line(program, grid[i].point);
    if (!annotation_is_accepted(before, outcomes[i], line, line, config.strict_progress)) continue;
    AcceptedEdit e;
    e.annotation = proposals.candidates[grid[i].candidate];
    e.point = grid[i].point;
    e.method = unit.methods[grid[i].point.method].name;
    e.line = line;
    e.before_errors = before.errors().value_or(-1);
    e.after_errors = *outcomes[i].errors();
    r.edit = std::move(e);
    r.text = SourceText{texts[i], program.path};
    r.outcome = outcomes[i];
    break;
  }
  return r;
}

SearchResult annotate(const SourceText& program, CompletionBackend& backend,
                      VerifierHarness& verifier, const SearchConfig& config,
                      const std::string& channel) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [](auto since) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
  };
  SearchResult res;
  auto& trace = res.trace;
  trace.channel = channel;
  trace.config = config;
  trace.verifier = verifier.config();
  res.text = program;

  VerificationOutcome outcome = verifier.verify(program.content);
  trace.verifier_calls = 1;
  trace.baseline = outcome;
  if (outcome.status == VerificationStatus::ToolFailure ||
      outcome.status == VerificationStatus::ParseOrResolutionError) {
    std::string why = outcome.detail;
    if (why.empty() && !outcome.diagnostics.empty()) {
      why = "line " + std::to_string(outcome.diagnostics[0].line) + ": " +
            outcome.diagnostics[0].message;
    }
    throw SearchError("cannot establish a baseline (" + std::string(to_string(outcome.status)) +
                      (why.empty() ? ")" : "): " + why));
  }
  if (config.target_method && !parse(program).find_method(*config.target_method)) {
    throw SearchError("no callable named '" + *config.target_method + "'");
  }

  trace.final_status = SearchStatus::Exhausted;
  if (outcome.status == VerificationStatus::FullyVerified) {
    trace.final_status = SearchStatus::FullyVerified;
  } else {
    for (int i = 0; i < config.max_iterations; ++i) {
      const auto ti = std::chrono::steady_clock::now();
      const ParsedUnit unit = parse(res.text);
      std::string shown = res.text.content;
      if (config.proposer.prompt_prefix_only) {
        const auto targets = target_methods(unit, outcome, config.target_method);
        if (!targets.empty()) shown = program_prefix(unit, targets.front());
      }
      IterationRecord rec;
      try {
        rec.proposals = propose(backend, channel, render_prompt(shown).text, config.proposer);
        ++trace.llm_calls;
      } catch (const ScriptExhausted& e) {
        trace.final_status = SearchStatus::StalledNoAcceptance;
        trace.stall_reason = e.what();
        break;
      }
      rec.errors_before = outcome.errors().value_or(-1);
      auto step = greedy_step(res.text, outcome, rec.proposals, verifier, config);
      trace.verifier_calls += step.attempts;
      rec.attempts = step.attempts;
      rec.skipped_duplicates = step.skipped_duplicates;
      rec.accepted = step.edit;
      rec.wall_s = elapsed(ti);
      trace.iterations.push_back(std::move(rec));
      if (step.edit) {
        res.text = std::move(step.text);
        outcome = std::move(step.outcome);
        if (outcome.status == VerificationStatus::FullyVerified) {
          trace.final_status = SearchStatus::FullyVerified;
          break;
        }
      }
    }
  }
  trace.final_outcome = outcome;
  trace.wall_s = elapsed(t0);
  return res;
}

}  // namespace vannot
