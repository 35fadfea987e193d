// Copyright (c) 2026, vannot authors
// SPDX-License-Identifier: Apache-2.0
//
// vannot: annotate, strip, eval, extract and synthesize.
//
// Settings come from flags, then VANNOT_* environment variables (DAFNY_EXE
// is accepted for the verifier), then an INI file given by --config or
// VANNOT_CONFIG. API keys are only ever read from the environment variable
// named by api_key_env.
//
// Exit codes: 0 ok, 1 finished but not verified (annotate) or revalidation
// mismatches (synthesize), 2 usage, config or input error, 3 verifier not
// found, 4 transport error, 5 internal error, 6 bad checkpoint.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "vannot/dataset.hpp"
#include "vannot/errors.hpp"
#include "vannot/eval.hpp"
#include "vannot/proposer.hpp"
#include "vannot/search.hpp"
#include "vannot/synth.hpp"
#include "vannot/verifier.hpp"

#ifndef VANNOT_PROMPTS_DIR
#define VANNOT_PROMPTS_DIR "prompts"
#endif

namespace {

using namespace vannot;
using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

struct Key {
  const char* name;
  const char* dflt;
  const char* help;
  bool flag;  // boolean switch
};

constexpr Key kKeys[] = {
    {"dafny", "dafny", "verifier executable", false},
    {"time_limit", "30", "verification time limit per run, seconds", false},
    {"max_workers", "1", "concurrent verifier processes", false},
    {"verifier_args", "", "extra verifier arguments, space separated", false},
    {"verifier_version", "", "verifier version recorded in reports (probed when empty)", false},
    {"backend", "", "completion backend: scripted or http", false},
    {"scripted", "", "scripted completion file", false},
    {"endpoint", "", "chat completions URL", false},
    {"model", "", "model name sent to the endpoint", false},
    {"api_key_env", "OPENAI_API_KEY", "environment variable holding the API key", false},
    {"k", "5", "completions sampled per iteration", false},
    {"temperature", "0.8", "sampling temperature", false},
    {"max_tokens", "128", "completion length cap", false},
    {"max_iterations", "5", "search iterations per file", false},
    {"jobs", "1", "files searched concurrently in eval", false},
    {"prompts", VANNOT_PROMPTS_DIR, "directory of editor prompt templates", false},
    {"strict_progress", "false", "accept only insertions that remove an error", true},
    {"prompt_prefix_only", "false", "prompt with the program up to the target method", true},
};

const Key* find_key(const std::string& name) {
  for (const auto& k : kKeys) {
    if (name == k.name) return &k;
  }
  return nullptr;
}

std::string dashed(std::string s) {
  for (auto& c : s) {
    if (c == '_') c = '-';
  }
  return s;
}

std::string env_name(const std::string& key) {
  std::string s = "VANNOT_";
  for (char c : key) s += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

// Shared options of every subcommand.
struct Common {
  std::string config;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> switches;
  std::vector<std::string> verifier_args;
  std::vector<std::pair<std::string, CLI::Option*>> options;
  CLI::Option* verifier_arg_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "INI settings file");
    for (const auto& k : kKeys) {
      const std::string flag = "--" + dashed(k.name);
      CLI::Option* o = k.flag ? app->add_flag(flag, switches[k.name], k.help)
                              : app->add_option(flag, values[k.name], k.help);
      options.emplace_back(k.name, o);
    }
    verifier_arg_opt =
        app->add_option("--verifier-arg", verifier_args, "extra verifier argument (repeatable)")
            ->allow_extra_args(false);
  }
};

class Settings {
 public:
  explicit Settings(const Common& c) {
    for (const auto& k : kKeys) put(k.name, k.dflt, "default");
    std::string cfg = c.config;
    if (cfg.empty()) {
      if (const char* e = std::getenv("VANNOT_CONFIG")) cfg = e;
    }
    if (!cfg.empty()) load_file(cfg);
    for (const auto& k : kKeys) {
      if (const char* e = std::getenv(env_name(k.name).c_str())) {
        put(k.name, e, "env " + env_name(k.name));
      } else if (std::string(k.name) == "dafny") {
        if (const char* d = std::getenv("DAFNY_EXE")) put(k.name, d, "env DAFNY_EXE");
      }
    }
    for (const auto& [name, opt] : c.options) {
      if (opt->count() == 0) continue;
      const Key* k = find_key(name);
      put(name, k->flag ? "true" : c.values.at(name), "flag");
    }
    if (c.verifier_arg_opt->count() > 0) {
      std::string joined;
      for (const auto& a : c.verifier_args) joined += (joined.empty() ? "" : " ") + a;
      put("verifier_args", joined, "flag");
    }
  }

  const std::string& str(const std::string& key) const { return values_.at(key); }

  int integer(const std::string& key) const {
    try {
      std::size_t used = 0;
      const int v = std::stoi(str(key), &used);
      if (used == str(key).size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + " must be an integer, got '" + str(key) + "' (" + sources_.at(key) + ")");
  }

  double real(const std::string& key) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(str(key), &used);
      if (used == str(key).size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + " must be a number, got '" + str(key) + "' (" + sources_.at(key) + ")");
  }

  bool boolean(const std::string& key) const {
    const auto& v = str(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off" || v.empty()) return false;
    throw ConfigError(key + " must be true or false, got '" + v + "' (" + sources_.at(key) + ")");
  }

  std::vector<std::string> words(const std::string& key) const {
    std::istringstream in(str(key));
    std::vector<std::string> out;
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
  }

  json echo() const {
    json j = json::object();
    for (const auto& [k, v] : values_) j[k] = {{"value", v}, {"source", sources_.at(k)}};
    return j;
  }

 private:
  void put(const std::string& key, const std::string& value, const std::string& source) {
    values_[key] = value;
    sources_[key] = source;
  }

  void load_file(const std::string& path) {
    std::vector<CLI::ConfigItem> items;
    try {
      items = CLI::ConfigINI().from_file(path);
    } catch (const CLI::Error& e) {
      throw ConfigError("cannot read settings file " + path + ": " + e.what());
    }
    for (const auto& item : items) {
      if (item.name == "++" || item.name == "--") continue;  // section markers
      if (!find_key(item.name)) {
        throw ConfigError("unknown setting '" + item.name + "' in " + path);
      }
      std::string v;
      for (const auto& in : item.inputs) v += (v.empty() ? "" : " ") + in;
      put(item.name, v, "file " + path);
    }
  }

  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> sources_;
};

std::unique_ptr<VerifierHarness> make_verifier(const Settings& s) {
  VerifierConfig vc;
  vc.executable = s.str("dafny");
  vc.time_limit_s = s.real("time_limit");
  vc.max_workers = s.integer("max_workers");
  vc.extra_args = s.words("verifier_args");
  vc.validate();
  auto h = std::make_unique<VerifierHarness>(vc);
  if (!h->resolved_executable()) {
    throw VerifierMissingError("verifier '" + vc.executable +
                               "' not found; set --dafny, DAFNY_EXE or the dafny setting");
  }
  std::string version = s.str("verifier_version");
  if (version.empty()) version = h->probe_version();
  if (version.empty()) version = "unknown";
  vc.version = version;
  return std::make_unique<VerifierHarness>(vc);
}

std::unique_ptr<CompletionBackend> make_backend(const Settings& s) {
  std::string kind = s.str("backend");
  if (kind.empty()) kind = s.str("scripted").empty() ? "http" : "scripted";
  if (kind == "scripted") {
    if (s.str("scripted").empty()) throw ConfigError("the scripted backend needs --scripted FILE");
    return ScriptedBackend::from_file(s.str("scripted"));
  }
  if (kind != "http") throw ConfigError("unknown backend '" + kind + "'");
  HttpBackendConfig hc;
  hc.endpoint = s.str("endpoint");
  hc.model = s.str("model");
  hc.api_key_env = s.str("api_key_env");
  if (hc.endpoint.empty() || hc.model.empty()) {
    throw ConfigError("the http backend needs --endpoint and --model");
  }
  return std::make_unique<HttpBackend>(hc);
}

// Builds the real backend on first use, so runs that never sample need no
// backend settings.
class LazyBackend final : public CompletionBackend {
 public:
  explicit LazyBackend(const Settings& s) : settings_(s) {}
  std::vector<std::string> complete(const CompletionRequest& r) override { return get().complete(r); }
  std::string describe() const override {
    return inner_ ? inner_->describe() : std::string("unused");
  }

 private:
  CompletionBackend& get() {
    std::call_once(once_, [&] { inner_ = make_backend(settings_); });
    return *inner_;
  }
  const Settings& settings_;
  std::once_flag once_;
  std::unique_ptr<CompletionBackend> inner_;
};

SearchConfig search_config(const Settings& s) {
  SearchConfig c;
  c.max_iterations = s.integer("max_iterations");
  c.strict_progress = s.boolean("strict_progress");
  c.proposer.k = s.integer("k");
  c.proposer.temperature = s.real("temperature");
  c.proposer.max_tokens = s.integer("max_tokens");
  c.proposer.prompt_prefix_only = s.boolean("prompt_prefix_only");
  c.validate();
  return c;
}

std::string read_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  const fs::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  out << text;
  if (!out.flush()) throw InputError("write failed for " + path);
}

std::string without_dfy(const std::string& path) {
  const std::string ext = ".dfy";
  if (path.size() > ext.size() && path.compare(path.size() - ext.size(), ext.size(), ext) == 0) {
    return path.substr(0, path.size() - ext.size());
  }
  return path;
}

// ---------------------------------------------------------------------------

struct AnnotateArgs {
  std::string file, out, trace, method, channel;
};

int cmd_annotate(const Settings& s, const AnnotateArgs& a) {
  auto verifier = make_verifier(s);
  LazyBackend backend(s);
  auto cfg = search_config(s);
  if (!a.method.empty()) cfg.target_method = a.method;
  const SourceText src{read_input(a.file), a.file};
  const std::string channel =
      a.channel.empty() ? fs::path(a.file).filename().string() : a.channel;
  const auto res = annotate(src, backend, *verifier, cfg, channel);
  const auto& t = res.trace;
  if (t.iterations.empty() && t.final_status == SearchStatus::FullyVerified) {
    std::cout << a.file << ": already verified\n";
    return 0;
  }
  const std::string out = a.out.empty() ? without_dfy(a.file) + ".annotated.dfy" : a.out;
  const std::string trace = a.trace.empty() ? without_dfy(out) + ".trace.json" : a.trace;
  write_output(out, res.text.content);
  json tj = to_json(t);
  tj["settings"] = s.echo();
  write_output(trace, tj.dump(2) + "\n");
  std::size_t accepted = 0;
  for (const auto& it : t.iterations) accepted += it.accepted.has_value();
  std::cout << a.file << ": " << to_string(t.final_status) << " after " << t.iterations.size()
            << " iteration(s), " << accepted << " annotation(s) added, " << t.verifier_calls
            << " verifier call(s), " << t.llm_calls << " LLM call(s)\n";
  if (!t.stall_reason.empty()) std::cout << "  stalled: " << t.stall_reason << "\n";
  std::cout << "  wrote " << out << " and " << trace << "\n";
  return t.final_status == SearchStatus::FullyVerified ? 0 : 1;
}

struct StripArgs {
  std::string corpus, out, report, oracle;
  std::uint64_t seed = 0;
  bool no_verify = false;
};

int cmd_strip(const Settings& s, const StripArgs& a) {
  std::unique_ptr<VerifierHarness> verifier;
  if (!a.no_verify) verifier = make_verifier(s);
  const auto rep = strip_corpus(a.corpus, a.out, verifier.get());
  json j = to_json(rep);
  j["corpus"] = a.corpus;
  if (verifier) j["verifier_version"] = verifier->config().version;
  j["settings"] = s.echo();
  const std::string report = a.report.empty() ? (fs::path(a.out) / "strip_report.json").string()
                                              : a.report;
  write_output(report, j.dump(2) + "\n");
  for (const auto& row : rep.rows) {
    std::cout << row.path << "  " << row.annotations << " annotation(s)";
    if (row.stripped_status) {
      std::cout << (row.verifies_after_strip ? "  verifies after strip" : "  fails after strip");
    }
    if (row.original_flagged) {
      std::cout << "  [original does not verify: " << to_string(*row.original_status) << "]";
    }
    std::cout << "\n";
  }
  std::cout << rep.rows.size() << " file(s), " << rep.total_annotations
            << " annotation(s) stripped; report in " << report << "\n";
  if (!a.oracle.empty()) {
    write_output(a.oracle, oracle_script(a.corpus, a.seed).dump(1) + "\n");
    std::cout << "oracle script in " << a.oracle << "\n";
  }
  return 0;
}

struct EvalArgs {
  std::string dir, report, annotated_dir, trace_dir;
};

int cmd_eval(const Settings& s, const EvalArgs& a) {
  auto verifier = make_verifier(s);
  LazyBackend backend(s);
  EvalOptions opt;
  opt.search = search_config(s);
  opt.jobs = s.integer("jobs");
  if (!a.annotated_dir.empty()) opt.annotated_dir = a.annotated_dir;
  const auto rep = run_eval(a.dir, backend, *verifier, opt);
  json j = to_json(rep);
  j["stripped_dir"] = a.dir;
  j["settings"] = s.echo();
  write_output(a.report, j.dump(2) + "\n");
  if (!a.trace_dir.empty()) {
    for (const auto& row : rep.rows) {
      if (row.trace) {
        write_output((fs::path(a.trace_dir) / (without_dfy(row.path) + ".trace.json")).string(),
                     to_json(*row.trace).dump(2) + "\n");
      }
    }
  }
  std::cout << render_table(rep) << "report in " << a.report << "\n";
  return 0;
}

struct ExtractArgs {
  std::vector<std::string> inputs;
  std::string out, mode = "full_program", timestamp;
  bool filter = false;
  std::optional<std::size_t> split_train;
  std::optional<std::uint64_t> seed;
};

PromptMode prompt_mode(const std::string& m) {
  if (m == "full_program") return PromptMode::FullProgram;
  if (m == "method_prefix") return PromptMode::MethodPrefix;
  throw ConfigError("prompt mode must be full_program or method_prefix");
}

void report_export(const std::string& path, const DatasetManifest& m) {
  std::cout << "wrote " << m.examples << " example(s) (" << m.invariants << " invariant, "
            << m.asserts << " assert, " << m.decreases << " decreases; " << m.unique_completions
            << " unique) to " << path << "\n";
}

int cmd_extract(const Settings& s, const ExtractArgs& a) {
  std::vector<std::string> files;
  for (const auto& in : a.inputs) {
    std::error_code ec;
    if (fs::is_directory(in, ec)) {
      for (const auto& rel : list_dafny_files(in)) files.push_back((fs::path(in) / rel).string());
    } else {
      files.push_back(in);
    }
  }
  CorpusOptions opt;
  opt.filter_verified = a.filter;
  opt.prompt_mode = prompt_mode(a.mode);
  if (!a.timestamp.empty()) opt.timestamp = a.timestamp;
  std::unique_ptr<VerifierHarness> verifier;
  if (a.filter) verifier = make_verifier(s);
  auto emit = [&](const std::vector<std::string>& subset, const std::string& path) {
    const auto res = extract_corpus(subset, opt, verifier.get());
    export_jsonl(res.examples, res.manifest, path);
    report_export(path, res.manifest);
    for (const auto& sk : res.manifest.skipped) {
      std::cout << "  skipped " << sk.path << ": " << sk.reason << "\n";
    }
  };
  if (a.split_train) {
    const auto split = split_files(files, *a.split_train, a.seed);
    const std::string stem = without_dfy(a.out.size() > 6 && a.out.ends_with(".jsonl")
                                             ? a.out.substr(0, a.out.size() - 6)
                                             : a.out);
    emit(split.train, stem + ".train.jsonl");
    emit(split.test, stem + ".test.jsonl");
  } else {
    emit(files, a.out);
  }
  return 0;
}

struct SynthArgs {
  std::string schedule, out, export_path, mode = "full_program";
  std::optional<std::size_t> stop_after;
  bool revalidate = false;
};

int cmd_synthesize(const Settings& s, const SynthArgs& a) {
  const auto schedule = ScheduleConfig::from_json([&] {
    try {
      return json::parse(read_input(a.schedule));
    } catch (const json::parse_error& e) {
      throw ConfigError("schedule " + a.schedule + " is not valid JSON: " + e.what());
    }
  }());
  const auto templates = PromptTemplates::load(s.str("prompts"));
  auto verifier = make_verifier(s);
  LazyBackend backend(s);
  const auto rep = run_pipeline(schedule, templates, backend, *verifier, {a.out, a.stop_after});
  const auto g = EditGraph::load(a.out);
  std::map<std::string, std::size_t> by_type;
  std::size_t verified = 0;
  for (const auto& n : g.nodes()) {
    ++by_type[std::string(to_string(n.type))];
    if (n.verification && n.verification->status == VerificationStatus::FullyVerified) ++verified;
  }
  std::cout << "graph in " << a.out << ": " << g.nodes().size() << " node(s) (" << by_type["idea"]
            << " idea, " << by_type["program"] << " program, " << verified << " fully verified), "
            << g.decisions().size() << " decision(s), " << g.state().llm_calls << " LLM call(s)\n";
  std::cout << (rep.finished ? "finished: " : "paused: ") << rep.stop_reason << "\n";
  for (const auto& e : g.state().errors) std::cout << "  " << e << "\n";
  int code = 0;
  if (a.revalidate) {
    verifier->clear_cache();
    const auto rv = revalidate(g, a.out, *verifier, schedule);
    std::cout << "revalidated " << rv.checked << " decision(s): " << rv.discrepancies.size()
              << " discrepancy(ies)\n";
    for (const auto& d : rv.discrepancies) std::cout << "  " << d << "\n";
    if (!rv.discrepancies.empty()) code = 1;
  }
  if (!a.export_path.empty()) {
    auto ds = export_dataset(g, prompt_mode(a.mode));
    ds.manifest.verifier_version = verifier->config().version;
    export_jsonl(ds.examples, ds.manifest, a.export_path);
    report_export(a.export_path, ds.manifest);
  }
  return code;
}

int exit_code(const Error& e) {
  switch (e.category()) {
    case ErrorCategory::Config:
    case ErrorCategory::Input: return 2;
    case ErrorCategory::VerifierMissing: return 3;
    case ErrorCategory::Transport: return 4;
    case ErrorCategory::Checkpoint: return 6;
    case ErrorCategory::Internal: return 5;
  }
  return 5;
}

std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return "config error";
    case ErrorCategory::Input: return "input error";
    case ErrorCategory::VerifierMissing: return "verifier missing";
    case ErrorCategory::Transport: return "transport error";
    case ErrorCategory::Checkpoint: return "checkpoint error";
    case ErrorCategory::Internal: return "internal error";
  }
  return "error";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Verifier-guided annotation search and training data tools for Dafny"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("vannot ") + kVersion);

  Common c_annotate, c_strip, c_eval, c_extract, c_synth;

  AnnotateArgs aa;
  auto* annotate_cmd = app.add_subcommand("annotate", "add annotations to one file until it verifies");
  annotate_cmd->add_option("file", aa.file, "Dafny file")->required();
  annotate_cmd->add_option("--out", aa.out, "annotated output (default FILE.annotated.dfy)");
  annotate_cmd->add_option("--trace", aa.trace, "search trace JSON");
  annotate_cmd->add_option("--method", aa.method, "only annotate this method");
  annotate_cmd->add_option("--channel", aa.channel,
                           "scripted backend channel (default the file name)");
  c_annotate.attach(annotate_cmd);

  StripArgs sa;
  auto* strip_cmd = app.add_subcommand("strip", "remove every annotation from a corpus");
  strip_cmd->add_option("corpus", sa.corpus, "corpus directory")->required();
  strip_cmd->add_option("out", sa.out, "output directory")->required();
  strip_cmd->add_option("--report", sa.report, "report JSON (default OUT/strip_report.json)");
  strip_cmd->add_option("--oracle-script", sa.oracle,
                        "write a scripted backend replaying the stripped annotations");
  strip_cmd->add_option("--seed", sa.seed, "shuffle seed for the oracle script");
  strip_cmd->add_flag("--no-verify", sa.no_verify, "skip verifying originals and stripped copies");
  c_strip.attach(strip_cmd);

  EvalArgs ea;
  ea.report = "eval_report.json";
  auto* eval_cmd = app.add_subcommand("eval", "annotate every stripped file that fails and report");
  eval_cmd->add_option("stripped", ea.dir, "stripped corpus directory")->required();
  eval_cmd->add_option("--report", ea.report, "report JSON")->capture_default_str();
  eval_cmd->add_option("--annotated-dir", ea.annotated_dir, "write annotated files here");
  eval_cmd->add_option("--trace-dir", ea.trace_dir, "write per-file traces here");
  c_eval.attach(eval_cmd);

  ExtractArgs xa;
  auto* extract_cmd = app.add_subcommand("extract", "build prompt/completion pairs from a corpus");
  extract_cmd->add_option("inputs", xa.inputs, "Dafny files or directories")->required();
  extract_cmd->add_option("--out", xa.out, "JSONL output")->required();
  extract_cmd->add_flag("--filter-verified", xa.filter, "keep only files that fully verify");
  extract_cmd->add_option("--prompt-mode", xa.mode, "full_program or method_prefix")
      ->capture_default_str();
  extract_cmd->add_option("--timestamp", xa.timestamp, "manifest timestamp (default now)");
  extract_cmd->add_option("--split-train", xa.split_train,
                          "put this many files in OUT.train.jsonl, the rest in OUT.test.jsonl");
  extract_cmd->add_option("--split-seed", xa.seed, "shuffle files before splitting");
  c_extract.attach(extract_cmd);

  SynthArgs ya;
  auto* synth_cmd = app.add_subcommand("synthesize", "grow an edit graph of generated programs");
  synth_cmd->add_option("--schedule", ya.schedule, "schedule JSON")->required();
  synth_cmd->add_option("--out", ya.out, "checkpoint directory (resumed when present)")->required();
  synth_cmd->add_option("--stop-after", ya.stop_after, "pause after this many editor invocations");
  synth_cmd->add_option("--export", ya.export_path, "write the deduplicated dataset as JSONL");
  synth_cmd->add_option("--prompt-mode", ya.mode, "full_program or method_prefix")
      ->capture_default_str();
  synth_cmd->add_flag("--revalidate", ya.revalidate, "re-check every keep/drop decision");
  c_synth.attach(synth_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (annotate_cmd->parsed()) return cmd_annotate(Settings(c_annotate), aa);
    if (strip_cmd->parsed()) return cmd_strip(Settings(c_strip), sa);
    if (eval_cmd->parsed()) return cmd_eval(Settings(c_eval), ea);
    if (extract_cmd->parsed()) return cmd_extract(Settings(c_extract), xa);
    if (synth_cmd->parsed()) return cmd_synthesize(Settings(c_synth), ya);
  } catch (const Error& e) {
    std::cerr << "vannot: " << category_name(e.category()) << ": " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "vannot: internal error: " << e.what() << "\n";
    return 5;
  }
  return 5;
}
