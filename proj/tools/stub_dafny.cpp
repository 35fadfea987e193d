// Copyright (c) 2026, vannot authors
// SPDX-License-Identifier: Apache-2.0
//
// Test double for the Dafny command line. It answers `verify` with output in
// the Dafny 4 format, judging annotations against a knowledge base built by
// `kb-gen` from fully annotated reference programs:
//
//   stub_dafny kb-gen --out kb.json ref1.dfy ref2.dfy ...
//   stub_dafny verify prog.dfy --verification-time-limit 30 --kb=kb.json
//
// A method is identified by name plus a hash of its annotation-free text.
// An annotation is provable when the reference method carries the same
// normalized clause at the same anchor (loop ordinal, or ordinal of the
// statement it follows). Every reference annotation is required; a missing
// one costs one error. Methods without a reference verify when they carry no
// annotations. `{:stub_delay_ms N}` sleeps N ms (reported as a time out when
// that exceeds the limit); `{:stub_hang}` sleeps until killed.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "vannot/hash.hpp"
#include "vannot/text_model.hpp"

using nlohmann::json;
using namespace vannot;

namespace {

constexpr const char* kVersion = "4.8.0+stub";

using Fact = std::tuple<std::string, std::string, long>;  // kind, normalized text, anchor

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

long anchor_of(const ParsedUnit& u, const AnnotationInstance& a) {
  if (a.loop) return static_cast<long>(u.loop_ordinal(*a.loop));
  if (a.after_statement) return static_cast<long>(u.statement_ordinal(*a.after_statement));
  return -1;
}

std::string kind_name(AnnotationKind k) { return std::string(to_string(k)); }

// Keys for every method, index-aligned with the parse of the given text.
std::vector<std::string> method_keys(const ParsedUnit& unit) {
  const auto stripped = strip_all_annotations(unit.source);
  const auto su = parse(stripped.text);
  std::vector<std::string> keys;
  for (std::size_t i = 0; i < unit.methods.size(); ++i) {
    std::string body;
    if (i < su.methods.size()) {
      const auto& sp = su.methods[i].span;
      body = su.source.content.substr(sp.begin, sp.size());
    }
    keys.push_back(unit.methods[i].name + "#" + sha256_hex(normalize_whitespace(body)).substr(0, 16));
  }
  return keys;
}

int kb_gen(const std::vector<std::string>& args) {
  std::string out;
  std::vector<std::string> inputs;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--out" && i + 1 < args.size()) {
      out = args[++i];
    } else {
      inputs.push_back(args[i]);
    }
  }
  if (out.empty() || inputs.empty()) {
    std::cerr << "usage: stub_dafny kb-gen --out kb.json file.dfy...\n";
    return 1;
  }
  json methods = json::object();
  for (const auto& path : inputs) {
    const auto unit = parse(SourceText{read_file(path), path});
    if (unit.malformed) {
      std::cerr << path << ": cannot parse reference program\n";
      return 1;
    }
    const auto keys = method_keys(unit);
    for (std::size_t m = 0; m < unit.methods.size(); ++m) {
      json req = json::array();
      for (const auto& a : unit.annotations) {
        if (a.method != m) continue;
        req.push_back({{"kind", kind_name(a.annotation.kind)},
                       {"text", a.annotation.normalized},
                       {"anchor", anchor_of(unit, a)}});
      }
      methods[keys[m]] = {{"name", unit.methods[m].name}, {"required", req}};
    }
  }
  std::ofstream f(out, std::ios::binary);
  f << json{{"version", 1}, {"methods", methods}}.dump(1) << "\n";
  return f ? 0 : 1;
}

struct Report {
  std::string path;
  std::vector<std::string> lines;
  void error(std::size_t line, std::size_t col, const std::string& msg) {
    lines.push_back(path + "(" + std::to_string(line) + "," + std::to_string(col) +
                    "): Error: " + msg);
  }
  void related(std::size_t line, std::size_t col, const std::string& msg) {
    lines.push_back(path + "(" + std::to_string(line) + "," + std::to_string(col) +
                    "): Related location: " + msg);
  }
};

std::size_t col_of(const std::string& s, std::size_t off) {
  std::size_t b = off;
  while (b > 0 && s[b - 1] != '\n') --b;
  return off - b + 1;
}

bool bad_expression(std::string_view e) {
  std::string t = normalize_whitespace(e);
  while (!t.empty() && t.back() == ';') t.pop_back();
  t = normalize_whitespace(t);
  if (t.empty()) return true;
  static const std::string bad_end = "+-*/%<>=&|!,.:";
  static const std::string bad_start = "*/%&|=<>,.:;)]}";
  return bad_end.find(t.back()) != std::string::npos ||
         bad_start.find(t.front()) != std::string::npos;
}

std::string after_keyword(const std::string& s, ByteSpan clause) {
  std::size_t b = clause.begin;
  while (b < clause.end && (std::isalpha(static_cast<unsigned char>(s[b])))) ++b;
  return s.substr(b, clause.end - b);
}

// Syntax errors the structural model can see.
void check_syntax(const ParsedUnit& u, Report& r) {
  const auto& s = u.source.content;
  if (u.malformed) {
    for (const auto& d : u.diagnostics) {
      static const std::regex at_line(R"(at line (\d+))");
      std::smatch m;
      std::size_t line = 1;
      if (std::regex_search(d, m, at_line)) line = std::stoul(m[1]);
      r.error(line, 1, d);
    }
    if (r.lines.empty()) r.error(1, 1, "malformed program");
    return;
  }
  for (const auto& loop : u.loops) {
    for (const auto& c : loop.spec_clauses) {
      if (bad_expression(after_keyword(s, c))) {
        r.error(line_of(s, c.begin), col_of(s, c.begin), "invalid Expression");
      }
    }
  }
  for (const auto& a : u.annotations) {
    if (a.annotation.kind != AnnotationKind::Assert) continue;
    if (bad_expression(after_keyword(s, a.clause))) {
      r.error(line_of(s, a.clause.begin), col_of(s, a.clause.begin), "invalid Expression");
    }
  }
}

// Assignments to simple names that are declared nowhere in the method.
void check_resolution(const ParsedUnit& u, Report& r) {
  const auto& s = u.source.content;
  static const std::regex assign(R"((^|[;{}])\s*([A-Za-z_][A-Za-z0-9_']*)\s*:=)");
  for (const auto& m : u.methods) {
    if (!m.body || !m.statement_body || m.inside_type) continue;
    const std::string text = s.substr(m.span.begin, m.span.size());
    const std::size_t body_off = m.body->begin - m.span.begin;
    const std::string body = text.substr(body_off);
    for (auto it = std::sregex_iterator(body.begin(), body.end(), assign);
         it != std::sregex_iterator(); ++it) {
      const std::string name = (*it)[2];
      const std::regex typed("\\b" + name + "\\s*:(?![:=])");
      const std::regex in_var("\\bvar\\s+[^;:=]*\\b" + name + "\\b");
      if (std::regex_search(text, typed) || std::regex_search(text, in_var)) continue;
      const std::size_t off = m.span.begin + body_off + static_cast<std::size_t>(it->position(2));
      r.error(line_of(s, off), col_of(s, off), "unresolved identifier: " + name);
    }
  }
}

struct Kb {
  std::map<std::string, std::vector<Fact>> methods;
};

Kb load_kb(const std::vector<std::string>& paths) {
  Kb kb;
  for (const auto& p : paths) {
    const json j = json::parse(read_file(p));
    for (const auto& [key, v] : j.at("methods").items()) {
      auto& facts = kb.methods[key];
      facts.clear();
      for (const auto& f : v.at("required")) {
        facts.emplace_back(f.at("kind").get<std::string>(), f.at("text").get<std::string>(),
                           f.at("anchor").get<long>());
      }
    }
  }
  return kb;
}

int verify(const std::vector<std::string>& args) {
  std::string file;
  double limit = 30;
  std::vector<std::string> kbs;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a == "--verification-time-limit" && i + 1 < args.size()) {
      limit = std::stod(args[++i]);
    } else if (a.rfind("--verification-time-limit:", 0) == 0) {
      limit = std::stod(a.substr(26));
    } else if (a.rfind("--kb=", 0) == 0) {
      kbs.push_back(a.substr(5));
    } else if (a.rfind("--", 0) == 0) {
      // other options are accepted and ignored
    } else if (file.empty()) {
      file = a;
    }
  }
  if (file.empty()) {
    std::cerr << "No input files were specified.\n";
    return 1;
  }
  const std::string content = read_file(file);
  Kb kb = load_kb(kbs);

  if (content.find("{:stub_hang}") != std::string::npos) {
    for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
  }
  bool timed_out = false;
  static const std::regex delay(R"(\{:stub_delay_ms\s+(\d+)\s*\})");
  std::smatch dm;
  if (std::regex_search(content, dm, delay)) {
    const double ms = std::stod(dm[1]);
    const double cap = limit * 1000.0;
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(std::min(ms, cap)));
    timed_out = ms > cap;
  }

  const ParsedUnit u = parse(SourceText{content, file});
  Report r{file, {}};
  check_syntax(u, r);
  if (!r.lines.empty()) {
    for (const auto& l : r.lines) std::cout << l << "\n";
    std::cout << r.lines.size() << " parse errors detected in " << file << "\n";
    return 2;
  }
  check_resolution(u, r);
  if (!r.lines.empty()) {
    for (const auto& l : r.lines) std::cout << l << "\n";
    std::cout << r.lines.size() << " resolution/type errors detected in " << file << "\n";
    return 2;
  }

  const auto& s = u.source.content;
  const auto keys = method_keys(u);
  int verified = 0, errors = 0, timeouts = 0;
  for (std::size_t m = 0; m < u.methods.size(); ++m) {
    const auto& mi = u.methods[m];
    if (timed_out && mi.body) {
      ++timeouts;
      r.error(line_of(s, mi.span.begin), 1,
              "Verification of '" + mi.name + "' timed out after " +
                  std::to_string(static_cast<long>(limit)) + " seconds");
      continue;
    }
    const auto it = kb.methods.find(keys[m]);
    const std::vector<Fact> none;
    const auto& required = it == kb.methods.end() ? none : it->second;
    std::set<Fact> present;
    int e = 0;
    for (const auto& a : u.annotations) {
      if (a.method != m) continue;
      Fact f{kind_name(a.annotation.kind), a.annotation.normalized, anchor_of(u, a)};
      if (std::find(required.begin(), required.end(), f) != required.end()) {
        present.insert(f);
        continue;
      }
      const std::size_t ln = line_of(s, a.clause.begin), col = col_of(s, a.clause.begin);
      switch (a.annotation.kind) {
        case AnnotationKind::Invariant:
          r.error(ln, col, "this invariant could not be proved to be maintained by the loop");
          break;
        case AnnotationKind::Assert:
          r.error(ln, col, "assertion might not hold");
          break;
        case AnnotationKind::Decreases:
          r.error(ln, col, "decreases expression might not decrease");
          break;
      }
      ++e;
    }
    for (const auto& f : required) {
      if (present.count(f)) continue;
      ++e;
      if (std::get<0>(f) == "decreases") {
        const auto loops = u.loops_of(m);
        const auto li = static_cast<std::size_t>(std::get<2>(f));
        const std::size_t off = li < loops.size() ? u.loops[loops[li]].keyword : mi.span.begin;
        r.error(line_of(s, off), col_of(s, off), "decreases expression might not decrease");
        continue;
      }
      const std::size_t close = mi.body ? mi.body->end - 1 : mi.span.begin;
      r.error(line_of(s, close), col_of(s, close),
              "a postcondition could not be proved on this return path");
      const std::string header = s.substr(mi.span.begin, (mi.body ? mi.body->begin : mi.span.end) -
                                                             mi.span.begin);
      const std::size_t ens = header.find("ensures");
      const std::size_t at = mi.span.begin + (ens == std::string::npos ? 0 : ens);
      r.related(line_of(s, at), col_of(s, at), "this is the postcondition that could not be proved");
    }
    if (e == 0) ++verified;
    errors += e;
  }
  for (const auto& l : r.lines) std::cout << l << "\n";
  std::cout << "\nDafny program verifier finished with " << verified << " verified, " << errors
            << (errors == 1 ? " error" : " errors");
  if (timeouts > 0) std::cout << ", " << timeouts << (timeouts == 1 ? " time out" : " time outs");
  std::cout << "\n";
  return errors > 0 || timeouts > 0 ? 4 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    if (args.empty()) {
      std::cerr << "usage: stub_dafny verify|kb-gen|--version\n";
      return 1;
    }
    if (args[0] == "--version") {
      std::cout << kVersion << "\n";
      return 0;
    }
    const std::vector<std::string> rest(args.begin() + 1, args.end());
    if (args[0] == "verify") return verify(rest);
    if (args[0] == "kb-gen") return kb_gen(rest);
    std::cerr << "unknown command: " << args[0] << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "stub_dafny: " << e.what() << "\n";
    return 3;
  }
}
