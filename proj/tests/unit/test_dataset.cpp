// Copyright (c) 2026, vannot authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <regex>

#include "doctest.h"
#include "test_support.hpp"
#include "vannot/dataset.hpp"
#include "vannot/errors.hpp"
#include "vannot/proposer.hpp"

using namespace vannot;
using namespace vannot::testing;

namespace {

std::size_t count_keyword_lines(const std::string& text, const std::string& kw) {
  const std::regex re("^\\s*" + kw + "\\b");
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (std::regex_search(line, re)) ++n;
  }
  return n;
}

std::vector<std::string> desk_paths() {
  std::vector<std::string> out;
  for (const auto& p : desk_corpus()) out.push_back(p.string());
  return out;
}

}  // namespace

TEST_CASE("perfect square yields four pairs, last annotation first") {
  const SourceText src{reference_program("perfect_square.dfy"), std::string("perfect_square.dfy")};
  const auto ex = extract_pairs(src);
  REQUIRE(ex.size() == 4);
  CHECK(ex[0].completion == "assert forall i: nat :: 0 <= i < k ==> i * i != n;");
  CHECK(ex[0].meta.kind == "assert");
  CHECK(ex[0].meta.step == 1);
  CHECK(ex[0].meta.ordinal == 3);
  const auto prog = program_of_prompt(ex[0].prompt);
  REQUIRE(prog);
  CHECK(count_keyword_lines(*prog, "invariant") == 3);
  CHECK(count_keyword_lines(*prog, "assert") == 0);
  CHECK(ex[3].meta.step == 4);
  CHECK(count_keyword_lines(*program_of_prompt(ex[3].prompt), "invariant") == 0);
  for (const auto& e : ex) {
    CHECK(e.prompt.size() >= 11);
    CHECK(e.prompt.substr(e.prompt.size() - 11) == "Annotation:");
    CHECK(classify_annotation(e.completion));
    CHECK(e.meta.source == "perfect_square.dfy");
  }
}

TEST_CASE("removal order on two annotations") {
  const std::string p =
      "method m(n: nat) {\n  var i := 0;\n  while i < n\n    invariant i <= n\n  {\n"
      "    i := i + 1;\n  }\n  assert i == n;\n}\n";
  const auto ex = extract_pairs(SourceText{p, {}});
  REQUIRE(ex.size() == 2);
  CHECK(ex[0].completion == "assert i == n;");
  CHECK(ex[1].completion == "invariant i <= n");
  const std::string without_a2 =
      "method m(n: nat) {\n  var i := 0;\n  while i < n\n    invariant i <= n\n  {\n"
      "    i := i + 1;\n  }\n}\n";
  CHECK(ex[0].prompt == render_prompt(without_a2).text);
  const std::string bare =
      "method m(n: nat) {\n  var i := 0;\n  while i < n\n  {\n    i := i + 1;\n  }\n}\n";
  CHECK(ex[1].prompt == render_prompt(bare).text);
  CHECK(extract_pairs(SourceText{bare, {}}).empty());
}

TEST_CASE("max_array pair completion") {
  const auto ex = extract_pairs(SourceText{reference_program("max_array_completed.dfy"), {}});
  REQUIRE(ex.size() == 2);
  CHECK(ex[0].completion == "invariant 0 <= index <= a.Length");
  CHECK(ex[0].prompt == render_prompt(reference_program("max_array.dfy")).text);
}

TEST_CASE("extraction is invertible on the desk corpus") {
  for (const auto& f : desk_corpus()) {
    CAPTURE(f);
    const std::string original = read_file(f);
    const auto ex = extract_pairs(SourceText{original, f.string()});
    CHECK(ex.size() == parse(original).annotations.size());
    CHECK(ex.size() == count_annotation_lines(original));
    if (ex.empty()) continue;
    std::string cur = *program_of_prompt(ex.back().prompt);
    for (auto it = ex.rbegin(); it != ex.rend(); ++it) {
      CHECK(*program_of_prompt(it->prompt) == cur);
      cur = restore_step(cur, it->meta);
    }
    CHECK(cur == original);
  }
}

TEST_CASE("desk corpus: 31 pairs with consistent manifest") {
  CorpusOptions opt;
  opt.timestamp = "2026-01-01T00:00:00Z";
  const auto res = extract_corpus(desk_paths(), opt);
  CHECK(res.examples.size() == 31);
  const auto& m = res.manifest;
  CHECK(m.examples == 31);
  CHECK(m.invariants + m.asserts + m.decreases == 31);
  std::size_t inv = 0, as = 0, dec = 0;
  for (const auto& p : desk_corpus()) {
    const auto t = read_file(p);
    inv += count_keyword_lines(t, "invariant");
    as += count_keyword_lines(t, "assert");
    dec += count_keyword_lines(t, "decreases");
  }
  CHECK(m.invariants == inv);
  CHECK(m.asserts == as);
  CHECK(m.decreases == dec);
  CHECK(m.unique_completions <= m.examples);
  CHECK(m.files.size() == 10);
  CHECK(m.skipped.empty());
  CHECK(to_json(m)["timestamp"] == "2026-01-01T00:00:00Z");
}

TEST_CASE("verification filter and unreadable files") {
  TempDir dir;
  const auto good = (dir.path / "good.dfy").string();
  const auto bad = (dir.path / "bad.dfy").string();
  const auto broken = (dir.path / "broken.dfy").string();
  std::ofstream(good) << read_file(desk_corpus().front());
  std::ofstream(bad) << "method m(n: nat) {\n  var i := 0;\n  assert i == 1;\n}\n";
  std::ofstream(broken) << "method m() {\n";
  VerifierConfig vc;
  vc.executable = stub_dafny();
  vc.extra_args = {"--kb=" + kb("desk")};
  vc.version = "stub-pinned";
  VerifierHarness h(vc);
  CorpusOptions opt;
  opt.filter_verified = true;
  const auto res = extract_corpus({bad, good, (dir.path / "missing.dfy").string(), broken}, opt, &h);
  CHECK(res.manifest.files == std::vector<std::string>{good});
  CHECK(res.manifest.skipped.size() == 3);
  CHECK(res.manifest.verifier_version == "stub-pinned");
  CHECK(res.examples.size() == parse(read_file(good)).annotations.size());

  opt.filter_verified = false;
  const auto all = extract_corpus({bad, good}, opt);
  CHECK(all.examples.size() == res.examples.size() + 1);
  opt.filter_verified = true;
  CHECK_THROWS_AS(extract_corpus({good}, opt), ConfigError);
}

TEST_CASE("duplicate completions across files") {
  TempDir dir;
  const auto a = (dir.path / "a.dfy").string();
  const auto b = (dir.path / "b.dfy").string();
  const std::string p = "method m(n: nat) {\n  var i := 0;\n  assert i == 0;\n}\n";
  std::ofstream(a) << p;
  std::ofstream(b) << p;
  const auto res = extract_corpus({a, b}, CorpusOptions{});
  CHECK(res.manifest.examples == 2);
  CHECK(res.manifest.unique_completions == 1);
}

TEST_CASE("JSONL round trip and empty export") {
  TempDir dir;
  const auto res = extract_corpus(desk_paths(), CorpusOptions{});
  const auto path = (dir.path / "out" / "train.jsonl").string();
  export_jsonl(res.examples, res.manifest, path);
  CHECK(read_jsonl(path) == res.examples);
  std::ifstream in(path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.size() == 3);
    CHECK(j.contains("prompt"));
    CHECK(j.contains("completion"));
    CHECK(j.contains("meta"));
    ++n;
  }
  CHECK(n == 31);
  const auto man = nlohmann::json::parse(read_file(path + ".manifest.json"));
  CHECK(man["examples"] == 31);
  CHECK(man["loss_mask"] == "completion_only");

  const auto empty = (dir.path / "empty.jsonl").string();
  export_jsonl({}, summarize({}, PromptMode::FullProgram), empty);
  CHECK(read_file(empty).empty());
  CHECK(nlohmann::json::parse(read_file(empty + ".manifest.json"))["examples"] == 0);
  CHECK(read_jsonl(empty).empty());

  CHECK_THROWS_AS(export_jsonl({}, summarize({}, PromptMode::FullProgram), "/proc/nope/x.jsonl"),
                  InputError);
  std::ofstream(dir.path / "junk.jsonl") << "{\"prompt\": 1}\n";
  CHECK_THROWS_AS(read_jsonl((dir.path / "junk.jsonl").string()), InputError);
}

TEST_CASE("prefix prompts end with the annotated method") {
  const std::string p =
      "method A(n: nat) {\n  var i := 0;\n  assert i == 0;\n}\n\n"
      "method B() {\n  var z := 3;\n}\n";
  const auto ex = extract_pairs(SourceText{p, {}}, PromptMode::MethodPrefix);
  REQUIRE(ex.size() == 1);
  CHECK(*program_of_prompt(ex[0].prompt) == "method A(n: nat) {\n  var i := 0;\n}\n");
}

TEST_CASE("file split") {
  const std::vector<std::string> files = {"c.dfy", "a.dfy", "b.dfy", "e.dfy", "d.dfy"};
  const auto plain = split_files(files, 3);
  CHECK(plain.train == std::vector<std::string>{"a.dfy", "b.dfy", "c.dfy"});
  CHECK(plain.test == std::vector<std::string>{"d.dfy", "e.dfy"});
  const auto s1 = split_files(files, 3, 42);
  const auto s2 = split_files(files, 3, 42);
  CHECK(s1.train == s2.train);
  CHECK(s1.train.size() + s1.test.size() == 5);
  CHECK(split_files(files, 99).test.empty());
}
