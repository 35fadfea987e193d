// Copyright (c) 2026, vannot authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>
#include <random>
#include <thread>

#include "doctest.h"
#include "test_support.hpp"
#include "vannot/errors.hpp"
#include "vannot/text_model.hpp"
#include "vannot/verifier.hpp"

using namespace vannot;
using namespace vannot::testing;

namespace {

VerifierConfig stub_config(std::vector<std::string> kbs = {}) {
  VerifierConfig c;
  c.executable = stub_dafny();
  c.time_limit_s = 5;
  c.wall_clock_grace_s = 2;
  for (const auto& k : kbs) c.extra_args.push_back("--kb=" + kb(k));
  return c;
}

VerificationOutcome with_errors(int n, std::vector<std::size_t> lines = {}) {
  VerificationOutcome o;
  o.status = n == 0 ? VerificationStatus::FullyVerified : VerificationStatus::VerificationErrors;
  o.error_count = n;
  for (auto l : lines) o.diagnostics.push_back({l, 1, Severity::Error, "x", {}});
  return o;
}

VerificationOutcome of_status(VerificationStatus s) {
  VerificationOutcome o;
  o.status = s;
  return o;
}

std::size_t count_temp_programs(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().filename().string().rfind("vannot-", 0) == 0) ++n;
  }
  return n;
}

struct ScopedTmpdir {
  TempDir dir;
  std::string old;
  bool had = false;
  ScopedTmpdir() {
    if (const char* v = std::getenv("TMPDIR")) {
      old = v;
      had = true;
    }
    setenv("TMPDIR", dir.path.c_str(), 1);
  }
  ~ScopedTmpdir() {
    if (had) {
      setenv("TMPDIR", old.c_str(), 1);
    } else {
      unsetenv("TMPDIR");
    }
  }
};

}  // namespace

TEST_CASE("summary line with zero errors is FullyVerified") {
  const auto o = parse_verifier_output(
      "\nDafny program verifier finished with 2 verified, 0 errors\n", "", 0);
  CHECK(o.status == VerificationStatus::FullyVerified);
  CHECK(o.diagnostics.empty());
  CHECK(o.errors() == 0);
}

TEST_CASE("one located error") {
  const auto o = parse_verifier_output(
      "/tmp/a.dfy(3,13): Error: assertion might not hold\n"
      "\nDafny program verifier finished with 1 verified, 1 error\n",
      "", 4);
  CHECK(o.status == VerificationStatus::VerificationErrors);
  CHECK(o.error_count == 1);
  REQUIRE(o.diagnostics.size() == 1);
  CHECK(o.diagnostics[0].line == 3);
  CHECK(o.diagnostics[0].column == 13);
  CHECK(o.diagnostics[0].message == "assertion might not hold");
}

TEST_CASE("output shapes") {
  SUBCASE("empty output with nonzero exit") {
    const auto o = parse_verifier_output("", "", 1);
    CHECK(o.status == VerificationStatus::ToolFailure);
    CHECK_FALSE(o.detail.empty());
  }
  SUBCASE("unrecognized text") {
    const auto o = parse_verifier_output("Segmentation fault\n", "", 139);
    CHECK(o.status == VerificationStatus::ToolFailure);
    CHECK(o.detail.find("Segmentation fault") != std::string::npos);
  }
  SUBCASE("resolution errors") {
    const auto o = parse_verifier_output(
        "a.dfy(1,13): Error: unresolved identifier: x\n"
        "1 resolution/type errors detected in a.dfy\n",
        "", 2);
    CHECK(o.status == VerificationStatus::ParseOrResolutionError);
    CHECK(o.diagnostics.size() == 1);
  }
  SUBCASE("parse errors") {
    const auto o = parse_verifier_output(
        "a.dfy(4,2): Error: invalid Expression\n1 parse errors detected in a.dfy\n", "", 2);
    CHECK(o.status == VerificationStatus::ParseOrResolutionError);
  }
  SUBCASE("located errors without summary") {
    const auto o = parse_verifier_output("a.dfy(1,1): Error: rbrace expected\n", "", 2);
    CHECK(o.status == VerificationStatus::ParseOrResolutionError);
  }
  SUBCASE("time outs") {
    const auto o = parse_verifier_output(
        "a.dfy(2,7): Error: Verification of 'Slow' timed out after 1 seconds\n"
        "\nDafny program verifier finished with 0 verified, 0 errors, 1 time out\n",
        "", 4);
    CHECK(o.status == VerificationStatus::Timeout);
  }
  SUBCASE("errors dominate time outs") {
    const auto o = parse_verifier_output(
        "Dafny program verifier finished with 0 verified, 2 errors, 1 time out\n", "", 4);
    CHECK(o.status == VerificationStatus::VerificationErrors);
    CHECK(o.error_count == 2);
  }
  SUBCASE("related locations attach to the preceding error") {
    const auto o = parse_verifier_output(
        "a.dfy(9,0): Error: a postcondition could not be proved on this return path\n"
        "a.dfy(3,12): Related location: this is the postcondition that could not be proved\n"
        "\nDafny program verifier finished with 0 verified, 1 error\n",
        "", 4);
    REQUIRE(o.diagnostics.size() == 1);
    REQUIRE(o.diagnostics[0].related.size() == 1);
    CHECK(o.diagnostics[0].related[0].line == 3);
  }
  SUBCASE("error codes, warnings and CRLF") {
    const auto o = parse_verifier_output(
        "a.dfy(5,4): Warning: unusual attribute\r\n"
        "a.dfy(7,2): Error BP5003: A postcondition might not hold on this return path.\r\n"
        "Dafny program verifier finished with 1 verified, 1 error\r\n",
        "", 4);
    REQUIRE(o.diagnostics.size() == 2);
    CHECK(o.diagnostics[0].severity == Severity::Warning);
    CHECK(o.diagnostics[1].severity == Severity::Error);
    CHECK(o.diagnostics[1].message == "A postcondition might not hold on this return path.");
    CHECK(o.status == VerificationStatus::VerificationErrors);
  }
  SUBCASE("summary disagreeing with listed errors never claims full verification") {
    const auto o = parse_verifier_output(
        "a.dfy(2,2): Error: assertion might not hold\n"
        "Dafny program verifier finished with 1 verified, 0 errors\n",
        "", 4);
    CHECK(o.status == VerificationStatus::VerificationErrors);
    CHECK(o.error_count == 1);
  }
  SUBCASE("summary on stderr") {
    const auto o =
        parse_verifier_output("", "Dafny program verifier finished with 3 verified, 0 errors\n", 0);
    CHECK(o.status == VerificationStatus::FullyVerified);
  }
}

TEST_CASE("acceptance predicate") {
  CHECK(annotation_is_accepted(with_errors(2), with_errors(0), 5, 5));
  CHECK(annotation_is_accepted(with_errors(2), with_errors(2, {9}), 5, 5));
  CHECK_FALSE(annotation_is_accepted(with_errors(2), with_errors(2, {9}), 5, 5, true));
  CHECK_FALSE(annotation_is_accepted(with_errors(2), with_errors(1, {5}), 5, 5));
  CHECK_FALSE(annotation_is_accepted(with_errors(1), with_errors(2, {9, 10}), 5, 5));
  CHECK_FALSE(annotation_is_accepted(with_errors(2),
                                     of_status(VerificationStatus::ParseOrResolutionError), 5, 5));
  CHECK_FALSE(annotation_is_accepted(with_errors(2), of_status(VerificationStatus::Timeout), 5, 5));
  CHECK_FALSE(
      annotation_is_accepted(with_errors(2), of_status(VerificationStatus::ToolFailure), 5, 5));
  CHECK(annotation_is_accepted(of_status(VerificationStatus::Timeout), with_errors(3, {9}), 5, 5));
  // multi-line clause
  CHECK_FALSE(annotation_is_accepted(with_errors(3), with_errors(1, {7}), 5, 7));

  // never accepted when the count grows, whatever the lines
  std::mt19937 rng(7);
  for (int t = 0; t < 2000; ++t) {
    const int b = static_cast<int>(rng() % 6);
    const int a = static_cast<int>(rng() % 6);
    const std::size_t ins = 1 + rng() % 10;
    std::vector<std::size_t> lines;
    for (int i = 0; i < a; ++i) lines.push_back(1 + rng() % 10);
    const bool ok = annotation_is_accepted(with_errors(b), with_errors(a, lines), ins, ins,
                                           rng() % 2 == 0);
    if (a > b) CHECK_FALSE(ok);
    if (ok) CHECK(std::find(lines.begin(), lines.end(), ins) == lines.end());
  }
}

TEST_CASE("config validation") {
  VerifierConfig c;
  c.max_workers = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.max_workers = 1;
  c.time_limit_s = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.time_limit_s = 1;
  c.executable.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  VerifierConfig a, b;
  CHECK(a.fingerprint() == b.fingerprint());
  b.extra_args.push_back("--x");
  CHECK(a.fingerprint() != b.fingerprint());
}

TEST_CASE("stub verifier on the reference programs") {
  VerifierHarness h(stub_config({"reference"}));
  CHECK(h.probe_version() == "4.8.0+stub");

  const auto full = h.verify(reference_program("perfect_square.dfy"));
  CHECK(full.status == VerificationStatus::FullyVerified);

  const auto partial = h.verify(reference_program("perfect_square_partial.dfy"));
  REQUIRE(partial.status == VerificationStatus::VerificationErrors);
  CHECK(partial.error_count >= 1);
  const auto unit = parse(reference_program("perfect_square_partial.dfy"));
  const std::size_t ensures_line = 3;
  const std::size_t loop_line = line_of(unit.source.content, unit.loops.at(0).keyword);
  bool located = false;
  for (const auto& d : partial.diagnostics) {
    if (d.line == ensures_line || d.line == loop_line) located = true;
    for (const auto& r : d.related) {
      if (r.line == ensures_line || r.line == loop_line) located = true;
    }
  }
  CHECK(located);

  CHECK(h.verify(reference_program("max_array_completed.dfy")).status == VerificationStatus::FullyVerified);
  CHECK(h.verify(reference_program("max_array.dfy")).status == VerificationStatus::VerificationErrors);
}

TEST_CASE("false assert is one error at its line") {
  VerifierHarness h(stub_config());
  const auto o = h.verify("method m() { assert false; }\n");
  CHECK(o.status == VerificationStatus::VerificationErrors);
  CHECK(o.error_count == 1);
  REQUIRE(o.diagnostics.size() == 1);
  CHECK(o.diagnostics[0].line == 1);
}

TEST_CASE("insertion acceptance on max_array") {
  VerifierHarness h(stub_config({"reference"}));
  const SourceText src{reference_program("max_array.dfy"), {}};
  const auto before = h.verify(src.content);
  REQUIRE(before.status == VerificationStatus::VerificationErrors);
  const auto unit = parse(src);
  const auto m = *unit.find_method("maxArray");
  const auto points = enumerate_insertion_points(unit, m, AnnotationKind::Invariant);
  REQUIRE(points.size() == 1);

  const auto good = Annotation::make(AnnotationKind::Invariant, "invariant 0 <= index <= a.Length");
  const auto good_text = insert_annotation(src, points[0], good);
  const auto good_after = h.verify(good_text.content);
  CHECK(good_after.status == VerificationStatus::FullyVerified);
  const auto line = inserted_line(src, points[0]);
  CHECK(annotation_is_accepted(before, good_after, line, line));

  const auto bad = Annotation::make(AnnotationKind::Invariant, "invariant index < 0");
  const auto bad_after = h.verify(insert_annotation(src, points[0], bad).content);
  CHECK(bad_after.has_error_at_line(line));
  CHECK_FALSE(annotation_is_accepted(before, bad_after, line, line));
}

TEST_CASE("classification of the fixture set") {
  auto cfg = stub_config();
  cfg.time_limit_s = 1;
  cfg.wall_clock_grace_s = 3;
  VerifierHarness h(cfg);
  const fs::path dir = fs::path(data_dir()) / "verifier";
  CHECK(h.verify(read_file(dir / "verifies.dfy")).status == VerificationStatus::FullyVerified);
  const auto fa = h.verify(read_file(dir / "false_assert.dfy"));
  CHECK(fa.status == VerificationStatus::VerificationErrors);
  CHECK(fa.error_count == 1);
  CHECK(h.verify(read_file(dir / "resolution_error.dfy")).status ==
        VerificationStatus::ParseOrResolutionError);
  const auto slow = h.verify(read_file(dir / "slow.dfy"));
  CHECK(slow.status == VerificationStatus::Timeout);
  CHECK(slow.duration_s < 3.5);
}

TEST_CASE("wall-clock deadline kills a hung verifier") {
  ScopedTmpdir tmp;
  auto cfg = stub_config();
  cfg.time_limit_s = 1;
  cfg.wall_clock_grace_s = 0.5;
  VerifierHarness h(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const auto o = h.verify(read_file(fs::path(data_dir()) / "verifier" / "hang.dfy"));
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(o.status == VerificationStatus::Timeout);
  CHECK(dt < 5.0);
  CHECK(count_temp_programs(tmp.dir.path) == 0);
}

TEST_CASE("missing executable is a ToolFailure") {
  ScopedTmpdir tmp;
  VerifierConfig c;
  c.executable = "/nonexistent/dafny";
  VerifierHarness h(c);
  CHECK_FALSE(h.resolved_executable());
  const auto o = h.verify("method m() {}\n");
  CHECK(o.status == VerificationStatus::ToolFailure);
  CHECK(o.detail.find("/nonexistent/dafny") != std::string::npos);
  CHECK(count_temp_programs(tmp.dir.path) == 0);
  CHECK(h.probe_version().empty());
}

TEST_CASE("no temporary files remain") {
  ScopedTmpdir tmp;
  VerifierHarness h(stub_config({"desk"}));
  for (const auto& f : desk_corpus()) h.verify(read_file(f));
  h.verify("method m() { x := 1; }\n");
  h.verify("method m() {\n");
  CHECK(count_temp_programs(tmp.dir.path) == 0);
}

TEST_CASE("cache serves repeated texts") {
  VerifierHarness h(stub_config());
  const std::string p = "method m() { assert false; }\n";
  const auto a = h.verify(p);
  const auto b = h.verify(p);
  CHECK(a.same_result(b));
  const auto s = h.stats();
  CHECK(s.requests == 2);
  CHECK(s.cache_hits == 1);
  CHECK(s.processes == 1);
  h.clear_cache();
  h.verify(p);
  CHECK(h.stats().processes == 2);
}

TEST_CASE("batch order and worker-count independence") {
  CHECK(VerifierHarness(stub_config()).verify_batch({}).empty());

  const std::string ok = read_file(fs::path(data_dir()) / "verifier" / "verifies.dfy");
  const std::string bad = "method m() { assert false; }\n";
  auto two = VerifierHarness(stub_config()).verify_batch({ok, bad});
  REQUIRE(two.size() == 2);
  CHECK(two[0].status == VerificationStatus::FullyVerified);
  CHECK(two[1].status == VerificationStatus::VerificationErrors);

  // 40 candidates: every single-invariant insertion into stripped desk files
  std::vector<std::string> batch;
  for (const auto& f : desk_corpus()) {
    const auto strip = strip_all_annotations(SourceText{read_file(f), {}});
    const auto u = parse(strip.text);
    for (const auto& r : strip.removed) {
      if (batch.size() >= 40) break;
      for (const auto& pt : enumerate_insertion_points(u, r.method, r.annotation.kind)) {
        if (batch.size() >= 40) break;
        batch.push_back(insert_annotation(strip.text, pt, r.annotation).content);
      }
    }
  }
  REQUIRE(batch.size() == 40);
  auto c1 = stub_config({"desk"});
  auto c4 = c1;
  c4.max_workers = 4;
  const auto r1 = VerifierHarness(c1).verify_batch(batch);
  const auto r4 = VerifierHarness(c4).verify_batch(batch);
  VerifierHarness single(c1);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(r1[i].same_result(r4[i]));
    CHECK(r1[i].same_result(single.verify(batch[i])));
  }
}

namespace {

// Answers from the program text after a random delay; records peak concurrency.
class JitterRunner : public ProcessRunner {
 public:
  mutable std::atomic<int> active{0};
  mutable std::atomic<int> peak{0};
  mutable std::atomic<unsigned> seed{1};

  ProcessResult run(const std::vector<std::string>& argv,
                    std::chrono::milliseconds) const override {
    const int now = ++active;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::mt19937 rng(seed++);
    std::this_thread::sleep_for(std::chrono::milliseconds(rng() % 15));
    const std::string text = read_file(argv.at(2));
    ProcessResult r;
    const auto n = std::count(text.begin(), text.end(), '!');
    r.out = "Dafny program verifier finished with 1 verified, " + std::to_string(n) + " errors\n";
    r.exit_code = n ? 4 : 0;
    --active;
    return r;
  }
};

}  // namespace

TEST_CASE("completion order never reorders results") {
  auto runner = std::make_shared<JitterRunner>();
  VerifierConfig c;
  c.executable = "fake-verifier";
  c.max_workers = 3;
  VerifierHarness h(c, runner);
  std::vector<std::string> programs;
  for (int i = 0; i < 30; ++i) programs.push_back(std::string(static_cast<std::size_t>(i), '!'));
  const auto res = h.verify_batch(programs);
  REQUIRE(res.size() == programs.size());
  for (int i = 0; i < 30; ++i) {
    CHECK(res[static_cast<std::size_t>(i)].errors() == i);
  }
  CHECK(runner->peak.load() <= 3);
  CHECK(runner->peak.load() >= 1);
}

TEST_CASE("concurrent searches share the worker bound") {
  auto runner = std::make_shared<JitterRunner>();
  VerifierConfig c;
  c.executable = "fake-verifier";
  c.max_workers = 2;
  VerifierHarness h(c, runner);
  std::vector<std::thread> ts;
  for (int t = 0; t < 3; ++t) {
    ts.emplace_back([&, t] {
      std::vector<std::string> ps;
      for (int i = 0; i < 8; ++i) ps.push_back(std::string(static_cast<std::size_t>(t * 10 + i), '!'));
      h.verify_batch(ps);
    });
  }
  for (auto& t : ts) t.join();
  CHECK(runner->peak.load() <= 2);
}
