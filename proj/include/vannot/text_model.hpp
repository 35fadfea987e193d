// Copyright (c) 2026, vannot authors
// SPDX-License-Identifier: Apache-2.0
//
// Tolerant structural model of Dafny source text.
//
// The scanner understands comments (including nested block comments),
// string and char literals, bracket nesting, callable headers, loops,
// statement terminators and loop spec clauses. It does not understand
// Dafny semantics: placement is its job, the verifier judges meaning.
// Every edit it performs is a byte splice, so text it did not touch is
// preserved exactly.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vannot {

enum class AnnotationKind { Invariant, Assert, Decreases };

std::string_view to_string(AnnotationKind kind);
std::optional<AnnotationKind> annotation_kind_from_string(std::string_view name);

/// Half-open byte range [begin, end).
struct ByteSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool contains(const ByteSpan& other) const {
    return begin <= other.begin && other.end <= end;
  }
  bool operator==(const ByteSpan&) const = default;
};

struct SourceText {
  std::string content;
  std::optional<std::string> path;
};

/// Collapses whitespace runs to one space and trims both ends.
std::string normalize_whitespace(std::string_view text);

struct Annotation {
  AnnotationKind kind = AnnotationKind::Assert;
  std::string text;
  std::string normalized;

  static Annotation make(AnnotationKind kind, std::string text);
  bool operator==(const Annotation&) const = default;
};

struct AnnotationInstance {
  Annotation annotation;
  ByteSpan span;           // clause plus its owned whitespace/newline
  ByteSpan clause;         // the clause alone
  std::string owned_text;  // bytes covered by span, for replay
  std::size_t ordinal = 0;
  std::size_t method = 0;
  /// Loop-attached clauses: index into ParsedUnit::loops.
  std::optional<std::size_t> loop;
  /// Asserts: index into ParsedUnit::statements of the closest preceding
  /// non-annotation sibling statement in the same block.
  std::optional<std::size_t> after_statement;
};

enum class CallableKind { Method, Lemma, Function, Predicate, Constructor };

struct MethodInfo {
  std::string name;
  CallableKind kind = CallableKind::Method;
  ByteSpan span;                  // first header token through closing body brace
  std::optional<ByteSpan> body;   // braces included
  bool statement_body = false;    // methods, lemmas and constructors
  bool inside_type = false;       // declared inside a class/trait/datatype body
};

struct LoopInfo {
  std::size_t method = 0;
  std::size_t keyword = 0;     // offset of `while` / `for`
  std::size_t header_end = 0;  // end of guard or of the last spec clause
  ByteSpan body;               // braces included
  std::vector<ByteSpan> spec_clauses;  // every clause, annotation or not
  ByteSpan span() const { return {keyword, body.end}; }
};

enum class StatementKind { Simple, Assert, Loop, If, Block, Opaque };

struct StatementInfo {
  std::size_t method = 0;
  ByteSpan span;
  StatementKind kind = StatementKind::Simple;
  std::optional<std::size_t> loop;  // for Loop statements
  std::size_t block = 0;            // id of the enclosing block
  bool is_annotation = false;       // plain `assert e;`
};

struct ParsedUnit {
  SourceText source;
  std::vector<MethodInfo> methods;
  std::vector<LoopInfo> loops;
  std::vector<StatementInfo> statements;  // textual order
  std::vector<AnnotationInstance> annotations;
  bool malformed = false;
  std::vector<std::string> diagnostics;

  std::optional<std::size_t> find_method(std::string_view name) const;
  std::vector<std::size_t> loops_of(std::size_t method) const;
  /// Indices of non-annotation statements of a method, textual order.
  std::vector<std::size_t> statements_of(std::size_t method) const;
  /// Method-relative ordinal of a non-annotation statement.
  std::size_t statement_ordinal(std::size_t statement) const;
  /// Method-relative ordinal of a loop.
  std::size_t loop_ordinal(std::size_t loop) const;
};

ParsedUnit parse(SourceText source);
inline ParsedUnit parse(std::string content) { return parse(SourceText{std::move(content), {}}); }

enum class InsertionKind { LoopSpec, AfterStatement };

struct InsertionPoint {
  InsertionKind kind = InsertionKind::LoopSpec;
  std::size_t method = 0;
  std::size_t target = 0;  // loop index or statement index
  std::size_t offset = 0;
  std::string indent;
  /// true: offset is a line start and the clause is written as
  /// indent + clause + "\n". false: written as "\n" + indent + clause.
  bool at_line_start = true;

  bool operator==(const InsertionPoint&) const = default;
};

bool compatible(AnnotationKind kind, InsertionKind point);

/// Throws std::out_of_range for an unknown method index.
std::vector<InsertionPoint> enumerate_insertion_points(const ParsedUnit& unit, std::size_t method,
                                                       AnnotationKind kind);

/// Throws std::invalid_argument on kind mismatch or a stale point.
SourceText insert_annotation(const SourceText& source, const InsertionPoint& point,
                             const Annotation& annotation);

/// 1-based line of the clause written by insert_annotation in its output.
std::size_t inserted_line(const SourceText& source, const InsertionPoint& point);

const std::vector<AnnotationInstance>& list_annotations(const ParsedUnit& unit);

/// Throws std::invalid_argument if the instance does not match the source.
SourceText remove_annotation(const SourceText& source, const AnnotationInstance& instance);

struct StripResult {
  SourceText text;
  std::vector<AnnotationInstance> removed;  // spans refer to the original text
};

StripResult strip_all_annotations(const SourceText& source);

/// Inverse of strip_all_annotations.
SourceText reinsert_all(const SourceText& stripped, const std::vector<AnnotationInstance>& removed);

/// Parses one model completion into an annotation; nullopt means reject.
std::optional<Annotation> classify_annotation(std::string_view raw);

/// 1-based line number of a byte offset.
std::size_t line_of(std::string_view text, std::size_t offset);

}  // namespace vannot
