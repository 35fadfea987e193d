// Copyright (c) 2026, vannot authors
// SPDX-License-Identifier: Apache-2.0

#include "vannot/text_model.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <stdexcept>
#include <unordered_set>

namespace vannot {

std::string_view to_string(AnnotationKind kind) {
  switch (kind) {
    case AnnotationKind::Invariant: return "invariant";
    case AnnotationKind::Assert: return "assert";
    case AnnotationKind::Decreases: return "decreases";
  }
  return "assert";
}

std::optional<AnnotationKind> annotation_kind_from_string(std::string_view name) {
  if (name == "invariant") return AnnotationKind::Invariant;
  if (name == "assert") return AnnotationKind::Assert;
  if (name == "decreases") return AnnotationKind::Decreases;
  return std::nullopt;
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

Annotation Annotation::make(AnnotationKind kind, std::string text) {
  Annotation a;
  a.kind = kind;
  a.normalized = normalize_whitespace(text);
  a.text = std::move(text);
  return a;
}

std::size_t line_of(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + offset, '\n'));
}

namespace {

// ---------------------------------------------------------------- lexing

enum class Tok { Ident, Number, String, Char, Punct };

struct Token {
  Tok kind;
  std::size_t begin;
  std::size_t end;
  std::string_view text;
};

struct Lexed {
  std::vector<Token> tokens;
  bool malformed = false;
  std::vector<std::string> diagnostics;
};

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool ident_continue(unsigned char c) {
  return std::isalnum(c) || c == '_' || c == '?' || c == '\'' || c >= 0x80;
}

constexpr std::array<std::string_view, 15> kMultiPunct = {
    "<==>", "==>", "<==", "::", ":=", ":|", "==", "!=", "<=", ">=", "=>", "&&", "||", "..", "!!"};

Lexed lex(std::string_view s) {
  Lexed out;
  std::size_t i = 0;
  const std::size_t n = s.size();
  auto push = [&](Tok kind, std::size_t b, std::size_t e) {
    out.tokens.push_back({kind, b, e, s.substr(b, e - b)});
  };
  auto fail = [&](std::string message, std::size_t at) {
    out.malformed = true;
    out.diagnostics.push_back(message + " at line " + std::to_string(line_of(s, at)));
  };
  while (i < n) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && s[i + 1] == '/') {
      while (i < n && s[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && s[i + 1] == '*') {
      const std::size_t start = i;
      int depth = 1;
      i += 2;
      while (i < n && depth > 0) {
        if (s[i] == '/' && i + 1 < n && s[i + 1] == '*') {
          ++depth;
          i += 2;
        } else if (s[i] == '*' && i + 1 < n && s[i + 1] == '/') {
          --depth;
          i += 2;
        } else {
          ++i;
        }
      }
      if (depth > 0) fail("unterminated block comment", start);
      continue;
    }
    if (c == '@' && i + 1 < n && s[i + 1] == '"') {
      const std::size_t start = i;
      i += 2;
      bool closed = false;
      while (i < n) {
        if (s[i] == '"') {
          if (i + 1 < n && s[i + 1] == '"') {
            i += 2;
            continue;
          }
          ++i;
          closed = true;
          break;
        }
        ++i;
      }
      if (!closed) fail("unterminated string literal", start);
      push(Tok::String, start, i);
      continue;
    }
    if (c == '"') {
      const std::size_t start = i++;
      bool closed = false;
      while (i < n) {
        if (s[i] == '\\') {
          i += 2;
          continue;
        }
        if (s[i] == '"') {
          ++i;
          closed = true;
          break;
        }
        ++i;
      }
      i = std::min(i, n);
      if (!closed) fail("unterminated string literal", start);
      push(Tok::String, start, i);
      continue;
    }
    if (c == '\'') {
      // Identifiers may contain primes (x'), so a lone quote here starts a
      // char literal only when one can be closed nearby.
      std::size_t close = std::string_view::npos;
      if (i + 1 < n && s[i + 1] == '\\') {
        for (std::size_t j = i + 3; j < n && j < i + 12; ++j) {
          if (s[j] == '\'') {
            close = j;
            break;
          }
          if (s[j] == '\n') break;
        }
      } else if (i + 1 < n) {
        std::size_t j = i + 2;
        while (j < n && (static_cast<unsigned char>(s[j]) & 0xC0) == 0x80) ++j;
        if (j < n && s[j] == '\'') close = j;
      }
      if (close != std::string_view::npos) {
        push(Tok::Char, i, close + 1);
        i = close + 1;
      } else {
        push(Tok::Punct, i, i + 1);
        ++i;
      }
      continue;
    }
    if (std::isdigit(c)) {
      const std::size_t start = i;
      if (c == '0' && i + 1 < n && (s[i + 1] == 'x' || s[i + 1] == 'X')) {
        i += 2;
        while (i < n && (std::isxdigit(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
      } else {
        while (i < n && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
        if (i + 1 < n && s[i] == '.' && std::isdigit(static_cast<unsigned char>(s[i + 1]))) {
          ++i;
          while (i < n && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        }
      }
      push(Tok::Number, start, i);
      continue;
    }
    if (ident_start(c)) {
      const std::size_t start = i++;
      while (i < n && ident_continue(static_cast<unsigned char>(s[i]))) ++i;
      push(Tok::Ident, start, i);
      continue;
    }
    std::size_t len = 1;
    for (auto p : kMultiPunct) {
      if (s.substr(i, p.size()) == p) {
        len = p.size();
        break;
      }
    }
    push(Tok::Punct, i, i + len);
    i += len;
  }
  return out;
}

// ---------------------------------------------------------------- parsing

const std::unordered_set<std::string_view> kNonValueWords = {
    "requires", "ensures",  "reads",   "modifies", "decreases", "invariant", "in",
    "then",     "else",     "if",      "while",    "for",       "assert",    "assume",
    "expect",   "return",   "yield",   "var",      "case",      "match",     "returns",
    "by",       "calc",     "forall",  "exists",   "to",        "downto",    "print",
    "new",      "label",    "ghost",   "static",   "method",    "function",  "predicate",
    "lemma",    "constructor", "class", "module",  "import",    "opened",    "iterator",
    "twostate", "datatype", "type",    "const",    "break",     "continue",  "modify",
    "reveal",   "is",       "as",      "free",     "set",       "iset",      "map",
    "imap",     "seq",      "multiset"};

const std::unordered_set<std::string_view> kDeclWords = {
    "method",   "function", "lemma",    "predicate", "constructor", "class",    "trait",
    "datatype", "codatatype", "const",  "type",      "newtype",     "module",   "import",
    "iterator", "ghost",    "static",   "twostate",  "least",       "greatest", "inductive",
    "copredicate", "abstract", "opaque", "include"};

const std::unordered_set<std::string_view> kTypeWords = {"class",    "trait",   "datatype",
                                                         "codatatype", "iterator", "newtype"};

constexpr std::size_t npos = static_cast<std::size_t>(-1);

class Parser {
 public:
  Parser(std::string_view text, const std::vector<Token>& toks, ParsedUnit& unit)
      : s_(text), t_(toks), unit_(unit), match_(toks.size(), npos) {}

  bool match_brackets() {
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < t_.size(); ++i) {
      if (t_[i].kind != Tok::Punct) continue;
      const auto p = t_[i].text;
      if (p == "(" || p == "[" || p == "{") {
        stack.push_back(i);
      } else if (p == ")" || p == "]" || p == "}") {
        const char open = p == ")" ? '(' : p == "]" ? '[' : '{';
        if (stack.empty() || t_[stack.back()].text[0] != open) {
          unit_.diagnostics.push_back("unbalanced '" + std::string(p) + "' at line " +
                                      std::to_string(line_of(s_, t_[i].begin)));
          return false;
        }
        match_[stack.back()] = i;
        match_[i] = stack.back();
        stack.pop_back();
      }
    }
    if (!stack.empty()) {
      unit_.diagnostics.push_back("unclosed '" + std::string(t_[stack.back()].text) +
                                  "' at line " + std::to_string(line_of(s_, t_[stack.back()].begin)));
      return false;
    }
    return true;
  }

  void parse_top() {
    std::vector<bool> scope_is_type;
    bool pending_type = false;
    std::size_t i = 0;
    while (i < t_.size()) {
      if (is_punct(i, "{")) {
        if (is_attribute(i)) {
          i = match_[i] + 1;
          continue;
        }
        scope_is_type.push_back(pending_type);
        pending_type = false;
        ++i;
        continue;
      }
      if (is_punct(i, "}")) {
        if (!scope_is_type.empty()) scope_is_type.pop_back();
        ++i;
        continue;
      }
      if (t_[i].kind == Tok::Ident) {
        const auto w = t_[i].text;
        if (kTypeWords.count(w)) pending_type = true;
        if (w == "module") pending_type = false;
        if (w == "method" || w == "function" || w == "lemma" || w == "predicate" ||
            w == "constructor") {
          const bool in_type = std::find(scope_is_type.begin(), scope_is_type.end(), true) !=
                               scope_is_type.end();
          i = parse_callable(i, in_type);
          continue;
        }
      }
      ++i;
    }
  }

 private:
  bool is_punct(std::size_t i, std::string_view p) const {
    return i < t_.size() && t_[i].kind == Tok::Punct && t_[i].text == p;
  }
  bool is_word(std::size_t i, std::string_view w) const {
    return i < t_.size() && t_[i].kind == Tok::Ident && t_[i].text == w;
  }
  bool is_open(std::size_t i) const {
    return is_punct(i, "(") || is_punct(i, "[") || is_punct(i, "{");
  }
  bool is_attribute(std::size_t i) const { return is_punct(i, "{") && is_punct(i + 1, ":"); }

  // A `{` opens a body when the preceding token can end an expression or type.
  bool is_body_open(std::size_t i, std::size_t header_start) const {
    if (!is_punct(i, "{") || is_attribute(i) || i == 0 || i <= header_start) return false;
    const Token& prev = t_[i - 1];
    switch (prev.kind) {
      case Tok::Number:
      case Tok::String:
      case Tok::Char: return true;
      case Tok::Ident: return kNonValueWords.count(prev.text) == 0;
      case Tok::Punct: {
        const auto p = prev.text;
        if (p == ")" || p == "]" || p == "}" || p == ">" || p == "?" || p == "|") return true;
        if (p == "*" && i >= 2) {
          return is_word(i - 2, "decreases") || is_word(i - 2, "reads") ||
                 is_word(i - 2, "modifies") || is_punct(i - 2, ",");
        }
        return false;
      }
    }
    return false;
  }

  // Next token at the same nesting level; bracketed groups are skipped.
  std::size_t next_top(std::size_t i) const {
    if (is_open(i) && match_[i] != npos) return match_[i] + 1;
    return i + 1;
  }

  std::size_t parse_callable(std::size_t kw, bool in_type) {
    MethodInfo m;
    const auto w = t_[kw].text;
    m.kind = w == "method"        ? CallableKind::Method
             : w == "lemma"       ? CallableKind::Lemma
             : w == "function"    ? CallableKind::Function
             : w == "predicate"   ? CallableKind::Predicate
                                  : CallableKind::Constructor;
    m.inside_type = in_type;
    std::size_t i = kw + 1;
    if ((m.kind == CallableKind::Function || m.kind == CallableKind::Predicate) &&
        is_word(i, "method")) {
      ++i;
    }
    while (is_attribute(i)) i = match_[i] + 1;
    if (i < t_.size() && t_[i].kind == Tok::Ident && !kNonValueWords.count(t_[i].text)) {
      m.name = std::string(t_[i].text);
      ++i;
    } else {
      m.name = std::string(w);
    }
    m.statement_body = m.kind == CallableKind::Method || m.kind == CallableKind::Lemma ||
                       m.kind == CallableKind::Constructor;
    const std::size_t header_start = i;
    std::size_t body = npos;
    std::size_t last = kw;
    while (i < t_.size()) {
      if (is_punct(i, "}")) break;  // end of the enclosing scope
      if (t_[i].kind == Tok::Ident && kDeclWords.count(t_[i].text) && i > header_start) break;
      if (is_body_open(i, header_start - 1)) {
        body = i;
        break;
      }
      last = i;
      i = next_top(i);
    }
    if (body == npos) {
      // Body-less declaration.
      const std::size_t end_tok = std::min(last, t_.size() - 1);
      m.span = {t_[kw].begin, t_[end_tok].end};
      unit_.methods.push_back(std::move(m));
      return std::max(i, kw + 1);
    }
    const std::size_t close = match_[body];
    m.span = {t_[kw].begin, t_[close].end};
    m.body = ByteSpan{t_[body].begin, t_[close].end};
    const bool statements = m.statement_body;
    unit_.methods.push_back(std::move(m));
    if (statements) {
      method_ = unit_.methods.size() - 1;
      parse_block(body, close);
    }
    return close + 1;
  }

  std::size_t push_statement(StatementKind kind, std::size_t first_tok, std::size_t block) {
    StatementInfo st;
    st.method = method_;
    st.kind = kind;
    st.block = block;
    st.span.begin = t_[first_tok].begin;
    unit_.statements.push_back(st);
    return unit_.statements.size() - 1;
  }

  void parse_block(std::size_t open, std::size_t close) {
    const std::size_t block = next_block_++;
    std::optional<std::size_t> last_plain;
    std::size_t i = open + 1;
    while (i < close) {
      if (is_punct(i, ";")) {
        ++i;
        continue;
      }
      const std::size_t before = unit_.statements.size();
      const std::size_t next = parse_statement(i, close, block, last_plain);
      if (unit_.statements.size() > before) {
        const auto& st = unit_.statements[before];
        if (!st.is_annotation) last_plain = before;
      }
      i = std::max(next, i + 1);
    }
  }

  // Returns the index of the first token after the statement.
  std::size_t parse_statement(std::size_t i, std::size_t limit, std::size_t block,
                              std::optional<std::size_t> last_plain) {
    const std::size_t first = i;
    while (is_word(i, "label") && i + 2 < limit && is_punct(i + 2, ":")) i += 3;
    if (i >= limit) return limit;

    if (is_punct(i, "{") && !is_attribute(i)) {
      const std::size_t idx = push_statement(StatementKind::Block, first, block);
      parse_block(i, match_[i]);
      unit_.statements[idx].span.end = t_[match_[i]].end;
      return match_[i] + 1;
    }
    if (is_word(i, "while") || is_word(i, "for")) return parse_loop(first, i, limit, block);
    if (is_word(i, "if")) {
      const std::size_t idx = push_statement(StatementKind::If, first, block);
      const std::size_t end = parse_if(i, limit);
      unit_.statements[idx].span.end = t_[end - 1].end;
      return end;
    }
    if (is_word(i, "match")) {
      std::size_t j = i + 1;
      while (j < limit && !is_body_open(j, i)) j = next_top(j);
      const std::size_t end = j < limit ? match_[j] + 1 : limit;
      const std::size_t idx = push_statement(StatementKind::Opaque, first, block);
      unit_.statements[idx].span.end = t_[end - 1].end;
      return end;
    }
    if (is_word(i, "calc")) {
      std::size_t j = i + 1;
      while (j < limit && !(is_punct(j, "{") && !is_attribute(j))) j = next_top(j);
      const std::size_t end = j < limit ? match_[j] + 1 : limit;
      const std::size_t idx = push_statement(StatementKind::Opaque, first, block);
      unit_.statements[idx].span.end = t_[end - 1].end;
      return end;
    }
    if (is_word(i, "forall")) {
      std::size_t j = i + 1;
      while (j < limit && !is_punct(j, ";") && !is_body_open(j, i)) j = next_top(j);
      std::size_t end = limit;
      if (j < limit) end = is_punct(j, ";") ? j + 1 : match_[j] + 1;
      const std::size_t idx = push_statement(StatementKind::Opaque, first, block);
      unit_.statements[idx].span.end = t_[end - 1].end;
      return end;
    }
    if (is_word(i, "assert")) {
      std::size_t j = i + 1;
      while (j < limit && !is_punct(j, ";") && !is_word(j, "by")) j = next_top(j);
      if (j < limit && is_word(j, "by")) {
        std::size_t k = j + 1;
        while (k < limit && !(is_punct(k, "{") && !is_attribute(k)) && !is_punct(k, ";")) {
          k = next_top(k);
        }
        const std::size_t end = (k < limit && is_punct(k, "{")) ? match_[k] + 1 : std::min(k + 1, limit);
        const std::size_t idx = push_statement(StatementKind::Opaque, first, block);
        unit_.statements[idx].span.end = t_[end - 1].end;
        return end;
      }
      const std::size_t end = j < limit ? j + 1 : limit;
      const std::size_t idx = push_statement(StatementKind::Assert, first, block);
      auto& st = unit_.statements[idx];
      st.span.end = t_[end - 1].end;
      // Only a complete `assert e;` with no label prefix counts as an annotation.
      if (j < limit && first == i && j > i + 1) {
        st.is_annotation = true;
        add_annotation(AnnotationKind::Assert, {t_[i].begin, t_[j].end}, true, std::nullopt,
                       last_plain);
      }
      return end;
    }
    // Simple statement: up to `;` at this nesting level.
    std::size_t j = i;
    while (j < limit && !is_punct(j, ";")) j = next_top(j);
    const std::size_t end = j < limit ? j + 1 : limit;
    const std::size_t idx = push_statement(StatementKind::Simple, first, block);
    unit_.statements[idx].span.end = t_[std::min(end, limit) - 1].end;
    return end;
  }

  std::size_t parse_if(std::size_t i, std::size_t limit) {
    if (is_punct(i + 1, "{")) return match_[i + 1] + 1;  // alternative `if { case ... }`
    std::size_t j = i + 1;
    while (j < limit && !is_body_open(j, i)) j = next_top(j);
    if (j >= limit) return limit;
    parse_block(j, match_[j]);
    std::size_t end = match_[j] + 1;
    if (end < limit && is_word(end, "else")) {
      if (is_word(end + 1, "if")) return parse_if(end + 1, limit);
      if (is_punct(end + 1, "{")) {
        parse_block(end + 1, match_[end + 1]);
        return match_[end + 1] + 1;
      }
    }
    return end;
  }

  static bool is_spec_word(std::string_view w) {
    return w == "invariant" || w == "decreases" || w == "modifies";
  }

  std::size_t parse_loop(std::size_t first, std::size_t kw, std::size_t limit, std::size_t block) {
    const std::size_t idx = push_statement(StatementKind::Loop, first, block);
    // Alternative loops (`while { case ... }`) and loops with no guard are opaque.
    if (is_punct(kw + 1, "{") || (kw + 1 < limit && t_[kw + 1].kind == Tok::Ident &&
                                  is_spec_word(t_[kw + 1].text))) {
      std::size_t j = kw + 1;
      while (j < limit && !(is_punct(j, "{") && !is_attribute(j) &&
                            (j == kw + 1 || is_body_open(j, kw)))) {
        j = next_top(j);
      }
      const std::size_t end = j < limit ? match_[j] + 1 : limit;
      unit_.statements[idx].kind = StatementKind::Opaque;
      unit_.statements[idx].span.end = t_[end - 1].end;
      return end;
    }
    struct Clause {
      std::size_t first;
      std::size_t last;  // inclusive
    };
    std::vector<Clause> clauses;
    std::size_t guard_last = kw;
    std::size_t j = kw + 1;
    std::size_t body = npos;
    while (j < limit) {
      if (is_body_open(j, kw)) {
        body = j;
        break;
      }
      if (t_[j].kind == Tok::Ident && is_spec_word(t_[j].text)) {
        clauses.push_back({j, j});
      } else if (clauses.empty()) {
        guard_last = match_end(j);
      } else {
        clauses.back().last = match_end(j);
      }
      if (is_punct(j, ";")) {
        if (clauses.empty()) break;  // malformed: a guard ending in `;`
      }
      j = next_top(j);
    }
    if (body == npos) {
      const std::size_t end = std::min(j + 1, limit);
      unit_.statements[idx].kind = StatementKind::Opaque;
      unit_.statements[idx].span.end = t_[end - 1].end;
      return end;
    }
    LoopInfo loop;
    loop.method = method_;
    loop.keyword = t_[kw].begin;
    loop.header_end = clauses.empty() ? t_[guard_last].end : t_[clauses.back().last].end;
    loop.body = {t_[body].begin, t_[match_[body]].end};
    unit_.loops.push_back(loop);
    const std::size_t loop_idx = unit_.loops.size() - 1;
    unit_.statements[idx].loop = loop_idx;
    for (const auto& c : clauses) {
      unit_.loops[loop_idx].spec_clauses.push_back({t_[c.first].begin, t_[c.last].end});
      const auto kind = annotation_kind_from_string(t_[c.first].text);
      if (!kind || c.last == c.first) continue;
      std::size_t text_last = c.last;
      if (is_punct(text_last, ";") && text_last > c.first + 1) --text_last;
      if (text_last == c.first) continue;
      add_annotation(*kind, {t_[c.first].begin, t_[c.last].end}, false, loop_idx, std::nullopt,
                     t_[text_last].end);
    }
    parse_block(body, match_[body]);
    unit_.statements[idx].span.end = t_[match_[body]].end;
    return match_[body] + 1;
  }

  // Last token index covered by the group starting at j.
  std::size_t match_end(std::size_t j) const {
    if (is_open(j) && match_[j] != npos) return match_[j];
    return j;
  }

  void add_annotation(AnnotationKind kind, ByteSpan clause, bool is_assert,
                      std::optional<std::size_t> loop, std::optional<std::size_t> after,
                      std::size_t text_end = npos) {
    (void)is_assert;
    AnnotationInstance inst;
    const std::size_t tend = text_end == npos ? clause.end : text_end;
    inst.annotation = Annotation::make(kind, std::string(s_.substr(clause.begin, tend - clause.begin)));
    inst.clause = clause;
    inst.method = method_;
    inst.loop = loop;
    inst.after_statement = after;
    unit_.annotations.push_back(std::move(inst));
  }

  std::string_view s_;
  const std::vector<Token>& t_;
  ParsedUnit& unit_;
  std::vector<std::size_t> match_;
  std::size_t method_ = 0;
  std::size_t next_block_ = 0;
};

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r'; }

std::size_t line_start(std::string_view s, std::size_t offset) {
  while (offset > 0 && s[offset - 1] != '\n') --offset;
  return offset;
}

std::string indent_at(std::string_view s, std::size_t offset) {
  const std::size_t b = line_start(s, offset);
  std::size_t e = b;
  while (e < s.size() && (s[e] == ' ' || s[e] == '\t')) ++e;
  return std::string(s.substr(b, e - b));
}

bool only_blanks(std::string_view s, std::size_t b, std::size_t e) {
  for (std::size_t i = b; i < e; ++i) {
    if (!is_blank(s[i])) return false;
  }
  return true;
}

// Owned spans: a clause alone on its line owns the whole line; otherwise
// it owns the whitespace before it, never reaching into an earlier span.
void assign_spans(std::string_view s, std::vector<AnnotationInstance>& anns) {
  std::sort(anns.begin(), anns.end(),
            [](const auto& a, const auto& b) { return a.clause.begin < b.clause.begin; });
  std::size_t floor = 0;
  for (std::size_t k = 0; k < anns.size(); ++k) {
    auto& a = anns[k];
    const std::size_t ls = line_start(s, a.clause.begin);
    std::size_t after = a.clause.end;
    while (after < s.size() && is_blank(s[after])) ++after;
    const bool alone_after = after >= s.size() || s[after] == '\n';
    const bool alone_before = ls >= floor && only_blanks(s, ls, a.clause.begin);
    if (alone_before && alone_after) {
      a.span = {ls, after < s.size() ? after + 1 : s.size()};
    } else {
      std::size_t b = a.clause.begin;
      while (b > floor && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
      a.span = {b, a.clause.end};
    }
    a.owned_text = std::string(s.substr(a.span.begin, a.span.size()));
    a.ordinal = k;
    floor = a.span.end;
  }
}

}  // namespace

std::optional<std::size_t> ParsedUnit::find_method(std::string_view name) const {
  for (std::size_t i = 0; i < methods.size(); ++i) {
    if (methods[i].name == name) return i;
  }
  return std::nullopt;
}

std::vector<std::size_t> ParsedUnit::loops_of(std::size_t method) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < loops.size(); ++i) {
    if (loops[i].method == method) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> ParsedUnit::statements_of(std::size_t method) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < statements.size(); ++i) {
    if (statements[i].method == method && !statements[i].is_annotation) out.push_back(i);
  }
  return out;
}

std::size_t ParsedUnit::statement_ordinal(std::size_t statement) const {
  const std::size_t m = statements.at(statement).method;
  std::size_t n = 0;
  for (std::size_t i = 0; i < statement; ++i) {
    if (statements[i].method == m && !statements[i].is_annotation) ++n;
  }
  return n;
}

std::size_t ParsedUnit::loop_ordinal(std::size_t loop) const {
  const std::size_t m = loops.at(loop).method;
  std::size_t n = 0;
  for (std::size_t i = 0; i < loop; ++i) {
    if (loops[i].method == m) ++n;
  }
  return n;
}

ParsedUnit parse(SourceText source) {
  ParsedUnit unit;
  unit.source = std::move(source);
  const std::string_view text = unit.source.content;
  Lexed lexed = lex(text);
  unit.diagnostics = std::move(lexed.diagnostics);
  if (lexed.malformed) {
    unit.malformed = true;
    return unit;
  }
  Parser parser(text, lexed.tokens, unit);
  if (!parser.match_brackets()) {
    unit.malformed = true;
    return unit;
  }
  parser.parse_top();
  assign_spans(text, unit.annotations);
  return unit;
}

bool compatible(AnnotationKind kind, InsertionKind point) {
  return (kind == AnnotationKind::Assert) == (point == InsertionKind::AfterStatement);
}

namespace {

// Where a clause goes after byte `end`: the next line if the rest of this
// line is blank or a line comment, else right at `end`.
std::pair<std::size_t, bool> splice_after(std::string_view s, std::size_t end, std::size_t limit) {
  std::size_t p = end;
  while (p < s.size() && is_blank(s[p])) ++p;
  if (p + 1 < s.size() && s[p] == '/' && s[p + 1] == '/') {
    while (p < s.size() && s[p] != '\n') ++p;
  }
  if (p < s.size() && s[p] == '\n' && p < limit) return {p + 1, true};
  return {end, false};
}

}  // namespace

std::vector<InsertionPoint> enumerate_insertion_points(const ParsedUnit& unit, std::size_t method,
                                                       AnnotationKind kind) {
  if (method >= unit.methods.size()) {
    throw std::out_of_range("unknown method index " + std::to_string(method));
  }
  const std::string_view s = unit.source.content;
  std::vector<InsertionPoint> points;
  if (kind == AnnotationKind::Assert) {
    for (std::size_t st : unit.statements_of(method)) {
      const auto& info = unit.statements[st];
      InsertionPoint p;
      p.kind = InsertionKind::AfterStatement;
      p.method = method;
      p.target = st;
      auto [offset, own_line] = splice_after(s, info.span.end, s.size());
      p.offset = offset;
      p.at_line_start = own_line;
      p.indent = indent_at(s, info.span.begin);
      points.push_back(std::move(p));
    }
  } else {
    for (std::size_t l : unit.loops_of(method)) {
      const auto& loop = unit.loops[l];
      InsertionPoint p;
      p.kind = InsertionKind::LoopSpec;
      p.method = method;
      p.target = l;
      auto [offset, own_line] = splice_after(s, loop.header_end, loop.body.begin);
      p.offset = offset;
      p.at_line_start = own_line;
      std::optional<std::string> clause_indent;
      for (const auto& c : loop.spec_clauses) {
        if (only_blanks(s, line_start(s, c.begin), c.begin)) clause_indent = indent_at(s, c.begin);
      }
      p.indent = clause_indent ? *clause_indent : indent_at(s, loop.keyword) + "  ";
      points.push_back(std::move(p));
    }
  }
  std::stable_sort(points.begin(), points.end(),
                   [](const auto& a, const auto& b) { return a.offset < b.offset; });
  return points;
}

SourceText insert_annotation(const SourceText& source, const InsertionPoint& point,
                             const Annotation& annotation) {
  if (!compatible(annotation.kind, point.kind)) {
    throw std::invalid_argument(std::string(to_string(annotation.kind)) +
                                " cannot be inserted at this kind of point");
  }
  const std::string& s = source.content;
  if (point.offset > s.size() ||
      (point.at_line_start && point.offset > 0 && s[point.offset - 1] != '\n')) {
    throw std::invalid_argument("stale insertion point at offset " + std::to_string(point.offset));
  }
  std::string clause = point.at_line_start ? point.indent + annotation.text + "\n"
                                           : "\n" + point.indent + annotation.text;
  SourceText out{s, source.path};
  out.content.insert(point.offset, clause);
  return out;
}

std::size_t inserted_line(const SourceText& source, const InsertionPoint& point) {
  const std::size_t line = line_of(source.content, point.offset);
  return point.at_line_start ? line : line + 1;
}

const std::vector<AnnotationInstance>& list_annotations(const ParsedUnit& unit) {
  return unit.annotations;
}

SourceText remove_annotation(const SourceText& source, const AnnotationInstance& instance) {
  const std::string& s = source.content;
  if (instance.span.end > s.size() ||
      s.compare(instance.span.begin, instance.span.size(), instance.owned_text) != 0) {
    throw std::invalid_argument("stale annotation instance (ordinal " +
                                std::to_string(instance.ordinal) + ")");
  }
  SourceText out{s, source.path};
  out.content.erase(instance.span.begin, instance.span.size());
  return out;
}

StripResult strip_all_annotations(const SourceText& source) {
  ParsedUnit unit = parse(source);
  StripResult result;
  result.text = source;
  for (auto it = unit.annotations.rbegin(); it != unit.annotations.rend(); ++it) {
    result.text.content.erase(it->span.begin, it->span.size());
  }
  result.removed = std::move(unit.annotations);
  return result;
}

SourceText reinsert_all(const SourceText& stripped, const std::vector<AnnotationInstance>& removed) {
  std::vector<const AnnotationInstance*> order;
  for (const auto& r : removed) order.push_back(&r);
  std::sort(order.begin(), order.end(),
            [](auto* a, auto* b) { return a->span.begin < b->span.begin; });
  SourceText out{std::string(), stripped.path};
  std::size_t cursor = 0;  // position in stripped text
  std::size_t shift = 0;   // bytes removed before the current instance
  for (auto* r : order) {
    const std::size_t at = r->span.begin - shift;
    if (at < cursor || at > stripped.content.size()) {
      throw std::invalid_argument("instances do not belong to this stripped text");
    }
    out.content.append(stripped.content, cursor, at - cursor);
    out.content += r->owned_text;
    cursor = at;
    shift += r->span.size();
  }
  out.content.append(stripped.content, cursor, std::string::npos);
  return out;
}

std::optional<Annotation> classify_annotation(std::string_view raw) {
  std::string_view line;
  while (!raw.empty()) {
    const auto nl = raw.find('\n');
    line = raw.substr(0, nl);
    raw = nl == std::string_view::npos ? std::string_view{} : raw.substr(nl + 1);
    if (!normalize_whitespace(line).empty()) break;
    line = {};
  }
  while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) {
    line.remove_prefix(1);
  }
  while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) {
    line.remove_suffix(1);
  }
  std::string text(line);
  std::optional<AnnotationKind> kind;
  for (auto k : {AnnotationKind::Invariant, AnnotationKind::Assert, AnnotationKind::Decreases}) {
    const auto kw = to_string(k);
    if (text.compare(0, kw.size(), kw) == 0 &&
        (text.size() == kw.size() || std::isspace(static_cast<unsigned char>(text[kw.size()])) ||
         text[kw.size()] == '{' || text[kw.size()] == '(')) {
      kind = k;
    }
  }
  if (!kind) return std::nullopt;
  while (!text.empty() && (text.back() == ';' || std::isspace(static_cast<unsigned char>(text.back())))) {
    text.pop_back();
  }
  if (text.size() <= to_string(*kind).size()) return std::nullopt;
  if (*kind == AnnotationKind::Assert) text.push_back(';');
  return Annotation::make(*kind, std::move(text));
}

}  // namespace vannot
