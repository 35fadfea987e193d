// Copyright (c) 2026, vannot authors
// SPDX-License-Identifier: Apache-2.0

#include "vannot/synth.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <unistd.h>

#include "vannot/errors.hpp"
#include "vannot/hash.hpp"
#include "vannot/search.hpp"

namespace vannot {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kGraphSchemaVersion = 1;

constexpr std::pair<EditorName, std::string_view> kEditorNames[] = {
    {EditorName::IdeaProposer, "idea_proposer"},
    {EditorName::IdeaImplementer, "idea_implementer"},
    {EditorName::Annotator, "annotator"},
    {EditorName::ChangeProposer, "change_proposer"},
};

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) {
      out.push_back(text.substr(pos));
      break;
    }
    out.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

bool is_blank(const std::string& line) { return trim(line).empty(); }

// Writes `content` to `path` through a temporary file and rename(2).
void atomic_write(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw CheckpointError("cannot rename checkpoint into " + path.string());
  }
}

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json outcome_json(const VerificationOutcome& o) { return to_json(o); }

VerificationOutcome outcome_from_json(const json& j) {
  VerificationOutcome o;
  const auto status = verification_status_from_string(j.at("status").get<std::string>());
  if (!status) throw CheckpointError("unknown verification status in checkpoint");
  o.status = *status;
  if (!j.at("errors").is_null()) o.error_count = j.at("errors").get<int>();
  for (const auto& d : j.at("diagnostics")) {
    Diagnostic diag;
    diag.line = d.at("line").get<std::size_t>();
    if (!d.at("column").is_null()) diag.column = d.at("column").get<std::size_t>();
    diag.severity = d.at("severity") == "error" ? Severity::Error : Severity::Warning;
    diag.message = d.at("message").get<std::string>();
    for (const auto& r : d.at("related")) {
      RelatedLocation rel;
      rel.line = r.at("line").get<std::size_t>();
      if (!r.at("column").is_null()) rel.column = r.at("column").get<std::size_t>();
      rel.message = r.at("message").get<std::string>();
      diag.related.push_back(std::move(rel));
    }
    o.diagnostics.push_back(std::move(diag));
  }
  if (j.contains("detail")) o.detail = j.at("detail").get<std::string>();
  return o;
}

std::string_view node_type_name(NodeType t) {
  switch (t) {
    case NodeType::Root: return "root";
    case NodeType::Idea: return "idea";
    case NodeType::Program: return "program";
  }
  return "root";
}

NodeType node_type_from(const std::string& s) {
  if (s == "root") return NodeType::Root;
  if (s == "idea") return NodeType::Idea;
  if (s == "program") return NodeType::Program;
  throw CheckpointError("unknown node type '" + s + "' in checkpoint");
}

EditorName editor_or_throw(const std::string& s) {
  const auto e = editor_from_string(s);
  if (!e) throw CheckpointError("unknown editor '" + s + "' in checkpoint");
  return *e;
}

}  // namespace

std::string_view to_string(NodeType type) { return node_type_name(type); }

std::string_view to_string(EditorName editor) {
  for (const auto& [e, n] : kEditorNames) {
    if (e == editor) return n;
  }
  return "unknown";
}

std::optional<EditorName> editor_from_string(std::string_view name) {
  for (const auto& [e, n] : kEditorNames) {
    if (n == name) return e;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// EditGraph

EditGraph::EditGraph() {
  GraphNode root;
  root.id = "n0";
  root.type = NodeType::Root;
  root.created_by = "init";
  nodes_.push_back(std::move(root));
}

const GraphNode* EditGraph::find(const std::string& id) const {
  for (const auto& n : nodes_) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

std::vector<std::string> EditGraph::children(const std::string& id) const {
  std::vector<std::string> out;
  for (const auto& e : edges_) {
    if (e.parent == id) out.push_back(e.child);
  }
  return out;
}

std::vector<std::string> EditGraph::parents(const std::string& id) const {
  std::vector<std::string> out;
  for (const auto& e : edges_) {
    if (e.child == id) out.push_back(e.parent);
  }
  return out;
}

std::vector<std::string> EditGraph::lineage(const std::string& id) const {
  std::vector<std::string> chain{id};
  std::set<std::string> seen{id};
  for (;;) {
    const auto ps = parents(chain.back());
    if (ps.empty() || !seen.insert(ps.front()).second) break;
    chain.push_back(ps.front());
  }
  std::reverse(chain.begin(), chain.end());
  return chain;
}

const GraphNode& EditGraph::add_node(NodeType type, std::string content, const std::string& parent,
                                     EditorName editor,
                                     std::optional<VerificationOutcome> verification) {
  if (!find(parent)) throw std::invalid_argument("unknown parent node " + parent);
  if (type == NodeType::Root) throw std::invalid_argument("a graph has exactly one root");
  if (type == NodeType::Program && !verification) {
    throw std::invalid_argument("program nodes carry a verification record");
  }
  GraphNode n;
  n.id = "n" + std::to_string(nodes_.size());
  n.type = type;
  n.content = std::move(content);
  n.verification = std::move(verification);
  n.created_by = std::string(to_string(editor));
  n.created_at = ++state_.clock;
  edges_.push_back({parent, n.id, n.created_by});
  nodes_.push_back(std::move(n));
  return nodes_.back();
}

void EditGraph::add_decision(Decision d) {
  d.seq = decisions_.size();
  decisions_.push_back(std::move(d));
}

void EditGraph::check_invariants() const {
  if (nodes_.empty() || nodes_.front().type != NodeType::Root || !nodes_.front().content.empty()) {
    throw CheckpointError("graph must start with an empty root node");
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (i > 0 && n.type == NodeType::Root) throw CheckpointError("more than one root node");
    if (n.type == NodeType::Program && !n.verification) {
      throw CheckpointError("program node " + n.id + " has no verification record");
    }
    if (!index.emplace(n.id, i).second) throw CheckpointError("duplicate node id " + n.id);
  }
  std::vector<std::vector<std::size_t>> adj(nodes_.size());
  std::vector<int> indeg(nodes_.size(), 0);
  for (const auto& e : edges_) {
    const auto p = index.find(e.parent);
    const auto c = index.find(e.child);
    if (p == index.end() || c == index.end()) throw CheckpointError("edge to unknown node");
    adj[p->second].push_back(c->second);
    ++indeg[c->second];
  }
  if (indeg[0] != 0) throw CheckpointError("root node has a parent");
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    if (indeg[i] == 0) throw CheckpointError("node " + nodes_[i].id + " has no parent");
  }
  // Kahn's algorithm: every node drains iff the edges are acyclic.
  std::vector<std::size_t> queue{0};
  std::size_t drained = 0;
  while (!queue.empty()) {
    const auto u = queue.back();
    queue.pop_back();
    ++drained;
    for (const auto v : adj[u]) {
      if (--indeg[v] == 0) queue.push_back(v);
    }
  }
  if (drained != nodes_.size()) throw CheckpointError("graph has a cycle or unreachable nodes");
}

json EditGraph::to_json() const {
  json nodes = json::array();
  for (const auto& n : nodes_) {
    json j = {{"id", n.id},
              {"type", node_type_name(n.type)},
              {"created_by", n.created_by},
              {"created_at", n.created_at}};
    if (n.type == NodeType::Program) {
      j["blob"] = sha256_hex(n.content);
      j["verification"] = outcome_json(*n.verification);
    } else {
      j["content"] = n.content;
    }
    nodes.push_back(std::move(j));
  }
  json edges = json::array();
  for (const auto& e : edges_) {
    edges.push_back({{"parent", e.parent}, {"child", e.child}, {"editor", e.editor}});
  }
  json decisions = json::array();
  for (const auto& d : decisions_) {
    json j = {{"seq", d.seq},       {"round", d.round},   {"editor", to_string(d.editor)},
              {"parent", d.parent}, {"candidate", d.candidate}, {"kept", d.kept},
              {"reason", d.reason}, {"node", d.node ? json(*d.node) : json()}};
    if (d.salvage_candidate) {
      j["salvage"] = {{"candidate", *d.salvage_candidate},
                      {"kept", d.salvage_kept},
                      {"reason", d.salvage_reason}};
    }
    decisions.push_back(std::move(j));
  }
  const auto& s = state_;
  json state = {{"next_round", s.next_round},
                {"llm_calls", s.llm_calls},
                {"clock", s.clock},
                {"rng_state", s.rng_state},
                {"backend_cursors", s.backend_cursors},
                {"schedule_hash", s.schedule_hash},
                {"templates_hash", s.templates_hash},
                {"errors", s.errors},
                {"finished", s.finished}};
  return {{"schema_version", kGraphSchemaVersion},
          {"nodes", nodes},
          {"edges", edges},
          {"decisions", decisions},
          {"state", state}};
}

std::string write_blob(const std::string& dir, const std::string& text) {
  const std::string hash = sha256_hex(text);
  const fs::path blobs = fs::path(dir) / "blobs";
  std::error_code ec;
  fs::create_directories(blobs, ec);
  const fs::path p = blobs / (hash + ".dfy");
  if (!fs::exists(p, ec)) atomic_write(p, text);
  return hash;
}

std::string read_blob(const std::string& dir, const std::string& hash) {
  const fs::path p = fs::path(dir) / "blobs" / (hash + ".dfy");
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) throw CheckpointError("missing blob " + hash);
  std::string text = read_all(p);
  if (sha256_hex(text) != hash) throw CheckpointError("blob " + hash + " does not match its hash");
  return text;
}

void EditGraph::save(const std::string& dir) const {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CheckpointError("cannot create " + dir + ": " + ec.message());
  for (const auto& n : nodes_) {
    if (n.type == NodeType::Program) write_blob(dir, n.content);
  }
  atomic_write(fs::path(dir) / "graph.json", to_json().dump(1) + "\n");
}

EditGraph EditGraph::load(const std::string& dir) {
  const fs::path path = fs::path(dir) / "graph.json";
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw CheckpointError("no checkpoint at " + path.string());
  const std::string text = read_all(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CheckpointError("corrupt checkpoint " + path.string() + " at byte " +
                          std::to_string(e.byte) + "; refusing to resume");
  }
  EditGraph g;
  try {
    if (j.at("schema_version").get<int>() != kGraphSchemaVersion) {
      throw CheckpointError("unsupported checkpoint schema version");
    }
    g.nodes_.clear();
    for (const auto& jn : j.at("nodes")) {
      GraphNode n;
      n.id = jn.at("id").get<std::string>();
      n.type = node_type_from(jn.at("type").get<std::string>());
      n.created_by = jn.at("created_by").get<std::string>();
      n.created_at = jn.at("created_at").get<std::uint64_t>();
      if (n.type == NodeType::Program) {
        n.content = read_blob(dir, jn.at("blob").get<std::string>());
        n.verification = outcome_from_json(jn.at("verification"));
      } else {
        n.content = jn.at("content").get<std::string>();
      }
      g.nodes_.push_back(std::move(n));
    }
    for (const auto& je : j.at("edges")) {
      g.edges_.push_back({je.at("parent").get<std::string>(), je.at("child").get<std::string>(),
                          je.at("editor").get<std::string>()});
    }
    for (const auto& jd : j.at("decisions")) {
      Decision d;
      d.seq = jd.at("seq").get<std::uint64_t>();
      d.round = jd.at("round").get<std::size_t>();
      d.editor = editor_or_throw(jd.at("editor").get<std::string>());
      d.parent = jd.at("parent").get<std::string>();
      d.candidate = jd.at("candidate").get<std::string>();
      d.kept = jd.at("kept").get<bool>();
      d.reason = jd.at("reason").get<std::string>();
      if (!jd.at("node").is_null()) d.node = jd.at("node").get<std::string>();
      if (jd.contains("salvage")) {
        const auto& s = jd.at("salvage");
        d.salvage_candidate = s.at("candidate").get<std::string>();
        d.salvage_kept = s.at("kept").get<bool>();
        d.salvage_reason = s.at("reason").get<std::string>();
      }
      g.decisions_.push_back(std::move(d));
    }
    const auto& js = j.at("state");
    auto& s = g.state_;
    s.next_round = js.at("next_round").get<std::size_t>();
    s.llm_calls = js.at("llm_calls").get<int>();
    s.clock = js.at("clock").get<std::uint64_t>();
    s.rng_state = js.at("rng_state").get<std::string>();
    s.backend_cursors = js.at("backend_cursors");
    s.schedule_hash = js.at("schedule_hash").get<std::string>();
    s.templates_hash = js.at("templates_hash").get<std::string>();
    s.errors = js.at("errors").get<std::vector<std::string>>();
    s.finished = js.at("finished").get<bool>();
  } catch (const json::exception& e) {
    throw CheckpointError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  g.check_invariants();
  return g;
}

// ---------------------------------------------------------------------------
// Configuration

void ScheduleConfig::validate() const {
  if (max_llm_calls < 0) throw ConfigError("LLM call budget must not be negative");
  if (max_nodes && *max_nodes < 1) throw ConfigError("max_nodes must be at least 1");
  for (const auto& r : rounds) {
    if (r.selection_limit < 1) throw ConfigError("selection_limit must be at least 1");
    if (r.fanout < 1) throw ConfigError("fanout must be at least 1");
    if (!(r.temperature >= 0.0)) throw ConfigError("temperature must not be negative");
    if (r.max_tokens < 1) throw ConfigError("max_tokens must be at least 1");
  }
}

json ScheduleConfig::to_json() const {
  json rs = json::array();
  for (const auto& r : rounds) {
    rs.push_back({{"editor", to_string(r.name)},
                  {"selection_limit", r.selection_limit},
                  {"fanout", r.fanout},
                  {"temperature", r.temperature},
                  {"max_tokens", r.max_tokens}});
  }
  return {{"rounds", rs},
          {"budget", {{"llm_calls", max_llm_calls}, {"max_nodes", max_nodes ? json(*max_nodes) : json()}}},
          {"seed", seed},
          {"salvage", salvage},
          {"idea_negatives_cap", idea_negatives_cap}};
}

std::string ScheduleConfig::hash() const { return sha256_hex(to_json().dump()); }

ScheduleConfig ScheduleConfig::from_json(const json& j) {
  ScheduleConfig c;
  try {
    for (const auto& r : j.at("rounds")) {
      EditorSpec s;
      const auto name = r.is_string() ? r.get<std::string>() : r.at("editor").get<std::string>();
      const auto e = editor_from_string(name);
      if (!e) throw ConfigError("unknown editor '" + name + "' in schedule");
      s.name = *e;
      if (r.is_object()) {
        s.selection_limit = r.value("selection_limit", s.selection_limit);
        s.fanout = r.value("fanout", s.fanout);
        s.temperature = r.value("temperature", s.temperature);
        s.max_tokens = r.value("max_tokens", s.max_tokens);
      }
      c.rounds.push_back(s);
    }
    if (j.contains("budget")) {
      const auto& b = j.at("budget");
      c.max_llm_calls = b.value("llm_calls", c.max_llm_calls);
      if (b.contains("max_nodes") && !b.at("max_nodes").is_null()) {
        c.max_nodes = b.at("max_nodes").get<std::size_t>();
      }
    }
    c.seed = j.value("seed", c.seed);
    c.salvage = j.value("salvage", c.salvage);
    c.idea_negatives_cap = j.value("idea_negatives_cap", c.idea_negatives_cap);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed schedule: ") + e.what());
  }
  c.validate();
  return c;
}

PromptTemplates PromptTemplates::load(const std::string& dir) {
  PromptTemplates t;
  for (const auto& [e, name] : kEditorNames) {
    const fs::path p = fs::path(dir) / (std::string(name) + ".txt");
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("missing prompt template " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string body = ss.str();
    // Leading // lines (the license header) and one blank line after them
    // are not part of the prompt.
    std::size_t pos = 0;
    while (body.compare(pos, 2, "//") == 0) {
      const auto nl = body.find('\n', pos);
      pos = nl == std::string::npos ? body.size() : nl + 1;
    }
    if (pos > 0 && body.compare(pos, 1, "\n") == 0) ++pos;
    t.text[e] = body.substr(pos);
  }
  return t;
}

std::string PromptTemplates::hash() const {
  std::string all;
  for (const auto& [e, body] : text) {
    all += to_string(e);
    all += '\0';
    all += body;
    all += '\0';
  }
  return sha256_hex(all);
}

std::string PromptTemplates::render(EditorName editor,
                                    const std::map<std::string, std::string>& vars) const {
  const auto it = text.find(editor);
  if (it == text.end()) throw ConfigError("no prompt template for " + std::string(to_string(editor)));
  const std::string& tpl = it->second;
  std::string out;
  std::size_t pos = 0;
  for (;;) {
    const auto open = tpl.find("{{", pos);
    if (open == std::string::npos) break;
    const auto close = tpl.find("}}", open + 2);
    if (close == std::string::npos) break;
    const std::string key = trim(std::string_view(tpl).substr(open + 2, close - open - 2));
    const auto v = vars.find(key);
    if (v == vars.end()) {
      throw ConfigError("template " + std::string(to_string(editor)) + " uses unknown placeholder '" +
                        key + "'");
    }
    out.append(tpl, pos, open - pos);
    out += v->second;
    pos = close + 2;
  }
  out.append(tpl, pos);
  return out;
}

// ---------------------------------------------------------------------------
// Completion parsing

std::string extract_program(std::string_view completion) {
  std::string out;
  const auto fence = completion.find("```");
  if (fence == std::string_view::npos) {
    out = std::string(completion);
  } else {
    const auto body = completion.find('\n', fence);
    if (body == std::string_view::npos) return "\n";
    std::size_t end = body + 1;
    for (;;) {
      end = completion.find("```", end);
      if (end == std::string_view::npos || completion[end - 1] == '\n') break;
      end += 3;
    }
    out = std::string(completion.substr(body + 1, end == std::string_view::npos
                                                       ? std::string_view::npos
                                                       : end - body - 1));
  }
  if (out.empty() || out.back() != '\n') out += '\n';
  return out;
}

std::vector<std::string> parse_ideas(std::string_view completion) {
  std::vector<std::string> out;
  for (const auto& raw : split_lines(std::string(completion))) {
    std::string line = trim(raw);
    if (line.rfind("- ", 0) == 0 || line.rfind("* ", 0) == 0) {
      line = trim(std::string_view(line).substr(2));
    } else {
      std::size_t d = 0;
      while (d < line.size() && std::isdigit(static_cast<unsigned char>(line[d]))) ++d;
      if (d > 0 && d < line.size() && (line[d] == '.' || line[d] == ')')) {
        line = trim(std::string_view(line).substr(d + 1));
      }
    }
    if (line.size() >= 2 && line.front() == '"' && line.back() == '"') {
      line = trim(std::string_view(line).substr(1, line.size() - 2));
    }
    if (!line.empty()) out.push_back(std::move(line));
  }
  return out;
}

std::string editor_channel(EditorName editor, const std::string& node_content) {
  return std::string(to_string(editor)) + "/" + sha256_hex(node_content).substr(0, 12);
}

// ---------------------------------------------------------------------------
// Keep rules

namespace {

std::optional<std::string> unusable_status(const VerificationOutcome& o) {
  switch (o.status) {
    case VerificationStatus::ParseOrResolutionError: return "does not parse or resolve";
    case VerificationStatus::ToolFailure: return "verifier failure: " + o.detail;
    case VerificationStatus::Timeout: return "verifier timed out";
    default: return std::nullopt;
  }
}

// Lines covered by each annotation clause.
std::vector<std::pair<std::size_t, std::size_t>> annotation_lines(const ParsedUnit& unit) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const std::string_view text = unit.source.content;
  for (const auto& a : unit.annotations) {
    const std::size_t last = a.clause.end > a.clause.begin ? a.clause.end - 1 : a.clause.begin;
    out.emplace_back(line_of(text, a.clause.begin), line_of(text, last));
  }
  return out;
}

}  // namespace

KeepVerdict program_keep_rule(const std::string& program, const VerificationOutcome& outcome) {
  if (auto why = unusable_status(outcome)) return {false, *why};
  const ParsedUnit unit = parse(program);
  if (unit.malformed) return {false, "does not parse"};
  if (unit.methods.empty()) return {false, "no callable found"};
  for (const auto& [first, last] : annotation_lines(unit)) {
    for (std::size_t l = first; l <= last; ++l) {
      if (outcome.has_error_at_line(l)) {
        return {false, "annotation at line " + std::to_string(first) + " not proved"};
      }
    }
  }
  return {true, std::string("kept (") + std::string(to_string(outcome.status)) + ")"};
}

KeepVerdict annotator_keep_rule(const std::string& parent, const VerificationOutcome& parent_outcome,
                                const std::string& rewrite, const VerificationOutcome& outcome,
                                std::vector<std::size_t>* failing) {
  if (failing) failing->clear();
  const auto pl = split_lines(parent);
  const auto cl = split_lines(rewrite);
  // Greedy subsequence match; every unmatched rewrite line is an addition.
  std::vector<std::size_t> added;
  std::size_t i = 0;
  for (std::size_t j = 0; j < cl.size(); ++j) {
    if (i < pl.size() && cl[j] == pl[i]) {
      ++i;
    } else {
      added.push_back(j + 1);
    }
  }
  if (i != pl.size()) return {false, "rewrite removes or alters parent lines"};
  const ParsedUnit unit = parse(rewrite);
  if (unit.malformed) return {false, "rewrite does not parse"};
  std::map<std::size_t, std::size_t> starts;  // first line -> last line of each clause
  for (const auto& [first, last] : annotation_lines(unit)) starts[first] = last;
  std::vector<std::pair<std::size_t, std::size_t>> new_clauses;
  for (std::size_t k = 0; k < added.size(); ++k) {
    const std::size_t l = added[k];
    if (is_blank(cl[l - 1])) continue;
    const auto it = starts.find(l);
    if (it == starts.end()) {
      return {false, "line " + std::to_string(l) + " adds code that is not an annotation"};
    }
    // Continuation lines of a multi-line clause must be additions too.
    for (std::size_t c = l + 1; c <= it->second; ++c) {
      if (k + 1 >= added.size() || added[k + 1] != c) {
        return {false, "annotation at line " + std::to_string(l) + " spans parent code"};
      }
      ++k;
    }
    new_clauses.emplace_back(l, it->second);
  }
  if (new_clauses.empty()) return {false, "no annotation added"};
  if (auto why = unusable_status(outcome)) return {false, *why};
  std::vector<std::size_t> bad;
  for (const auto& [first, last] : new_clauses) {
    for (std::size_t l = first; l <= last; ++l) {
      if (outcome.has_error_at_line(l)) {
        for (std::size_t m = first; m <= last; ++m) bad.push_back(m);
        break;
      }
    }
  }
  if (!bad.empty()) {
    if (failing) *failing = bad;
    return {false, std::to_string(bad.size()) + " added annotation line(s) not proved"};
  }
  for (const auto& [first, last] : new_clauses) {
    if (!annotation_is_accepted(parent_outcome, outcome, first, last)) {
      return {false, "verifier error count increased"};
    }
  }
  return {true, std::string("kept (") + std::string(to_string(outcome.status)) + ")"};
}

std::string drop_lines(const std::string& text, const std::vector<std::size_t>& lines) {
  const std::set<std::size_t> drop(lines.begin(), lines.end());
  std::string out;
  std::size_t pos = 0, line = 1;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const std::size_t end = nl == std::string::npos ? text.size() : nl + 1;
    if (!drop.count(line)) out.append(text, pos, end - pos);
    pos = end;
    ++line;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

std::string format_diagnostics(const VerificationOutcome& o) {
  std::string out;
  for (const auto& d : o.diagnostics) {
    if (d.severity != Severity::Error) continue;
    out += "line " + std::to_string(d.line) + ": " + d.message + "\n";
  }
  return out.empty() ? "none\n" : out;
}

std::string rng_save(const std::mt19937_64& rng) {
  std::ostringstream ss;
  ss << rng;
  return ss.str();
}

std::mt19937_64 rng_load(const std::string& state) {
  std::mt19937_64 rng;
  std::istringstream ss(state);
  ss >> rng;
  if (!ss) throw CheckpointError("corrupt RNG state in checkpoint");
  return rng;
}

class Runner {
 public:
  Runner(EditGraph& g, const ScheduleConfig& schedule, const PromptTemplates& templates,
         CompletionBackend& backend, VerifierHarness& verifier, const std::string& dir,
         std::mt19937_64& rng)
      : g_(g), schedule_(schedule), templates_(templates), backend_(backend), verifier_(verifier),
        dir_(dir), rng_(rng) {}

  // Returns false when a budget stops the pipeline.
  bool invoke(std::size_t round, const EditorSpec& spec) {
    round_ = round;
    spec_ = spec;
    switch (spec.name) {
      case EditorName::IdeaProposer: return idea_proposer();
      case EditorName::IdeaImplementer: return per_node(ideas_without_programs());
      case EditorName::Annotator: return per_node(unverified_programs());
      case EditorName::ChangeProposer: return per_node(all_of(NodeType::Program));
    }
    return true;
  }

  std::string stop_reason;

 private:
  bool budget_left() {
    if (g_.state().llm_calls >= schedule_.max_llm_calls) {
      stop_reason = "LLM call budget exhausted";
      return false;
    }
    if (schedule_.max_nodes && g_.nodes().size() >= *schedule_.max_nodes) {
      stop_reason = "node budget exhausted";
      return false;
    }
    return true;
  }

  bool room_for_node() const {
    return !schedule_.max_nodes || g_.nodes().size() < *schedule_.max_nodes;
  }

  std::optional<std::vector<std::string>> call(const std::string& channel, const std::string& prompt,
                                               int n, const std::string& target) {
    CompletionRequest req{channel, prompt, n, spec_.temperature, spec_.max_tokens};
    try {
      auto out = backend_.complete(req);
      ++g_.state().llm_calls;
      return out;
    } catch (const TransportError& e) {
      note(target, e.what());
    } catch (const ScriptExhausted& e) {
      note(target, e.what());
    }
    return std::nullopt;
  }

  void note(const std::string& target, const std::string& what) {
    g_.state().errors.push_back("round " + std::to_string(round_) + " " +
                                std::string(to_string(spec_.name)) + " on " + target +
                                ": skipped: " + what);
  }

  std::vector<std::string> all_of(NodeType type) const {
    std::vector<std::string> out;
    for (const auto& n : g_.nodes()) {
      if (n.type == type) out.push_back(n.id);
    }
    return out;
  }

  std::vector<std::string> ideas_without_programs() const {
    std::vector<std::string> out;
    for (const auto& id : all_of(NodeType::Idea)) {
      bool has = false;
      for (const auto& c : g_.children(id)) has |= g_.find(c)->type == NodeType::Program;
      if (!has) out.push_back(id);
    }
    return out;
  }

  std::vector<std::string> unverified_programs() const {
    std::vector<std::string> out;
    for (const auto& id : all_of(NodeType::Program)) {
      const auto* n = g_.find(id);
      if (n->verification->status == VerificationStatus::FullyVerified) continue;
      bool annotated = false;
      for (const auto& c : g_.children(id)) annotated |= g_.find(c)->created_by == "annotator";
      if (!annotated) out.push_back(id);
    }
    return out;
  }

  // Seeded partial Fisher-Yates over the eligible list.
  std::vector<std::string> sample(std::vector<std::string> pool) {
    const std::size_t k = std::min<std::size_t>(pool.size(), spec_.selection_limit);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng_() % (pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
  }

  bool idea_proposer() {
    if (!budget_left()) return false;
    std::vector<std::string> existing;
    std::set<std::string> seen;
    for (const auto& id : all_of(NodeType::Idea)) {
      existing.push_back(g_.find(id)->content);
      seen.insert(normalize_whitespace(existing.back()));
    }
    const std::size_t cap = schedule_.idea_negatives_cap;
    std::string negatives;
    const std::size_t from = existing.size() > cap ? existing.size() - cap : 0;
    for (std::size_t i = from; i < existing.size(); ++i) negatives += "- " + existing[i] + "\n";
    if (negatives.empty()) negatives = "(none yet)\n";
    const auto prompt = templates_.render(
        EditorName::IdeaProposer,
        {{"n", std::to_string(spec_.fanout)}, {"existing_ideas", negatives}});
    const auto out = call(std::string(to_string(EditorName::IdeaProposer)), prompt, 1,
                          g_.root().id);
    if (!out) return true;
    std::vector<std::string> ideas;
    for (const auto& c : *out) {
      for (auto& i : parse_ideas(c)) ideas.push_back(std::move(i));
    }
    if (ideas.size() > static_cast<std::size_t>(spec_.fanout)) ideas.resize(spec_.fanout);
    for (const auto& idea : ideas) {
      Decision d;
      d.round = round_;
      d.editor = EditorName::IdeaProposer;
      d.parent = g_.root().id;
      d.candidate = idea;
      const std::string key = normalize_whitespace(idea);
      if (seen.count(key)) {
        d.reason = "duplicate idea";
      } else if (!room_for_node()) {
        d.reason = "node budget exhausted";
      } else {
        seen.insert(key);
        d.kept = true;
        d.reason = "new idea";
        d.node = g_.add_node(NodeType::Idea, idea, d.parent, d.editor, std::nullopt).id;
      }
      g_.add_decision(std::move(d));
    }
    return true;
  }

  bool per_node(std::vector<std::string> eligible) {
    for (const auto& id : sample(std::move(eligible))) {
      if (!budget_left()) return false;
      const GraphNode node = *g_.find(id);
      std::map<std::string, std::string> vars;
      if (node.type == NodeType::Idea) {
        vars["idea"] = node.content;
      } else {
        vars["program"] = node.content;
        vars["diagnostics"] = format_diagnostics(*node.verification);
      }
      const auto prompt = templates_.render(spec_.name, vars);
      const auto out = call(editor_channel(spec_.name, node.content), prompt, spec_.fanout, id);
      if (!out) continue;
      std::vector<std::string> programs;
      for (std::size_t i = 0; i < out->size() && i < static_cast<std::size_t>(spec_.fanout); ++i) {
        programs.push_back(extract_program((*out)[i]));
      }
      const auto outcomes = verifier_.verify_batch(programs);
      for (std::size_t i = 0; i < programs.size(); ++i) {
        judge(node, programs[i], outcomes[i]);
      }
    }
    return true;
  }

  void judge(const GraphNode& parent, const std::string& program, const VerificationOutcome& outcome) {
    Decision d;
    d.round = round_;
    d.editor = spec_.name;
    d.parent = parent.id;
    d.candidate = write_blob(dir_, program);
    std::string kept_text = program;
    VerificationOutcome kept_outcome = outcome;
    if (spec_.name == EditorName::Annotator) {
      std::vector<std::size_t> failing;
      const auto v = annotator_keep_rule(parent.content, *parent.verification, program, outcome, &failing);
      d.kept = v.kept;
      d.reason = v.reason;
      if (!v.kept && schedule_.salvage && !failing.empty()) {
        const std::string subset = drop_lines(program, failing);
        d.salvage_candidate = write_blob(dir_, subset);
        const auto so = verifier_.verify(subset);
        const auto sv = annotator_keep_rule(parent.content, *parent.verification, subset, so);
        d.salvage_kept = sv.kept;
        d.salvage_reason = sv.reason;
        if (sv.kept) {
          kept_text = subset;
          kept_outcome = so;
        }
      }
    } else {
      const auto v = program_keep_rule(program, outcome);
      d.kept = v.kept;
      d.reason = v.reason;
    }
    if ((d.kept || d.salvage_kept) && !room_for_node()) {
      d.kept = false;
      d.salvage_kept = false;
      d.reason = "node budget exhausted";
    }
    if (d.kept || d.salvage_kept) {
      d.node = g_.add_node(NodeType::Program, kept_text, parent.id, spec_.name, kept_outcome).id;
    }
    g_.add_decision(std::move(d));
  }

  EditGraph& g_;
  const ScheduleConfig& schedule_;
  const PromptTemplates& templates_;
  CompletionBackend& backend_;
  VerifierHarness& verifier_;
  const std::string& dir_;
  std::mt19937_64& rng_;
  std::size_t round_ = 0;
  EditorSpec spec_;
};

}  // namespace

PipelineReport run_pipeline(const ScheduleConfig& schedule, const PromptTemplates& templates,
                            CompletionBackend& backend, VerifierHarness& verifier,
                            const PipelineOptions& options) {
  schedule.validate();
  if (options.dir.empty()) throw ConfigError("synthesis needs an output directory");
  auto* scripted = dynamic_cast<ScriptedBackend*>(&backend);
  EditGraph g;
  std::mt19937_64 rng(schedule.seed);
  std::error_code ec;
  if (fs::exists(fs::path(options.dir) / "graph.json", ec)) {
    g = EditGraph::load(options.dir);
    if (g.state().schedule_hash != schedule.hash()) {
      throw ConfigError("checkpoint in " + options.dir + " was made with a different schedule");
    }
    if (g.state().templates_hash != templates.hash()) {
      throw ConfigError("checkpoint in " + options.dir + " was made with different prompt templates");
    }
    rng = rng_load(g.state().rng_state);
    if (scripted) scripted->restore_cursors(g.state().backend_cursors);
  } else {
    g.state().schedule_hash = schedule.hash();
    g.state().templates_hash = templates.hash();
    g.state().rng_state = rng_save(rng);
    g.save(options.dir);
  }

  PipelineReport report;
  Runner runner(g, schedule, templates, backend, verifier, options.dir, rng);
  while (!g.state().finished) {
    if (g.state().next_round >= schedule.rounds.size()) {
      g.state().finished = true;
      report.stop_reason = "schedule complete";
    } else {
      if (options.stop_after && report.invocations >= *options.stop_after) {
        report.stop_reason = "stopped after " + std::to_string(report.invocations) + " invocation(s)";
        break;
      }
      const std::size_t r = g.state().next_round;
      const bool go_on = runner.invoke(r, schedule.rounds[r]);
      ++report.invocations;
      g.state().next_round = r + 1;
      if (!go_on) {
        g.state().finished = true;
        report.stop_reason = runner.stop_reason;
      }
    }
    g.state().rng_state = rng_save(rng);
    if (scripted) g.state().backend_cursors = scripted->cursors();
    g.save(options.dir);
  }
  if (g.state().finished && report.stop_reason.empty()) report.stop_reason = "already finished";
  report.finished = g.state().finished;
  return report;
}

RevalidationReport revalidate(const EditGraph& graph, const std::string& dir,
                              VerifierHarness& verifier, const ScheduleConfig& schedule) {
  RevalidationReport rep;
  auto fail = [&](const Decision& d, const std::string& what) {
    rep.discrepancies.push_back("decision " + std::to_string(d.seq) + " (" +
                                std::string(to_string(d.editor)) + " on " + d.parent + "): " + what);
  };
  try {
    graph.check_invariants();
  } catch (const CheckpointError& e) {
    rep.discrepancies.push_back(e.what());
  }
  std::set<std::string> ideas_so_far;
  std::set<std::string> produced;
  for (const auto& d : graph.decisions()) {
    ++rep.checked;
    const GraphNode* parent = graph.find(d.parent);
    if (!parent) {
      fail(d, "unknown parent");
      continue;
    }
    bool kept = false;
    std::string text;
    std::optional<VerificationOutcome> outcome;
    if (d.editor == EditorName::IdeaProposer) {
      const std::string key = normalize_whitespace(d.candidate);
      const bool fresh = !ideas_so_far.count(key);
      if (d.kept && !fresh) fail(d, "kept a duplicate idea");
      if (!d.kept && fresh && d.reason != "node budget exhausted") fail(d, "dropped a new idea");
      if (!d.kept) continue;
      ideas_so_far.insert(key);
      text = d.candidate;
    } else {
      const std::string cand = read_blob(dir, d.candidate);
      const auto o = verifier.verify(cand);
      if (d.editor == EditorName::Annotator) {
        const auto po = verifier.verify(parent->content);
        std::vector<std::size_t> failing;
        const auto v = annotator_keep_rule(parent->content, po, cand, o, &failing);
        kept = v.kept;
        text = cand;
        outcome = o;
        if (d.salvage_candidate) {
          if (!schedule.salvage) fail(d, "salvage made with salvage disabled");
          const std::string subset = read_blob(dir, *d.salvage_candidate);
          if (failing.empty() || subset != drop_lines(cand, failing)) {
            fail(d, "salvage candidate is not the provable subset");
          }
          const auto so = verifier.verify(subset);
          const bool skept = annotator_keep_rule(parent->content, po, subset, so).kept;
          if (skept != d.salvage_kept && d.reason != "node budget exhausted") {
            fail(d, "salvage verdict differs");
          }
          if (!kept && skept) {
            text = subset;
            outcome = so;
          }
          kept = kept || skept;
        } else if (!kept && schedule.salvage && !failing.empty()) {
          fail(d, "salvage retry missing");
        }
      } else {
        kept = program_keep_rule(cand, o).kept;
        text = cand;
        outcome = o;
      }
      const bool recorded = d.kept || d.salvage_kept;
      if (kept != recorded && !(kept && d.reason == "node budget exhausted")) {
        fail(d, std::string("recorded ") + (recorded ? "kept" : "dropped") + ", recomputed " +
                    (kept ? "kept" : "dropped"));
      }
      if (!recorded) continue;
    }
    if (!d.node) {
      fail(d, "kept without a node");
      continue;
    }
    const GraphNode* n = graph.find(*d.node);
    if (!n || n->content != text) {
      fail(d, "node content differs from the judged candidate");
      continue;
    }
    if (outcome && !n->verification->same_result(*outcome)) fail(d, "stored verification differs");
    const auto ps = graph.parents(n->id);
    if (ps.size() != 1 || ps.front() != d.parent) fail(d, "node has the wrong parent");
    produced.insert(n->id);
  }
  for (const auto& n : graph.nodes()) {
    if (n.type != NodeType::Root && !produced.count(n.id)) {
      rep.discrepancies.push_back("node " + n.id + " has no kept decision");
    }
  }
  return rep;
}

SynthDataset export_dataset(const EditGraph& graph, PromptMode mode) {
  SynthDataset out;
  std::map<std::string, std::set<std::string>> held;  // program id -> kind + normalized text
  auto key_of = [](const std::string& kind, const std::string& text) {
    return kind + "\n" + normalize_whitespace(text);
  };
  for (const auto& n : graph.nodes()) {
    if (n.type != NodeType::Program) continue;
    auto& mine = held[n.id];
    for (const auto& a : parse(n.content).annotations) {
      mine.insert(key_of(std::string(to_string(a.annotation.kind)), a.annotation.text));
    }
  }
  std::size_t carried = 0;
  std::map<std::string, std::set<std::string>> unique_per_kind;
  for (const auto& n : graph.nodes()) {
    if (n.type != NodeType::Program) continue;
    std::set<std::string> inherited;
    for (const auto& anc : graph.lineage(n.id)) {
      if (anc == n.id) continue;
      const auto it = held.find(anc);
      if (it != held.end()) inherited.insert(it->second.begin(), it->second.end());
    }
    std::set<std::string> emitted;
    for (auto& ex : extract_pairs(SourceText{n.content, "graph:" + n.id}, mode)) {
      const std::string key = key_of(ex.meta.kind, ex.completion);
      if (inherited.count(key) || !emitted.insert(key).second) {
        ++carried;
        continue;
      }
      unique_per_kind[ex.meta.kind].insert(normalize_whitespace(ex.completion));
      out.examples.push_back(std::move(ex));
    }
  }
  out.manifest = summarize(out.examples, mode);
  out.manifest.origin = "synth";
  out.manifest.timestamp = utc_timestamp();
  json uniq = json::object();
  for (const auto* kind : {"invariant", "assert", "decreases"}) {
    const auto it = unique_per_kind.find(kind);
    uniq[kind] = it == unique_per_kind.end() ? 0 : it->second.size();
  }
  std::size_t programs = 0;
  for (const auto& n : graph.nodes()) programs += n.type == NodeType::Program;
  out.manifest.extra = {{"unique_per_kind", uniq},
                        {"carried_over_skipped", carried},
                        {"program_nodes", programs},
                        {"dedup_scope", "lineage"},
                        {"schedule_hash", graph.state().schedule_hash},
                        {"editor_templates_hash", graph.state().templates_hash}};
  return out;
}

}  // namespace vannot
