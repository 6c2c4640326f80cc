#include "rationale/graph.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rationale/error.hpp"

namespace rationale {

namespace {

constexpr std::string_view kDecisionPrefix = "D:";
constexpr std::string_view kRationalePrefix = "R:";

std::string sentence_of(std::string_view node_id) { return std::string(node_id.substr(2)); }

nlohmann::json thresholds_json(const Thresholds& t) {
  return {{"dd_contradicts", t.dd_contradicts}, {"dd_similar", t.dd_similar}, {"rr", t.rr}};
}

template <typename Node>
nlohmann::json node_json(const Node& n) {
  return {{"commit_id", n.commit_id}, {"id", n.id}, {"sentence_id", n.sentence_id}, {"text", n.text}};
}

template <typename Node>
Node node_from(const nlohmann::json& j) {
  return Node{j.at("id").get<std::string>(), j.at("text").get<std::string>(),
              j.at("sentence_id").get<std::string>(), j.at("commit_id").get<std::string>()};
}

std::string dot_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out;
}

std::string score_label(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", s);
  return buf;
}

}  // namespace

std::string decision_id(std::string_view sentence_id) {
  return std::string(kDecisionPrefix) + std::string(sentence_id);
}

std::string rationale_id(std::string_view sentence_id) {
  return std::string(kRationalePrefix) + std::string(sentence_id);
}

bool RationaleGraph::contains_sentence(std::string_view sentence_id) const {
  return decisions_.count(decision_id(sentence_id)) > 0;
}

void RationaleGraph::add_triple(const DRTriple& t) {
  if (t.sentence_id.empty()) throw InvariantError("triple with empty sentence id");
  if (contains_sentence(t.sentence_id)) {
    throw InvariantError("duplicate sentence id '" + t.sentence_id + "'");
  }
  auto d = decision_id(t.sentence_id);
  auto r = rationale_id(t.sentence_id);
  decisions_.emplace(d, DecisionNode{d, t.decision_text, t.sentence_id, t.commit_id});
  rationales_.emplace(r, RationaleNode{r, t.rationale_text, t.sentence_id, t.commit_id});
}

void RationaleGraph::insert_edge(RelEdge e) {
  if (e.a == e.b) throw InvariantError("self-loop edge on '" + e.a + "'");
  if (e.b < e.a) std::swap(e.a, e.b);
  for (const auto* end : {&e.a, &e.b}) {
    if (!decisions_.count(*end)) throw InvariantError("edge endpoint '" + *end + "' is not a decision node");
  }
  if (!(e.score >= 0.0 && e.score <= 1.0)) {
    throw InvariantError("edge (" + e.a + ", " + e.b + ") has score outside [0, 1]");
  }
  EdgeKey key{e.a, e.b, e.kind};
  if (edges_.count(key)) {
    throw InvariantError("duplicate " + std::string(kind_name(e.kind)) + " edge (" + e.a + ", " + e.b + ")");
  }
  edges_.emplace(std::move(key), std::move(e));
}

const RelEdge* RationaleGraph::find_edge(std::string_view x, std::string_view y,
                                         RelationKind kind) const {
  std::string a(x);
  std::string b(y);
  if (b < a) std::swap(a, b);
  auto it = edges_.find(EdgeKey{a, b, kind});
  return it == edges_.end() ? nullptr : &it->second;
}

std::vector<RelEdge> RationaleGraph::edges_of(RelationKind kind) const {
  std::vector<RelEdge> out;
  for (const auto& [key, e] : edges_) {
    if (e.kind == kind) out.push_back(e);
  }
  return out;
}

const RationaleNode& RationaleGraph::rationale_of(std::string_view did) const {
  auto it = rationales_.find(rationale_id(sentence_of(did)));
  if (it == rationales_.end()) throw InvariantError("decision '" + std::string(did) + "' has no rationale");
  return it->second;
}

const DecisionNode& RationaleGraph::decision(std::string_view did) const {
  auto it = decisions_.find(std::string(did));
  if (it == decisions_.end()) throw InvariantError("unknown decision '" + std::string(did) + "'");
  return it->second;
}

std::vector<NodeText> RationaleGraph::decision_texts() const {
  std::vector<NodeText> out;
  out.reserve(decisions_.size());
  for (const auto& [id, d] : decisions_) out.push_back({id, d.text});
  return out;
}

void RationaleGraph::validate() const {
  for (const auto& [id, d] : decisions_) {
    if (id != d.id || id != decision_id(d.sentence_id)) {
      throw InvariantError("decision id '" + id + "' does not match its sentence id '" + d.sentence_id + "'");
    }
    auto r = rationales_.find(rationale_id(d.sentence_id));
    if (r == rationales_.end()) throw InvariantError("decision '" + id + "' has no rationale node");
    if (r->second.commit_id != d.commit_id) {
      throw InvariantError("decision '" + id + "' and its rationale disagree on commit id");
    }
  }
  for (const auto& [id, r] : rationales_) {
    if (id != r.id || id != rationale_id(r.sentence_id)) {
      throw InvariantError("rationale id '" + id + "' does not match its sentence id '" + r.sentence_id + "'");
    }
    if (!decisions_.count(decision_id(r.sentence_id))) {
      throw InvariantError("rationale '" + id + "' is not referenced by any decision");
    }
  }
  for (const auto& [key, e] : edges_) {
    if (!(e.a < e.b)) throw InvariantError("edge (" + e.a + ", " + e.b + ") is not in canonical order");
    for (const auto* end : {&e.a, &e.b}) {
      if (!decisions_.count(*end)) throw InvariantError("dangling edge endpoint '" + *end + "'");
    }
    if (!(e.score >= 0.0 && e.score <= 1.0)) {
      throw InvariantError("edge (" + e.a + ", " + e.b + ") has score outside [0, 1]");
    }
  }
}

bool RationaleGraph::same_content(const RationaleGraph& other) const {
  return decisions_ == other.decisions_ && rationales_ == other.rationales_ && edges_ == other.edges_;
}

RationaleGraph build_graph(std::span<const DRTriple> triples) {
  RationaleGraph g;
  for (const auto& t : triples) g.add_triple(t);
  return g;
}

std::vector<PairScore> score_graph(RationaleGraph& graph, PairScorer& similarity,
                                   PairScorer& contradiction, const Thresholds& thresholds,
                                   const ScoreOptions& options) {
  thresholds.validate();
  const auto texts = graph.decision_texts();
  auto sim_options = options;
  auto con_options = options;
  if (options.checkpoint) {
    sim_options.checkpoint = std::filesystem::path(options.checkpoint->string() + ".similar");
    con_options.checkpoint = std::filesystem::path(options.checkpoint->string() + ".contradicts");
  }
  auto sim = score_all_pairs(similarity, texts, RelationKind::Similar, sim_options);
  auto con = score_all_pairs(contradiction, texts, RelationKind::Contradicts, con_options);

  // Score first, then commit, so a scorer failure leaves the graph as it was.
  auto updated = graph;
  updated.clear_edges();
  for (auto& e : apply_threshold(sim, thresholds.dd_similar)) updated.insert_edge(std::move(e));
  for (auto& e : apply_threshold(con, thresholds.dd_contradicts)) updated.insert_edge(std::move(e));
  updated.meta().thresholds = thresholds;
  updated.meta().scorer_ids[std::string(kind_name(RelationKind::Similar))] = similarity.id();
  updated.meta().scorer_ids[std::string(kind_name(RelationKind::Contradicts))] = contradiction.id();
  graph = std::move(updated);

  sim.insert(sim.end(), std::make_move_iterator(con.begin()), std::make_move_iterator(con.end()));
  return sim;
}

std::vector<RelEdge> add_decision(RationaleGraph& graph, const DRTriple& triple,
                                  PairScorer& similarity, PairScorer& contradiction,
                                  const Thresholds& thresholds) {
  thresholds.validate();
  if (graph.contains_sentence(triple.sentence_id)) {
    throw InvariantError("duplicate sentence id '" + triple.sentence_id + "'");
  }
  const auto new_id = decision_id(triple.sentence_id);
  std::vector<NodeText> texts{{new_id, triple.decision_text}};
  for (auto& t : graph.decision_texts()) texts.push_back(std::move(t));
  std::vector<IndexPair> pairs;
  for (std::size_t j = 1; j < texts.size(); ++j) pairs.push_back({0, j});

  const auto sim = score_pairs(similarity, texts, pairs, RelationKind::Similar);
  const auto con = score_pairs(contradiction, texts, pairs, RelationKind::Contradicts);

  auto updated = graph;
  updated.add_triple(triple);
  std::vector<RelEdge> added;
  for (auto& e : apply_threshold(sim, thresholds.dd_similar)) added.push_back(std::move(e));
  for (auto& e : apply_threshold(con, thresholds.dd_contradicts)) added.push_back(std::move(e));
  for (const auto& e : added) updated.insert_edge(e);
  updated.meta().thresholds = thresholds;
  updated.meta().scorer_ids[std::string(kind_name(RelationKind::Similar))] = similarity.id();
  updated.meta().scorer_ids[std::string(kind_name(RelationKind::Contradicts))] = contradiction.id();
  graph = std::move(updated);
  return added;
}

std::string serialize_graph(const RationaleGraph& graph) {
  nlohmann::json doc;
  doc["schema_version"] = kGraphSchemaVersion;
  nlohmann::json meta = nlohmann::json::object();
  const auto& m = graph.meta();
  meta["build_timestamp"] = m.build_timestamp;
  meta["scorer_ids"] = m.scorer_ids;
  meta["source_project"] = m.source_project;
  meta["thresholds"] = m.thresholds ? thresholds_json(*m.thresholds) : nlohmann::json(nullptr);
  doc["meta"] = std::move(meta);
  auto& decisions = doc["decisions"] = nlohmann::json::array();
  for (const auto& [id, d] : graph.decisions()) decisions.push_back(node_json(d));
  auto& rationales = doc["rationales"] = nlohmann::json::array();
  for (const auto& [id, r] : graph.rationales()) rationales.push_back(node_json(r));
  auto& edges = doc["edges"] = nlohmann::json::array();
  for (const auto& [key, e] : graph.edges()) {
    edges.push_back({{"a", e.a},
                     {"b", e.b},
                     {"kind", kind_name(e.kind)},
                     {"score", e.score},
                     {"scorer_id", e.scorer_id}});
  }
  return doc.dump(2) + "\n";
}

RationaleGraph parse_graph(std::string_view json_text, const std::string& source_name) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(source_name + ": invalid JSON: " + e.what());
  }
  const auto version = doc.value("schema_version", -1);
  if (version != kGraphSchemaVersion) {
    throw Error(source_name + ": unsupported schema_version " + std::to_string(version) +
                " (this build reads version " + std::to_string(kGraphSchemaVersion) + ")");
  }
  RationaleGraph g;
  try {
    const auto& meta = doc.at("meta");
    g.meta().build_timestamp = meta.value("build_timestamp", "");
    g.meta().source_project = meta.value("source_project", "");
    if (meta.contains("scorer_ids")) {
      g.meta().scorer_ids = meta.at("scorer_ids").get<std::map<std::string, std::string>>();
    }
    if (meta.contains("thresholds") && !meta.at("thresholds").is_null()) {
      const auto& t = meta.at("thresholds");
      g.meta().thresholds = Thresholds{t.at("dd_similar").get<double>(),
                                       t.at("dd_contradicts").get<double>(), t.at("rr").get<double>()};
    }
    // Nodes are read directly so that a broken link surfaces in validate()
    // rather than being repaired by add_triple().
    std::map<std::string, DecisionNode> decisions;
    std::map<std::string, RationaleNode> rationales;
    for (const auto& j : doc.at("decisions")) {
      auto d = node_from<DecisionNode>(j);
      if (!decisions.emplace(d.id, d).second) throw InvariantError("duplicate decision id '" + d.id + "'");
    }
    for (const auto& j : doc.at("rationales")) {
      auto r = node_from<RationaleNode>(j);
      if (!rationales.emplace(r.id, r).second) throw InvariantError("duplicate rationale id '" + r.id + "'");
    }
    for (const auto& [id, d] : decisions) {
      auto r = rationales.find(rationale_id(d.sentence_id));
      if (id != decision_id(d.sentence_id)) {
        throw InvariantError("decision id '" + id + "' does not match its sentence id '" + d.sentence_id + "'");
      }
      if (r == rationales.end()) throw InvariantError("decision '" + id + "' has no rationale node");
      g.add_triple({d.sentence_id, d.commit_id, d.text, r->second.text, {}});
      if (r->second.commit_id != d.commit_id) {
        throw InvariantError("decision '" + id + "' and its rationale disagree on commit id");
      }
    }
    for (const auto& [id, r] : rationales) {
      if (!decisions.count(decision_id(r.sentence_id)) || id != rationale_id(r.sentence_id)) {
        throw InvariantError("rationale '" + id + "' is not referenced by any decision");
      }
    }
    for (const auto& j : doc.at("edges")) {
      RelEdge e{j.at("a").get<std::string>(), j.at("b").get<std::string>(),
                parse_kind(j.at("kind").get<std::string>()), j.at("score").get<double>(),
                j.at("scorer_id").get<std::string>()};
      if (!(e.a < e.b)) throw InvariantError("edge (" + e.a + ", " + e.b + ") is not in canonical order");
      for (const auto* end : {&e.a, &e.b}) {
        if (!decisions.count(*end)) throw InvariantError("dangling edge endpoint '" + *end + "'");
      }
      g.insert_edge(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(source_name + ": graph does not match schema: " + e.what());
  } catch (const InvariantError& e) {
    throw InvariantError(source_name + ": " + e.what());
  }
  g.validate();
  return g;
}

void save_graph(const RationaleGraph& graph, const std::filesystem::path& path) {
  graph.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write graph '" + path.string() + "'");
  out << serialize_graph(graph);
  if (!out) throw Error("failed writing graph '" + path.string() + "'");
}

RationaleGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read graph '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_graph(buf.str(), path.string());
}

void export_dot(const RationaleGraph& graph, std::ostream& out) {
  out << "digraph {\n";
  for (const auto& [id, d] : graph.decisions()) {
    out << "  \"" << dot_escape(id) << "\" [shape=box, label=\"" << dot_escape(d.text) << "\"];\n";
  }
  for (const auto& [id, r] : graph.rationales()) {
    out << "  \"" << dot_escape(id) << "\" [shape=ellipse, label=\"" << dot_escape(r.text) << "\"];\n";
  }
  for (const auto& [id, d] : graph.decisions()) {
    out << "  \"" << dot_escape(id) << "\" -> \"" << dot_escape(rationale_id(d.sentence_id))
        << "\" [label=\"has_rationale\"];\n";
  }
  for (const auto& [key, e] : graph.edges()) {
    const bool similar = e.kind == RelationKind::Similar;
    out << "  \"" << dot_escape(e.a) << "\" -> \"" << dot_escape(e.b) << "\" [dir=none, style="
        << (similar ? "solid, color=blue" : "dashed, color=red") << ", label=\"" << kind_name(e.kind)
        << " (" << score_label(e.score) << ")\"];\n";
  }
  out << "}\n";
}

void export_dot(const RationaleGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write DOT file '" + path.string() + "'");
  export_dot(graph, out);
}

}  // namespace rationale
