#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "rationale/extraction.hpp"
#include "rationale/scoring.hpp"

namespace rationale {

inline constexpr int kGraphSchemaVersion = 1;

struct DecisionNode {
  std::string id;  // "D:<sentence_id>"
  std::string text;
  std::string sentence_id;
  std::string commit_id;
  friend bool operator==(const DecisionNode&, const DecisionNode&) = default;
};

struct RationaleNode {
  std::string id;  // "R:<sentence_id>"
  std::string text;
  std::string sentence_id;
  std::string commit_id;
  friend bool operator==(const RationaleNode&, const RationaleNode&) = default;
};

std::string decision_id(std::string_view sentence_id);
std::string rationale_id(std::string_view sentence_id);

struct GraphMeta {
  std::optional<Thresholds> thresholds;
  std::map<std::string, std::string> scorer_ids;  // kind name -> scorer id
  std::string build_timestamp;
  std::string source_project;
  friend bool operator==(const GraphMeta&, const GraphMeta&) = default;
};

/// Decision and rationale nodes joined one-to-one by has_rationale, plus
/// scored Similar/Contradicts edges between decisions. Every decision
/// "D:x" is linked to the rationale "R:x" of the same sentence.
class RationaleGraph {
 public:
  using EdgeKey = std::tuple<std::string, std::string, RelationKind>;

  const std::map<std::string, DecisionNode>& decisions() const { return decisions_; }
  const std::map<std::string, RationaleNode>& rationales() const { return rationales_; }
  const std::map<EdgeKey, RelEdge>& edges() const { return edges_; }
  GraphMeta& meta() { return meta_; }
  const GraphMeta& meta() const { return meta_; }

  bool contains_sentence(std::string_view sentence_id) const;

  /// Adds the decision/rationale node pair of a triple. Throws
  /// InvariantError on a duplicate sentence id.
  void add_triple(const DRTriple& triple);

  /// Stores an edge with its endpoints put in canonical order. Throws
  /// InvariantError for a self-loop, an unknown endpoint or a duplicate.
  void insert_edge(RelEdge edge);

  void clear_edges() { edges_.clear(); }

  /// Either endpoint order finds the same edge.
  const RelEdge* find_edge(std::string_view x, std::string_view y, RelationKind kind) const;

  std::vector<RelEdge> edges_of(RelationKind kind) const;
  const RationaleNode& rationale_of(std::string_view decision_id) const;
  const DecisionNode& decision(std::string_view decision_id) const;

  /// Decision ids and texts in id order, ready for pair scoring.
  std::vector<NodeText> decision_texts() const;

  /// Checks node, link and edge invariants; throws InvariantError.
  void validate() const;

  /// Structural equality: nodes and edges, metadata excluded.
  bool same_content(const RationaleGraph& other) const;
  friend bool operator==(const RationaleGraph&, const RationaleGraph&) = default;

 private:
  std::map<std::string, DecisionNode> decisions_;
  std::map<std::string, RationaleNode> rationales_;
  std::map<EdgeKey, RelEdge> edges_;
  GraphMeta meta_;
};

/// Nodes and has_rationale links only; no edges.
RationaleGraph build_graph(std::span<const DRTriple> triples);

/// Scores every decision pair with both scorers and replaces the stored
/// edges with those passing the decision-decision thresholds. Returns all
/// raw scores.
std::vector<PairScore> score_graph(RationaleGraph& graph, PairScorer& similarity,
                                   PairScorer& contradiction, const Thresholds& thresholds,
                                   const ScoreOptions& options = {});

/// Inserts one triple and scores it against every existing decision. Only
/// new edges are created. On scorer failure the graph is left unchanged.
std::vector<RelEdge> add_decision(RationaleGraph& graph, const DRTriple& triple,
                                  PairScorer& similarity, PairScorer& contradiction,
                                  const Thresholds& thresholds);

/// Deterministic JSON text: sorted keys, nodes and edges sorted by id.
std::string serialize_graph(const RationaleGraph& graph);
RationaleGraph parse_graph(std::string_view json_text, const std::string& source_name = "<graph>");

void save_graph(const RationaleGraph& graph, const std::filesystem::path& path);
RationaleGraph load_graph(const std::filesystem::path& path);

/// Graphviz rendering: boxes for decisions, ellipses for rationales,
/// has_rationale arrows, Similar edges solid and Contradicts dashed.
void export_dot(const RationaleGraph& graph, std::ostream& out);
void export_dot(const RationaleGraph& graph, const std::filesystem::path& path);

}  // namespace rationale
