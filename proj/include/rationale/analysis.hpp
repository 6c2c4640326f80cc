#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rationale/graph.hpp"

namespace rationale {

enum class Mechanism { M1, M2 };

std::string_view mechanism_name(Mechanism m);
Mechanism parse_mechanism(std::string_view name);

struct FindingTexts {
  std::string d1;
  std::string r1;
  std::string d2;
  std::string r2;
  friend bool operator==(const FindingTexts&, const FindingTexts&) = default;
};

/// M1: Similar decisions whose rationales contradict each other.
/// M2: Contradicting decisions whose rationales are similar.
struct InconsistencyFinding {
  Mechanism mechanism = Mechanism::M1;
  std::string d1;
  std::string d2;
  double dd_score = 0.0;
  std::string r1;
  std::string r2;
  double rr_score = 0.0;
  FindingTexts texts;
  friend bool operator==(const InconsistencyFinding&, const InconsistencyFinding&) = default;
};

/// A prior decision that a new decision may conflict with. Transitive
/// findings go through a decision similar to the new one; direct findings
/// (`via` empty) are contradicted by the new decision itself.
struct ConflictFinding {
  std::string new_decision;
  std::optional<std::string> via_decision;
  std::string conflicting_decision;
  std::optional<double> sim_score;
  double contra_score = 0.0;
  bool direct = false;
  std::string new_text;
  std::string via_text;
  std::string conflicting_text;
  friend bool operator==(const ConflictFinding&, const ConflictFinding&) = default;
};

/// Stored edges of one kind scoring at least `threshold`, by descending
/// score and then (a, b).
std::vector<RelEdge> find_similar(const RationaleGraph& graph, double threshold);
std::vector<RelEdge> find_contradictions(const RationaleGraph& graph, double threshold);

/// Conflict check for a decision that is not yet in the graph. The graph is
/// not modified.
std::vector<ConflictFinding> check_conflicts(const RationaleGraph& graph, const DRTriple& new_decision,
                                             PairScorer& similarity, PairScorer& contradiction,
                                             const Thresholds& thresholds);

/// Scores rationale contradiction for every stored Similar edge at or above
/// thresholds.dd_similar and reports pairs at or above thresholds.rr.
std::vector<InconsistencyFinding> detect_m1(const RationaleGraph& graph, PairScorer& rationale_contradiction,
                                            const Thresholds& thresholds);

/// Mirror of detect_m1: Contradicts edges, rationale similarity.
std::vector<InconsistencyFinding> detect_m2(const RationaleGraph& graph, PairScorer& rationale_similarity,
                                            const Thresholds& thresholds);

/// Mechanism, then descending dd_score, then (d1, d2).
void sort_findings(std::vector<InconsistencyFinding>& findings);
void sort_conflicts(std::vector<ConflictFinding>& findings);

/// Throws InvariantError if a finding breaks its type invariants.
void validate_finding(const InconsistencyFinding& f, const std::optional<Thresholds>& thresholds);
void validate_conflict(const ConflictFinding& f, const std::optional<Thresholds>& thresholds);

enum class ReportFormat { Json, Markdown, Csv };

ReportFormat parse_report_format(std::string_view name);

/// Findings are validated and rendered in sort_findings order.
void render_report(std::span<const InconsistencyFinding> findings, ReportFormat format, std::ostream& out,
                   const std::optional<Thresholds>& thresholds = std::nullopt);
void render_report(std::span<const InconsistencyFinding> findings, ReportFormat format,
                   const std::filesystem::path& path, const std::optional<Thresholds>& thresholds = std::nullopt);

void render_conflicts(std::span<const ConflictFinding> findings, ReportFormat format, std::ostream& out,
                      const std::optional<Thresholds>& thresholds = std::nullopt);

struct FindingsDocument {
  std::optional<Thresholds> thresholds;
  std::vector<InconsistencyFinding> findings;
};

/// Reads back a JSON report written by render_report.
FindingsDocument parse_findings_json(std::string_view json_text, const std::string& source_name);

}  // namespace rationale
