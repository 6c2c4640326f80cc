#include "rationale/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "rationale/csv.hpp"
#include "rationale/error.hpp"

namespace rationale {

namespace {

constexpr const char* kStoredEdgesNote =
    "only decision pairs holding a stored edge are examined; pairs below the graph's "
    "admission threshold are not rescored";

std::vector<RelEdge> edges_at_least(const RationaleGraph& graph, RelationKind kind, double threshold) {
  std::vector<RelEdge> out;
  for (auto& e : graph.edges_of(kind)) {
    if (e.score >= threshold) out.push_back(std::move(e));
  }
  std::stable_sort(out.begin(), out.end(), [](const RelEdge& x, const RelEdge& y) {
    if (x.score != y.score) return x.score > y.score;
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });
  return out;
}

std::vector<double> score_checked(PairScorer& scorer, const std::vector<TextPair>& pairs,
                                  const std::vector<std::string>& labels) {
  if (pairs.empty()) return {};
  auto scores = scorer.score(pairs);
  if (scores.size() != pairs.size()) {
    throw ProtocolError("scorer " + scorer.id() + " returned " + std::to_string(scores.size()) +
                        " scores for " + std::to_string(pairs.size()) + " pairs");
  }
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (!(scores[k] >= 0.0 && scores[k] <= 1.0)) {
      throw ProtocolError("scorer " + scorer.id() + " returned " + std::to_string(scores[k]) +
                          " for pair " + labels[k] + "; scores must lie in [0, 1]");
    }
  }
  return scores;
}

std::vector<InconsistencyFinding> detect(const RationaleGraph& graph, PairScorer& rr_scorer,
                                         const Thresholds& thresholds, Mechanism mechanism) {
  thresholds.validate();
  const auto dd_kind = mechanism == Mechanism::M1 ? RelationKind::Similar : RelationKind::Contradicts;
  const double dd_threshold = mechanism == Mechanism::M1 ? thresholds.dd_similar : thresholds.dd_contradicts;
  const auto edges = edges_at_least(graph, dd_kind, dd_threshold);

  std::vector<TextPair> pairs;
  std::vector<std::string> labels;
  for (const auto& e : edges) {
    const auto& r1 = graph.rationale_of(e.a);
    const auto& r2 = graph.rationale_of(e.b);
    pairs.push_back({r1.text, r2.text});
    labels.push_back("(" + r1.id + ", " + r2.id + ")");
  }
  const auto rr_scores = score_checked(rr_scorer, pairs, labels);

  std::vector<InconsistencyFinding> out;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (rr_scores[k] < thresholds.rr) continue;
    const auto& e = edges[k];
    const auto& r1 = graph.rationale_of(e.a);
    const auto& r2 = graph.rationale_of(e.b);
    out.push_back({mechanism, e.a, e.b, e.score, r1.id, r2.id, rr_scores[k],
                   {graph.decision(e.a).text, r1.text, graph.decision(e.b).text, r2.text}});
  }
  sort_findings(out);
  return out;
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string number(double v) { return nlohmann::json(v).dump(); }

std::string md_cell(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else if (c == '\n') out.push_back(' ');
    else out.push_back(c);
  }
  return out;
}

std::string relation(RelationKind kind, double score) {
  return std::string(kind_name(kind)) + " (" + fixed2(score) + ")";
}

nlohmann::json thresholds_json(const std::optional<Thresholds>& t) {
  if (!t) return nullptr;
  return {{"dd_contradicts", t->dd_contradicts}, {"dd_similar", t->dd_similar}, {"rr", t->rr}};
}

}  // namespace

std::string_view mechanism_name(Mechanism m) { return m == Mechanism::M1 ? "M1" : "M2"; }

Mechanism parse_mechanism(std::string_view name) {
  if (name == "M1" || name == "m1") return Mechanism::M1;
  if (name == "M2" || name == "m2") return Mechanism::M2;
  throw Error("unknown mechanism '" + std::string(name) + "'");
}

std::vector<RelEdge> find_similar(const RationaleGraph& graph, double threshold) {
  return edges_at_least(graph, RelationKind::Similar, threshold);
}

std::vector<RelEdge> find_contradictions(const RationaleGraph& graph, double threshold) {
  return edges_at_least(graph, RelationKind::Contradicts, threshold);
}

std::vector<ConflictFinding> check_conflicts(const RationaleGraph& graph, const DRTriple& new_decision,
                                             PairScorer& similarity, PairScorer& contradiction,
                                             const Thresholds& thresholds) {
  thresholds.validate();
  if (graph.contains_sentence(new_decision.sentence_id)) {
    throw InvariantError("decision for sentence '" + new_decision.sentence_id + "' is already in the graph");
  }
  const auto new_id = decision_id(new_decision.sentence_id);
  std::vector<TextPair> pairs;
  std::vector<std::string> labels;
  std::vector<const DecisionNode*> nodes;
  for (const auto& [id, d] : graph.decisions()) {
    pairs.push_back({new_decision.decision_text, d.text});
    labels.push_back("(" + new_id + ", " + id + ")");
    nodes.push_back(&d);
  }
  const auto sim = score_checked(similarity, pairs, labels);
  const auto con = score_checked(contradiction, pairs, labels);

  std::vector<ConflictFinding> out;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const auto& d = *nodes[k];
    if (con[k] >= thresholds.dd_contradicts) {
      out.push_back({new_id, std::nullopt, d.id, std::nullopt, con[k], true, new_decision.decision_text, {}, d.text});
    }
    if (sim[k] < thresholds.dd_similar) continue;
    for (const auto& e : graph.edges_of(RelationKind::Contradicts)) {
      if (e.score < thresholds.dd_contradicts) continue;
      if (e.a != d.id && e.b != d.id) continue;
      const auto& other = graph.decision(e.a == d.id ? e.b : e.a);
      out.push_back({new_id, d.id, other.id, sim[k], e.score, false, new_decision.decision_text, d.text,
                     other.text});
    }
  }
  sort_conflicts(out);
  return out;
}

std::vector<InconsistencyFinding> detect_m1(const RationaleGraph& graph, PairScorer& rationale_contradiction,
                                            const Thresholds& thresholds) {
  return detect(graph, rationale_contradiction, thresholds, Mechanism::M1);
}

std::vector<InconsistencyFinding> detect_m2(const RationaleGraph& graph, PairScorer& rationale_similarity,
                                            const Thresholds& thresholds) {
  return detect(graph, rationale_similarity, thresholds, Mechanism::M2);
}

void sort_findings(std::vector<InconsistencyFinding>& findings) {
  std::stable_sort(findings.begin(), findings.end(),
                   [](const InconsistencyFinding& x, const InconsistencyFinding& y) {
                     if (x.mechanism != y.mechanism) return x.mechanism < y.mechanism;
                     if (x.dd_score != y.dd_score) return x.dd_score > y.dd_score;
                     return std::tie(x.d1, x.d2) < std::tie(y.d1, y.d2);
                   });
}

void sort_conflicts(std::vector<ConflictFinding>& findings) {
  std::stable_sort(findings.begin(), findings.end(), [](const ConflictFinding& x, const ConflictFinding& y) {
    if (x.direct != y.direct) return x.direct;
    if (x.contra_score != y.contra_score) return x.contra_score > y.contra_score;
    const auto xv = x.via_decision.value_or("");
    const auto yv = y.via_decision.value_or("");
    return std::tie(xv, x.conflicting_decision) < std::tie(yv, y.conflicting_decision);
  });
}

void validate_finding(const InconsistencyFinding& f, const std::optional<Thresholds>& t) {
  auto fail = [&](const std::string& why) {
    throw InvariantError(std::string(mechanism_name(f.mechanism)) + " finding (" + f.d1 + ", " + f.d2 +
                         "): " + why);
  };
  if (f.d1 == f.d2) fail("decisions are identical");
  if (!(f.d1 < f.d2)) fail("decisions are not in canonical order");
  for (double s : {f.dd_score, f.rr_score}) {
    if (!(s >= 0.0 && s <= 1.0)) fail("score outside [0, 1]");
  }
  if (t) {
    const double dd = f.mechanism == Mechanism::M1 ? t->dd_similar : t->dd_contradicts;
    if (f.dd_score < dd) fail("decision score below threshold");
    if (f.rr_score < t->rr) fail("rationale score below threshold");
  }
}

void validate_conflict(const ConflictFinding& f, const std::optional<Thresholds>& t) {
  auto fail = [&](const std::string& why) {
    throw InvariantError("conflict finding (" + f.new_decision + ", " + f.conflicting_decision + "): " + why);
  };
  if (f.direct != !f.via_decision.has_value()) fail("direct flag disagrees with via");
  if (f.new_decision == f.conflicting_decision) fail("ids are not distinct");
  if (f.via_decision && (*f.via_decision == f.new_decision || *f.via_decision == f.conflicting_decision)) {
    fail("ids are not distinct");
  }
  if (!f.direct && !f.sim_score) fail("transitive finding without similarity score");
  if (t) {
    if (f.contra_score < t->dd_contradicts) fail("contradiction score below threshold");
    if (f.sim_score && *f.sim_score < t->dd_similar) fail("similarity score below threshold");
  }
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "json") return ReportFormat::Json;
  if (name == "markdown" || name == "md") return ReportFormat::Markdown;
  if (name == "csv") return ReportFormat::Csv;
  throw UsageError("unknown report format '" + std::string(name) + "' (expected json|markdown|csv)");
}

void render_report(std::span<const InconsistencyFinding> findings, ReportFormat format, std::ostream& out,
                   const std::optional<Thresholds>& thresholds) {
  std::vector<InconsistencyFinding> sorted(findings.begin(), findings.end());
  for (const auto& f : sorted) validate_finding(f, thresholds);
  sort_findings(sorted);

  switch (format) {
    case ReportFormat::Json: {
      nlohmann::json doc;
      doc["thresholds"] = thresholds_json(thresholds);
      doc["note"] = kStoredEdgesNote;
      auto& arr = doc["findings"] = nlohmann::json::array();
      for (const auto& f : sorted) {
        arr.push_back({{"mechanism", mechanism_name(f.mechanism)},
                       {"d1", f.d1},
                       {"d2", f.d2},
                       {"dd_score", f.dd_score},
                       {"r1", f.r1},
                       {"r2", f.r2},
                       {"rr_score", f.rr_score},
                       {"texts", {{"d1", f.texts.d1}, {"r1", f.texts.r1}, {"d2", f.texts.d2}, {"r2", f.texts.r2}}}});
      }
      out << doc.dump(2) << '\n';
      break;
    }
    case ReportFormat::Markdown: {
      out << "# Inconsistency findings\n\n";
      if (thresholds) {
        out << "Thresholds: decision similar " << fixed2(thresholds->dd_similar) << ", decision contradicts "
            << fixed2(thresholds->dd_contradicts) << ", rationale " << fixed2(thresholds->rr) << ".\n\n";
      }
      out << "Note: " << kStoredEdgesNote << ".\n\n";
      out << "| No | D1 | R1 | D2 | R2 | D/D Relation | R/R Relation |\n";
      out << "|---|---|---|---|---|---|---|\n";
      std::size_t n = 0;
      for (const auto& f : sorted) {
        const bool m1 = f.mechanism == Mechanism::M1;
        out << "| " << ++n << " | " << md_cell(f.texts.d1) << " | " << md_cell(f.texts.r1) << " | "
            << md_cell(f.texts.d2) << " | " << md_cell(f.texts.r2) << " | "
            << relation(m1 ? RelationKind::Similar : RelationKind::Contradicts, f.dd_score) << " | "
            << relation(m1 ? RelationKind::Contradicts : RelationKind::Similar, f.rr_score) << " |\n";
      }
      break;
    }
    case ReportFormat::Csv: {
      csv::write_row(out, {"mechanism", "d1", "d2", "dd_score", "r1", "r2", "rr_score", "d1_text", "r1_text",
                           "d2_text", "r2_text"});
      for (const auto& f : sorted) {
        csv::write_row(out, {std::string(mechanism_name(f.mechanism)), f.d1, f.d2, number(f.dd_score), f.r1, f.r2,
                             number(f.rr_score), f.texts.d1, f.texts.r1, f.texts.d2, f.texts.r2});
      }
      break;
    }
  }
}

void render_report(std::span<const InconsistencyFinding> findings, ReportFormat format,
                   const std::filesystem::path& path, const std::optional<Thresholds>& thresholds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write report '" + path.string() + "'");
  render_report(findings, format, out, thresholds);
}

void render_conflicts(std::span<const ConflictFinding> findings, ReportFormat format, std::ostream& out,
                      const std::optional<Thresholds>& thresholds) {
  std::vector<ConflictFinding> sorted(findings.begin(), findings.end());
  for (const auto& f : sorted) validate_conflict(f, thresholds);
  sort_conflicts(sorted);

  switch (format) {
    case ReportFormat::Json: {
      nlohmann::json doc;
      doc["thresholds"] = thresholds_json(thresholds);
      auto& arr = doc["findings"] = nlohmann::json::array();
      for (const auto& f : sorted) {
        arr.push_back({{"new", f.new_decision},
                       {"via", f.via_decision ? nlohmann::json(*f.via_decision) : nlohmann::json(nullptr)},
                       {"conflicting", f.conflicting_decision},
                       {"sim_score", f.sim_score ? nlohmann::json(*f.sim_score) : nlohmann::json(nullptr)},
                       {"contra_score", f.contra_score},
                       {"direct", f.direct},
                       {"texts", {{"new", f.new_text}, {"via", f.via_text}, {"conflicting", f.conflicting_text}}}});
      }
      out << doc.dump(2) << '\n';
      break;
    }
    case ReportFormat::Markdown: {
      out << "# Conflict findings\n\n";
      out << "| No | New decision | Via (similar) | Conflicting decision | Similarity | Contradiction | Kind |\n";
      out << "|---|---|---|---|---|---|---|\n";
      std::size_t n = 0;
      for (const auto& f : sorted) {
        out << "| " << ++n << " | " << md_cell(f.new_text) << " | " << (f.direct ? "-" : md_cell(f.via_text))
            << " | " << md_cell(f.conflicting_text) << " | " << (f.sim_score ? fixed2(*f.sim_score) : "-") << " | "
            << fixed2(f.contra_score) << " | " << (f.direct ? "direct" : "transitive") << " |\n";
      }
      break;
    }
    case ReportFormat::Csv: {
      csv::write_row(out, {"new", "via", "conflicting", "sim_score", "contra_score", "direct"});
      for (const auto& f : sorted) {
        csv::write_row(out, {f.new_decision, f.via_decision.value_or(""), f.conflicting_decision,
                             f.sim_score ? number(*f.sim_score) : "", number(f.contra_score),
                             f.direct ? "true" : "false"});
      }
      break;
    }
  }
}

FindingsDocument parse_findings_json(std::string_view json_text, const std::string& source_name) {
  FindingsDocument doc;
  try {
    const auto j = nlohmann::json::parse(json_text);
    if (j.contains("thresholds") && !j.at("thresholds").is_null()) {
      const auto& t = j.at("thresholds");
      doc.thresholds = Thresholds{t.at("dd_similar").get<double>(), t.at("dd_contradicts").get<double>(),
                                  t.at("rr").get<double>()};
    }
    for (const auto& f : j.at("findings")) {
      const auto& t = f.at("texts");
      doc.findings.push_back({parse_mechanism(f.at("mechanism").get<std::string>()), f.at("d1").get<std::string>(),
                              f.at("d2").get<std::string>(), f.at("dd_score").get<double>(),
                              f.at("r1").get<std::string>(), f.at("r2").get<std::string>(),
                              f.at("rr_score").get<double>(),
                              {t.at("d1").get<std::string>(), t.at("r1").get<std::string>(),
                               t.at("d2").get<std::string>(), t.at("r2").get<std::string>()}});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(source_name + ": findings file does not match schema: " + e.what());
  }
  return doc;
}

}  // namespace rationale
