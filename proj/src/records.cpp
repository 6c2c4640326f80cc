#include "rationale/records.hpp"

#include <fstream>

#include "rationale/error.hpp"
#include "rationale/text.hpp"

namespace rationale::records {

nlohmann::json to_json(const Sentence& s) {
  auto labels = nlohmann::json::array();
  for (Label l : {Label::Decision, Label::Rationale, Label::SupportingFacts}) {
    if (s.labels.has(l)) labels.push_back(label_name(l));
  }
  return {{"id", s.id}, {"commit_id", s.commit_id}, {"index", s.index}, {"text", s.text}, {"labels", labels}};
}

Sentence sentence_from_json(const nlohmann::json& j) {
  Sentence s;
  s.id = j.at("id").get<std::string>();
  s.commit_id = j.at("commit_id").get<std::string>();
  s.index = j.at("index").get<std::size_t>();
  s.text = j.at("text").get<std::string>();
  if (j.contains("labels")) {
    for (const auto& l : j.at("labels")) {
      const auto one = LabelSet::parse(l.get<std::string>());
      for (Label x : {Label::Decision, Label::Rationale, Label::SupportingFacts}) {
        if (one.has(x)) s.labels.insert(x);
      }
    }
  }
  if (s.id != sentence_id(s.commit_id, s.index)) {
    throw Error("sentence id '" + s.id + "' does not match commit_id#index");
  }
  if (text::trim(s.text).empty()) throw Error("sentence '" + s.id + "' has empty text");
  return s;
}

nlohmann::json to_json(const DRTriple& t) {
  return {{"sentence_id", t.sentence_id},
          {"commit_id", t.commit_id},
          {"decision", t.decision_text},
          {"rationale", t.rationale_text},
          {"extractor_id", t.extractor_id}};
}

DRTriple triple_from_json(const nlohmann::json& j) {
  DRTriple t{j.at("sentence_id").get<std::string>(), j.at("commit_id").get<std::string>(),
             j.at("decision").get<std::string>(), j.at("rationale").get<std::string>(),
             j.value("extractor_id", "")};
  if (is_missing_entity(t.decision_text) || is_missing_entity(t.rationale_text)) {
    throw Error("triple for sentence '" + t.sentence_id + "' has a missing entity");
  }
  return t;
}

nlohmann::json to_json(const ExtractionOutcome& o) {
  auto opt = [](const std::optional<std::string>& s) { return s ? nlohmann::json(*s) : nlohmann::json(nullptr); };
  return {{"sentence_id", o.sentence_id},
          {"commit_id", o.commit_id},
          {"raw_decision", opt(o.raw_decision)},
          {"raw_rationale", opt(o.raw_rationale)},
          {"status", status_name(o.status)},
          {"extractor_id", o.extractor_id}};
}

nlohmann::json to_json(const MetricsReport& m) {
  return {{"task", task_name(m.task)},
          {"tp", m.counts.tp},
          {"fp", m.counts.fp},
          {"fn", m.counts.fn},
          {"tn", m.counts.tn},
          {"accuracy", m.accuracy},
          {"precision_pos", m.precision_pos},
          {"recall_pos", m.recall_pos},
          {"f1_pos", m.f1_pos},
          {"precision_neg", m.precision_neg},
          {"recall_neg", m.recall_neg},
          {"f1_neg", m.f1_neg},
          {"undefined", m.undefined}};
}

nlohmann::json to_json(const CrossValidationReport& r) {
  auto folds = nlohmann::json::array();
  for (const auto& f : r.folds) folds.push_back(to_json(f));
  return {{"task", task_name(r.task)},
          {"aggregation", "unweighted mean of per-fold metrics; counts are summed"},
          {"folds", folds},
          {"mean", to_json(r.mean)}};
}

std::vector<nlohmann::json> read_json_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  std::vector<nlohmann::json> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      rows.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.string(), line_no, std::string("invalid JSON: ") + e.what());
    }
  }
  return rows;
}

void write_json_lines(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  for (const auto& r : rows) out << r.dump() << '\n';
}

namespace {

template <typename T, typename F>
std::vector<T> read_records(const std::filesystem::path& path, F&& convert) {
  std::vector<T> out;
  std::size_t n = 0;
  for (const auto& row : read_json_lines(path)) {
    ++n;
    try {
      out.push_back(convert(row));
    } catch (const nlohmann::json::exception& e) {
      throw Error(path.string() + ": record " + std::to_string(n) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(path.string() + ": record " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<Sentence> read_sentences(const std::filesystem::path& path) {
  return read_records<Sentence>(path, sentence_from_json);
}

std::vector<DRTriple> read_triples(const std::filesystem::path& path) {
  return read_records<DRTriple>(path, triple_from_json);
}

}  // namespace rationale::records
