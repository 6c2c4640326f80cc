#pragma once

// JSON-lines record formats for the intermediate pipeline files.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rationale/corpus.hpp"
#include "rationale/extraction.hpp"
#include "rationale/labeling.hpp"

namespace rationale::records {

nlohmann::json to_json(const Sentence& s);
Sentence sentence_from_json(const nlohmann::json& j);

/// {"sentence_id","commit_id","decision","rationale","extractor_id"}
nlohmann::json to_json(const DRTriple& t);
DRTriple triple_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ExtractionOutcome& o);
nlohmann::json to_json(const MetricsReport& m);
nlohmann::json to_json(const CrossValidationReport& r);

/// Reads one JSON object per non-blank line; errors carry the line number.
std::vector<nlohmann::json> read_json_lines(const std::filesystem::path& path);
void write_json_lines(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);

std::vector<Sentence> read_sentences(const std::filesystem::path& path);
std::vector<DRTriple> read_triples(const std::filesystem::path& path);

}  // namespace rationale::records
