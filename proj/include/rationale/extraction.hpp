#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rationale/corpus.hpp"

namespace rationale {

/// The <decision, has_rationale, rationale> unit extracted from one sentence.
struct DRTriple {
  std::string sentence_id;
  std::string commit_id;
  std::string decision_text;
  std::string rationale_text;
  std::string extractor_id;

  friend bool operator==(const DRTriple&, const DRTriple&) = default;
};

enum class ExtractionStatus { Ok, MissingDecision, MissingRationale, MissingBoth, Malformed };

std::string_view status_name(ExtractionStatus s);

/// What an extractor returned for one sentence, before filtering.
struct RawExtraction {
  std::optional<std::string> decision;
  std::optional<std::string> rationale;
  bool malformed = false;
};

struct ExtractionOutcome {
  std::string sentence_id;
  std::string commit_id;
  std::optional<std::string> raw_decision;
  std::optional<std::string> raw_rationale;
  ExtractionStatus status = ExtractionStatus::Malformed;
  std::string extractor_id;
};

class Extractor {
 public:
  virtual ~Extractor() = default;
  virtual std::string id() const = 0;
  /// One result per input sentence text, in order. Throws TransportError
  /// when the backend cannot be reached.
  virtual std::vector<RawExtraction> extract(std::span<const std::string> sentences) = 0;
};

/// Offline extractor: splits at the first rationale connective; a terse
/// value judgment without connective makes the whole sentence both parts.
class BaselineExtractor final : public Extractor {
 public:
  std::string id() const override { return "baseline-connective"; }
  std::vector<RawExtraction> extract(std::span<const std::string> sentences) override;
};

struct ExtractedPair {
  std::optional<std::string> decision;
  std::optional<std::string> rationale;
  friend bool operator==(const ExtractedPair&, const ExtractedPair&) = default;
};

ExtractedPair baseline_extract(std::string_view sentence);

/// Longest accepted field in an extractor reply.
inline constexpr std::size_t kMaxReplyFieldLength = 2000;

/// Parses a free-text "Decision: ...\nRationale: ..." reply, tolerating
/// chatter around the two fields. Returns nullopt when either field cannot
/// be located or exceeds kMaxReplyFieldLength.
std::optional<ExtractedPair> parse_extractor_reply(std::string_view reply);

/// True for absent text and for the null sentinels an extractor emits in
/// place of an entity ("None", "N/A", "null", "-", "\nNone", ...).
bool is_missing_entity(const std::optional<std::string>& text);
bool is_missing_entity(std::string_view text);
inline bool is_missing_entity(const std::string& text) { return is_missing_entity(std::string_view(text)); }
inline bool is_missing_entity(const char* text) { return is_missing_entity(std::string_view(text)); }

ExtractionStatus classify_extraction(const RawExtraction& raw);

/// Runs the extractor on one sentence labelled both Decision and Rationale.
/// Throws Error if the sentence lacks either label.
ExtractionOutcome extract_pair(Extractor& extractor, const Sentence& sentence);

/// Extracts every sentence in chunks, with at most `parallelism` chunks in
/// flight. Outcomes come back in input order.
std::vector<ExtractionOutcome> extract_all(Extractor& extractor, std::span<const Sentence> sentences,
                                           std::size_t parallelism = 4, std::size_t chunk_size = 32);

struct FilterResult {
  std::vector<DRTriple> triples;
  std::map<ExtractionStatus, std::size_t> dropped;

  std::size_t dropped_total() const;
};

FilterResult filter_triples(std::span<const ExtractionOutcome> outcomes);

/// Sentence ids to leave out of extraction, one per line; lines starting with '#' are comments.
std::set<std::string> load_exclusion_list(const std::filesystem::path& path);

}  // namespace rationale
