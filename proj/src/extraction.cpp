#include "rationale/extraction.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <future>

#include "rationale/error.hpp"
#include "rationale/text.hpp"

namespace rationale {

namespace {

constexpr std::array<std::string_view, 6> kConnectives = {
    " because ", " since ", " so that ", " in order to ", " to avoid ", " as "};

bool has_terse_judgment(std::string_view sentence) {
  // Keep hyphens inside words so "kernel-doc" stays one token, while
  // "clean-up" is folded to "cleanup".
  std::string lowered = text::to_lower(sentence);
  std::vector<std::string> words;
  std::string current;
  for (char c : lowered) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
      current.push_back(c);
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  for (const auto& w : words) {
    if (w == "fix" || w == "cleanup" || w == "clean-up" || w == "typo") return true;
  }
  return false;
}

std::optional<std::string> non_empty(std::string_view s) {
  s = text::trim(s);
  if (s.empty()) return std::nullopt;
  return std::string(s);
}

std::size_t find_ci(std::string_view haystack, std::string_view needle, std::size_t from = 0) {
  const auto lower = text::to_lower(haystack);
  const auto pos = lower.find(text::to_lower(needle), from);
  return pos;
}

std::string_view strip_literal_newline(std::string_view s) {
  s = text::trim(s);
  while (s.size() >= 2 && s.substr(s.size() - 2) == "\\n") {
    s.remove_suffix(2);
    s = text::trim(s);
  }
  return s;
}

}  // namespace

std::string_view status_name(ExtractionStatus s) {
  switch (s) {
    case ExtractionStatus::Ok:
      return "ok";
    case ExtractionStatus::MissingDecision:
      return "missing_decision";
    case ExtractionStatus::MissingRationale:
      return "missing_rationale";
    case ExtractionStatus::MissingBoth:
      return "missing_both";
    case ExtractionStatus::Malformed:
      return "malformed";
  }
  return "?";
}

ExtractedPair baseline_extract(std::string_view sentence) {
  const auto lower = text::to_lower(sentence);
  std::size_t best = std::string::npos;
  std::size_t best_len = 0;
  for (auto c : kConnectives) {
    const auto pos = lower.find(c);
    if (pos < best || (pos == best && pos != std::string::npos && c.size() > best_len)) {
      best = pos;
      best_len = c.size();
    }
  }
  if (best != std::string::npos) {
    // The connective's leading space separates the halves.
    return {non_empty(sentence.substr(0, best)), non_empty(sentence.substr(best + 1))};
  }
  if (has_terse_judgment(sentence)) {
    auto whole = non_empty(sentence);
    return {whole, whole};
  }
  return {};
}

std::vector<RawExtraction> BaselineExtractor::extract(std::span<const std::string> sentences) {
  std::vector<RawExtraction> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) {
    auto pair = baseline_extract(s);
    out.push_back({std::move(pair.decision), std::move(pair.rationale), false});
  }
  return out;
}

std::optional<ExtractedPair> parse_extractor_reply(std::string_view reply) {
  const auto d = find_ci(reply, "decision:");
  if (d == std::string::npos) return std::nullopt;
  const auto d_begin = d + 9;
  const auto r = find_ci(reply, "rationale:", d_begin);
  if (r == std::string::npos) return std::nullopt;
  const auto r_begin = r + 10;

  auto decision = strip_literal_newline(reply.substr(d_begin, r - d_begin));
  // The rationale runs to the first blank line; anything after is chatter.
  auto rest = reply.substr(r_begin);
  auto lead = rest.find_first_not_of(" \t\r\n");
  std::string_view rationale;
  if (lead != std::string_view::npos) {
    const auto para_end = rest.find("\n\n", lead);
    rationale = rest.substr(0, para_end);
  }
  // Keep a leading line break verbatim: "\nNone" is a recognised sentinel.
  while (!rationale.empty() && (rationale.back() == ' ' || rationale.back() == '\n' ||
                                rationale.back() == '\r' || rationale.back() == '\t')) {
    rationale.remove_suffix(1);
  }
  while (!rationale.empty() && (rationale.front() == ' ' || rationale.front() == '\t')) {
    rationale.remove_prefix(1);
  }
  if (decision.size() > kMaxReplyFieldLength || rationale.size() > kMaxReplyFieldLength) {
    return std::nullopt;
  }
  return ExtractedPair{std::string(decision), std::string(rationale)};
}

bool is_missing_entity(std::string_view s) {
  // Strip whitespace, quotes and leading dashes until nothing changes.
  while (true) {
    const auto before = s.size();
    s = text::trim(s);
    while (!s.empty() && (s.front() == '"' || s.front() == '\'' || s.front() == '`' || s.front() == '-')) {
      s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == '"' || s.back() == '\'' || s.back() == '`')) s.remove_suffix(1);
    if (s.size() == before) break;
  }
  const auto lower = text::to_lower(s);
  return lower.empty() || lower == "none" || lower == "n/a" || lower == "null";
}

bool is_missing_entity(const std::optional<std::string>& s) {
  return !s || is_missing_entity(std::string_view(*s));
}

ExtractionStatus classify_extraction(const RawExtraction& raw) {
  if (raw.malformed) return ExtractionStatus::Malformed;
  if ((raw.decision && raw.decision->size() > kMaxReplyFieldLength) ||
      (raw.rationale && raw.rationale->size() > kMaxReplyFieldLength)) {
    return ExtractionStatus::Malformed;
  }
  const bool no_d = is_missing_entity(raw.decision);
  const bool no_r = is_missing_entity(raw.rationale);
  if (no_d && no_r) return ExtractionStatus::MissingBoth;
  if (no_d) return ExtractionStatus::MissingDecision;
  if (no_r) return ExtractionStatus::MissingRationale;
  return ExtractionStatus::Ok;
}

namespace {

ExtractionOutcome make_outcome(const Sentence& s, RawExtraction raw, const std::string& extractor_id) {
  ExtractionOutcome o;
  o.sentence_id = s.id;
  o.commit_id = s.commit_id;
  o.status = classify_extraction(raw);
  if (o.status != ExtractionStatus::Malformed) {
    o.raw_decision = std::move(raw.decision);
    o.raw_rationale = std::move(raw.rationale);
  }
  o.extractor_id = extractor_id;
  return o;
}

std::vector<ExtractionOutcome> run_chunk(Extractor& extractor, std::span<const Sentence> chunk) {
  std::vector<std::string> texts;
  texts.reserve(chunk.size());
  for (const auto& s : chunk) texts.push_back(s.text);
  auto raws = extractor.extract(texts);
  if (raws.size() != chunk.size()) {
    throw ProtocolError("extractor " + extractor.id() + " returned " + std::to_string(raws.size()) +
                        " results for " + std::to_string(chunk.size()) + " sentences");
  }
  std::vector<ExtractionOutcome> out;
  out.reserve(chunk.size());
  const auto id = extractor.id();
  for (std::size_t i = 0; i < chunk.size(); ++i) out.push_back(make_outcome(chunk[i], std::move(raws[i]), id));
  return out;
}

}  // namespace

ExtractionOutcome extract_pair(Extractor& extractor, const Sentence& sentence) {
  if (!sentence.labels.both()) {
    throw Error("sentence '" + sentence.id + "' is not labelled both Decision and Rationale");
  }
  return run_chunk(extractor, std::span(&sentence, 1)).front();
}

std::vector<ExtractionOutcome> extract_all(Extractor& extractor, std::span<const Sentence> sentences,
                                           std::size_t parallelism, std::size_t chunk_size) {
  for (const auto& s : sentences) {
    if (!s.labels.both()) {
      throw Error("sentence '" + s.id + "' is not labelled both Decision and Rationale");
    }
  }
  parallelism = std::max<std::size_t>(parallelism, 1);
  chunk_size = std::max<std::size_t>(chunk_size, 1);
  std::vector<ExtractionOutcome> out;
  out.reserve(sentences.size());
  std::size_t next = 0;
  while (next < sentences.size()) {
    std::vector<std::future<std::vector<ExtractionOutcome>>> wave;
    for (std::size_t w = 0; w < parallelism && next < sentences.size(); ++w) {
      const auto len = std::min(chunk_size, sentences.size() - next);
      auto chunk = sentences.subspan(next, len);
      next += len;
      wave.push_back(std::async(std::launch::async, [&extractor, chunk] { return run_chunk(extractor, chunk); }));
    }
    // Futures are drained in submission order, which restores input order.
    for (auto& f : wave) {
      auto part = f.get();
      std::move(part.begin(), part.end(), std::back_inserter(out));
    }
  }
  return out;
}

std::size_t FilterResult::dropped_total() const {
  std::size_t n = 0;
  for (const auto& [status, count] : dropped) n += count;
  return n;
}

FilterResult filter_triples(std::span<const ExtractionOutcome> outcomes) {
  FilterResult result;
  for (auto s : {ExtractionStatus::MissingDecision, ExtractionStatus::MissingRationale,
                 ExtractionStatus::MissingBoth, ExtractionStatus::Malformed}) {
    result.dropped[s] = 0;
  }
  for (const auto& o : outcomes) {
    // Re-derive the status: the outcome may have been loaded from a file.
    RawExtraction raw{o.raw_decision, o.raw_rationale, o.status == ExtractionStatus::Malformed};
    const auto status = classify_extraction(raw);
    if (status != ExtractionStatus::Ok) {
      ++result.dropped[status];
      continue;
    }
    result.triples.push_back({o.sentence_id, o.commit_id, std::string(text::trim(*o.raw_decision)),
                              std::string(text::trim(*o.raw_rationale)), o.extractor_id});
  }
  return result;
}

std::set<std::string> load_exclusion_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read exclusion list '" + path.string() + "'");
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    // Sentence ids contain '#', so only whole-line comments are recognised.
    auto id = text::trim(line);
    if (!id.empty() && id.front() != '#') ids.emplace(id);
  }
  return ids;
}

}  // namespace rationale
