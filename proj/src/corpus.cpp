#include "rationale/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rationale/csv.hpp"
#include "rationale/error.hpp"
#include "rationale/text.hpp"

namespace rationale {

namespace {

constexpr std::array<Label, 3> kAllLabels = {Label::Decision, Label::Rationale,
                                             Label::SupportingFacts};

// Abbreviations whose trailing period never ends a sentence.
constexpr std::array<std::string_view, 4> kAbbreviations = {"e.g.", "i.e.", "cf.", "vs."};

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_closer(char c) { return c == ')' || c == ']' || c == '"' || c == '\''; }

bool ends_with_abbreviation(std::string_view text) {
  // Last whitespace-delimited token of `text`.
  const auto start = text.find_last_of(" \t");
  const std::string token =
      text::to_lower(start == std::string_view::npos ? text : text.substr(start + 1));
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), token) !=
         kAbbreviations.end();
}

void split_paragraph(std::string_view paragraph, std::vector<std::string>& out) {
  // Collapse line breaks and whitespace runs into single spaces.
  std::string flat;
  flat.reserve(paragraph.size());
  for (char c : paragraph) {
    if (text::is_space(c)) {
      if (!flat.empty() && flat.back() != ' ') flat.push_back(' ');
    } else {
      flat.push_back(c);
    }
  }
  if (!flat.empty() && flat.back() == ' ') flat.pop_back();

  std::size_t begin = 0;
  std::size_t i = 0;
  while (i < flat.size()) {
    if (!is_terminator(flat[i])) {
      ++i;
      continue;
    }
    std::size_t end = i + 1;
    while (end < flat.size() && (is_terminator(flat[end]) || is_closer(flat[end]))) ++end;
    const bool at_boundary = end == flat.size() || flat[end] == ' ';
    if (at_boundary && !ends_with_abbreviation(std::string_view(flat).substr(begin, end - begin))) {
      out.emplace_back(text::trim(std::string_view(flat).substr(begin, end - begin)));
      begin = end;
    }
    i = end;
  }
  auto rest = text::trim(std::string_view(flat).substr(begin));
  if (!rest.empty()) out.emplace_back(rest);
}

std::string require_string(const nlohmann::json& obj, const char* key,
                           const std::string& source, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw ParseError(source, line, std::string("missing or non-string field '") + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace

std::string_view label_name(Label l) {
  switch (l) {
    case Label::Decision:
      return "Decision";
    case Label::Rationale:
      return "Rationale";
    case Label::SupportingFacts:
      return "SupportingFacts";
  }
  return "?";
}

std::string LabelSet::to_string() const {
  std::string out;
  for (Label l : kAllLabels) {
    if (!has(l)) continue;
    if (!out.empty()) out.push_back('|');
    out += label_name(l);
  }
  return out;
}

LabelSet LabelSet::parse(std::string_view text) {
  LabelSet set;
  text = text::trim(text);
  if (text.empty()) return set;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto bar = text.find('|', pos);
    const auto token =
        text::trim(text.substr(pos, bar == std::string_view::npos ? text.npos : bar - pos));
    bool matched = false;
    for (Label l : kAllLabels) {
      if (token == label_name(l)) {
        set.insert(l);
        matched = true;
      }
    }
    if (!matched) throw Error("unknown label token '" + std::string(token) + "'");
    if (bar == std::string_view::npos) break;
    pos = bar + 1;
  }
  return set;
}

std::string sentence_id(std::string_view commit_id, std::size_t index) {
  return std::string(commit_id) + "#" + std::to_string(index);
}

std::size_t LabeledDataset::commit_count() const {
  std::set<std::string_view> ids;
  for (const auto& s : sentences) ids.insert(s.commit_id);
  return ids.size();
}

IngestResult parse_json_lines(std::istream& in, const std::string& source_name) {
  IngestResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(source_name, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(source_name, line_no, "record is not an object");
    Commit c;
    c.id = require_string(obj, "id", source_name, line_no);
    if (text::trim(c.id).empty()) throw ParseError(source_name, line_no, "empty commit id");
    c.project = require_string(obj, "project", source_name, line_no);
    c.message = require_string(obj, "message", source_name, line_no);
    if (auto ts = obj.find("timestamp"); ts != obj.end() && !ts->is_null()) {
      if (!ts->is_string()) throw ParseError(source_name, line_no, "non-string timestamp");
      c.timestamp = ts->get<std::string>();
    }
    if (text::trim(c.message).empty()) {
      ++result.skipped_empty;
      continue;
    }
    result.commits.push_back(std::move(c));
  }
  return result;
}

IngestResult parse_git_log(std::istream& in, const std::string& source_name,
                           const std::string& project) {
  // Default `git log` layout: a "commit <hash>" line, header lines
  // ("Author:", "Date:", "Merge:"), a blank line, then the message indented
  // by four spaces.
  IngestResult result;
  std::optional<Commit> current;
  std::string body;
  bool in_body = false;

  auto flush = [&] {
    if (!current) return;
    current->message = body;
    while (!current->message.empty() && current->message.back() == '\n') {
      current->message.pop_back();
    }
    if (text::trim(current->message).empty()) {
      ++result.skipped_empty;
    } else {
      result.commits.push_back(std::move(*current));
    }
    current.reset();
    body.clear();
    in_body = false;
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("commit ", 0) == 0) {
      flush();
      std::istringstream fields(line.substr(7));
      std::string hash;
      fields >> hash;
      if (hash.empty()) throw ParseError(source_name, line_no, "commit line without hash");
      current = Commit{hash, project, {}, std::nullopt};
      continue;
    }
    if (!current) {
      if (text::trim(line).empty()) continue;
      throw ParseError(source_name, line_no, "expected 'commit <hash>' line");
    }
    if (!in_body) {
      if (line.empty()) {
        in_body = true;
      } else if (line.rfind("Date:", 0) == 0) {
        current->timestamp = std::string(text::trim(std::string_view(line).substr(5)));
      } else if (line.rfind("Author:", 0) != 0 && line.rfind("Merge:", 0) != 0 &&
                 line.rfind("Commit:", 0) != 0 && line.rfind("AuthorDate:", 0) != 0 &&
                 line.rfind("CommitDate:", 0) != 0) {
        throw ParseError(source_name, line_no, "unexpected header line '" + line + "'");
      }
      continue;
    }
    if (line.rfind("    ", 0) == 0) {
      body += line.substr(4);
      body.push_back('\n');
    } else if (text::trim(line).empty()) {
      body.push_back('\n');
    } else {
      throw ParseError(source_name, line_no, "message line is not indented");
    }
  }
  flush();
  return result;
}

IngestResult ingest_commits(const std::filesystem::path& source, CommitFormat format,
                            const std::string& default_project) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  std::error_code ec;
  if (fs::is_directory(source, ec)) {
    for (const auto& entry : fs::directory_iterator(source)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(source);
  }

  IngestResult all;
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("cannot read commit source '" + file.string() + "'");
    IngestResult part;
    if (format == CommitFormat::JsonLines) {
      part = parse_json_lines(in, file.string());
    } else {
      part = parse_git_log(in, file.string(),
                           default_project.empty() ? file.stem().string() : default_project);
    }
    all.skipped_empty += part.skipped_empty;
    std::move(part.commits.begin(), part.commits.end(), std::back_inserter(all.commits));
  }
  return all;
}

std::vector<std::string> split_sentences(std::string_view message) {
  std::vector<std::string> out;
  // Paragraphs are separated by lines that hold only whitespace.
  std::string paragraph;
  std::size_t pos = 0;
  while (pos <= message.size()) {
    const auto nl = message.find('\n', pos);
    const auto line = message.substr(pos, nl == std::string_view::npos ? message.npos : nl - pos);
    if (text::trim(line).empty()) {
      split_paragraph(paragraph, out);
      paragraph.clear();
    } else {
      paragraph.append(line);
      paragraph.push_back('\n');
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  split_paragraph(paragraph, out);
  return out;
}

std::vector<Sentence> segment_commits(const std::vector<Commit>& commits) {
  std::vector<Sentence> out;
  for (const auto& c : commits) {
    auto texts = split_sentences(c.message);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      out.push_back(Sentence{sentence_id(c.id, i), c.id, i, std::move(texts[i]), {}});
    }
  }
  return out;
}

TianFlags map_tian_labels(std::string_view label) {
  label = text::trim(label);
  if (label == "Why_and_What") return {true, true};
  if (label == "No_Why") return {true, false};
  if (label == "No_What") return {false, true};
  if (label == "Neither_Why_nor_What") return {false, false};
  throw Error("unknown tian label '" + std::string(label) + "'");
}

namespace {

const std::vector<std::string> kOomHeader = {"commit_id", "sentence_index", "text", "labels",
                                             "rater1",    "rater2",         "rater3"};
const std::vector<std::string> kTianHeader = {"project", "commit_id", "message", "label",
                                              "non_atomic"};

bool parse_flag(const std::string& value, const std::string& source, std::size_t line) {
  const auto v = text::to_lower(text::trim(value));
  if (v.empty() || v == "false" || v == "0") return false;
  if (v == "true" || v == "1") return true;
  throw ParseError(source, line, "invalid boolean '" + value + "'");
}

LabelSet parse_labels_at(const std::string& value, const std::string& source, std::size_t line) {
  try {
    return LabelSet::parse(value);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(source, line, e.what());
  }
}

LabeledDataset load_oom(csv::Reader& reader, const std::string& source) {
  csv::expect_header(reader, kOomHeader, source);
  LabeledDataset ds;
  ds.source_format = DatasetFormat::Oom;
  ds.rater_columns.assign(3, {});
  std::set<std::string> seen;
  while (auto row = reader.next()) {
    if (row->fields.size() != kOomHeader.size()) {
      throw ParseError(source, row->line,
                       "expected " + std::to_string(kOomHeader.size()) + " columns, got " +
                           std::to_string(row->fields.size()));
    }
    Sentence s;
    s.commit_id = row->fields[0];
    if (s.commit_id.empty()) throw ParseError(source, row->line, "empty commit_id");
    try {
      std::size_t consumed = 0;
      const auto index = std::stoll(row->fields[1], &consumed);
      if (consumed != row->fields[1].size() || index < 0) throw std::invalid_argument("index");
      s.index = static_cast<std::size_t>(index);
    } catch (const std::exception&) {
      throw ParseError(source, row->line, "invalid sentence_index '" + row->fields[1] + "'");
    }
    s.text = std::string(text::trim(row->fields[2]));
    if (s.text.empty()) throw ParseError(source, row->line, "empty sentence text");
    s.labels = parse_labels_at(row->fields[3], source, row->line);
    s.id = sentence_id(s.commit_id, s.index);
    if (!seen.insert(s.id).second) {
      throw ParseError(source, row->line, "duplicate sentence id '" + s.id + "'");
    }
    for (std::size_t r = 0; r < 3; ++r) {
      ds.rater_columns[r].push_back(parse_labels_at(row->fields[4 + r], source, row->line));
    }
    ds.sentences.push_back(std::move(s));
  }
  return ds;
}

LabeledDataset load_tian(csv::Reader& reader, const std::string& source,
                         const LoadOptions& options) {
  auto header = reader.next();
  if (!header) throw ParseError(source, 1, "missing header row");
  const std::vector<std::string> short_header(kTianHeader.begin(), kTianHeader.end() - 1);
  const bool has_atomic = header->fields == kTianHeader;
  if (!has_atomic && header->fields != short_header) {
    throw ParseError(source, header->line,
                     "header mismatch: expected 'project,commit_id,message,label,non_atomic'");
  }
  LabeledDataset ds;
  ds.source_format = DatasetFormat::Tian;
  std::set<std::string> seen_commits;
  while (auto row = reader.next()) {
    if (row->fields.size() != header->fields.size()) {
      throw ParseError(source, row->line,
                       "expected " + std::to_string(header->fields.size()) + " columns, got " +
                           std::to_string(row->fields.size()));
    }
    const auto& commit_id = row->fields[1];
    if (commit_id.empty()) throw ParseError(source, row->line, "empty commit_id");
    TianFlags flags;
    try {
      flags = map_tian_labels(row->fields[3]);
    } catch (const Error& e) {
      throw ParseError(source, row->line, e.what());
    }
    if (has_atomic && options.atomic_only && parse_flag(row->fields[4], source, row->line)) {
      continue;
    }
    if (!seen_commits.insert(commit_id).second) {
      throw ParseError(source, row->line, "duplicate commit_id '" + commit_id + "'");
    }
    auto texts = split_sentences(row->fields[2]);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      Sentence s{sentence_id(commit_id, i), commit_id, i, std::move(texts[i]), {}};
      s.labels.set(Label::Decision, flags.decision);
      s.labels.set(Label::Rationale, flags.rationale);
      ds.sentences.push_back(std::move(s));
    }
  }
  return ds;
}

}  // namespace

LabeledDataset load_labeled_dataset(std::istream& in, const std::string& source_name,
                                    DatasetFormat format, const LoadOptions& options) {
  csv::Reader reader(in, source_name);
  return format == DatasetFormat::Oom ? load_oom(reader, source_name)
                                      : load_tian(reader, source_name, options);
}

LabeledDataset load_labeled_dataset(const std::filesystem::path& path, DatasetFormat format,
                                    const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read dataset '" + path.string() + "'");
  return load_labeled_dataset(in, path.string(), format, options);
}

}  // namespace rationale
