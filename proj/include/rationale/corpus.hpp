#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rationale {

enum class Label : std::uint8_t { Decision = 1, Rationale = 2, SupportingFacts = 4 };

/// A set of sentence labels. Multi-label: a sentence may carry both
/// Decision and Rationale.
class LabelSet {
 public:
  constexpr LabelSet() = default;
  constexpr LabelSet(std::initializer_list<Label> labels) {
    for (Label l : labels) insert(l);
  }

  constexpr bool has(Label l) const { return (bits_ & static_cast<std::uint8_t>(l)) != 0; }
  constexpr void insert(Label l) { bits_ |= static_cast<std::uint8_t>(l); }
  constexpr void erase(Label l) { bits_ &= static_cast<std::uint8_t>(~static_cast<std::uint8_t>(l)); }
  constexpr void set(Label l, bool on) { on ? insert(l) : erase(l); }
  constexpr bool empty() const { return bits_ == 0; }

  constexpr bool decision() const { return has(Label::Decision); }
  constexpr bool rationale() const { return has(Label::Rationale); }
  constexpr bool both() const { return decision() && rationale(); }

  friend constexpr bool operator==(LabelSet, LabelSet) = default;

  /// '|'-separated canonical form in the order Decision, Rationale, SupportingFacts.
  std::string to_string() const;
  /// Parses the '|'-separated form; the empty string is the empty set.
  /// Throws Error on an unknown token.
  static LabelSet parse(std::string_view text);

 private:
  std::uint8_t bits_ = 0;
};

std::string_view label_name(Label l);

struct Commit {
  std::string id;
  std::string project;
  std::string message;
  std::optional<std::string> timestamp;
};

struct Sentence {
  std::string id;  // "<commit_id>#<index>"
  std::string commit_id;
  std::size_t index = 0;
  std::string text;
  LabelSet labels;
};

std::string sentence_id(std::string_view commit_id, std::size_t index);

enum class DatasetFormat { Oom, Tian };

struct LabeledDataset {
  std::vector<Sentence> sentences;
  DatasetFormat source_format = DatasetFormat::Oom;
  /// Per-rater label sets, rater_columns[r][i] belongs to sentences[i].
  std::vector<std::vector<LabelSet>> rater_columns;

  std::size_t commit_count() const;
};

enum class CommitFormat { JsonLines, GitLogExport };

struct IngestResult {
  std::vector<Commit> commits;
  std::size_t skipped_empty = 0;
};

/// Reads commits from a file, or from every regular file of a directory in
/// lexicographic path order. `default_project` names the project for formats
/// that do not carry one (git-log export); when empty the file stem is used.
IngestResult ingest_commits(const std::filesystem::path& source, CommitFormat format,
                            const std::string& default_project = {});

IngestResult parse_json_lines(std::istream& in, const std::string& source_name);
IngestResult parse_git_log(std::istream& in, const std::string& source_name,
                           const std::string& project);

/// Splits a commit message into sentences. Boundaries are blank lines and
/// '.', '!' or '?' followed by whitespace or end of text. Line breaks inside
/// a paragraph become single spaces.
std::vector<std::string> split_sentences(std::string_view message);

/// Splits every commit and numbers the sentences per commit.
std::vector<Sentence> segment_commits(const std::vector<Commit>& commits);

struct TianFlags {
  bool decision = false;
  bool rationale = false;
  friend bool operator==(const TianFlags&, const TianFlags&) = default;
};

/// Maps the four message-level labels of the Tian corpus onto the binary
/// decision/rationale tasks. Throws Error on an unknown token.
TianFlags map_tian_labels(std::string_view label);

struct LoadOptions {
  bool atomic_only = false;
};

LabeledDataset load_labeled_dataset(const std::filesystem::path& path, DatasetFormat format,
                                    const LoadOptions& options = {});
LabeledDataset load_labeled_dataset(std::istream& in, const std::string& source_name,
                                    DatasetFormat format, const LoadOptions& options = {});

}  // namespace rationale
