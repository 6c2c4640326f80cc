#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rationale {

enum class RelationKind { Similar, Contradicts };

std::string_view kind_name(RelationKind k);
RelationKind parse_kind(std::string_view name);

/// A scored unordered pair of node ids, stored with a < b.
struct PairScore {
  std::string a;
  std::string b;
  RelationKind kind = RelationKind::Similar;
  double score = 0.0;
  std::string scorer_id;

  friend bool operator==(const PairScore&, const PairScore&) = default;
};

/// A relationship edge between two decision nodes that passed a threshold.
struct RelEdge {
  std::string a;
  std::string b;
  RelationKind kind = RelationKind::Similar;
  double score = 0.0;
  std::string scorer_id;

  friend bool operator==(const RelEdge&, const RelEdge&) = default;
};

/// Admission thresholds for decision-decision edges and rationale-rationale
/// relations.
struct Thresholds {
  double dd_similar = 0.9;
  double dd_contradicts = 0.9;
  double rr = 0.6;

  /// "oom" (0.9/0.9/0.6) or "generalization" (0.8/0.8/0.6).
  static Thresholds preset(std::string_view name);
  /// Throws Error unless every threshold lies in (0, 1].
  void validate() const;

  friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

struct IndexPair {
  std::size_t i = 0;
  std::size_t j = 0;
  friend bool operator==(const IndexPair&, const IndexPair&) = default;
};

/// All index pairs i < j over n items, in row-major order.
class PairRange {
 public:
  class iterator {
   public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = IndexPair;
    using difference_type = std::ptrdiff_t;
    using pointer = const IndexPair*;
    using reference = const IndexPair&;

    iterator() = default;
    iterator(std::size_t n, IndexPair at) : n_(n), at_(at) {}

    reference operator*() const { return at_; }
    pointer operator->() const { return &at_; }
    iterator& operator++() {
      if (++at_.j >= n_) {
        ++at_.i;
        at_.j = at_.i + 1;
      }
      return *this;
    }
    iterator operator++(int) {
      auto copy = *this;
      ++*this;
      return copy;
    }
    friend bool operator==(const iterator& x, const iterator& y) { return x.at_ == y.at_; }

   private:
    std::size_t n_ = 0;
    IndexPair at_;
  };

  explicit PairRange(std::size_t n) : n_(n) {}

  std::uint64_t count() const;
  iterator begin() const;
  iterator end() const;

 private:
  std::size_t n_;
};

/// n(n-1)/2 pairs.
std::uint64_t pair_count(std::uint64_t n);
PairRange enumerate_pairs(std::size_t n);

struct TextPair {
  std::string_view a;
  std::string_view b;
};

/// Scores text pairs for one relationship kind. Implementations must be
/// symmetric and safe to call from several threads at once.
class PairScorer {
 public:
  virtual ~PairScorer() = default;
  virtual std::string id() const = 0;
  virtual std::vector<double> score(std::span<const TextPair> pairs) = 0;
};

/// Cosine similarity of lowercase token count vectors.
double baseline_similarity(std::string_view a, std::string_view b);

/// 0.95 when the texts overlap on at least two content slots and one holds
/// a verb whose antonym the other holds (the antonym pair fills one slot);
/// 0.5 when they share at least two non-stopword tokens without antonyms;
/// 0 otherwise.
double baseline_contradiction(std::string_view a, std::string_view b);

const std::vector<std::string>& stopwords();

class BaselineSimilarityScorer final : public PairScorer {
 public:
  std::string id() const override { return "baseline-cosine"; }
  std::vector<double> score(std::span<const TextPair> pairs) override;
};

class BaselineContradictionScorer final : public PairScorer {
 public:
  std::string id() const override { return "baseline-antonym"; }
  std::vector<double> score(std::span<const TextPair> pairs) override;
};

/// A node id with the text to score.
struct NodeText {
  std::string id;
  std::string text;
};

struct ScoreOptions {
  std::size_t batch_size = 2000;
  /// Batches in flight at once.
  std::size_t parallelism = 1;
  /// Progress file; completed batches listed there are not rescored. Their
  /// scores live next to it in "<checkpoint>.scores".
  std::optional<std::filesystem::path> checkpoint;
};

/// Scores the given index pairs into `texts`. Every reply must lie in
/// [0, 1]; anything else is a ProtocolError naming the pair. Output is in
/// pair order and independent of batch size.
std::vector<PairScore> score_pairs(PairScorer& scorer, std::span<const NodeText> texts,
                                   std::span<const IndexPair> pairs, RelationKind kind,
                                   const ScoreOptions& options = {});

/// Scores every unordered pair of `texts`.
std::vector<PairScore> score_all_pairs(PairScorer& scorer, std::span<const NodeText> texts,
                                       RelationKind kind, const ScoreOptions& options = {});

/// Keeps scores >= threshold, sorted by (a, b).
std::vector<RelEdge> apply_threshold(std::span<const PairScore> scores, double threshold);

/// Raw score matrix lines: {"a","b","kind","score","scorer_id"}.
void write_raw_scores(std::ostream& out, std::span<const PairScore> scores);

}  // namespace rationale
