#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rationale/corpus.hpp"

namespace rationale {

struct LabelPrediction {
  std::string sentence_id;
  bool decision = false;
  bool rationale = false;
  double decision_score = 0.0;
  double rationale_score = 0.0;
  std::string classifier_id;
};

/// Decides, per sentence, whether it carries a decision and/or a rationale.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::string id() const = 0;
  /// One prediction per input sentence, in input order.
  virtual std::vector<LabelPrediction> classify(std::span<const Sentence> sentences) = 0;
};

/// Offline cue-word classifier. A decision cue is an imperative change verb
/// anywhere in the sentence; a rationale cue is a causal connective or a
/// terse value judgment (fix, cleanup, typo).
class BaselineClassifier final : public Classifier {
 public:
  std::string id() const override { return "baseline-heuristic"; }
  std::vector<LabelPrediction> classify(std::span<const Sentence> sentences) override;

  static bool has_decision_cue(std::string_view text);
  static bool has_rationale_cue(std::string_view text);
};

/// Replays predictions produced elsewhere, read from a
/// `sentence_id,decision,rationale` CSV with 0/1 flags.
class PredictionFileClassifier final : public Classifier {
 public:
  static PredictionFileClassifier from_file(const std::filesystem::path& path);
  static PredictionFileClassifier from_stream(std::istream& in, const std::string& source_name);

  std::string id() const override { return id_; }
  /// Throws Error if a sentence id is absent from the file.
  std::vector<LabelPrediction> classify(std::span<const Sentence> sentences) override;

  std::size_t size() const { return rows_.size(); }

 private:
  std::string id_;
  std::map<std::string, std::pair<bool, bool>, std::less<>> rows_;
};

/// Applies predictions back onto sentences as Decision/Rationale labels.
void apply_predictions(std::vector<Sentence>& sentences,
                       std::span<const LabelPrediction> predictions);

void write_predictions_csv(std::ostream& out, std::span<const LabelPrediction> predictions);

enum class Task { Decision, Rationale };

std::string_view task_name(Task t);
Task parse_task(std::string_view name);
bool label_for(Task task, LabelSet labels);

struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

/// Ratios with a zero denominator are reported as 0 and their field name is
/// listed in `undefined`.
struct MetricsReport {
  Task task = Task::Decision;
  Confusion counts;
  double accuracy = 0.0;
  double precision_pos = 0.0;
  double recall_pos = 0.0;
  double f1_pos = 0.0;
  double precision_neg = 0.0;
  double recall_neg = 0.0;
  double f1_neg = 0.0;
  std::vector<std::string> undefined;

  bool is_undefined(std::string_view field) const;
};

MetricsReport metrics_from_confusion(Task task, const Confusion& counts);

/// Scores predictions against the gold labels of `gold`. Every prediction
/// id must exist in `gold`; gold sentences without a prediction are ignored.
MetricsReport evaluate(std::span<const LabelPrediction> predictions, const LabeledDataset& gold,
                       Task task);

/// Treats one rater's labels as predictions of the final labelling.
MetricsReport rater_performance(std::span<const LabelSet> rater, std::span<const LabelSet> final_labels,
                                Task task);

struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::map<std::string, int> assignments;

  std::vector<std::vector<std::string>> folds() const;
};

/// Shuffles the (sorted) ids with a seeded Mersenne twister and deals them
/// round-robin into k folds, so fold sizes differ by at most one.
FoldPlan kfold_split(std::span<const std::string> ids, int k, std::uint64_t seed);

/// Unweighted mean of per-fold metrics.
struct CrossValidationReport {
  Task task = Task::Decision;
  std::vector<MetricsReport> folds;
  MetricsReport mean;
};

/// Called once per fold with the training and held-out sentences; must
/// return one prediction per held-out sentence.
using FoldPredictor = std::function<std::vector<LabelPrediction>(
    std::span<const Sentence> train, std::span<const Sentence> test)>;

CrossValidationReport cross_validate(const LabeledDataset& data, const FoldPlan& plan, Task task,
                                     const FoldPredictor& predictor);

/// Fleiss' kappa over an item x category matrix of rater counts. Every row
/// must sum to the same rater count n >= 2.
double fleiss_kappa(const std::vector<std::vector<int>>& counts);

/// Fraction of items on which every rater gives the same flag.
/// `flags[r][i]` is rater r's flag for item i.
double unanimous_agreement(const std::vector<std::vector<bool>>& flags);

}  // namespace rationale
