#include "rationale/labeling.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <random>
#include <set>
#include <unordered_map>

#include "rationale/csv.hpp"
#include "rationale/error.hpp"
#include "rationale/text.hpp"

namespace rationale {

namespace {

constexpr std::array<std::string_view, 17> kChangeVerbs = {
    "add",     "remove", "fix",    "move",   "rename", "replace", "use",      "make",  "change",
    "introduce", "delete", "drop", "switch", "refactor", "update", "avoid", "clean"};

constexpr std::array<std::string_view, 12> kRationalePhrases = {
    "because", "since",     "so that",  "in order to", "to avoid", "to allow",
    "to make", "otherwise", "instead of", "will make", "fixes",    "prevents"};

constexpr std::array<std::string_view, 3> kTerseJudgments = {"fix", "cleanup", "typo"};

std::vector<std::string> split_words(std::string_view phrase) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < phrase.size()) {
    auto sp = phrase.find(' ', pos);
    if (sp == std::string_view::npos) sp = phrase.size();
    out.emplace_back(phrase.substr(pos, sp - pos));
    pos = sp + 1;
  }
  return out;
}

bool contains_token(const std::vector<std::string>& tokens, std::string_view word) {
  return std::find(tokens.begin(), tokens.end(), word) != tokens.end();
}

double ratio(std::uint64_t num, std::uint64_t den, const char* name,
             std::vector<std::string>& undefined) {
  if (den == 0) {
    undefined.emplace_back(name);
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r, bool inputs_defined, const char* name,
                std::vector<std::string>& undefined) {
  if (!inputs_defined || p + r == 0.0) {
    undefined.emplace_back(name);
    return 0.0;
  }
  return 2.0 * p * r / (p + r);
}

void tally(Confusion& c, bool predicted, bool actual) {
  if (predicted && actual) ++c.tp;
  else if (predicted) ++c.fp;
  else if (actual) ++c.fn;
  else ++c.tn;
}

}  // namespace

bool BaselineClassifier::has_decision_cue(std::string_view text) {
  const auto tokens = text::word_tokens(text);
  return std::any_of(kChangeVerbs.begin(), kChangeVerbs.end(),
                     [&](std::string_view verb) { return contains_token(tokens, verb); });
}

bool BaselineClassifier::has_rationale_cue(std::string_view text) {
  const auto tokens = text::word_tokens(text);
  for (auto phrase : kRationalePhrases) {
    if (text::contains_phrase(tokens, split_words(phrase))) return true;
  }
  return std::any_of(kTerseJudgments.begin(), kTerseJudgments.end(),
                     [&](std::string_view w) { return contains_token(tokens, w); });
}

std::vector<LabelPrediction> BaselineClassifier::classify(std::span<const Sentence> sentences) {
  std::vector<LabelPrediction> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) {
    LabelPrediction p;
    p.sentence_id = s.id;
    p.decision = has_decision_cue(s.text);
    p.rationale = has_rationale_cue(s.text);
    p.decision_score = p.decision ? 1.0 : 0.0;
    p.rationale_score = p.rationale ? 1.0 : 0.0;
    p.classifier_id = id();
    out.push_back(std::move(p));
  }
  return out;
}

PredictionFileClassifier PredictionFileClassifier::from_stream(std::istream& in,
                                                               const std::string& source_name) {
  PredictionFileClassifier c;
  c.id_ = "prediction-file:" + source_name;
  csv::Reader reader(in, source_name);
  csv::expect_header(reader, {"sentence_id", "decision", "rationale"}, source_name);
  auto flag = [&](const std::string& v, std::size_t line) {
    if (v == "1") return true;
    if (v == "0") return false;
    throw ParseError(source_name, line, "flag must be 0 or 1, got '" + v + "'");
  };
  while (auto row = reader.next()) {
    if (row->fields.size() != 3) throw ParseError(source_name, row->line, "expected 3 columns");
    const auto& id = row->fields[0];
    if (id.empty()) throw ParseError(source_name, row->line, "empty sentence_id");
    auto [it, inserted] =
        c.rows_.emplace(id, std::pair{flag(row->fields[1], row->line), flag(row->fields[2], row->line)});
    if (!inserted) throw ParseError(source_name, row->line, "duplicate sentence_id '" + id + "'");
  }
  return c;
}

PredictionFileClassifier PredictionFileClassifier::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read prediction file '" + path.string() + "'");
  return from_stream(in, path.string());
}

std::vector<LabelPrediction> PredictionFileClassifier::classify(std::span<const Sentence> sentences) {
  std::vector<LabelPrediction> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) {
    auto it = rows_.find(s.id);
    if (it == rows_.end()) {
      throw Error("prediction file " + id_ + " has no row for sentence '" + s.id + "'");
    }
    const auto [d, r] = it->second;
    out.push_back({s.id, d, r, d ? 1.0 : 0.0, r ? 1.0 : 0.0, id_});
  }
  return out;
}

void apply_predictions(std::vector<Sentence>& sentences,
                       std::span<const LabelPrediction> predictions) {
  std::unordered_map<std::string_view, const LabelPrediction*> by_id;
  for (const auto& p : predictions) by_id.emplace(p.sentence_id, &p);
  for (auto& s : sentences) {
    auto it = by_id.find(s.id);
    if (it == by_id.end()) throw Error("no prediction for sentence '" + s.id + "'");
    s.labels.set(Label::Decision, it->second->decision);
    s.labels.set(Label::Rationale, it->second->rationale);
  }
}

void write_predictions_csv(std::ostream& out, std::span<const LabelPrediction> predictions) {
  csv::write_row(out, {"sentence_id", "decision", "rationale"});
  for (const auto& p : predictions) {
    csv::write_row(out, {p.sentence_id, p.decision ? "1" : "0", p.rationale ? "1" : "0"});
  }
}

std::string_view task_name(Task t) { return t == Task::Decision ? "decision" : "rationale"; }

Task parse_task(std::string_view name) {
  if (name == "decision") return Task::Decision;
  if (name == "rationale") return Task::Rationale;
  throw UsageError("unknown task '" + std::string(name) + "' (expected decision|rationale)");
}

bool label_for(Task task, LabelSet labels) {
  return task == Task::Decision ? labels.decision() : labels.rationale();
}

bool MetricsReport::is_undefined(std::string_view field) const {
  return std::find(undefined.begin(), undefined.end(), field) != undefined.end();
}

MetricsReport metrics_from_confusion(Task task, const Confusion& c) {
  MetricsReport m;
  m.task = task;
  m.counts = c;
  auto& u = m.undefined;
  m.accuracy = ratio(c.tp + c.tn, c.total(), "accuracy", u);
  m.precision_pos = ratio(c.tp, c.tp + c.fp, "precision_pos", u);
  m.recall_pos = ratio(c.tp, c.tp + c.fn, "recall_pos", u);
  m.f1_pos = harmonic(m.precision_pos, m.recall_pos,
                      !m.is_undefined("precision_pos") && !m.is_undefined("recall_pos"), "f1_pos", u);
  m.precision_neg = ratio(c.tn, c.tn + c.fn, "precision_neg", u);
  m.recall_neg = ratio(c.tn, c.tn + c.fp, "recall_neg", u);
  m.f1_neg = harmonic(m.precision_neg, m.recall_neg,
                      !m.is_undefined("precision_neg") && !m.is_undefined("recall_neg"), "f1_neg", u);
  return m;
}

MetricsReport evaluate(std::span<const LabelPrediction> predictions, const LabeledDataset& gold,
                       Task task) {
  std::unordered_map<std::string_view, LabelSet> gold_by_id;
  for (const auto& s : gold.sentences) gold_by_id.emplace(s.id, s.labels);
  Confusion c;
  for (const auto& p : predictions) {
    auto it = gold_by_id.find(p.sentence_id);
    if (it == gold_by_id.end()) {
      throw Error("prediction for unknown sentence '" + p.sentence_id + "'");
    }
    tally(c, task == Task::Decision ? p.decision : p.rationale, label_for(task, it->second));
  }
  return metrics_from_confusion(task, c);
}

MetricsReport rater_performance(std::span<const LabelSet> rater, std::span<const LabelSet> final_labels,
                                Task task) {
  if (rater.size() != final_labels.size()) {
    throw Error("rater covers " + std::to_string(rater.size()) + " items but final labelling has " +
                std::to_string(final_labels.size()));
  }
  Confusion c;
  for (std::size_t i = 0; i < rater.size(); ++i) {
    tally(c, label_for(task, rater[i]), label_for(task, final_labels[i]));
  }
  return metrics_from_confusion(task, c);
}

std::vector<std::vector<std::string>> FoldPlan::folds() const {
  std::vector<std::vector<std::string>> out(static_cast<std::size_t>(k));
  for (const auto& [id, fold] : assignments) out[static_cast<std::size_t>(fold)].push_back(id);
  return out;
}

FoldPlan kfold_split(std::span<const std::string> ids, int k, std::uint64_t seed) {
  if (k < 2) throw Error("k must be at least 2, got " + std::to_string(k));
  if (static_cast<std::size_t>(k) > ids.size()) {
    throw Error("k=" + std::to_string(k) + " exceeds the number of ids (" +
                std::to_string(ids.size()) + ")");
  }
  std::vector<std::string> order(ids.begin(), ids.end());
  std::sort(order.begin(), order.end());
  if (std::adjacent_find(order.begin(), order.end()) != order.end()) {
    throw Error("duplicate id in fold split input");
  }
  // Fisher-Yates with the raw engine output; std::shuffle and the standard
  // distributions are implementation-defined, mt19937_64 is not.
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  for (std::size_t i = 0; i < order.size(); ++i) {
    plan.assignments.emplace(order[i], static_cast<int>(i % static_cast<std::size_t>(k)));
  }
  return plan;
}

CrossValidationReport cross_validate(const LabeledDataset& data, const FoldPlan& plan, Task task,
                                     const FoldPredictor& predictor) {
  CrossValidationReport report;
  report.task = task;
  for (int fold = 0; fold < plan.k; ++fold) {
    std::vector<Sentence> train;
    std::vector<Sentence> test;
    for (const auto& s : data.sentences) {
      auto it = plan.assignments.find(s.id);
      if (it == plan.assignments.end()) throw Error("sentence '" + s.id + "' missing from fold plan");
      (it->second == fold ? test : train).push_back(s);
    }
    const auto predictions = predictor(train, test);
    if (predictions.size() != test.size()) {
      throw Error("fold " + std::to_string(fold) + ": predictor returned " +
                  std::to_string(predictions.size()) + " predictions for " +
                  std::to_string(test.size()) + " sentences");
    }
    report.folds.push_back(evaluate(predictions, data, task));
  }

  auto& mean = report.mean;
  mean.task = task;
  const double n = static_cast<double>(report.folds.size());
  for (const auto& f : report.folds) {
    mean.counts.tp += f.counts.tp;
    mean.counts.fp += f.counts.fp;
    mean.counts.fn += f.counts.fn;
    mean.counts.tn += f.counts.tn;
    mean.accuracy += f.accuracy / n;
    mean.precision_pos += f.precision_pos / n;
    mean.recall_pos += f.recall_pos / n;
    mean.f1_pos += f.f1_pos / n;
    mean.precision_neg += f.precision_neg / n;
    mean.recall_neg += f.recall_neg / n;
    mean.f1_neg += f.f1_neg / n;
    for (const auto& u : f.undefined) {
      if (!mean.is_undefined(u)) mean.undefined.push_back(u);
    }
  }
  return report;
}

double fleiss_kappa(const std::vector<std::vector<int>>& counts) {
  if (counts.empty()) throw Error("fleiss_kappa: no items");
  const std::size_t categories = counts.front().size();
  if (categories == 0) throw Error("fleiss_kappa: no categories");
  long long raters = -1;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto& row = counts[i];
    if (row.size() != categories) {
      throw Error("fleiss_kappa: row " + std::to_string(i) + " has " + std::to_string(row.size()) +
                  " categories, expected " + std::to_string(categories));
    }
    long long sum = 0;
    for (int v : row) {
      if (v < 0) throw Error("fleiss_kappa: negative count in row " + std::to_string(i));
      sum += v;
    }
    if (raters < 0) raters = sum;
    if (sum != raters) {
      throw Error("fleiss_kappa: ragged rows (row " + std::to_string(i) + " sums to " +
                  std::to_string(sum) + ", expected " + std::to_string(raters) + ")");
    }
  }
  if (raters < 2) throw Error("fleiss_kappa: need at least two raters per item");

  const double n = static_cast<double>(raters);
  const double items = static_cast<double>(counts.size());
  double observed = 0.0;
  std::vector<double> category_totals(categories, 0.0);
  for (const auto& row : counts) {
    double squares = 0.0;
    for (std::size_t j = 0; j < categories; ++j) {
      squares += static_cast<double>(row[j]) * row[j];
      category_totals[j] += row[j];
    }
    observed += (squares - n) / (n * (n - 1.0));
  }
  observed /= items;
  double expected = 0.0;
  for (double total : category_totals) {
    const double p = total / (items * n);
    expected += p * p;
  }
  // Every rating fell in one category: agreement is perfect and chance-level.
  if (expected >= 1.0) return 1.0;
  return (observed - expected) / (1.0 - expected);
}

double unanimous_agreement(const std::vector<std::vector<bool>>& flags) {
  if (flags.size() < 2) throw Error("unanimous_agreement: need at least two raters");
  const std::size_t items = flags.front().size();
  for (const auto& r : flags) {
    if (r.size() != items) throw Error("unanimous_agreement: raters cover different item counts");
  }
  if (items == 0) return 0.0;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < items; ++i) {
    const bool first = flags.front()[i];
    if (std::all_of(flags.begin(), flags.end(), [&](const auto& r) { return r[i] == first; })) {
      ++agree;
    }
  }
  return static_cast<double>(agree) / static_cast<double>(items);
}

}  // namespace rationale
