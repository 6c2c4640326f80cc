#include <doctest.h>

#include <numeric>
#include <random>

#include "rationale/error.hpp"
#include "rationale/labeling.hpp"
#include "support.hpp"

using namespace rationale;

namespace {

Sentence sentence(const std::string& id, const std::string& text, LabelSet labels = {}) {
  return {id, id.substr(0, id.find('#')), 0, text, labels};
}

/// Fleiss' kappa from agreeing rater pairs: P_i = sum_j C(n_ij, 2) / C(n, 2).
double kappa_by_pairs(const std::vector<std::vector<int>>& rows) {
  const int n = std::accumulate(rows[0].begin(), rows[0].end(), 0);
  const double pairs = n * (n - 1) / 2.0;
  double p_bar = 0;
  std::vector<double> pooled(rows[0].size(), 0);
  for (const auto& r : rows) {
    double agreeing = 0;
    for (std::size_t j = 0; j < r.size(); ++j) {
      agreeing += r[j] * (r[j] - 1) / 2.0;
      pooled[j] += r[j];
    }
    p_bar += agreeing / pairs;
  }
  p_bar /= rows.size();
  double p_e = 0;
  for (double c : pooled) p_e += (c / (rows.size() * n)) * (c / (rows.size() * n));
  return (p_bar - p_e) / (1 - p_e);
}

LabeledDataset gold_from(const std::vector<bool>& positives) {
  LabeledDataset ds;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    LabelSet l;
    l.set(Label::Decision, positives[i]);
    ds.sentences.push_back({"g#" + std::to_string(i), "g", i, "text", l});
  }
  return ds;
}

std::vector<LabelPrediction> predictions_from(const std::vector<bool>& flags) {
  std::vector<LabelPrediction> out;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    out.push_back({"g#" + std::to_string(i), flags[i], false, flags[i] ? 1.0 : 0.0, 0.0, "test"});
  }
  return out;
}

}  // namespace

TEST_CASE("baseline classifier cues") {
  BaselineClassifier c;
  const std::vector<Sentence> s = {
      sentence("a#0", "Remove the oom_reaper from exit_mmap which will make the code easier to read"),
      sentence("a#1", "Thanks."),
      sentence("a#2", "mm/oom_kill: fix kernel-doc"),
      sentence("a#3", "This prevents a livelock."),
      sentence("a#4", "Add a helper."),
      sentence("a#5", "Additionally the address is used."),
  };
  const auto p = c.classify(s);
  REQUIRE(p.size() == s.size());
  CHECK(p[0].decision);
  CHECK(p[0].rationale);
  CHECK_FALSE(p[1].decision);
  CHECK_FALSE(p[1].rationale);
  CHECK(p[2].decision);
  CHECK(p[2].rationale);
  CHECK_FALSE(p[3].decision);
  CHECK(p[3].rationale);
  CHECK(p[4].decision);
  CHECK_FALSE(p[4].rationale);
  // Whole tokens only: "Additionally" and "used" are not cues.
  CHECK_FALSE(p[5].decision);
  for (const auto& x : p) {
    CHECK(x.decision == (x.decision_score >= 0.5));
    CHECK(x.rationale == (x.rationale_score >= 0.5));
    CHECK(x.classifier_id == "baseline-heuristic");
  }
  // Deterministic on identical text.
  const auto again = c.classify(s);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(again[i].decision == p[i].decision);
    CHECK(again[i].rationale == p[i].rationale);
  }
}

TEST_CASE("prediction file adapter") {
  std::istringstream in("sentence_id,decision,rationale\ns1,1,0\ns2,0,1\n");
  auto c = PredictionFileClassifier::from_stream(in, "preds.csv");
  CHECK(c.size() == 2);
  const std::vector<Sentence> s = {sentence("s1", "x"), sentence("s2", "y")};
  const auto p = c.classify(s);
  CHECK(p[0].decision);
  CHECK_FALSE(p[0].rationale);
  CHECK_FALSE(p[1].decision);
  CHECK(p[1].rationale);

  const std::vector<Sentence> missing = {sentence("s3", "z")};
  CHECK_THROWS_WITH_AS(c.classify(missing), doctest::Contains("s3"), Error);

  std::istringstream bad_flag("sentence_id,decision,rationale\ns1,yes,0\n");
  CHECK_THROWS_AS(PredictionFileClassifier::from_stream(bad_flag, "b.csv"), ParseError);
  std::istringstream dup("sentence_id,decision,rationale\ns1,1,0\ns1,0,0\n");
  CHECK_THROWS_AS(PredictionFileClassifier::from_stream(dup, "d.csv"), ParseError);
  std::istringstream header("id,decision,rationale\n");
  CHECK_THROWS_AS(PredictionFileClassifier::from_stream(header, "h.csv"), ParseError);
  CHECK_THROWS_AS(PredictionFileClassifier::from_file("/nonexistent/preds.csv"), Error);
}

TEST_CASE("prediction csv round trip and apply") {
  std::vector<Sentence> s = {sentence("a#0", "x", {Label::SupportingFacts}), sentence("a#1", "y")};
  const std::vector<LabelPrediction> p = {{"a#0", true, true, 1, 1, "t"}, {"a#1", false, true, 0, 1, "t"}};
  apply_predictions(s, p);
  CHECK(s[0].labels == LabelSet{Label::Decision, Label::Rationale, Label::SupportingFacts});
  CHECK(s[1].labels == LabelSet{Label::Rationale});

  std::ostringstream out;
  write_predictions_csv(out, p);
  std::istringstream in(out.str());
  auto replay = PredictionFileClassifier::from_stream(in, "rt.csv").classify(s);
  CHECK(replay[0].decision);
  CHECK_FALSE(replay[1].decision);

  std::vector<Sentence> extra = {sentence("zz#0", "q")};
  CHECK_THROWS_AS(apply_predictions(extra, p), Error);
}

TEST_CASE("metrics on the 5-sentence fixture") {
  // tp=2, fp=1, fn=1, tn=1
  const auto gold = gold_from({true, true, false, true, false});
  const auto m = evaluate(predictions_from({true, true, true, false, false}), gold, Task::Decision);
  CHECK(m.counts == Confusion{2, 1, 1, 1});
  CHECK(m.precision_pos == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(m.recall_pos == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(m.accuracy == doctest::Approx(3.0 / 5).epsilon(1e-15));
  CHECK(m.precision_neg == doctest::Approx(0.5));
  CHECK(m.recall_neg == doctest::Approx(0.5));
  CHECK(m.undefined.empty());
}

TEST_CASE("metrics degenerate cases") {
  SUBCASE("perfect") {
    const auto m = metrics_from_confusion(Task::Rationale, {3, 0, 0, 2});
    for (double v : {m.accuracy, m.precision_pos, m.recall_pos, m.f1_pos, m.precision_neg, m.recall_neg, m.f1_neg}) {
      CHECK(v == 1.0);
    }
  }
  SUBCASE("all negative predictions on all positive gold") {
    const auto m = metrics_from_confusion(Task::Decision, {0, 0, 4, 0});
    CHECK(m.precision_pos == 0.0);
    CHECK(m.is_undefined("precision_pos"));
    CHECK(m.recall_pos == 0.0);
    CHECK_FALSE(m.is_undefined("recall_pos"));
    CHECK(m.accuracy == 0.0);
    CHECK(m.is_undefined("f1_pos"));
    CHECK(m.is_undefined("recall_neg"));
  }
  SUBCASE("empty") {
    const auto m = metrics_from_confusion(Task::Decision, {});
    CHECK(m.is_undefined("accuracy"));
    CHECK(m.accuracy == 0.0);
  }
  SUBCASE("unknown prediction id") {
    const auto gold = gold_from({true});
    std::vector<LabelPrediction> p = {{"other#0", true, false, 1, 0, "t"}};
    CHECK_THROWS_WITH_AS(evaluate(p, gold, Task::Decision), doctest::Contains("other#0"), Error);
  }
}

TEST_CASE("metric identities on random confusions") {
  std::mt19937_64 rng(11);
  for (int iter = 0; iter < 2000; ++iter) {
    Confusion c{rng() % 50, rng() % 50, rng() % 50, rng() % 50};
    const auto m = metrics_from_confusion(Task::Decision, c);
    if (c.total() > 0) {
      CHECK(m.accuracy * c.total() == doctest::Approx(static_cast<double>(c.tp + c.tn)));
    }
    if (m.precision_pos + m.recall_pos > 0) {
      CHECK(m.f1_pos == doctest::Approx(2 * m.precision_pos * m.recall_pos / (m.precision_pos + m.recall_pos)));
    }
    // Swapping the positive and negative class swaps the two blocks exactly.
    const auto s = metrics_from_confusion(Task::Decision, {c.tn, c.fn, c.fp, c.tp});
    CHECK(s.precision_pos == m.precision_neg);
    CHECK(s.recall_pos == m.recall_neg);
    CHECK(s.f1_pos == m.f1_neg);
    CHECK(s.precision_neg == m.precision_pos);
    CHECK(s.recall_neg == m.recall_pos);
    CHECK(s.f1_neg == m.f1_pos);
    CHECK(s.accuracy == m.accuracy);
    for (double v : {m.accuracy, m.precision_pos, m.recall_pos, m.f1_pos, m.precision_neg, m.recall_neg, m.f1_neg}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("rater performance") {
  const std::vector<LabelSet> final_labels = {
      {Label::Decision}, {Label::Decision}, {Label::Decision}, {Label::Decision}, {}, {}, {}, {}};
  SUBCASE("identical rater") {
    const auto m = rater_performance(final_labels, final_labels, Task::Decision);
    CHECK(m.precision_pos == 1.0);
    CHECK(m.recall_pos == 1.0);
    CHECK(m.accuracy == 1.0);
  }
  SUBCASE("rater misses half the positives") {
    const std::vector<LabelSet> rater = {{Label::Decision}, {Label::Decision}, {}, {}, {}, {}, {}, {}};
    const auto m = rater_performance(rater, final_labels, Task::Decision);
    CHECK(m.precision_pos == 1.0);
    CHECK(m.recall_pos == 0.5);
  }
  SUBCASE("final labelling is the union of raters") {
    // Every rater's positives are a subset of the union, so each row of the
    // table shows precision 1.0 with varying recall.
    const auto ds = load_labeled_dataset(testing::data_dir() / "oom_sample.csv", DatasetFormat::Oom);
    std::vector<LabelSet> united(ds.sentences.size());
    for (const auto& col : ds.rater_columns) {
      for (std::size_t i = 0; i < col.size(); ++i) {
        if (col[i].decision()) united[i].insert(Label::Decision);
        if (col[i].rationale()) united[i].insert(Label::Rationale);
      }
    }
    for (Task t : {Task::Decision, Task::Rationale}) {
      for (const auto& col : ds.rater_columns) {
        const auto m = rater_performance(col, united, t);
        CHECK(m.precision_pos == 1.0);
        CHECK(m.recall_pos <= 1.0);
      }
    }
  }
  SUBCASE("length mismatch") {
    const std::vector<LabelSet> short_rater = {{}};
    CHECK_THROWS_AS(rater_performance(short_rater, final_labels, Task::Decision), Error);
  }
}

TEST_CASE("kfold split") {
  auto ids_of = [](int n) {
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i));
    return ids;
  };
  SUBCASE("10 ids, k=10") {
    const auto plan = kfold_split(ids_of(10), 10, 1);
    for (const auto& f : plan.folds()) CHECK(f.size() == 1);
  }
  SUBCASE("774 ids, k=10") {
    const auto plan = kfold_split(ids_of(774), 10, 42);
    std::size_t total = 0;
    for (const auto& f : plan.folds()) {
      CHECK((f.size() == 77 || f.size() == 78));
      total += f.size();
    }
    CHECK(total == 774);
  }
  SUBCASE("deterministic and input-order independent") {
    auto ids = ids_of(50);
    const auto a = kfold_split(ids, 5, 9);
    std::reverse(ids.begin(), ids.end());
    const auto b = kfold_split(ids, 5, 9);
    CHECK(a.assignments == b.assignments);
    CHECK(kfold_split(ids, 5, 10).assignments != a.assignments);
  }
  SUBCASE("frozen assignment for seed 0") {
    // mt19937_64 is fully specified, so this holds on every platform.
    const auto plan = kfold_split(ids_of(6), 3, 0);
    std::vector<int> folds;
    for (int i = 0; i < 6; ++i) folds.push_back(plan.assignments.at("s" + std::to_string(i)));
    // Computed by a separate MT19937-64 implementation.
    CHECK(folds == std::vector<int>{2, 0, 1, 0, 1, 2});
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(kfold_split(ids_of(3), 4, 0), Error);
    CHECK_THROWS_AS(kfold_split(ids_of(3), 1, 0), Error);
    std::vector<std::string> dup = {"a", "a", "b"};
    CHECK_THROWS_AS(kfold_split(dup, 2, 0), Error);
  }
  SUBCASE("partition property") {
    std::mt19937_64 rng(5);
    for (int iter = 0; iter < 200; ++iter) {
      const int n = 2 + static_cast<int>(rng() % 200);
      const int k = 2 + static_cast<int>(rng() % static_cast<std::uint64_t>(n - 1));
      const auto ids = ids_of(n);
      const auto plan = kfold_split(ids, k, rng());
      std::set<std::string> seen;
      std::size_t lo = SIZE_MAX, hi = 0;
      for (const auto& f : plan.folds()) {
        lo = std::min(lo, f.size());
        hi = std::max(hi, f.size());
        for (const auto& id : f) CHECK(seen.insert(id).second);
      }
      CHECK(seen == std::set<std::string>(ids.begin(), ids.end()));
      CHECK(hi - lo <= 1);
    }
  }
}

TEST_CASE("cross validation averages per fold") {
  const auto gold = gold_from({true, true, false, false, true, false});
  std::vector<std::string> ids;
  for (const auto& s : gold.sentences) ids.push_back(s.id);
  const auto plan = kfold_split(ids, 3, 1);
  // Predicts "positive" for everything.
  const auto report = cross_validate(gold, plan, Task::Decision, [](auto, std::span<const Sentence> test) {
    std::vector<LabelPrediction> out;
    for (const auto& s : test) out.push_back({s.id, true, false, 1, 0, "all-pos"});
    return out;
  });
  REQUIRE(report.folds.size() == 3);
  double acc = 0;
  Confusion total;
  for (const auto& f : report.folds) {
    acc += f.accuracy;
    total.tp += f.counts.tp;
    total.fp += f.counts.fp;
    total.fn += f.counts.fn;
    total.tn += f.counts.tn;
  }
  CHECK(report.mean.accuracy == doctest::Approx(acc / 3));
  CHECK(report.mean.counts == total);
  CHECK(total.total() == 6);

  CHECK_THROWS_AS(cross_validate(gold, plan, Task::Decision,
                                 [](auto, auto) { return std::vector<LabelPrediction>{}; }),
                  Error);
}

TEST_CASE("fleiss kappa") {
  SUBCASE("perfect agreement") {
    CHECK(fleiss_kappa({{3, 0}, {0, 3}, {3, 0}}) == 1.0);
    CHECK(fleiss_kappa({{3, 0}, {3, 0}}) == 1.0);
  }
  SUBCASE("four-item fixture") {
    const std::vector<std::vector<int>> rows = {{3, 0}, {0, 3}, {2, 1}, {1, 2}};
    // P-bar = (1 + 1 + 1/3 + 1/3) / 4 = 2/3, Pe = 0.5^2 + 0.5^2 = 1/2.
    CHECK(kappa_by_pairs(rows) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(std::abs(fleiss_kappa(rows) - 1.0 / 3) < 1e-9);
  }
  SUBCASE("observed equals expected") {
    // P-bar = (0 + 1 + 1 + 0) / 4 = 1/2 and Pe = 1/2.
    CHECK(std::abs(fleiss_kappa({{1, 1}, {2, 0}, {0, 2}, {1, 1}})) < 1e-12);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(fleiss_kappa({{2, 1}, {1, 1}}), Error);
    CHECK_THROWS_AS(fleiss_kappa({{1, 0}, {0, 1}}), Error);
    CHECK_THROWS_AS(fleiss_kappa({{2, 1}, {3}}), Error);
    CHECK_THROWS_AS(fleiss_kappa({}), Error);
  }
  SUBCASE("properties on random matrices") {
    std::mt19937_64 rng(3);
    for (int iter = 0; iter < 300; ++iter) {
      const int n = 2 + static_cast<int>(rng() % 5);
      const int cats = 2 + static_cast<int>(rng() % 3);
      const int items = 1 + static_cast<int>(rng() % 12);
      std::vector<std::vector<int>> rows;
      bool concentrated = true;
      for (int i = 0; i < items; ++i) {
        std::vector<int> r(static_cast<std::size_t>(cats), 0);
        for (int k = 0; k < n; ++k) ++r[rng() % static_cast<std::uint64_t>(cats)];
        concentrated = concentrated && std::count(r.begin(), r.end(), 0) == cats - 1;
        rows.push_back(r);
      }
      const double k = fleiss_kappa(rows);
      CHECK(k >= -1.0);
      CHECK(k <= 1.0);
      CHECK((k == 1.0) == concentrated);
      if (!concentrated) CHECK(k == doctest::Approx(kappa_by_pairs(rows)));

      auto items_perm = rows;
      std::shuffle(items_perm.begin(), items_perm.end(), rng);
      CHECK(fleiss_kappa(items_perm) == doctest::Approx(k));
      auto cats_perm = rows;
      for (auto& r : cats_perm) std::reverse(r.begin(), r.end());
      CHECK(fleiss_kappa(cats_perm) == doctest::Approx(k));
    }
  }
}

TEST_CASE("unanimous agreement") {
  const std::vector<bool> base(91, true);
  CHECK(unanimous_agreement({base, base, base}) == 1.0);
  auto r3 = base;
  for (int i = 0; i < 19; ++i) r3[static_cast<std::size_t>(i)] = false;
  CHECK(unanimous_agreement({base, base, r3}) == doctest::Approx(72.0 / 91));
  CHECK(unanimous_agreement({{true}, {false}}) == 0.0);
  CHECK_THROWS_AS(unanimous_agreement({base}), Error);
  CHECK_THROWS_AS(unanimous_agreement({base, {true}}), Error);
}

TEST_CASE("task names") {
  CHECK(parse_task("decision") == Task::Decision);
  CHECK(task_name(Task::Rationale) == "rationale");
  CHECK_THROWS_AS(parse_task("both"), UsageError);
  CHECK(label_for(Task::Rationale, {Label::Rationale}));
  CHECK_FALSE(label_for(Task::Decision, {Label::Rationale}));
}
