#include "rationale/scoring.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <future>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rationale/error.hpp"
#include "rationale/text.hpp"
#include "stopwords_data.hpp"

namespace rationale {

namespace {

constexpr std::array<std::pair<std::string_view, std::string_view>, 8> kAntonyms = {{
    {"add", "remove"},
    {"add", "delete"},
    {"enable", "disable"},
    {"lock", "unlock"},
    {"increase", "decrease"},
    {"set", "clear"},
    {"start", "stop"},
    {"push", "pop"},
}};

std::map<std::string, int> token_counts(std::string_view s) {
  std::map<std::string, int> counts;
  for (auto& t : text::word_tokens(s)) ++counts[std::move(t)];
  return counts;
}

bool is_stopword(const std::string& w) {
  const auto& list = stopwords();
  return std::binary_search(list.begin(), list.end(), w);
}

std::string pair_label(const NodeText& x, const NodeText& y) {
  return "(" + x.id + ", " + y.id + ")";
}

}  // namespace

std::string_view kind_name(RelationKind k) {
  return k == RelationKind::Similar ? "Similar" : "Contradicts";
}

RelationKind parse_kind(std::string_view name) {
  if (name == "Similar") return RelationKind::Similar;
  if (name == "Contradicts") return RelationKind::Contradicts;
  throw Error("unknown relationship kind '" + std::string(name) + "'");
}

Thresholds Thresholds::preset(std::string_view name) {
  if (name == "oom") return {0.9, 0.9, 0.6};
  if (name == "generalization") return {0.8, 0.8, 0.6};
  throw UsageError("unknown thresholds preset '" + std::string(name) +
                   "' (expected oom|generalization)");
}

void Thresholds::validate() const {
  auto check = [](double v, const char* name) {
    if (!(v > 0.0 && v <= 1.0)) {
      throw UsageError(std::string("threshold ") + name + " must lie in (0, 1], got " +
                       std::to_string(v));
    }
  };
  check(dd_similar, "dd_similar");
  check(dd_contradicts, "dd_contradicts");
  check(rr, "rr");
}

std::uint64_t pair_count(std::uint64_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }

std::uint64_t PairRange::count() const { return pair_count(n_); }

PairRange::iterator PairRange::begin() const {
  return n_ < 2 ? end() : iterator(n_, {0, 1});
}

PairRange::iterator PairRange::end() const {
  return iterator(n_, {n_ == 0 ? 0 : n_ - 1, n_});
}

PairRange enumerate_pairs(std::size_t n) { return PairRange(n); }

const std::vector<std::string>& stopwords() {
  static const std::vector<std::string> list = [] {
    std::vector<std::string> words;
    std::istringstream in(detail::kStopwordsText);
    std::string w;
    while (in >> w) words.push_back(text::to_lower(w));
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    return words;
  }();
  return list;
}

double baseline_similarity(std::string_view a, std::string_view b) {
  const auto ca = token_counts(a);
  const auto cb = token_counts(b);
  if (ca.empty() && cb.empty()) return 1.0;
  if (ca.empty() || cb.empty()) return 0.0;
  // Merge-walk both sorted maps so the sum order does not depend on
  // argument order; this keeps the score bitwise symmetric.
  double dot = 0.0;
  auto ia = ca.begin();
  auto ib = cb.begin();
  while (ia != ca.end() && ib != cb.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      dot += static_cast<double>(ia->second) * ib->second;
      ++ia;
      ++ib;
    }
  }
  double na = 0.0;
  double nb = 0.0;
  for (const auto& [t, c] : ca) na += static_cast<double>(c) * c;
  for (const auto& [t, c] : cb) nb += static_cast<double>(c) * c;
  const double cosine = dot / std::sqrt(na * nb);
  return std::min(cosine, 1.0);
}

double baseline_contradiction(std::string_view a, std::string_view b) {
  const auto ta = text::word_tokens(a);
  const auto tb = text::word_tokens(b);
  const std::set<std::string> sa(ta.begin(), ta.end());
  const std::set<std::string> sb(tb.begin(), tb.end());

  std::size_t shared = 0;
  for (const auto& w : sa) {
    if (sb.count(w) && !is_stopword(w)) ++shared;
  }
  bool antonym = false;
  for (const auto& [x, y] : kAntonyms) {
    const std::string xs(x);
    const std::string ys(y);
    if ((sa.count(xs) && sb.count(ys)) || (sa.count(ys) && sb.count(xs))) {
      antonym = true;
      break;
    }
  }
  if (antonym) return shared + 1 >= 2 ? 0.95 : 0.0;
  return shared >= 2 ? 0.5 : 0.0;
}

std::vector<double> BaselineSimilarityScorer::score(std::span<const TextPair> pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(baseline_similarity(p.a, p.b));
  return out;
}

std::vector<double> BaselineContradictionScorer::score(std::span<const TextPair> pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(baseline_contradiction(p.a, p.b));
  return out;
}

namespace {

struct Checkpoint {
  std::set<std::size_t> completed;
  std::map<std::size_t, std::vector<double>> scores;
};

std::filesystem::path scores_path(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p += ".scores";
  return p;
}

Checkpoint read_checkpoint(const std::filesystem::path& path, std::size_t batch_size,
                           std::uint64_t total_pairs) {
  Checkpoint cp;
  std::ifstream in(path);
  if (!in) return cp;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("corrupt checkpoint '" + path.string() + "': " + e.what());
  }
  if (doc.at("batch_size").get<std::size_t>() != batch_size ||
      doc.at("total_pairs").get<std::uint64_t>() != total_pairs) {
    throw Error("checkpoint '" + path.string() + "' was written for batch_size " +
                doc.at("batch_size").dump() + " and total_pairs " + doc.at("total_pairs").dump() +
                "; refusing to resume with batch_size " + std::to_string(batch_size) +
                " and total_pairs " + std::to_string(total_pairs));
  }
  for (const auto& b : doc.at("completed_batches")) cp.completed.insert(b.get<std::size_t>());

  std::ifstream log(scores_path(path));
  std::string line;
  while (std::getline(log, line)) {
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      // A torn trailing write from an interrupted run; its batch is not in
      // the checkpoint and gets rescored.
      continue;
    }
    const auto batch = rec.at("batch").get<std::size_t>();
    if (cp.completed.count(batch)) cp.scores[batch] = rec.at("scores").get<std::vector<double>>();
  }
  for (auto b : cp.completed) {
    if (!cp.scores.count(b)) {
      throw Error("checkpoint '" + path.string() + "' lists batch " + std::to_string(b) +
                  " but its scores are missing");
    }
  }
  return cp;
}

void write_checkpoint(const std::filesystem::path& path, const std::set<std::size_t>& completed,
                      std::size_t batch_size, std::uint64_t total_pairs) {
  nlohmann::json doc;
  doc["completed_batches"] = completed;
  doc["batch_size"] = batch_size;
  doc["total_pairs"] = total_pairs;
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint '" + tmp.string() + "'");
    out << doc.dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::vector<PairScore> score_pairs(PairScorer& scorer, std::span<const NodeText> texts,
                                   std::span<const IndexPair> pairs, RelationKind kind,
                                   const ScoreOptions& options) {
  if (options.batch_size < 1) throw Error("batch_size must be at least 1");
  for (const auto& p : pairs) {
    if (p.i == p.j) throw Error("self-pair (" + std::to_string(p.i) + ", " + std::to_string(p.j) + ")");
    if (p.i >= texts.size() || p.j >= texts.size()) {
      throw Error("pair (" + std::to_string(p.i) + ", " + std::to_string(p.j) +
                  ") is out of range for " + std::to_string(texts.size()) + " texts");
    }
  }
  const std::size_t batch_size = options.batch_size;
  const std::size_t batches = (pairs.size() + batch_size - 1) / batch_size;

  Checkpoint cp;
  std::ofstream log;
  if (options.checkpoint) {
    cp = read_checkpoint(*options.checkpoint, batch_size, pairs.size());
    const auto log_path = scores_path(*options.checkpoint);
    bool needs_newline = false;
    if (std::ifstream existing(log_path, std::ios::binary | std::ios::ate); existing && existing.tellg() > 0) {
      existing.seekg(-1, std::ios::end);
      needs_newline = existing.get() != '\n';
    }
    log.open(log_path, std::ios::app);
    if (!log) throw Error("cannot open score log for '" + options.checkpoint->string() + "'");
    // Terminate a torn final record so the next one starts on its own line.
    if (needs_newline) log << '\n';
  }

  const auto scorer_id = scorer.id();
  auto run_batch = [&](std::size_t b) {
    const auto first = b * batch_size;
    const auto last = std::min(first + batch_size, pairs.size());
    std::vector<TextPair> request;
    request.reserve(last - first);
    for (auto k = first; k < last; ++k) {
      request.push_back({texts[pairs[k].i].text, texts[pairs[k].j].text});
    }
    auto scores = scorer.score(request);
    if (scores.size() != request.size()) {
      throw ProtocolError("scorer " + scorer_id + " returned " + std::to_string(scores.size()) +
                          " scores for a batch of " + std::to_string(request.size()));
    }
    for (std::size_t k = 0; k < scores.size(); ++k) {
      const double s = scores[k];
      if (!(s >= 0.0 && s <= 1.0)) {
        const auto& p = pairs[first + k];
        std::ostringstream msg;
        msg << "scorer " << scorer_id << " returned " << s << " for pair "
            << pair_label(texts[p.i], texts[p.j]) << "; scores must lie in [0, 1]";
        throw ProtocolError(msg.str());
      }
    }
    return scores;
  };

  std::vector<std::vector<double>> results(batches);
  std::vector<std::size_t> todo;
  for (std::size_t b = 0; b < batches; ++b) {
    if (cp.completed.count(b)) {
      results[b] = std::move(cp.scores[b]);
    } else {
      todo.push_back(b);
    }
  }

  const std::size_t width = std::max<std::size_t>(options.parallelism, 1);
  for (std::size_t w = 0; w < todo.size(); w += width) {
    const auto wave_end = std::min(w + width, todo.size());
    std::vector<std::future<std::vector<double>>> wave;
    for (auto k = w; k < wave_end; ++k) {
      if (width == 1) {
        std::promise<std::vector<double>> done;
        try {
          done.set_value(run_batch(todo[k]));
        } catch (...) {
          done.set_exception(std::current_exception());
        }
        wave.push_back(done.get_future());
      } else {
        wave.push_back(std::async(std::launch::async, run_batch, todo[k]));
      }
    }
    // Completed batches are committed in order; the first failure aborts
    // the run after everything before it has been checkpointed.
    for (auto k = w; k < wave_end; ++k) {
      const auto b = todo[k];
      results[b] = wave[k - w].get();
      if (options.checkpoint) {
        nlohmann::json rec;
        rec["batch"] = b;
        rec["scores"] = results[b];
        log << rec.dump() << '\n';
        log.flush();
        cp.completed.insert(b);
        write_checkpoint(*options.checkpoint, cp.completed, batch_size, pairs.size());
      }
    }
  }

  std::vector<PairScore> out;
  out.reserve(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& p = pairs[k];
    const auto& x = texts[p.i];
    const auto& y = texts[p.j];
    const bool ordered = x.id < y.id;
    out.push_back({ordered ? x.id : y.id, ordered ? y.id : x.id, kind,
                   results[k / batch_size][k % batch_size], scorer_id});
  }
  return out;
}

std::vector<PairScore> score_all_pairs(PairScorer& scorer, std::span<const NodeText> texts,
                                       RelationKind kind, const ScoreOptions& options) {
  const auto range = enumerate_pairs(texts.size());
  std::vector<IndexPair> pairs(range.begin(), range.end());
  return score_pairs(scorer, texts, pairs, kind, options);
}

std::vector<RelEdge> apply_threshold(std::span<const PairScore> scores, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error("threshold must lie in (0, 1], got " + std::to_string(threshold));
  }
  std::vector<RelEdge> edges;
  for (const auto& s : scores) {
    if (s.score >= threshold) edges.push_back({s.a, s.b, s.kind, s.score, s.scorer_id});
  }
  std::stable_sort(edges.begin(), edges.end(), [](const RelEdge& x, const RelEdge& y) {
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });
  return edges;
}

void write_raw_scores(std::ostream& out, std::span<const PairScore> scores) {
  for (const auto& s : scores) {
    nlohmann::json rec;
    rec["a"] = s.a;
    rec["b"] = s.b;
    rec["kind"] = kind_name(s.kind);
    rec["score"] = s.score;
    rec["scorer_id"] = s.scorer_id;
    out << rec.dump() << '\n';
  }
}

}  // namespace rationale
