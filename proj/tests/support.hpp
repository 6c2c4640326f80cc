#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "rationale/analysis.hpp"
#include "rationale/extraction.hpp"
#include "rationale/graph.hpp"
#include "rationale/scoring.hpp"

namespace testing {

namespace fs = std::filesystem;

inline fs::path data_dir() { return fs::path(RATIONALE_TEST_DATA); }

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "rationale") {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

// ---------------------------------------------------------------------------
// Reference implementations written straight from the scorer definitions,
// sharing no code with the library.

inline std::vector<std::string> oracle_tokens(const std::string& text) {
  std::string lower = text;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  static const std::regex word("[a-z0-9_]+");
  std::vector<std::string> out;
  for (auto it = std::sregex_iterator(lower.begin(), lower.end(), word); it != std::sregex_iterator(); ++it) {
    out.push_back(it->str());
  }
  return out;
}

inline double oracle_cosine(const std::string& a, const std::string& b) {
  std::map<std::string, double> va, vb;
  for (const auto& t : oracle_tokens(a)) va[t] += 1;
  for (const auto& t : oracle_tokens(b)) vb[t] += 1;
  if (va.empty() && vb.empty()) return 1.0;
  if (va.empty() || vb.empty()) return 0.0;
  double dot = 0, na = 0, nb = 0;
  for (const auto& [t, c] : va) {
    na += c * c;
    if (auto it = vb.find(t); it != vb.end()) dot += c * it->second;
  }
  for (const auto& [t, c] : vb) nb += c * c;
  return std::min(1.0, dot / std::sqrt(na * nb));
}

inline const std::set<std::string>& oracle_stopwords() {
  static const std::set<std::string> words = [] {
    std::set<std::string> s;
    std::ifstream in(data_dir().parent_path().parent_path() / "data" / "stopwords.txt");
    std::string w;
    while (in >> w) s.insert(w);
    return s;
  }();
  return words;
}

inline double oracle_contradiction(const std::string& a, const std::string& b) {
  static const std::vector<std::pair<std::string, std::string>> antonyms = {
      {"add", "remove"}, {"add", "delete"}, {"enable", "disable"}, {"lock", "unlock"},
      {"increase", "decrease"}, {"set", "clear"}, {"start", "stop"}, {"push", "pop"}};
  const auto ta = oracle_tokens(a);
  const auto tb = oracle_tokens(b);
  const std::set<std::string> sa(ta.begin(), ta.end()), sb(tb.begin(), tb.end());
  int shared = 0;
  for (const auto& w : sa) shared += sb.count(w) && !oracle_stopwords().count(w);
  bool opposed = false;
  for (const auto& [x, y] : antonyms) {
    opposed = opposed || (sa.count(x) && sb.count(y)) || (sa.count(y) && sb.count(x));
  }
  if (opposed) return shared + 1 >= 2 ? 0.95 : 0.0;
  return shared >= 2 ? 0.5 : 0.0;
}

/// (mechanism, d1, d2, dd_score, rr_score) with d1 < d2.
using FindingKey = std::tuple<std::string, std::string, std::string, double, double>;

/// All-pairs reference for M1/M2: walks every decision pair directly, with
/// no graph, edge index or library scorer involved.
inline std::set<FindingKey> brute_force_findings(const std::vector<rationale::DRTriple>& triples,
                                                 const rationale::Thresholds& t, bool m1, bool m2) {
  std::set<FindingKey> out;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    for (std::size_t j = 0; j < triples.size(); ++j) {
      const std::string di = "D:" + triples[i].sentence_id;
      const std::string dj = "D:" + triples[j].sentence_id;
      if (!(di < dj)) continue;
      const auto& x = triples[i];
      const auto& y = triples[j];
      if (m1) {
        const double dd = oracle_cosine(x.decision_text, y.decision_text);
        const double rr = oracle_contradiction(x.rationale_text, y.rationale_text);
        if (dd >= t.dd_similar && rr >= t.rr) out.emplace("M1", di, dj, dd, rr);
      }
      if (m2) {
        const double dd = oracle_contradiction(x.decision_text, y.decision_text);
        const double rr = oracle_cosine(x.rationale_text, y.rationale_text);
        if (dd >= t.dd_contradicts && rr >= t.rr) out.emplace("M2", di, dj, dd, rr);
      }
    }
  }
  return out;
}

inline std::set<FindingKey> finding_keys(const std::vector<rationale::InconsistencyFinding>& findings) {
  std::set<FindingKey> out;
  for (const auto& f : findings) {
    out.emplace(std::string(rationale::mechanism_name(f.mechanism)), f.d1, f.d2, f.dd_score, f.rr_score);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Random fixtures drawn from a small vocabulary so that edges, antonyms and
// findings actually occur.

inline std::vector<rationale::DRTriple> random_triples(std::mt19937_64& rng, std::size_t max_count) {
  static const std::vector<std::string> verbs = {"add",  "remove", "delete", "enable", "disable", "lock",
                                                 "unlock", "set", "clear",  "start",  "stop",   "use"};
  static const std::vector<std::string> nouns = {"the helper", "the lock", "the cache", "the flag", "a timer",
                                                 "the queue"};
  static const std::vector<std::string> tails = {"in oom_reaper", "for the page", "", "early", "on exit"};
  static const std::vector<std::string> reasons = {
      "because the cache is cold", "because we lock the page", "because we unlock the page",
      "since the callers need it", "since the callers start early", "since the callers stop early",
      "so that the queue is set", "so that the queue is clear", "to avoid races"};
  auto pick = [&](const std::vector<std::string>& v) { return v[rng() % v.size()]; };
  const std::size_t n = rng() % (max_count + 1);
  std::vector<rationale::DRTriple> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string d = pick(verbs) + " " + pick(nouns);
    const auto tail = pick(tails);
    if (!tail.empty()) d += " " + tail;
    const std::string commit = "c" + std::to_string(i / 3);
    out.push_back({commit + "#" + std::to_string(i % 3), commit, d, pick(reasons), "test"});
  }
  return out;
}

/// Scores that replay a fixed table keyed by the unordered text pair;
/// unknown pairs score `fallback`.
class TableScorer final : public rationale::PairScorer {
 public:
  TableScorer(std::string id, std::map<std::pair<std::string, std::string>, double> table, double fallback = 0.0)
      : id_(std::move(id)), table_(std::move(table)), fallback_(fallback) {}
  std::string id() const override { return id_; }
  std::vector<double> score(std::span<const rationale::TextPair> pairs) override {
    std::vector<double> out;
    for (const auto& p : pairs) {
      std::string a(p.a), b(p.b);
      if (b < a) std::swap(a, b);
      auto it = table_.find({a, b});
      out.push_back(it == table_.end() ? fallback_ : it->second);
    }
    ++calls;
    return out;
  }
  int calls = 0;

 private:
  std::string id_;
  std::map<std::pair<std::string, std::string>, double> table_;
  double fallback_;
};

/// Returns uniformly random scores, deterministic per unordered text pair.
class HashScorer final : public rationale::PairScorer {
 public:
  explicit HashScorer(std::uint64_t salt) : salt_(salt) {}
  std::string id() const override { return "hash"; }
  std::vector<double> score(std::span<const rationale::TextPair> pairs) override {
    std::vector<double> out;
    for (const auto& p : pairs) {
      std::string a(p.a), b(p.b);
      if (b < a) std::swap(a, b);
      const auto h = std::hash<std::string>{}(a + '\x1f' + b) ^ salt_;
      out.push_back(static_cast<double>(h % 1000) / 999.0);
    }
    return out;
  }

 private:
  std::uint64_t salt_;
};

}  // namespace testing
