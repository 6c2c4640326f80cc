#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "rationale/analysis.hpp"
#include "rationale/cli.hpp"
#include "rationale/corpus.hpp"
#include "rationale/error.hpp"
#include "rationale/extraction.hpp"
#include "rationale/graph.hpp"
#include "rationale/labeling.hpp"
#include "rationale/scoring.hpp"

namespace py = pybind11;
using namespace rationale;

namespace {

py::dict edge_dict(const RelEdge& e) {
  py::dict d;
  d["a"] = e.a;
  d["b"] = e.b;
  d["kind"] = std::string(kind_name(e.kind));
  d["score"] = e.score;
  d["scorer_id"] = e.scorer_id;
  return d;
}

py::dict finding_dict(const InconsistencyFinding& f) {
  py::dict d;
  d["mechanism"] = std::string(mechanism_name(f.mechanism));
  d["d1"] = f.d1;
  d["d2"] = f.d2;
  d["dd_score"] = f.dd_score;
  d["r1"] = f.r1;
  d["r2"] = f.r2;
  d["rr_score"] = f.rr_score;
  d["texts"] = py::dict(py::arg("d1") = f.texts.d1, py::arg("r1") = f.texts.r1, py::arg("d2") = f.texts.d2,
                        py::arg("r2") = f.texts.r2);
  return d;
}

py::dict conflict_dict(const ConflictFinding& f) {
  py::dict d;
  d["new"] = f.new_decision;
  d["via"] = f.via_decision ? py::object(py::str(*f.via_decision)) : py::object(py::none());
  d["conflicting"] = f.conflicting_decision;
  d["sim_score"] = f.sim_score ? py::object(py::float_(*f.sim_score)) : py::object(py::none());
  d["contra_score"] = f.contra_score;
  d["direct"] = f.direct;
  return d;
}

DRTriple triple_from(const py::dict& d) {
  auto get = [&](const char* key) {
    if (!d.contains(key)) throw Error(std::string("triple is missing '") + key + "'");
    return d[key].cast<std::string>();
  };
  const auto sid = get("sentence_id");
  return {sid, d.contains("commit_id") ? get("commit_id") : sid.substr(0, sid.find('#')), get("decision"),
          get("rationale"), d.contains("extractor_id") ? get("extractor_id") : std::string("python")};
}

/// Graph plus the baseline scorers and the thresholds it was built with.
class Graph {
 public:
  Graph(std::vector<py::dict> triples, const Thresholds& t) : thresholds_(t) {
    std::vector<DRTriple> ts;
    for (const auto& d : triples) ts.push_back(triple_from(d));
    graph_ = build_graph(ts);
    score_graph(graph_, sim_, con_, thresholds_);
  }
  explicit Graph(RationaleGraph g) : graph_(std::move(g)) {
    if (graph_.meta().thresholds) thresholds_ = *graph_.meta().thresholds;
  }

  std::size_t size() const { return graph_.decisions().size(); }
  py::list edges() const {
    py::list out;
    for (const auto& [key, e] : graph_.edges()) out.append(edge_dict(e));
    return out;
  }
  py::list add(const py::dict& triple) {
    py::list out;
    for (const auto& e : add_decision(graph_, triple_from(triple), sim_, con_, thresholds_)) out.append(edge_dict(e));
    return out;
  }
  py::list m1() {
    py::list out;
    for (const auto& f : detect_m1(graph_, con_, thresholds_)) out.append(finding_dict(f));
    return out;
  }
  py::list m2() {
    py::list out;
    for (const auto& f : detect_m2(graph_, sim_, thresholds_)) out.append(finding_dict(f));
    return out;
  }
  py::list conflicts(const py::dict& triple) {
    py::list out;
    for (const auto& f : check_conflicts(graph_, triple_from(triple), sim_, con_, thresholds_)) {
      out.append(conflict_dict(f));
    }
    return out;
  }
  std::string to_json() const { return serialize_graph(graph_); }
  std::string to_dot() const {
    std::ostringstream out;
    export_dot(graph_, out);
    return out.str();
  }
  bool same_content(const Graph& other) const { return graph_.same_content(other.graph_); }

 private:
  RationaleGraph graph_;
  Thresholds thresholds_;
  BaselineSimilarityScorer sim_;
  BaselineContradictionScorer con_;
};

Thresholds thresholds_from(double dd_similar, double dd_contradicts, double rr) {
  Thresholds t{dd_similar, dd_contradicts, rr};
  t.validate();
  return t;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Decision/rationale extraction and inconsistency analysis of commit messages.";

  // Later registrations are tried first, so the subclass goes last.
  auto& error = py::register_exception<Error>(m, "RationaleError", PyExc_ValueError);
  py::register_exception<TransportError>(m, "TransportError", error.ptr());

  m.def("split_sentences", [](const std::string& message) { return split_sentences(message); },
        py::arg("message"));
  m.def("similarity", [](const std::string& a, const std::string& b) { return baseline_similarity(a, b); });
  m.def("contradiction", [](const std::string& a, const std::string& b) { return baseline_contradiction(a, b); });
  m.def(
      "classify",
      [](const std::vector<std::string>& texts) {
        std::vector<Sentence> sentences;
        for (std::size_t i = 0; i < texts.size(); ++i) sentences.push_back({sentence_id("py", i), "py", i, texts[i], {}});
        BaselineClassifier c;
        std::vector<std::pair<bool, bool>> out;
        for (const auto& p : c.classify(sentences)) out.emplace_back(p.decision, p.rationale);
        return out;
      },
      py::arg("texts"), "(decision, rationale) flags per sentence from the baseline classifier.");
  m.def(
      "extract",
      [](const std::string& sentence) {
        auto pair = baseline_extract(sentence);
        return std::make_pair(pair.decision, pair.rationale);
      },
      py::arg("sentence"));
  m.def("is_missing_entity", [](const std::string& s) { return is_missing_entity(s); });
  m.def("pair_count", &pair_count, py::arg("n"));
  m.def("fleiss_kappa", &fleiss_kappa, py::arg("counts"));
  m.def("unanimous_agreement", &unanimous_agreement, py::arg("flags"));
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run_subcommand(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one CLI subcommand; returns (exit_code, stdout, stderr).");

  py::class_<Graph>(m, "Graph")
      .def(py::init([](std::vector<py::dict> triples, double dd_similar, double dd_contradicts, double rr) {
             return Graph(std::move(triples), thresholds_from(dd_similar, dd_contradicts, rr));
           }),
           py::arg("triples"), py::arg("dd_similar") = 0.9, py::arg("dd_contradicts") = 0.9, py::arg("rr") = 0.6)
      .def_static("from_json", [](const std::string& text) { return Graph(parse_graph(text, "<python>")); })
      .def_static("load", [](const std::filesystem::path& p) { return Graph(load_graph(p)); })
      .def("__len__", &Graph::size)
      .def_property_readonly("edges", &Graph::edges)
      .def("add_decision", &Graph::add, py::arg("triple"))
      .def("detect_m1", &Graph::m1)
      .def("detect_m2", &Graph::m2)
      .def("check_conflicts", &Graph::conflicts, py::arg("triple"))
      .def("to_json", &Graph::to_json)
      .def("to_dot", &Graph::to_dot)
      .def("same_content", &Graph::same_content);
}
