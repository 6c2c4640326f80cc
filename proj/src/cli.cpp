#include "rationale/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <sstream>

#include "rationale/analysis.hpp"
#include "rationale/corpus.hpp"
#include "rationale/csv.hpp"
#include "rationale/error.hpp"
#include "rationale/extraction.hpp"
#include "rationale/graph.hpp"
#include "rationale/labeling.hpp"
#include "rationale/records.hpp"
#include "rationale/sidecar.hpp"

namespace rationale::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

/// Honors SOURCE_DATE_EPOCH so that graph files can be rebuilt bit-for-bit.
std::string build_timestamp() {
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    std::time_t t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
  }
  return utc_now();
}

std::string fnv1a(std::string_view data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

std::string file_digest(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "";
  std::stringstream buf;
  buf << in.rdbuf();
  return fnv1a(buf.str());
}

/// Line-oriented JSON logging.
class Log {
 public:
  explicit Log(std::ostream& err) : err_(err) {}

  void write(const char* level, const std::string& event, json fields = json::object()) {
    fields["level"] = level;
    fields["event"] = event;
    fields["ts"] = utc_now();
    err_ << fields.dump() << '\n';
  }
  void info(const std::string& event, json fields = json::object()) { write("info", event, std::move(fields)); }
  void warn(const std::string& event, json fields = json::object()) { write("warn", event, std::move(fields)); }
  void error(const std::string& event, json fields = json::object()) { write("error", event, std::move(fields)); }

 private:
  std::ostream& err_;
};

/// Collects what a subcommand read, wrote and counted.
struct Manifest {
  std::string subcommand;
  json inputs = json::array();
  json outputs = json::array();
  json counts = json::object();
  json durations_ms = json::object();
  std::string started_at = utc_now();
  Clock::time_point t0 = Clock::now();

  void input(const fs::path& p) { inputs.push_back({{"path", p.string()}, {"fnv1a64", file_digest(p)}}); }
  void output(const fs::path& p) { outputs.push_back(p.string()); }

  template <typename F>
  auto timed(const std::string& stage, F&& f) {
    const auto start = Clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      durations_ms[stage] = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    } else {
      auto result = f();
      durations_ms[stage] = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
      return result;
    }
  }

  void write(const fs::path& path, const RunConfig& config) {
    json doc;
    doc["subcommand"] = subcommand;
    doc["inputs"] = inputs;
    doc["outputs"] = outputs;
    doc["counts"] = counts;
    const auto cfg = config.to_json();
    doc["config"] = cfg;
    doc["config_hash"] = fnv1a(cfg.dump());
    // Everything that varies between identical runs sits under "timing".
    doc["timing"] = {{"started_at", started_at},
                     {"finished_at", utc_now()},
                     {"durations_ms", durations_ms},
                     {"total_ms", std::chrono::duration<double, std::milli>(Clock::now() - t0).count()}};
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write manifest '" + path.string() + "'");
    out << doc.dump(2) << '\n';
  }
};

struct Overrides {
  std::optional<std::string> config;
  std::optional<std::string> project;
  std::optional<std::string> graph;
  std::optional<std::string> reports;
  std::optional<std::string> preset;
  std::optional<double> dd_similar;
  std::optional<double> dd_contradicts;
  std::optional<double> rr;
  std::optional<std::string> backend;
  std::optional<std::string> sidecar_url;
  std::optional<std::size_t> batch_size;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> parallelism;
  std::optional<std::string> classifier;
  std::optional<std::string> extractor;
  std::optional<std::string> manifest;
  bool atomic_only = false;
  bool keep_raw_scores = false;
};

Backend parse_backend(const std::string& name) {
  if (name == "baseline") return Backend::Baseline;
  if (name == "sidecar") return Backend::Sidecar;
  throw UsageError("unknown backend '" + name + "' (expected baseline|sidecar)");
}

RunConfig resolve_config(const Overrides& o) {
  RunConfig cfg;
  if (o.config) {
    std::ifstream in(*o.config);
    if (!in) throw UsageError("cannot read config file '" + *o.config + "'");
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw UsageError("config file '" + *o.config + "' is not valid JSON: " + e.what());
    }
    cfg = apply_config_json(cfg, doc, *o.config);
  }
  if (o.project) cfg.project = *o.project;
  if (o.graph) cfg.paths.graph = *o.graph;
  if (o.reports) cfg.paths.reports = *o.reports;
  if (o.preset) {
    cfg.thresholds_preset = *o.preset;
    cfg.thresholds = Thresholds::preset(*o.preset);
  }
  if (o.dd_similar) cfg.thresholds.dd_similar = *o.dd_similar;
  if (o.dd_contradicts) cfg.thresholds.dd_contradicts = *o.dd_contradicts;
  if (o.rr) cfg.thresholds.rr = *o.rr;
  if (o.backend) cfg.backend = parse_backend(*o.backend);
  if (o.sidecar_url) cfg.sidecar_url = *o.sidecar_url;
  if (!cfg.sidecar_url) {
    if (const char* env = std::getenv("RATIONALE_SIDECAR_URL"); env && *env) cfg.sidecar_url = env;
  }
  if (o.batch_size) cfg.batch_size = *o.batch_size;
  if (o.seed) cfg.seed = *o.seed;
  if (o.parallelism) cfg.parallelism = *o.parallelism;
  if (o.classifier) cfg.classifier_id = *o.classifier;
  if (o.extractor) cfg.extractor_id = *o.extractor;
  cfg.validate();
  return cfg;
}

/// Model-backed components for one run, created on demand.
class Backends {
 public:
  explicit Backends(const RunConfig& cfg) : cfg_(cfg) {}

  PairScorer& similarity() {
    if (cfg_.backend == Backend::Baseline) return baseline_sim_;
    if (!sidecar_sim_) sidecar_sim_ = std::make_unique<SidecarScorer>(client(), RelationKind::Similar);
    return *sidecar_sim_;
  }
  PairScorer& contradiction() {
    if (cfg_.backend == Backend::Baseline) return baseline_con_;
    if (!sidecar_con_) sidecar_con_ = std::make_unique<SidecarScorer>(client(), RelationKind::Contradicts);
    return *sidecar_con_;
  }
  Extractor& extractor() {
    if (cfg_.extractor_id == "baseline") return baseline_extractor_;
    if (cfg_.extractor_id == "sidecar") {
      if (!sidecar_extractor_) sidecar_extractor_ = std::make_unique<SidecarExtractor>(client());
      return *sidecar_extractor_;
    }
    throw UsageError("unknown extractor '" + cfg_.extractor_id + "' (expected baseline|sidecar)");
  }
  Classifier& classifier(const std::optional<std::string>& predictions) {
    if (cfg_.classifier_id == "baseline") return baseline_classifier_;
    if (cfg_.classifier_id == "file") {
      if (!predictions) throw UsageError("classifier 'file' requires --predictions");
      if (!file_classifier_) {
        file_classifier_ = std::make_unique<PredictionFileClassifier>(PredictionFileClassifier::from_file(*predictions));
      }
      return *file_classifier_;
    }
    if (cfg_.classifier_id == "sidecar") {
      if (!sidecar_classifier_) sidecar_classifier_ = std::make_unique<SidecarClassifier>(client());
      return *sidecar_classifier_;
    }
    throw UsageError("unknown classifier '" + cfg_.classifier_id + "' (expected baseline|file|sidecar)");
  }

 private:
  const SidecarClient& client() {
    if (!client_) {
      if (!cfg_.sidecar_url) throw UsageError("missing required field sidecar_url for the sidecar backend");
      SidecarConfig sc;
      sc.url = *cfg_.sidecar_url;
      if (const char* token = std::getenv("RATIONALE_SIDECAR_TOKEN")) sc.token = token;
      client_ = std::make_unique<SidecarClient>(sc);
    }
    return *client_;
  }

  const RunConfig& cfg_;
  std::unique_ptr<SidecarClient> client_;
  BaselineSimilarityScorer baseline_sim_;
  BaselineContradictionScorer baseline_con_;
  BaselineExtractor baseline_extractor_;
  BaselineClassifier baseline_classifier_;
  std::unique_ptr<SidecarScorer> sidecar_sim_;
  std::unique_ptr<SidecarScorer> sidecar_con_;
  std::unique_ptr<SidecarExtractor> sidecar_extractor_;
  std::unique_ptr<SidecarClassifier> sidecar_classifier_;
  std::unique_ptr<PredictionFileClassifier> file_classifier_;
};

std::string extension(ReportFormat f) {
  switch (f) {
    case ReportFormat::Json:
      return "json";
    case ReportFormat::Markdown:
      return "md";
    case ReportFormat::Csv:
      return "csv";
  }
  return "txt";
}

fs::path or_default(const std::optional<std::string>& flag, const fs::path& fallback) {
  return flag ? fs::path(*flag) : fallback;
}

fs::path graph_path(const RunConfig& cfg) {
  return cfg.paths.graph.empty() ? cfg.paths.reports / "graph.json" : cfg.paths.graph;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void render_edges(const std::vector<RelEdge>& edges, const RationaleGraph& g, ReportFormat format,
                  std::ostream& out) {
  switch (format) {
    case ReportFormat::Json: {
      json arr = json::array();
      for (const auto& e : edges) {
        arr.push_back({{"a", e.a},
                       {"b", e.b},
                       {"kind", kind_name(e.kind)},
                       {"score", e.score},
                       {"scorer_id", e.scorer_id},
                       {"texts", {{"a", g.decision(e.a).text}, {"b", g.decision(e.b).text}}}});
      }
      out << json{{"edges", arr}}.dump(2) << '\n';
      break;
    }
    case ReportFormat::Markdown: {
      out << "| No | Decision 1 | Decision 2 | Relationship |\n|---|---|---|---|\n";
      std::size_t n = 0;
      for (const auto& e : edges) {
        char score[16];
        std::snprintf(score, sizeof score, "%.2f", e.score);
        auto cell = [](std::string s) {
          for (auto& c : s) {
            if (c == '|' || c == '\n') c = ' ';
          }
          return s;
        };
        out << "| " << ++n << " | " << cell(g.decision(e.a).text) << " | " << cell(g.decision(e.b).text) << " | "
            << kind_name(e.kind) << " (" << score << ") |\n";
      }
      break;
    }
    case ReportFormat::Csv: {
      csv::write_row(out, {"a", "b", "kind", "score", "scorer_id"});
      for (const auto& e : edges) {
        csv::write_row(out, {e.a, e.b, std::string(kind_name(e.kind)), json(e.score).dump(), e.scorer_id});
      }
      break;
    }
  }
}

}  // namespace

void RunConfig::validate() const {
  thresholds.validate();
  if (batch_size < 1) throw UsageError("batch_size must be at least 1");
  if (parallelism < 1) throw UsageError("parallelism must be at least 1");
  if (backend == Backend::Sidecar && (!sidecar_url || sidecar_url->empty())) {
    throw UsageError("missing required field sidecar_url: the sidecar backend needs --sidecar-url, a config "
                     "entry or RATIONALE_SIDECAR_URL");
  }
}

json RunConfig::to_json() const {
  return {{"project", project},
          {"paths", {{"input", paths.input.string()}, {"graph", paths.graph.string()}, {"reports", paths.reports.string()}}},
          {"thresholds",
           {{"preset", thresholds_preset},
            {"dd_similar", thresholds.dd_similar},
            {"dd_contradicts", thresholds.dd_contradicts},
            {"rr", thresholds.rr}}},
          {"classifier", classifier_id},
          {"extractor", extractor_id},
          {"backend", backend == Backend::Baseline ? "baseline" : "sidecar"},
          {"sidecar_url", sidecar_url ? json(*sidecar_url) : json(nullptr)},
          {"batch_size", batch_size},
          {"seed", seed},
          {"parallelism", parallelism}};
}

RunConfig apply_config_json(RunConfig cfg, const json& doc, const std::string& source_name) {
  try {
    if (!doc.is_object()) throw UsageError(source_name + ": config must be a JSON object");
    if (doc.contains("project")) cfg.project = doc.at("project").get<std::string>();
    if (doc.contains("paths")) {
      const auto& p = doc.at("paths");
      if (p.contains("input")) cfg.paths.input = p.at("input").get<std::string>();
      if (p.contains("graph")) cfg.paths.graph = p.at("graph").get<std::string>();
      if (p.contains("reports")) cfg.paths.reports = p.at("reports").get<std::string>();
    }
    if (doc.contains("thresholds")) {
      const auto& t = doc.at("thresholds");
      if (t.contains("preset")) {
        cfg.thresholds_preset = t.at("preset").get<std::string>();
        cfg.thresholds = Thresholds::preset(cfg.thresholds_preset);
      }
      if (t.contains("dd_similar")) cfg.thresholds.dd_similar = t.at("dd_similar").get<double>();
      if (t.contains("dd_contradicts")) cfg.thresholds.dd_contradicts = t.at("dd_contradicts").get<double>();
      if (t.contains("rr")) cfg.thresholds.rr = t.at("rr").get<double>();
    }
    if (doc.contains("classifier")) cfg.classifier_id = doc.at("classifier").get<std::string>();
    if (doc.contains("extractor")) cfg.extractor_id = doc.at("extractor").get<std::string>();
    if (doc.contains("backend")) cfg.backend = parse_backend(doc.at("backend").get<std::string>());
    if (doc.contains("sidecar_url") && !doc.at("sidecar_url").is_null()) {
      cfg.sidecar_url = doc.at("sidecar_url").get<std::string>();
    }
    if (doc.contains("batch_size")) cfg.batch_size = doc.at("batch_size").get<std::size_t>();
    if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("parallelism")) cfg.parallelism = doc.at("parallelism").get<std::size_t>();
  } catch (const json::exception& e) {
    throw UsageError(source_name + ": invalid config: " + e.what());
  }
  return cfg;
}

int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Log log(err);
  CLI::App app{"Extract decisions and rationale from commit messages, build a rationale graph and analyse it.",
               "rationale"};
  app.require_subcommand(1, 1);

  Overrides o;
  app.add_option("--config", o.config, "JSON run configuration");
  app.add_option("--project", o.project, "Project identifier");
  app.add_option("--graph", o.graph, "Graph file");
  app.add_option("--reports", o.reports, "Directory for default outputs and manifests");
  app.add_option("--thresholds-preset", o.preset, "Threshold preset: oom | generalization");
  app.add_option("--dd-similar", o.dd_similar, "Decision-decision Similar threshold");
  app.add_option("--dd-contradicts", o.dd_contradicts, "Decision-decision Contradicts threshold");
  app.add_option("--rr", o.rr, "Rationale-rationale threshold");
  app.add_option("--backend", o.backend, "Scorer backend: baseline | sidecar");
  app.add_option("--sidecar-url", o.sidecar_url, "Sidecar base URL (falls back to RATIONALE_SIDECAR_URL)");
  app.add_option("--batch-size", o.batch_size, "Pairs per scoring batch");
  app.add_option("--seed", o.seed, "Random seed");
  app.add_option("--parallelism", o.parallelism, "Concurrent extraction chunks / scoring batches");
  app.add_option("--classifier", o.classifier, "Classifier: baseline | file | sidecar");
  app.add_option("--extractor", o.extractor, "Extractor: baseline | sidecar");
  app.add_option("--manifest", o.manifest, "Manifest output path");
  app.add_flag("--atomic-only", o.atomic_only, "Drop tian records flagged non_atomic");
  app.add_flag("--keep-raw-scores", o.keep_raw_scores, "Also write every pair score to a JSON-lines file");

  // Per-subcommand options.
  std::optional<std::string> input, format, out_path, sentences_path, predictions, predictions_out, exclude,
      outcomes_out, triples_path, checkpoint, raw_scores_out, mechanism, report_format, message, message_file,
      decision_text, rationale_text, commit_id, gold, dataset_format, task, findings_path;
  int folds = 0;
  bool raters = false;

  auto* ingest = app.add_subcommand("ingest", "Read commits and split them into sentences");
  ingest->add_option("--input", input, "Commit file or directory");
  ingest->add_option("--format", format, "jsonl | git-log");
  ingest->add_option("--out", out_path, "Sentences JSON-lines output");

  auto* label = app.add_subcommand("label", "Classify sentences as Decision / Rationale");
  label->add_option("--sentences", sentences_path, "Sentences JSON-lines input");
  label->add_option("--predictions", predictions, "Prediction CSV for --classifier file");
  label->add_option("--out", out_path, "Labelled sentences output");
  label->add_option("--predictions-out", predictions_out, "Also write predictions as CSV");

  auto* extract = app.add_subcommand("extract", "Extract decision/rationale triples");
  extract->add_option("--sentences", sentences_path, "Labelled sentences input");
  extract->add_option("--exclude", exclude, "Sentence ids to skip, one per line");
  extract->add_option("--out", out_path, "Triples JSON-lines output");
  extract->add_option("--outcomes-out", outcomes_out, "Per-sentence extraction outcomes");

  auto* build = app.add_subcommand("build-graph", "Build the rationale graph from triples");
  build->add_option("--triples", triples_path, "Triples JSON-lines input");

  auto* score = app.add_subcommand("score", "Score all decision pairs and store edges");
  score->add_option("--checkpoint", checkpoint, "Checkpoint file for resumable scoring");
  score->add_option("--raw-scores-out", raw_scores_out, "Raw score file (implies --keep-raw-scores)");

  auto* analyze = app.add_subcommand("analyze", "Run similarity/contradiction and M1/M2 analyses");
  analyze->add_option("--mechanism", mechanism, "m1 | m2 | both | similar | contradicts");
  analyze->add_option("--format", report_format, "json | markdown | csv");
  analyze->add_option("--out", out_path, "Report output");

  auto* check = app.add_subcommand("check-patch", "Check a new commit message for conflicts with the graph");
  check->add_option("--message", message, "Commit message text");
  check->add_option("--message-file", message_file, "File holding the commit message");
  check->add_option("--decision", decision_text, "Decision text (skips classification and extraction)");
  check->add_option("--rationale", rationale_text, "Rationale text to pair with --decision");
  check->add_option("--commit-id", commit_id, "Identifier for the new commit");
  check->add_option("--format", report_format, "json | markdown | csv");
  check->add_option("--out", out_path, "Report output");

  auto* eval = app.add_subcommand("eval", "Evaluate a classifier against a labelled dataset");
  eval->add_option("--gold", gold, "Labelled dataset CSV")->required();
  eval->add_option("--dataset-format", dataset_format, "oom | tian");
  eval->add_option("--predictions", predictions, "Prediction CSV for --classifier file");
  eval->add_option("--task", task, "decision | rationale | both");
  eval->add_option("--folds", folds, "Cross-validation folds (0: single evaluation)");
  eval->add_flag("--raters", raters, "Also report rater performance and agreement (oom)");
  eval->add_option("--out", out_path, "Metrics JSON output");

  auto* report = app.add_subcommand("report", "Re-render a JSON findings file");
  report->add_option("--findings", findings_path, "Findings JSON")->required();
  report->add_option("--format", report_format, "json | markdown | csv");
  report->add_option("--out", out_path, "Report output");

  auto* dot = app.add_subcommand("export-dot", "Write the graph as Graphviz DOT");
  dot->add_option("--out", out_path, "DOT output");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    log.error("usage", {{"message", e.what()}});
    out << app.help();
    return 2;
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  RunConfig cfg;
  Manifest manifest;
  manifest.subcommand = sub;
  try {
    cfg = resolve_config(o);
    if (sub == "ingest" && input) cfg.paths.input = *input;
    Backends backends(cfg);
    const fs::path reports = cfg.paths.reports;
    fs::create_directories(reports);
    log.info("start", {{"subcommand", sub}, {"config", cfg.to_json()}});

    if (sub == "ingest") {
      if (cfg.paths.input.empty()) throw UsageError("missing required field input (--input or paths.input)");
      const auto fmt = format.value_or("jsonl");
      CommitFormat cf;
      if (fmt == "jsonl" || fmt == "json-lines") cf = CommitFormat::JsonLines;
      else if (fmt == "git-log") cf = CommitFormat::GitLogExport;
      else throw UsageError("unknown commit format '" + fmt + "' (expected jsonl|git-log)");
      const auto dest = or_default(out_path, reports / "sentences.jsonl");
      auto result = manifest.timed("ingest", [&] { return ingest_commits(cfg.paths.input, cf, cfg.project); });
      if (result.skipped_empty) log.warn("empty_messages_skipped", {{"count", result.skipped_empty}});
      const auto sentences = manifest.timed("split", [&] { return segment_commits(result.commits); });
      std::vector<json> rows;
      for (const auto& s : sentences) rows.push_back(records::to_json(s));
      ensure_parent(dest);
      records::write_json_lines(dest, rows);
      manifest.input(cfg.paths.input);
      manifest.output(dest);
      manifest.counts = {{"commits", result.commits.size()},
                         {"skipped_empty", result.skipped_empty},
                         {"sentences", sentences.size()}};
    } else if (sub == "label") {
      const auto src = or_default(sentences_path, reports / "sentences.jsonl");
      auto sentences = records::read_sentences(src);
      auto& classifier = backends.classifier(predictions);
      const auto preds = manifest.timed("classify", [&] { return classifier.classify(sentences); });
      apply_predictions(sentences, preds);
      const auto dest = or_default(out_path, reports / "labeled.jsonl");
      std::vector<json> rows;
      std::size_t d = 0, r = 0, both = 0;
      for (const auto& s : sentences) {
        rows.push_back(records::to_json(s));
        d += s.labels.decision();
        r += s.labels.rationale();
        both += s.labels.both();
      }
      ensure_parent(dest);
      records::write_json_lines(dest, rows);
      if (predictions_out) {
        std::ofstream pout(*predictions_out, std::ios::trunc);
        if (!pout) throw Error("cannot write '" + *predictions_out + "'");
        write_predictions_csv(pout, preds);
        manifest.output(*predictions_out);
      }
      manifest.input(src);
      if (predictions) manifest.input(*predictions);
      manifest.output(dest);
      manifest.counts = {{"sentences", sentences.size()},
                         {"decision", d},
                         {"rationale", r},
                         {"labelled_both", both},
                         {"classifier", classifier.id()}};
    } else if (sub == "extract") {
      const auto src = or_default(sentences_path, reports / "labeled.jsonl");
      const auto sentences = records::read_sentences(src);
      std::set<std::string> excluded;
      if (exclude) {
        excluded = load_exclusion_list(*exclude);
        manifest.input(*exclude);
      }
      std::vector<Sentence> both;
      std::size_t labelled_both = 0;
      for (const auto& s : sentences) {
        if (!s.labels.both()) continue;
        ++labelled_both;
        if (!excluded.count(s.id)) both.push_back(s);
      }
      auto& extractor = backends.extractor();
      const auto outcomes =
          manifest.timed("extract", [&] { return extract_all(extractor, both, cfg.parallelism); });
      const auto filtered = filter_triples(outcomes);
      const auto dest = or_default(out_path, reports / "triples.jsonl");
      const auto outcomes_dest = or_default(outcomes_out, reports / "outcomes.jsonl");
      std::vector<json> rows;
      for (const auto& t : filtered.triples) rows.push_back(records::to_json(t));
      ensure_parent(dest);
      records::write_json_lines(dest, rows);
      rows.clear();
      for (const auto& oc : outcomes) rows.push_back(records::to_json(oc));
      ensure_parent(outcomes_dest);
      records::write_json_lines(outcomes_dest, rows);
      json dropped = json::object();
      for (const auto& [status, count] : filtered.dropped) dropped[std::string(status_name(status))] = count;
      manifest.input(src);
      manifest.output(dest);
      manifest.output(outcomes_dest);
      manifest.counts = {{"labelled_both", labelled_both},
                         {"excluded", labelled_both - both.size()},
                         {"outcomes", outcomes.size()},
                         {"triples", filtered.triples.size()},
                         {"dropped", dropped},
                         {"dropped_total", filtered.dropped_total()},
                         {"extractor", extractor.id()}};
      log.info("extracted", manifest.counts);
    } else if (sub == "build-graph") {
      const auto src = or_default(triples_path, reports / "triples.jsonl");
      const auto triples = records::read_triples(src);
      auto graph = manifest.timed("build", [&] { return build_graph(triples); });
      graph.meta().source_project = cfg.project;
      graph.meta().build_timestamp = build_timestamp();
      const auto dest = graph_path(cfg);
      ensure_parent(dest);
      save_graph(graph, dest);
      manifest.input(src);
      manifest.output(dest);
      manifest.counts = {{"triples", triples.size()},
                         {"decisions", graph.decisions().size()},
                         {"rationales", graph.rationales().size()}};
    } else if (sub == "score") {
      const auto path = graph_path(cfg);
      manifest.input(path);
      auto graph = load_graph(path);
      ScoreOptions options;
      options.batch_size = cfg.batch_size;
      options.parallelism = cfg.backend == Backend::Sidecar ? cfg.parallelism : 1;
      if (checkpoint) options.checkpoint = fs::path(*checkpoint);
      const auto scores = manifest.timed("score", [&] {
        return score_graph(graph, backends.similarity(), backends.contradiction(), cfg.thresholds, options);
      });
      save_graph(graph, path);
      manifest.output(path);
      if (o.keep_raw_scores || raw_scores_out) {
        const fs::path raw = raw_scores_out ? fs::path(*raw_scores_out) : fs::path(path.string() + ".scores.jsonl");
        std::ofstream rout(raw, std::ios::trunc);
        if (!rout) throw Error("cannot write raw scores '" + raw.string() + "'");
        write_raw_scores(rout, scores);
        manifest.output(raw);
      }
      if (checkpoint) {
        // A finished run's checkpoint would be stale for any other graph.
        for (const char* suffix : {".similar", ".contradicts"}) {
          fs::remove(*checkpoint + suffix);
          fs::remove(*checkpoint + suffix + std::string(".scores"));
        }
      }
      manifest.counts = {{"decisions", graph.decisions().size()},
                         {"pairs", pair_count(graph.decisions().size())},
                         {"similar_edges", graph.edges_of(RelationKind::Similar).size()},
                         {"contradicts_edges", graph.edges_of(RelationKind::Contradicts).size()}};
      log.info("scored", manifest.counts);
    } else if (sub == "analyze") {
      const auto path = graph_path(cfg);
      manifest.input(path);
      const auto graph = load_graph(path);
      const auto fmt = parse_report_format(report_format.value_or("json"));
      const auto mech = mechanism.value_or("both");
      const auto dest = or_default(out_path, reports / ("findings-" + mech + "." + extension(fmt)));
      ensure_parent(dest);
      std::ofstream rout(dest, std::ios::binary | std::ios::trunc);
      if (!rout) throw Error("cannot write report '" + dest.string() + "'");
      if (mech == "similar" || mech == "contradicts") {
        const auto edges = mech == "similar" ? find_similar(graph, cfg.thresholds.dd_similar)
                                             : find_contradictions(graph, cfg.thresholds.dd_contradicts);
        render_edges(edges, graph, fmt, rout);
        manifest.counts = {{"edges", edges.size()}};
      } else if (mech == "m1" || mech == "m2" || mech == "both") {
        std::vector<InconsistencyFinding> findings;
        std::size_t m1 = 0, m2 = 0;
        if (mech != "m2") {
          auto f = manifest.timed("m1", [&] { return detect_m1(graph, backends.contradiction(), cfg.thresholds); });
          m1 = f.size();
          findings.insert(findings.end(), f.begin(), f.end());
        }
        if (mech != "m1") {
          auto f = manifest.timed("m2", [&] { return detect_m2(graph, backends.similarity(), cfg.thresholds); });
          m2 = f.size();
          findings.insert(findings.end(), f.begin(), f.end());
        }
        render_report(findings, fmt, rout, cfg.thresholds);
        manifest.counts = {{"findings_m1", m1}, {"findings_m2", m2}};
      } else {
        throw UsageError("unknown mechanism '" + mech + "' (expected m1|m2|both|similar|contradicts)");
      }
      manifest.output(dest);
      log.info("analyzed", manifest.counts);
    } else if (sub == "check-patch") {
      const auto path = graph_path(cfg);
      manifest.input(path);
      const auto graph = load_graph(path);
      const std::string cid = commit_id.value_or("new-patch");
      std::vector<DRTriple> triples;
      std::size_t sentence_count = 0;
      if (decision_text) {
        if (!rationale_text) throw UsageError("--decision requires --rationale");
        triples.push_back({sentence_id(cid, 0), cid, *decision_text, *rationale_text, "user"});
      } else {
        std::string text;
        if (message) {
          text = *message;
        } else if (message_file) {
          std::ifstream min(*message_file);
          if (!min) throw Error("cannot read message file '" + *message_file + "'");
          std::stringstream buf;
          buf << min.rdbuf();
          text = buf.str();
          manifest.input(*message_file);
        } else {
          throw UsageError("check-patch needs --message, --message-file or --decision/--rationale");
        }
        auto sentences = segment_commits({Commit{cid, cfg.project, text, std::nullopt}});
        sentence_count = sentences.size();
        auto& classifier = backends.classifier(predictions);
        apply_predictions(sentences, classifier.classify(sentences));
        std::vector<Sentence> both;
        for (const auto& s : sentences) {
          if (s.labels.both()) both.push_back(s);
        }
        triples = filter_triples(extract_all(backends.extractor(), both, cfg.parallelism)).triples;
      }
      std::vector<ConflictFinding> findings;
      for (const auto& t : triples) {
        auto f = check_conflicts(graph, t, backends.similarity(), backends.contradiction(), cfg.thresholds);
        findings.insert(findings.end(), f.begin(), f.end());
      }
      const auto fmt = parse_report_format(report_format.value_or("json"));
      const auto dest = or_default(out_path, reports / ("conflicts." + extension(fmt)));
      ensure_parent(dest);
      std::ofstream rout(dest, std::ios::binary | std::ios::trunc);
      if (!rout) throw Error("cannot write report '" + dest.string() + "'");
      render_conflicts(findings, fmt, rout, cfg.thresholds);
      std::size_t direct = 0;
      for (const auto& f : findings) direct += f.direct;
      manifest.output(dest);
      manifest.counts = {{"sentences", sentence_count},
                         {"triples", triples.size()},
                         {"findings", findings.size()},
                         {"direct", direct},
                         {"transitive", findings.size() - direct}};
      log.info("checked", manifest.counts);
    } else if (sub == "eval") {
      const auto dfmt = dataset_format.value_or("oom");
      DatasetFormat df;
      if (dfmt == "oom") df = DatasetFormat::Oom;
      else if (dfmt == "tian") df = DatasetFormat::Tian;
      else throw UsageError("unknown dataset format '" + dfmt + "' (expected oom|tian)");
      LoadOptions lo;
      lo.atomic_only = o.atomic_only;
      const auto data = load_labeled_dataset(*gold, df, lo);
      manifest.input(*gold);
      auto& classifier = backends.classifier(predictions);
      const auto preds = manifest.timed("classify", [&] { return classifier.classify(data.sentences); });
      std::vector<Task> tasks;
      const auto t = task.value_or("both");
      if (t == "both") tasks = {Task::Decision, Task::Rationale};
      else tasks = {parse_task(t)};

      json result;
      result["classifier"] = classifier.id();
      result["dataset"] = {{"path", *gold}, {"format", dfmt}, {"sentences", data.sentences.size()},
                           {"commits", data.commit_count()}};
      std::unordered_map<std::string, const LabelPrediction*> by_id;
      for (const auto& p : preds) by_id.emplace(p.sentence_id, &p);
      for (Task tk : tasks) {
        json entry;
        entry["overall"] = records::to_json(evaluate(preds, data, tk));
        if (folds > 0) {
          const std::vector<std::string> ids = [&] {
            std::vector<std::string> v;
            for (const auto& s : data.sentences) v.push_back(s.id);
            return v;
          }();
          const auto plan = kfold_split(ids, folds, cfg.seed);
          // The classifiers here are not trained per fold; each fold scores
          // the held-out sentences with the fixed predictions.
          const auto cv = cross_validate(data, plan, tk, [&](auto, std::span<const Sentence> test) {
            std::vector<LabelPrediction> out;
            for (const auto& s : test) out.push_back(*by_id.at(s.id));
            return out;
          });
          entry["cross_validation"] = records::to_json(cv);
          entry["cross_validation"]["k"] = folds;
          entry["cross_validation"]["seed"] = cfg.seed;
        }
        result["tasks"][std::string(task_name(tk))] = entry;
      }
      if (raters) {
        if (data.rater_columns.empty()) throw UsageError("--raters needs a dataset with rater columns (oom)");
        std::vector<LabelSet> final_labels;
        for (const auto& s : data.sentences) final_labels.push_back(s.labels);
        for (Task tk : tasks) {
          json rj;
          auto perf = json::array();
          std::vector<std::vector<bool>> flags;
          std::vector<std::vector<int>> counts(data.sentences.size(), std::vector<int>(2, 0));
          for (const auto& column : data.rater_columns) {
            perf.push_back(records::to_json(rater_performance(column, final_labels, tk)));
            std::vector<bool> f;
            for (std::size_t i = 0; i < column.size(); ++i) {
              const bool yes = label_for(tk, column[i]);
              f.push_back(yes);
              ++counts[i][yes ? 0 : 1];
            }
            flags.push_back(std::move(f));
          }
          rj["rater_performance"] = perf;
          rj["fleiss_kappa"] = data.sentences.empty() ? json(nullptr) : json(fleiss_kappa(counts));
          rj["unanimous_agreement"] = unanimous_agreement(flags);
          result["raters"][std::string(task_name(tk))] = rj;
        }
      }
      const auto dest = or_default(out_path, reports / "metrics.json");
      ensure_parent(dest);
      std::ofstream mout(dest, std::ios::trunc);
      if (!mout) throw Error("cannot write '" + dest.string() + "'");
      mout << result.dump(2) << '\n';
      manifest.output(dest);
      manifest.counts = {{"sentences", data.sentences.size()}, {"predictions", preds.size()}};
    } else if (sub == "report") {
      std::ifstream fin(*findings_path);
      if (!fin) throw Error("cannot read findings '" + *findings_path + "'");
      std::stringstream buf;
      buf << fin.rdbuf();
      const auto doc = parse_findings_json(buf.str(), *findings_path);
      const auto fmt = parse_report_format(report_format.value_or("markdown"));
      const auto dest = or_default(out_path, reports / ("report." + extension(fmt)));
      ensure_parent(dest);
      render_report(doc.findings, fmt, dest, doc.thresholds);
      manifest.input(*findings_path);
      manifest.output(dest);
      manifest.counts = {{"findings", doc.findings.size()}};
    } else if (sub == "export-dot") {
      const auto path = graph_path(cfg);
      manifest.input(path);
      const auto graph = load_graph(path);
      const auto dest = or_default(out_path, reports / "graph.dot");
      ensure_parent(dest);
      export_dot(graph, dest);
      manifest.output(dest);
      manifest.counts = {{"decisions", graph.decisions().size()}, {"edges", graph.edges().size()}};
    }

    // One manifest per analysis so that m1, m2 and both runs do not overwrite each other.
    const auto stem = sub == "analyze" ? sub + "-" + mechanism.value_or("both") : sub;
    const auto manifest_path = or_default(o.manifest, reports / ("manifest-" + stem + ".json"));
    ensure_parent(manifest_path);
    manifest.write(manifest_path, cfg);
    log.info("done", {{"subcommand", sub}, {"manifest", manifest_path.string()}});
    return 0;
  } catch (const UsageError& e) {
    log.error("usage", {{"subcommand", sub}, {"message", e.what()}});
    out << app.get_subcommands().front()->help();
    return 2;
  } catch (const std::exception& e) {
    log.error("failed", {{"subcommand", sub}, {"message", e.what()}});
    return 1;
  }
}

}  // namespace rationale::cli
