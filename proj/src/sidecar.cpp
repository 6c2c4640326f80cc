#include "rationale/sidecar.hpp"

#include <httplib.h>

#include "rationale/error.hpp"

namespace rationale {

namespace {

std::optional<std::string> optional_string(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw ProtocolError(std::string("field '") + key + "' is not a string");
  return it->get<std::string>();
}

}  // namespace

SidecarClient::SidecarClient(SidecarConfig config) : config_(std::move(config)) {
  std::string rest = config_.url;
  const std::string scheme = "http://";
  if (rest.rfind(scheme, 0) == 0) {
    rest = rest.substr(scheme.size());
  } else if (rest.find("://") != std::string::npos) {
    throw UsageError("sidecar_url '" + config_.url + "' must use http://");
  }
  const auto slash = rest.find('/');
  if (slash != std::string::npos) {
    prefix_ = rest.substr(slash);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    rest = rest.substr(0, slash);
  }
  const auto colon = rest.rfind(':');
  if (colon != std::string::npos) {
    try {
      port_ = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw UsageError("sidecar_url '" + config_.url + "' has an invalid port");
    }
    rest = rest.substr(0, colon);
  }
  host_ = rest;
  if (host_.empty()) throw UsageError("sidecar_url '" + config_.url + "' has no host");
}

nlohmann::json SidecarClient::request(const std::string& method, const std::string& path,
                                      const nlohmann::json* body) const {
  httplib::Client cli(host_, port_);
  cli.set_connection_timeout(10);
  cli.set_read_timeout(config_.timeout_seconds);
  cli.set_write_timeout(config_.timeout_seconds);
  httplib::Headers headers;
  if (!config_.token.empty()) headers.emplace("X-Sidecar-Token", config_.token);

  const auto full = prefix_ + path;
  httplib::Result res = method == "GET"
                            ? cli.Get(full, headers)
                            : cli.Post(full, headers, body ? body->dump() : "{}", "application/json");
  if (!res) {
    throw TransportError("sidecar " + config_.url + full + " unreachable: " + httplib::to_string(res.error()));
  }
  const int status = res->status;
  if (status == 429 || status >= 500) {
    throw TransportError("sidecar " + full + " returned HTTP " + std::to_string(status) + ": " + res->body);
  }
  if (status != 200) {
    throw ProtocolError("sidecar " + full + " rejected the request with HTTP " + std::to_string(status) + ": " +
                        res->body);
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError("sidecar " + full + " returned invalid JSON: " + e.what());
  }
}

nlohmann::json SidecarClient::health() const { return request("GET", "/healthz", nullptr); }

std::vector<double> SidecarClient::score(const std::string& kind, std::span<const TextPair> pairs,
                                         const std::string& model_id) const {
  if (pairs.empty()) return {};
  nlohmann::json body;
  body["kind"] = kind;
  body["model_id"] = model_id;
  auto& arr = body["pairs"] = nlohmann::json::array();
  for (const auto& p : pairs) arr.push_back({std::string(p.a), std::string(p.b)});
  const auto reply = request("POST", "/score", &body);
  if (!reply.contains("scores") || !reply.at("scores").is_array()) {
    throw ProtocolError("sidecar /score reply has no 'scores' array");
  }
  std::vector<double> scores;
  for (const auto& s : reply.at("scores")) {
    if (!s.is_number()) throw ProtocolError("sidecar /score reply contains a non-numeric score");
    scores.push_back(s.get<double>());
  }
  if (scores.size() != pairs.size()) {
    throw ProtocolError("sidecar /score returned " + std::to_string(scores.size()) + " scores for " +
                        std::to_string(pairs.size()) + " pairs");
  }
  return scores;
}

std::vector<RawExtraction> SidecarClient::extract(std::span<const std::string> sentences) const {
  if (sentences.empty()) return {};
  nlohmann::json body;
  body["sentences"] = std::vector<std::string>(sentences.begin(), sentences.end());
  body["prompt_id"] = config_.prompt_id;
  const auto reply = request("POST", "/extract", &body);
  if (!reply.contains("results") || !reply.at("results").is_array() ||
      reply.at("results").size() != sentences.size()) {
    throw ProtocolError("sidecar /extract reply must hold one result per sentence");
  }
  std::vector<RawExtraction> out;
  for (const auto& r : reply.at("results")) {
    RawExtraction raw;
    raw.decision = optional_string(r, "decision");
    raw.rationale = optional_string(r, "rationale");
    if (!raw.decision && !raw.rationale) {
      // The sidecar could not parse the model reply; try the tolerant parser
      // on the verbatim echo before declaring it malformed.
      if (auto echo = optional_string(r, "raw")) {
        if (auto parsed = parse_extractor_reply(*echo)) {
          raw.decision = std::move(parsed->decision);
          raw.rationale = std::move(parsed->rationale);
        } else {
          raw.malformed = true;
        }
      }
    }
    out.push_back(std::move(raw));
  }
  return out;
}

std::vector<LabelPrediction> SidecarClient::classify(std::span<const Sentence> sentences) const {
  if (sentences.empty()) return {};
  nlohmann::json body;
  auto& arr = body["sentences"] = nlohmann::json::array();
  for (const auto& s : sentences) arr.push_back(s.text);
  const auto reply = request("POST", "/classify", &body);
  if (!reply.contains("results") || !reply.at("results").is_array() ||
      reply.at("results").size() != sentences.size()) {
    throw ProtocolError("sidecar /classify reply must hold one result per sentence");
  }
  std::vector<LabelPrediction> out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto& r = reply.at("results")[i];
    try {
      LabelPrediction p;
      p.sentence_id = sentences[i].id;
      p.decision = r.at("decision").get<bool>();
      p.rationale = r.at("rationale").get<bool>();
      p.decision_score = p.decision ? 1.0 : 0.0;
      p.rationale_score = p.rationale ? 1.0 : 0.0;
      if (r.contains("scores") && r.at("scores").is_object()) {
        p.decision_score = r.at("scores").value("decision", p.decision_score);
        p.rationale_score = r.at("scores").value("rationale", p.rationale_score);
      }
      for (double s : {p.decision_score, p.rationale_score}) {
        if (!(s >= 0.0 && s <= 1.0)) throw ProtocolError("classifier score outside [0, 1]");
      }
      p.classifier_id = "sidecar-classifier";
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError("sidecar /classify result " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

SidecarScorer::SidecarScorer(const SidecarClient& client, RelationKind kind) : client_(client), kind_(kind) {}

std::string SidecarScorer::id() const {
  const auto& cfg = client_.config();
  const auto& model = kind_ == RelationKind::Similar ? cfg.similarity_model : cfg.contradiction_model;
  return std::string("sidecar:") + (kind_ == RelationKind::Similar ? "similarity" : "contradiction") +
         (model.empty() ? "" : ":" + model);
}

std::vector<double> SidecarScorer::score(std::span<const TextPair> pairs) {
  const auto& cfg = client_.config();
  return client_.score(kind_ == RelationKind::Similar ? "similarity" : "contradiction", pairs,
                       kind_ == RelationKind::Similar ? cfg.similarity_model : cfg.contradiction_model);
}

}  // namespace rationale
