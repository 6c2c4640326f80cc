#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rationale/extraction.hpp"
#include "rationale/labeling.hpp"
#include "rationale/scoring.hpp"

namespace rationale {

/// Connection settings for the model-serving sidecar.
struct SidecarConfig {
  std::string url;          // e.g. "http://127.0.0.1:8080"
  std::string token;        // sent as X-Sidecar-Token when non-empty
  int timeout_seconds = 600;
  std::string similarity_model;     // empty: sidecar default
  std::string contradiction_model;  // empty: sidecar default
  std::string prompt_id = "default";
};

/// JSON-over-HTTP client for the sidecar's /score, /extract, /classify and
/// /healthz endpoints. Stateless; each call opens its own connection, so
/// one client may be shared across threads.
class SidecarClient {
 public:
  explicit SidecarClient(SidecarConfig config);

  const SidecarConfig& config() const { return config_; }

  nlohmann::json health() const;
  /// `kind` is "similarity" or "contradiction".
  std::vector<double> score(const std::string& kind, std::span<const TextPair> pairs,
                            const std::string& model_id) const;
  std::vector<RawExtraction> extract(std::span<const std::string> sentences) const;
  std::vector<LabelPrediction> classify(std::span<const Sentence> sentences) const;

  /// Sends a request and returns the decoded body. Throws TransportError
  /// when unreachable or on 429/5xx, ProtocolError on other non-200
  /// statuses and on undecodable bodies.
  nlohmann::json request(const std::string& method, const std::string& path,
                         const nlohmann::json* body) const;

 private:
  SidecarConfig config_;
  std::string host_;
  int port_ = 80;
  std::string prefix_;
};

class SidecarScorer final : public PairScorer {
 public:
  SidecarScorer(const SidecarClient& client, RelationKind kind);
  std::string id() const override;
  std::vector<double> score(std::span<const TextPair> pairs) override;

 private:
  const SidecarClient& client_;
  RelationKind kind_;
};

class SidecarExtractor final : public Extractor {
 public:
  explicit SidecarExtractor(const SidecarClient& client) : client_(client) {}
  std::string id() const override { return "sidecar-llm:" + client_.config().prompt_id; }
  std::vector<RawExtraction> extract(std::span<const std::string> sentences) override {
    return client_.extract(sentences);
  }

 private:
  const SidecarClient& client_;
};

class SidecarClassifier final : public Classifier {
 public:
  explicit SidecarClassifier(const SidecarClient& client) : client_(client) {}
  std::string id() const override { return "sidecar-classifier"; }
  std::vector<LabelPrediction> classify(std::span<const Sentence> sentences) override {
    return client_.classify(sentences);
  }

 private:
  const SidecarClient& client_;
};

}  // namespace rationale
