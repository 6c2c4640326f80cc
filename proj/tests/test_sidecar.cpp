#include <doctest.h>

#include <httplib.h>

#include <thread>

#include "rationale/error.hpp"
#include "rationale/sidecar.hpp"
#include "support.hpp"

using namespace rationale;
using nlohmann::json;

namespace {

/// In-process stand-in for the sidecar. Each handler is swappable per test.
class StubSidecar {
 public:
  StubSidecar() {
    server_.Get("/healthz", [this](const httplib::Request& req, httplib::Response& res) {
      last_token = req.get_header_value("X-Sidecar-Token");
      res.set_content(R"({"status":"ok","models":{"similarity":"m1"}})", "application/json");
    });
    server_.Post("/score", [this](const httplib::Request& req, httplib::Response& res) { score(req, res); });
    server_.Post("/extract", [this](const httplib::Request& req, httplib::Response& res) { extract(req, res); });
    server_.Post("/classify", [this](const httplib::Request& req, httplib::Response& res) { classify(req, res); });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubSidecar() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  std::function<void(const httplib::Request&, httplib::Response&)> score = [](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body);
    json scores = json::array();
    for (const auto& p : body.at("pairs")) scores.push_back(p[0] == p[1] ? 1.0 : 0.25);
    res.set_content(json{{"scores", scores}, {"model_id", "m"}}.dump(), "application/json");
  };
  std::function<void(const httplib::Request&, httplib::Response&)> extract = [](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body);
    json results = json::array();
    for (const auto& s : body.at("sentences")) {
      const auto text = s.get<std::string>();
      if (text == "raw") {
        results.push_back(json{{"decision", nullptr}, {"rationale", nullptr}, {"raw", "Decision: A\nRationale: B"}});
      } else if (text == "garbage") {
        results.push_back(json{{"decision", nullptr}, {"rationale", nullptr}, {"raw", "I cannot help"}});
      } else {
        results.push_back({{"decision", "D " + text}, {"rationale", "None"}});
      }
    }
    res.set_content(json{{"results", results}}.dump(), "application/json");
  };
  std::function<void(const httplib::Request&, httplib::Response&)> classify = [](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body);
    json results = json::array();
    for (std::size_t i = 0; i < body.at("sentences").size(); ++i) {
      results.push_back({{"decision", i % 2 == 0}, {"rationale", true}, {"scores", {{"decision", 0.75}}}});
    }
    res.set_content(json{{"results", results}}.dump(), "application/json");
  };
  std::string last_token;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("sidecar URL parsing") {
  CHECK_NOTHROW(SidecarClient({"http://localhost:8080"}));
  CHECK_NOTHROW(SidecarClient({"http://localhost:8080/api/"}));
  CHECK_NOTHROW(SidecarClient({"localhost"}));
  CHECK_THROWS_AS(SidecarClient({"https://localhost"}), UsageError);
  CHECK_THROWS_AS(SidecarClient({"http://localhost:port"}), UsageError);
  CHECK_THROWS_AS(SidecarClient({"http://:80"}), UsageError);
}

TEST_CASE("sidecar endpoints") {
  StubSidecar stub;
  SidecarClient client({stub.url(), "secret"});

  SUBCASE("health and token") {
    CHECK(client.health().at("status") == "ok");
    CHECK(stub.last_token == "secret");
  }
  SUBCASE("score") {
    const std::vector<TextPair> pairs = {{"a", "a"}, {"a", "b"}};
    CHECK(client.score("similarity", pairs, "") == std::vector<double>{1.0, 0.25});
    CHECK(client.score("similarity", {}, "").empty());
    SidecarScorer scorer(client, RelationKind::Contradicts);
    CHECK(scorer.id() == "sidecar:contradiction");
    CHECK(scorer.score(pairs).size() == 2);
  }
  SUBCASE("score through the pair pipeline") {
    SidecarScorer scorer(client, RelationKind::Similar);
    const std::vector<NodeText> texts = {{"x", "same"}, {"y", "same"}, {"z", "other"}};
    const auto scores = score_all_pairs(scorer, texts, RelationKind::Similar, ScoreOptions{1, 3, {}});
    REQUIRE(scores.size() == 3);
    CHECK(scores[0].score == 1.0);
    CHECK(scores[0].scorer_id == "sidecar:similarity");
  }
  SUBCASE("extract") {
    const std::vector<std::string> sentences = {"one", "raw", "garbage"};
    const auto out = client.extract(sentences);
    REQUIRE(out.size() == 3);
    CHECK(out[0].decision == "D one");
    CHECK(out[0].rationale == "None");
    CHECK_FALSE(out[0].malformed);
    CHECK(out[1].decision == "A");
    CHECK(out[1].rationale == "B");
    CHECK(out[2].malformed);
    SidecarExtractor ex(client);
    CHECK(ex.id() == "sidecar-llm:default");
  }
  SUBCASE("classify") {
    const std::vector<Sentence> ss = {{"c#0", "c", 0, "a", {}}, {"c#1", "c", 1, "b", {}}};
    const auto out = client.classify(ss);
    REQUIRE(out.size() == 2);
    CHECK(out[0].sentence_id == "c#0");
    CHECK(out[0].decision);
    CHECK(out[0].decision_score == 0.75);
    CHECK(out[0].rationale_score == 1.0);
    CHECK_FALSE(out[1].decision);
  }
  SUBCASE("retryable statuses are transport errors") {
    for (int status : {429, 500, 503}) {
      stub.score = [status](const httplib::Request&, httplib::Response& res) {
        res.status = status;
        res.set_content("busy", "text/plain");
      };
      const std::vector<TextPair> pairs = {{"a", "b"}};
      const auto code = std::to_string(status);
      CHECK_THROWS_WITH_AS(client.score("similarity", pairs, ""), doctest::Contains(code.c_str()), TransportError);
    }
  }
  SUBCASE("client errors and bad bodies are protocol errors") {
    const std::vector<TextPair> pairs = {{"a", "b"}};
    stub.score = [](const httplib::Request&, httplib::Response& res) {
      res.status = 400;
      res.set_content("{\"error\":\"bad kind\"}", "application/json");
    };
    CHECK_THROWS_WITH_AS(client.score("similarity", pairs, ""), doctest::Contains("bad kind"), ProtocolError);
    stub.score = [](const httplib::Request&, httplib::Response& res) { res.set_content("not json", "text/plain"); };
    CHECK_THROWS_AS(client.score("similarity", pairs, ""), ProtocolError);
    stub.score = [](const httplib::Request&, httplib::Response& res) { res.set_content("{\"scores\":[0.1,0.2]}", "application/json"); };
    CHECK_THROWS_AS(client.score("similarity", pairs, ""), ProtocolError);
    stub.score = [](const httplib::Request&, httplib::Response& res) { res.set_content("{\"scores\":[\"x\"]}", "application/json"); };
    CHECK_THROWS_AS(client.score("similarity", pairs, ""), ProtocolError);
    stub.score = [](const httplib::Request&, httplib::Response& res) { res.set_content("{\"scores\":[1.5]}", "application/json"); };
    SidecarScorer scorer(client, RelationKind::Similar);
    const std::vector<NodeText> texts = {{"x", "a"}, {"y", "b"}};
    CHECK_THROWS_WITH_AS(score_all_pairs(scorer, texts, RelationKind::Similar), doctest::Contains("x"),
                         ProtocolError);
    stub.extract = [](const httplib::Request&, httplib::Response& res) { res.set_content("{\"results\":[]}", "application/json"); };
    const std::vector<std::string> one = {"s"};
    CHECK_THROWS_AS(client.extract(one), ProtocolError);
    stub.classify = [](const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"results\":[{\"decision\":\"yes\"}]}", "application/json");
    };
    const std::vector<Sentence> ss = {{"c#0", "c", 0, "a", {}}};
    CHECK_THROWS_AS(client.classify(ss), ProtocolError);
  }
}

TEST_CASE("unreachable sidecar") {
  // Nothing listens on port 1 of the loopback interface.
  SidecarConfig cfg{"http://127.0.0.1:1"};
  cfg.timeout_seconds = 5;
  SidecarClient client(cfg);
  CHECK_THROWS_WITH_AS(client.health(), doctest::Contains("unreachable"), TransportError);
}
