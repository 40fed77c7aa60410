#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "ragmi/answer_scorer.hpp"
#include "ragmi/error.hpp"
#include "support.hpp"

using namespace ragmi;
using nlohmann::json;

namespace {

LogLik ll(const std::string& q, double total, int tokens) {
  LogLik out;
  out.query_id = q;
  out.total_logprob = total;
  out.token_count = tokens;
  return out;
}

// Completion server that echoes whitespace tokens at -0.5 nats each.
class FakeCompletions {
 public:
  FakeCompletions() {
    server_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      last_auth_ = req.get_header_value("Authorization");
      if (fail_first_ > 0) {
        --fail_first_;
        res.status = 503;
        return;
      }
      auto body = json::parse(req.body);
      last_body_ = body;
      std::string text = body["prompt"];
      json offsets = json::array(), values = json::array();
      for (std::size_t i = 0; i < text.size();) {
        while (i < text.size() && text[i] == ' ') ++i;
        if (i >= text.size()) break;
        offsets.push_back(i);
        values.push_back(offsets.size() == 1 ? json(nullptr) : json(-0.5));
        while (i < text.size() && text[i] != ' ') ++i;
      }
      json logprobs = {{"token_logprobs", values}, {"text_offset", offsets}};
      json choice = {{"text", text}};
      if (!omit_logprobs_) choice["logprobs"] = logprobs;
      res.set_content(json{{"choices", json::array({choice})}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeCompletions() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/completions"; }

  std::atomic<int> requests_{0};
  std::atomic<int> fail_first_{0};
  bool omit_logprobs_ = false;
  std::string last_auth_;
  json last_body_;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

ScorerConfig http_config(const std::string& url) {
  ScorerConfig cfg;
  cfg.endpoint_url = url;
  cfg.model_id = "test-model";
  cfg.api_key_env_var = "RAGMI_TEST_FAKE_KEY";
  cfg.retry_limit = 2;
  cfg.initial_backoff_ms = 1;
  cfg.max_in_flight = 1;
  return cfg;
}

}  // namespace

TEST_SUITE("answer_scorer") {

TEST_CASE("mock backend: answer fully covered by the prompt costs nothing") {
  MockBackend m;
  auto s = m.score("Context: the capital is Paris.\nQuestion: capital?", "Paris");
  CHECK(s.total_logprob == 0.0);
  CHECK(s.token_count == 1);
}

TEST_CASE("mock backend: zero overlap costs one nat per token") {
  MockBackend m;
  auto s = m.score("nothing relevant here", "blue green red");
  CHECK(s.total_logprob == -3.0);
  CHECK(s.token_count == 3);
}

TEST_CASE("mock backend compares case-insensitively without edge punctuation") {
  MockBackend m;
  CHECK(m.score("see THE (Report).", "the report!").total_logprob == 0.0);
  CHECK(m.score("alpha", "alpha beta").total_logprob == -1.0);
}

TEST_CASE("cross entropy per token") {
  CHECK(cross_entropy(ll("q", -3.0, 3)) == 1.0);
  CHECK(cross_entropy(ll("q", 0.0, 5)) == 0.0);
  CHECK(cross_entropy(ll("q", -6.9315, 10)) == doctest::Approx(0.69315).epsilon(1e-12));
  CHECK_THROWS_AS(cross_entropy(ll("q", -1.0, 0)), ArgumentError);
}

TEST_CASE("pmi arithmetic") {
  CHECK(pmi(ll("q", -1.0, 2), ll("q", -3.0, 2)) == 2.0);
  CHECK(pmi(ll("q", -2.5, 2), ll("q", -2.5, 2)) == 0.0);
  CHECK(pmi(ll("q", -4.0, 2), ll("q", -3.0, 2)) == -1.0);
  CHECK_THROWS_AS(pmi(ll("q1", -1.0, 2), ll("q2", -3.0, 2)), ArgumentError);
}

TEST_CASE("cp_star softmax examples") {
  auto eq = cp_star_from_logliks("q", {"a", "b"}, {-2.0, -2.0});
  CHECK(eq.entries[0].probability == doctest::Approx(0.5).epsilon(1e-15));
  auto two = cp_star_from_logliks("q", {"a", "b"}, {std::log(2.0), 0.0});
  CHECK(two.entries[0].probability == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(two.entries[1].probability == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  auto one = cp_star_from_logliks("q", {"a"}, {-40.0});
  CHECK(one.entries[0].probability == 1.0);
  CHECK_THROWS_AS(cp_star_from_logliks("q", {}, {}), ArgumentError);
}

TEST_CASE("cp_star with the mock scorer favors the chunk holding the answer") {
  auto scorer = AnswerScorer::mock();
  QaPair qa{"q1", "Who wrote it?", "Ada Lovelace", {"c2"}};
  std::vector<Chunk> chunks{{"c1", "unrelated text", {}},
                            {"c2", "written by Ada Lovelace", {}},
                            {"c3", "Ada was here", {}}};
  auto d = cp_star(scorer, qa, chunks);
  validate(d);
  // log-liks: -2, 0, -1
  double z = std::exp(-2.0) + 1.0 + std::exp(-1.0);
  CHECK(*d.probability_of("c2") == doctest::Approx(1.0 / z).epsilon(1e-14));
  CHECK(*d.probability_of("c1") == doctest::Approx(std::exp(-2.0) / z).epsilon(1e-14));
}

TEST_CASE("reinforce examples") {
  auto cp = ragmi::test::dist("q", {{"c1", 0.5}, {"c2", 0.5}});
  auto r3 = reinforce(cp, {"c1"}, 3.0);
  CHECK(r3.entries[0].probability == 0.75);
  CHECK(r3.entries[1].probability == 0.25);
  auto r100 = reinforce(cp, {"c1"}, 100.0);
  CHECK(r100.entries[0].probability == doctest::Approx(100.0 / 101.0).epsilon(1e-15));
  auto same = reinforce(cp, {}, 5.0);
  CHECK(same.entries[0].probability == 0.5);
  CHECK_THROWS_AS(reinforce(cp, {"c1"}, 1.0), ArgumentError);
}

TEST_CASE("golden mass is monotone in gamma and the result stays normalized") {
  auto cp = ragmi::test::dist("q", {{"a", 0.1}, {"b", 0.6}, {"c", 0.3}});
  double prev = 0.1 + 0.3;
  for (double g : {1.5, 2.0, 5.0, 10.0, 100.0, 1e4}) {
    auto r = reinforce(cp, {"a", "c"}, g);
    validate(r);
    double mass = *r.probability_of("a") + *r.probability_of("c");
    CHECK(mass > prev);
    prev = mass;
  }
}

TEST_CASE("reinforce_all touches only queries with QA pairs") {
  TargetMap cp{{"q1", ragmi::test::dist("q1", {{"a", 0.5}, {"b", 0.5}})},
               {"q2", ragmi::test::dist("q2", {{"a", 0.5}, {"b", 0.5}})}};
  std::vector<QaPair> qa{{"q1", "?", "x", {"b"}}};
  auto r = reinforce_all(cp, qa, 3.0);
  CHECK(*r.at("q1").probability_of("b") == 0.75);
  CHECK(*r.at("q2").probability_of("b") == 0.5);
}

TEST_CASE("prompt rendering") {
  ScorerConfig cfg;
  CHECK(render_prompt(cfg, "Q?", std::string("CTX")) == "Context: CTX\n\nQuestion: Q?\n\nAnswer:");
  CHECK(render_prompt(cfg, "Q?", std::nullopt) == "Question: Q?\n\nAnswer:");
  cfg.prompt_template = "no slots";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("sha256 of a known string") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(cache_key("m", "p", "a") != cache_key("m", "p", "b"));
  CHECK(cache_key("m", "p", "a") == cache_key("m", "p", "a"));
}

TEST_CASE("cached calls do not reach the backend again") {
  auto dir = ragmi::test::scratch_dir("scorer_cache");
  ScorerConfig cfg;
  cfg.cache_path = (dir / "cache.jsonl").string();
  {
    AnswerScorer s(cfg, std::make_unique<MockBackend>());
    auto a = s.answer_loglik("q", Condition::none(), "Q?", std::nullopt, "alpha beta");
    auto b = s.answer_loglik("q", Condition::none(), "Q?", std::nullopt, "alpha beta");
    CHECK(a.total_logprob == b.total_logprob);
    CHECK(s.backend_calls() == 1);
  }
  AnswerScorer reloaded(cfg, std::make_unique<MockBackend>());
  auto c = reloaded.answer_loglik("q", Condition::none(), "Q?", std::nullopt, "alpha beta");
  CHECK(c.total_logprob == -2.0);
  CHECK(reloaded.backend_calls() == 0);
}

TEST_CASE("corrupt cache raises a cache error") {
  auto dir = ragmi::test::scratch_dir("scorer_bad_cache");
  auto path = (dir / "cache.jsonl").string();
  std::ofstream(path) << "{broken\n";
  CHECK_THROWS_AS(ScoreCache{path}, CacheError);
}

TEST_CASE("concurrent scoring matches sequential scoring") {
  ScorerConfig cfg;
  cfg.max_in_flight = 4;
  AnswerScorer s(cfg, std::make_unique<MockBackend>());
  std::vector<AnswerScorer::Request> reqs;
  for (int i = 0; i < 40; ++i)
    reqs.push_back({"q" + std::to_string(i), Condition::with_chunk("c"), "Q" + std::to_string(i),
                    std::string(i % 2 ? "word one" : "other"), "word " + std::to_string(i)});
  auto out = s.answer_logliks(reqs);
  REQUIRE(out.size() == reqs.size());
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    CHECK(out[i].query_id == reqs[i].query_id);
    CHECK(out[i].total_logprob == (i % 2 ? -1.0 : -2.0));
  }
}

TEST_CASE("http backend sums answer-token logprobs and sends the bearer key") {
  FakeCompletions server;
  setenv("RAGMI_TEST_FAKE_KEY", "sekret", 1);
  HttpBackend backend(http_config(server.url()));
  auto s = backend.score("Question: where?", "in the park");
  CHECK(s.token_count == 3);
  CHECK(s.total_logprob == doctest::Approx(-1.5));
  CHECK(server.last_auth_ == "Bearer sekret");
  CHECK(server.last_body_["echo"] == true);
  CHECK(server.last_body_["max_tokens"] == 0);
  CHECK(server.last_body_["model"] == "test-model");
  unsetenv("RAGMI_TEST_FAKE_KEY");
}

TEST_CASE("http transient failures are retried") {
  FakeCompletions server;
  server.fail_first_ = 2;
  AnswerScorer scorer(http_config(server.url()),
                      std::make_unique<HttpBackend>(http_config(server.url())));
  auto out = scorer.answer_loglik("q", Condition::none(), "Q?", std::nullopt, "yes");
  CHECK(out.token_count == 1);
  CHECK(server.requests_ == 3);
}

TEST_CASE("http retries exhausted is a transport error") {
  FakeCompletions server;
  server.fail_first_ = 100;
  AnswerScorer scorer(http_config(server.url()),
                      std::make_unique<HttpBackend>(http_config(server.url())));
  CHECK_THROWS_AS(scorer.answer_loglik("q", Condition::none(), "Q?", std::nullopt, "yes"),
                  TransportError);
  CHECK(server.requests_ == 3);
}

TEST_CASE("endpoint without logprobs is a capability error") {
  FakeCompletions server;
  server.omit_logprobs_ = true;
  HttpBackend backend(http_config(server.url()));
  CHECK_THROWS_AS(backend.score("Q?", "yes"), CapabilityError);
}

TEST_CASE("cp_star fails atomically when a call fails") {
  FakeCompletions server;
  server.fail_first_ = 100;
  auto cfg = http_config(server.url());
  cfg.retry_limit = 0;
  AnswerScorer scorer(cfg, std::make_unique<HttpBackend>(cfg));
  QaPair qa{"q", "Q?", "a", {}};
  std::vector<Chunk> chunks{{"c1", "x", {}}, {"c2", "y", {}}};
  CHECK_THROWS_AS(cp_star(scorer, qa, chunks), TransportError);
}

}  // TEST_SUITE
