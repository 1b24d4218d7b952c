#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "tkgqa/errors.hpp"
#include "tkgqa/gateway.hpp"

using namespace tkgqa;

namespace {

// Transport double: serves queued responses, records request bodies.
class FakeTransport : public HttpTransport {
 public:
  explicit FakeTransport(std::vector<HttpResponse> responses)
      : responses_(std::move(responses)) {}

  HttpResponse post_json(const std::string& path, const std::string& body,
                         const std::vector<std::pair<std::string, std::string>>& headers) override {
    paths.push_back(path);
    bodies.push_back(body);
    header_sets.push_back(headers);
    if (cursor_ >= responses_.size()) return responses_.back();
    return responses_[cursor_++];
  }

  std::vector<std::string> paths;
  std::vector<std::string> bodies;
  std::vector<std::vector<std::pair<std::string, std::string>>> header_sets;

 private:
  std::vector<HttpResponse> responses_;
  std::size_t cursor_ = 0;
};

std::string chat_body(const std::string& content) {
  nlohmann::json j;
  j["choices"] = {{{"message", {{"role", "assistant"}, {"content", content}}}}};
  j["usage"] = {{"prompt_tokens", 12}, {"completion_tokens", 3}};
  return j.dump();
}

HttpChatGateway::Config test_config(const std::string& trace_path = "") {
  HttpChatGateway::Config cfg;
  cfg.endpoint = "http://unused.invalid";
  cfg.model = "test-model";
  cfg.trace_path = trace_path;
  cfg.retry.max_attempts = 3;
  cfg.retry.backoff_base = std::chrono::milliseconds(10);
  cfg.retry.sleeper = [](std::chrono::milliseconds) {};  // no real sleeping
  return cfg;
}

}  // namespace

TEST_CASE("scripted responder follows its script") {
  ScriptedResponder responder(std::vector<ScriptStep>{{"*", "hello"}});
  DecodingConfig cfg;
  const std::vector<ChatMessage> messages{{Role::User, "hi"}};
  CHECK(responder.chat(messages, cfg) == "hello");
  // Same conversation state replays identically.
  CHECK(responder.chat(messages, cfg) == "hello");
  CHECK(responder.usage().calls == 2);
}

TEST_CASE("scripted responder cursor follows the transcript") {
  ScriptedResponder responder(std::vector<ScriptStep>{{"*", "first"}, {"*", "second"}});
  DecodingConfig cfg;
  std::vector<ChatMessage> messages{{Role::User, "go"}};
  const auto r1 = responder.chat(messages, cfg);
  CHECK(r1 == "first");
  messages.push_back({Role::Assistant, r1});
  messages.push_back({Role::Tool, "obs"});
  const auto r2 = responder.chat(messages, cfg);
  CHECK(r2 == "second");
  messages.push_back({Role::Assistant, r2});
  messages.push_back({Role::Tool, "obs2"});
  CHECK(responder.chat(messages, cfg) == "[script exhausted]");
}

TEST_CASE("scripted responder rejects empty message lists") {
  ScriptedResponder responder(std::vector<ScriptStep>{{"*", "x"}});
  DecodingConfig cfg;
  CHECK_THROWS_AS(responder.chat({}, cfg), PreconditionViolation);
}

TEST_CASE("scripted responder routes by conversation id and content") {
  ScriptedResponder responder;
  responder.add_route({"q1", {{"*", "answer one"}}});
  responder.add_route({"magic words", {{"*", "routed by content"}}});
  responder.add_route({"*", {{"*", "default"}}});
  DecodingConfig cfg;

  CHECK(responder.chat({{Role::User, "whatever"}}, cfg, "q1#0") == "answer one");
  CHECK(responder.chat({{Role::User, "say the magic words"}}, cfg, "other") ==
        "routed by content");
  CHECK(responder.chat({{Role::User, "nothing special"}}, cfg, "other") ==
        "default");
}

TEST_CASE("scripted responder verifies step match rules") {
  ScriptedResponder responder(std::vector<ScriptStep>{{"expected text", "ok"}});
  DecodingConfig cfg;
  CHECK(responder.chat({{Role::User, "contains expected text here"}}, cfg) == "ok");
  const auto mismatch = responder.chat({{Role::User, "something else"}}, cfg);
  CHECK(mismatch.find("[script mismatch") == 0);
}

TEST_CASE("script files load routes and terminal") {
  testing::TempDir dir;
  testing::write_file(dir.file("script.json"), R"({
    "terminal": "DONE",
    "routes": [
      {"match": "q1", "steps": [{"match": "*", "response": "r1"}]},
      {"match": "*", "steps": []}
    ]
  })");
  auto responder = ScriptedResponder::from_file(dir.file("script.json"));
  DecodingConfig cfg;
  CHECK(responder.chat({{Role::User, "x"}}, cfg, "q1") == "r1");
  CHECK(responder.chat({{Role::User, "x"}}, cfg, "zz") == "DONE");
  CHECK_THROWS_AS(ScriptedResponder::from_file(dir.file("missing.json")), IoError);
}

TEST_CASE("http gateway sends the chat-completions wire format") {
  auto transport = std::make_unique<FakeTransport>(
      std::vector<HttpResponse>{{200, chat_body("hi there"), ""}});
  auto* raw = transport.get();
  HttpChatGateway gateway(test_config(), std::move(transport));

  DecodingConfig cfg;
  cfg.temperature = 0.7;
  cfg.seed = 123;
  const auto reply =
      gateway.chat({{Role::System, "sys"}, {Role::User, "hello"}}, cfg);
  CHECK(reply == "hi there");

  REQUIRE(raw->bodies.size() == 1);
  CHECK(raw->paths[0] == "/v1/chat/completions");
  const auto body = nlohmann::json::parse(raw->bodies[0]);
  CHECK(body["model"] == "test-model");
  CHECK(body["temperature"] == 0.7);
  CHECK(body["seed"] == 123);
  REQUIRE(body["messages"].size() == 2);
  CHECK(body["messages"][0]["role"] == "system");
  CHECK(body["messages"][1]["content"] == "hello");

  const auto usage = gateway.usage();
  CHECK(usage.calls == 1);
  CHECK(usage.prompt_tokens == 12);
  CHECK(usage.completion_tokens == 3);
}

TEST_CASE("http gateway retries transient failures with backoff") {
  std::vector<std::chrono::milliseconds> delays;
  auto cfg = test_config();
  cfg.retry.sleeper = [&](std::chrono::milliseconds d) { delays.push_back(d); };

  auto transport = std::make_unique<FakeTransport>(std::vector<HttpResponse>{
      {0, "", "connection refused"},
      {503, "overloaded", ""},
      {200, chat_body("eventually"), ""}});
  HttpChatGateway gateway(cfg, std::move(transport));

  DecodingConfig dec;
  CHECK(gateway.chat({{Role::User, "x"}}, dec) == "eventually");
  REQUIRE(delays.size() == 2);
  // Exponential base schedule with +-25% jitter.
  CHECK(delays[0].count() >= 7);
  CHECK(delays[0].count() <= 13);
  CHECK(delays[1].count() >= 14);
  CHECK(delays[1].count() <= 26);
}

TEST_CASE("http gateway maps failure classes to typed errors") {
  DecodingConfig dec;
  {
    auto transport = std::make_unique<FakeTransport>(
        std::vector<HttpResponse>{{0, "", "down"}});
    HttpChatGateway gateway(test_config(), std::move(transport));
    CHECK_THROWS_AS(gateway.chat({{Role::User, "x"}}, dec), EndpointUnavailable);
  }
  {
    auto transport = std::make_unique<FakeTransport>(
        std::vector<HttpResponse>{{429, "slow down", ""}});
    HttpChatGateway gateway(test_config(), std::move(transport));
    CHECK_THROWS_AS(gateway.chat({{Role::User, "x"}}, dec), RateLimited);
  }
  {
    auto transport = std::make_unique<FakeTransport>(std::vector<HttpResponse>{
        {400, R"({"error":{"code":"context_length_exceeded"}})", ""}});
    HttpChatGateway gateway(test_config(), std::move(transport));
    CHECK_THROWS_AS(gateway.chat({{Role::User, "x"}}, dec), ContextTooLong);
  }
  {
    auto transport = std::make_unique<FakeTransport>(
        std::vector<HttpResponse>{{200, "not json", ""}});
    HttpChatGateway gateway(test_config(), std::move(transport));
    CHECK_THROWS_AS(gateway.chat({{Role::User, "x"}}, dec), EndpointUnavailable);
  }
  {
    auto transport = std::make_unique<FakeTransport>(
        std::vector<HttpResponse>{{200, chat_body("x"), ""}});
    HttpChatGateway gateway(test_config(), std::move(transport));
    CHECK_THROWS_AS(gateway.chat({}, dec), PreconditionViolation);
  }
}

TEST_CASE("http gateway estimates usage when the endpoint omits it") {
  nlohmann::json j;
  j["choices"] = {{{"message", {{"content", "12345678"}}}}};
  auto transport = std::make_unique<FakeTransport>(
      std::vector<HttpResponse>{{200, j.dump(), ""}});
  HttpChatGateway gateway(test_config(), std::move(transport));
  DecodingConfig dec;
  gateway.chat({{Role::User, "abcd"}}, dec);
  const auto usage = gateway.usage();
  CHECK(usage.prompt_tokens == 1);      // 4 chars -> 1 token
  CHECK(usage.completion_tokens == 2);  // 8 chars -> 2 tokens
}

TEST_CASE("gateway writes JSONL traces") {
  testing::TempDir dir;
  const auto trace_path = dir.file("trace.jsonl");
  auto transport = std::make_unique<FakeTransport>(
      std::vector<HttpResponse>{{200, chat_body("traced"), ""}});
  HttpChatGateway gateway(test_config(trace_path), std::move(transport));
  DecodingConfig dec;
  gateway.chat({{Role::User, "ping"}}, dec);

  const auto content = testing::read_file(trace_path);
  REQUIRE(!content.empty());
  const auto rec = nlohmann::json::parse(content.substr(0, content.find('\n')));
  CHECK(rec["model"] == "test-model");
  CHECK(rec["response"] == "traced");
  CHECK(rec["messages"][0]["content"] == "ping");
  CHECK(rec["usage"]["prompt_tokens"] == 12);
  CHECK(rec.contains("ts"));
}

TEST_CASE("http gateway caps in-flight requests") {
  // Transport that tracks concurrent entries.
  class SlowTransport : public HttpTransport {
   public:
    HttpResponse post_json(const std::string&, const std::string&,
                           const std::vector<std::pair<std::string, std::string>>&) override {
      const int now = ++current_;
      int seen = peak_.load();
      while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
      --current_;
      return {200, chat_body("ok"), ""};
    }
    std::atomic<int> current_{0};
    std::atomic<int> peak_{0};
  };

  auto transport = std::make_unique<SlowTransport>();
  auto* raw = transport.get();
  auto cfg = test_config();
  cfg.max_in_flight = 2;
  HttpChatGateway gateway(cfg, std::move(transport));

  std::vector<std::thread> threads;
  for (int i = 0; i < 6; ++i) {
    threads.emplace_back([&] {
      DecodingConfig dec;
      gateway.chat({{Role::User, "x"}}, dec);
    });
  }
  for (auto& t : threads) t.join();
  CHECK(raw->peak_.load() <= 2);
  CHECK(gateway.usage().calls == 6);
}

TEST_CASE("remote embedder speaks the embeddings wire format") {
  httplib::Server server;
  server.Post("/v1/embeddings",
              [&](const httplib::Request& req, httplib::Response& res) {
                const auto body = nlohmann::json::parse(req.body);
                nlohmann::json reply;
                reply["data"] = nlohmann::json::array();
                for (std::size_t i = 0; i < body["input"].size(); ++i) {
                  // Deterministic vector derived from the text length.
                  const auto len = body["input"][i].get<std::string>().size();
                  reply["data"].push_back(
                      {{"index", i},
                       {"embedding", {static_cast<double>(len), 1.0, 0.0, 0.0}}});
                }
                res.set_content(reply.dump(), "application/json");
              });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  RemoteEmbedder::Config cfg;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
  cfg.model = "embed-test";
  cfg.dimension = 4;
  RemoteEmbedder embedder(cfg);
  CHECK(embedder.fingerprint() == "remote-embed-test(dim=4)");

  const std::vector<std::string> texts{"ab", "lengthy text"};
  const auto vecs = embedder.embed_batch(texts);
  REQUIRE(vecs.size() == 2);
  CHECK(vecs[0] == std::vector<float>{2.0f, 1.0f, 0.0f, 0.0f});
  CHECK(vecs[1][0] == 12.0f);

  // Wrong-width responses surface as DimensionMismatch.
  RemoteEmbedder::Config bad = cfg;
  bad.dimension = 7;
  RemoteEmbedder narrow(bad);
  CHECK_THROWS_AS(narrow.embed_batch(texts), DimensionMismatch);

  server.stop();
  server_thread.join();

  // Endpoint gone: EmbedderUnavailable after retries.
  RemoteEmbedder::Config gone = cfg;
  gone.retry.max_attempts = 2;
  gone.retry.backoff_base = std::chrono::milliseconds(1);
  gone.retry.sleeper = [](std::chrono::milliseconds) {};
  RemoteEmbedder dead(gone);
  CHECK_THROWS_AS(dead.embed_batch(texts), EmbedderUnavailable);
}

TEST_CASE("http gateway talks to a real local server") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat/completions",
              [&](const httplib::Request& req, httplib::Response& res) {
                ++hits;
                const auto body = nlohmann::json::parse(req.body);
                const std::string user =
                    body["messages"].back()["content"].get<std::string>();
                res.set_content(chat_body("echo: " + user), "application/json");
              });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpChatGateway::Config cfg;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
  cfg.model = "local";
  cfg.retry.sleeper = [](std::chrono::milliseconds) {};
  HttpChatGateway gateway(std::move(cfg));
  DecodingConfig dec;
  CHECK(gateway.chat({{Role::User, "round trip"}}, dec) == "echo: round trip");
  CHECK(hits == 1);

  server.stop();
  server_thread.join();
}
