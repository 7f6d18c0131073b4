#include <doctest.h>

#include <atomic>
#include <deque>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "cotfaith/error.hpp"
#include "cotfaith/model_client.hpp"

using namespace cotfaith;
using nlohmann::json;

namespace {

const std::string kChatOk = R"j({"id":"r1","model":"m","choices":[{"index":0,"finish_reason":"length",
  "message":{"role":"assistant","content":"B)"},
  "logprobs":{"content":[{"token":"B","logprob":-0.1,"top_logprobs":[{"token":"B","logprob":-0.1},{"token":"A","logprob":-2.5}]}]}}]})j";

class FakeTransport final : public HttpTransport {
 public:
  std::deque<HttpResponse> replies;
  HttpResponse fallback{200, kChatOk, {}, ""};
  std::chrono::milliseconds hold{0};
  std::vector<std::string> paths;
  std::vector<std::string> bodies;
  std::atomic<int> active{0};
  std::atomic<int> peak{0};

  HttpResponse post(const std::string& path, const std::string& body,
                    const std::vector<std::pair<std::string, std::string>>&) override {
    const int now = ++active;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    if (hold.count()) std::this_thread::sleep_for(hold);
    HttpResponse r;
    {
      std::lock_guard lock(mu_);
      paths.push_back(path);
      bodies.push_back(body);
      if (replies.empty()) {
        r = fallback;
      } else {
        r = replies.front();
        replies.pop_front();
      }
    }
    --active;
    return r;
  }

 private:
  std::mutex mu_;
};

EndpointConfig config() {
  EndpointConfig cfg;
  cfg.base_url = "http://localhost:9";
  cfg.model_name = "m";
  return cfg;
}

CompletionRequest chat_request() {
  CompletionRequest req;
  req.payload = std::vector<ChatMessage>{{"user", "Pick one."}, {"assistant", "So the right answer is ("}};
  req.decoding = Decoding{1.0, 0.0, 4};
  req.top_logprobs = 8;
  return req;
}

}  // namespace

TEST_SUITE("model_client") {

TEST_CASE("two 429s then success: one result after two backoffs") {
  auto transport = std::make_shared<FakeTransport>();
  transport->replies = {{429, "slow down", {}, ""}, {429, "slow down", {{"retry-after", "1"}}, ""}};
  std::vector<std::chrono::milliseconds> sleeps;
  RemoteClient client(config(), transport, std::nullopt,
                      [&](std::chrono::milliseconds d) { sleeps.push_back(d); });
  const auto r = client.complete(chat_request());
  CHECK(r.attempts == 3);
  CHECK(r.text == "B)");
  REQUIRE(sleeps.size() == 2);
  CHECK(sleeps[1] >= std::chrono::milliseconds(1000));
  CHECK(transport->paths.size() == 3);
  CHECK(transport->paths[0] == "/v1/chat/completions");
}

TEST_CASE("retries are bounded") {
  auto transport = std::make_shared<FakeTransport>();
  transport->fallback = {503, "", {}, ""};
  EndpointConfig cfg = config();
  cfg.limits.retry.max_attempts = 3;
  RemoteClient client(cfg, transport, std::nullopt, [](auto) {});
  try {
    client.complete(chat_request());
    FAIL("expected a transport fault");
  } catch (const TransportFault& e) {
    CHECK(e.attempts() == 3);
  }
  CHECK(transport->paths.size() == 3);
}

TEST_CASE("client errors are not retried") {
  auto transport = std::make_shared<FakeTransport>();
  transport->fallback = {401, "bad key", {}, ""};
  RemoteClient client(config(), transport, std::nullopt, [](auto) {});
  CHECK_THROWS_AS(client.complete(chat_request()), ConfigFault);
  CHECK(transport->paths.size() == 1);
}

TEST_CASE("an invalid body is a protocol fault naming the field") {
  auto transport = std::make_shared<FakeTransport>();
  transport->fallback = {200, R"({"choices":[{"message":{"content":42}}]})", {}, ""};
  RemoteClient client(config(), transport, std::nullopt, [](auto) {});
  try {
    client.complete(chat_request());
    FAIL("expected a protocol fault");
  } catch (const ProtocolFault& e) {
    CHECK(e.field() == "choices[0].message.content");
  }
  CHECK_THROWS_AS(parse_response_body("not json", true), ProtocolFault);
  CHECK_THROWS_AS(parse_response_body(R"({"choices":[]})", true), ProtocolFault);
}

TEST_CASE("log-probabilities are parsed per position") {
  const auto r = parse_response_body(kChatOk, true);
  REQUIRE(r.token_logprobs.has_value());
  REQUIRE(r.token_logprobs->size() == 1);
  CHECK((*r.token_logprobs)[0].size() == 2);
  CHECK((*r.token_logprobs)[0][1].token == "A");

  const auto t = parse_response_body(
      R"j({"choices":[{"text":"C)","logprobs":{"tokens":["C"],"top_logprobs":[{"C":-0.2,"D":-1.9}]}}]})j", false);
  CHECK(t.text == "C)");
  REQUIRE(t.token_logprobs.has_value());
  CHECK((*t.token_logprobs)[0].size() == 2);
}

TEST_CASE("request bodies follow the wire schema") {
  const auto body = build_request_body(config(), chat_request());
  CHECK(body.at("model") == "m");
  CHECK(body.at("logprobs") == true);
  CHECK(body.at("top_logprobs") == 8);
  CHECK(body.at("temperature") == 0.0);
  CHECK(body.at("max_tokens") == 4);
  CHECK(body.at("messages").size() == 2);

  CompletionRequest text;
  text.payload = std::string("Question...\nSo the right answer is (");
  text.top_logprobs = 8;
  const auto tb = build_request_body(config(), text);
  CHECK(tb.at("prompt") == "Question...\nSo the right answer is (");
  CHECK(tb.at("logprobs") == 8);
  CHECK(tb.at("top_p") == 0.95);
  CHECK(request_path(text) == "/v1/completions");
}

TEST_CASE("never more than max_in_flight requests outstanding") {
  auto transport = std::make_shared<FakeTransport>();
  transport->hold = std::chrono::milliseconds(5);
  EndpointConfig cfg = config();
  cfg.limits.max_in_flight = 3;
  RemoteClient client(cfg, transport, std::nullopt, [](auto) {});
  std::vector<std::jthread> workers;
  for (int w = 0; w < 10; ++w) {
    workers.emplace_back([&] {
      for (int i = 0; i < 5; ++i) client.complete(chat_request());
    });
  }
  workers.clear();
  CHECK(transport->paths.size() == 50);
  CHECK(transport->peak.load() <= 3);
  CHECK(client.peak_in_flight() <= 3);
  CHECK(transport->peak.load() >= 2);
}

TEST_CASE("endpoint configuration") {
  EndpointConfig cfg = config();
  CHECK_NOTHROW(cfg.validate());
  cfg.decoding.top_p = 1.5;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = config();
  cfg.limits.max_in_flight = 0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  CHECK(config().fingerprint() == config().fingerprint());
  EndpointConfig other = config();
  other.model_name = "n";
  CHECK(other.fingerprint() != config().fingerprint());
}

TEST_CASE("payload digests are canonical") {
  const Payload a = std::vector<ChatMessage>{{"user", "x"}};
  const Payload b = std::vector<ChatMessage>{{"user", "x"}};
  const Payload c = std::string("x");
  CHECK(payload_digest(a) == payload_digest(b));
  CHECK(payload_digest(a) != payload_digest(c));
}

}  // TEST_SUITE
