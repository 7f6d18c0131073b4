#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

namespace cotfaith {

struct ChatMessage {
  std::string role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

/// Either chat turns (chat completions) or raw text (completions).
using Payload = std::variant<std::vector<ChatMessage>, std::string>;

/// Canonical JSON text of a payload; the digest of this keys scripted mocks.
std::string canonical_payload(const Payload& payload);
std::string payload_digest(const Payload& payload);

struct Decoding {
  double top_p = 0.95;
  double temperature = 0.8;
  int max_tokens = 512;

  bool operator==(const Decoding&) const = default;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{20000};
  double jitter = 0.25;  // fraction of the delay, applied symmetrically
};

struct Limits {
  int max_in_flight = 4;
  double requests_per_second = 0.0;  // 0 = unlimited
  RetryPolicy retry;
};

struct EndpointConfig {
  std::string base_url;
  std::string model_name;
  std::string api_key_env;  // name of the environment variable, never the key
  Decoding decoding;
  Limits limits;

  /// Throws UsageError on out-of-domain values.
  void validate() const;
  /// Short digest of url, model and key; safe to persist.
  std::string fingerprint() const;
};

struct CompletionRequest {
  Payload payload;
  std::optional<Decoding> decoding;
  int top_logprobs = 0;  // 0 = do not request log-probabilities
  std::vector<std::string> stop;
};

struct TokenAlternative {
  std::string token;
  double logprob = 0.0;
};

/// Per generated position, the top alternatives the endpoint reported.
using TokenLogprobs = std::vector<std::vector<TokenAlternative>>;

struct CompletionResult {
  std::string text;
  std::optional<TokenLogprobs> token_logprobs;
  std::string finish_reason;
  std::chrono::milliseconds latency{0};
  std::string model;
  std::string request_id;
  int attempts = 1;
};

/// Throws ProtocolFault when a log-probability is non-finite or positive.
void validate(const CompletionResult& result);

class ModelClient {
 public:
  virtual ~ModelClient() = default;
  virtual CompletionResult complete(const CompletionRequest& request) = 0;
  virtual std::string identity() const = 0;
};

struct HttpResponse {
  int status = 0;  // 0 = connection-level failure
  std::string body;
  std::map<std::string, std::string> headers;  // keys lower-cased
  std::string error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& path, const std::string& body,
                            const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

/// cpp-httplib backed transport rooted at `base_url` (http or https).
std::shared_ptr<HttpTransport> make_http_transport(const std::string& base_url,
                                                   std::chrono::seconds timeout =
                                                       std::chrono::seconds(120));

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Counts concurrent holders and blocks beyond `limit`.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(int limit) : limit_(limit) {}
  void acquire();
  void release();
  int peak() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  int limit_;
  int active_ = 0;
  int peak_ = 0;
};

/// Request bodies for the OpenAI-compatible wire schema.
nlohmann::json build_request_body(const EndpointConfig& cfg, const CompletionRequest& req);
std::string request_path(const CompletionRequest& req);
/// Parses a chat or text completion body. Unknown fields are ignored.
CompletionResult parse_response_body(const std::string& body, bool chat);

/// OpenAI-compatible client with retry, backoff with jitter, a request-rate
/// cap and an in-flight cap. Safe to share across workers.
class RemoteClient final : public ModelClient {
 public:
  RemoteClient(EndpointConfig cfg, std::shared_ptr<HttpTransport> transport,
               std::optional<std::string> api_key = std::nullopt, Sleeper sleeper = {});

  CompletionResult complete(const CompletionRequest& request) override;
  std::string identity() const override;
  int peak_in_flight() const { return in_flight_.peak(); }

 private:
  std::chrono::milliseconds backoff(int attempt);
  void pace();

  EndpointConfig cfg_;
  std::shared_ptr<HttpTransport> transport_;
  std::optional<std::string> api_key_;
  Sleeper sleeper_;
  InFlightLimiter in_flight_;
  std::mutex pace_mu_;
  std::chrono::steady_clock::time_point next_slot_{};
  std::mutex jitter_mu_;
  std::uint64_t jitter_state_;
};

}  // namespace cotfaith
