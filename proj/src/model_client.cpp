#include "cotfaith/model_client.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <json.hpp>

#include "cotfaith/digest.hpp"
#include "cotfaith/error.hpp"
#include "cotfaith/seed.hpp"

namespace cotfaith {

using nlohmann::json;

std::string canonical_payload(const Payload& payload) {
  nlohmann::ordered_json j;
  if (const auto* msgs = std::get_if<std::vector<ChatMessage>>(&payload)) {
    j["messages"] = nlohmann::ordered_json::array();
    for (const auto& m : *msgs) {
      j["messages"].push_back({{"role", m.role}, {"content", m.content}});
    }
  } else {
    j["prompt"] = std::get<std::string>(payload);
  }
  return j.dump();
}

std::string payload_digest(const Payload& payload) {
  return sha256_hex(canonical_payload(payload));
}

void EndpointConfig::validate() const {
  if (!(decoding.top_p > 0.0 && decoding.top_p <= 1.0)) {
    throw UsageError("top_p must lie in (0, 1]");
  }
  if (!(decoding.temperature >= 0.0)) throw UsageError("temperature must be >= 0");
  if (decoding.max_tokens < 1) throw UsageError("max_tokens must be >= 1");
  if (limits.max_in_flight < 1) throw UsageError("max_in_flight must be >= 1");
  if (limits.requests_per_second < 0.0) throw UsageError("requests_per_second must be >= 0");
  if (limits.retry.max_attempts < 1) throw UsageError("retry attempts must be >= 1");
}

std::string EndpointConfig::fingerprint() const {
  std::string key_part = "nokey";
  if (!api_key_env.empty()) {
    if (const char* key = std::getenv(api_key_env.c_str())) {
      key_part = sha256_hex(key).substr(0, 12);
    }
  }
  return sha256_hex(base_url + "\n" + model_name + "\n" + key_part).substr(0, 16);
}

void validate(const CompletionResult& result) {
  if (!result.token_logprobs) return;
  for (std::size_t pos = 0; pos < result.token_logprobs->size(); ++pos) {
    for (const auto& alt : (*result.token_logprobs)[pos]) {
      if (!std::isfinite(alt.logprob) || alt.logprob > 0.0) {
        throw ProtocolFault("token_logprobs[" + std::to_string(pos) + "]",
                            "log-probability for '" + alt.token + "' is not finite and <= 0");
      }
    }
  }
}

void InFlightLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return active_ < limit_; });
  ++active_;
  peak_ = std::max(peak_, active_);
}

void InFlightLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --active_;
  }
  cv_.notify_one();
}

int InFlightLimiter::peak() const {
  std::lock_guard lock(mu_);
  return peak_;
}

namespace {

bool is_chat(const CompletionRequest& req) {
  return std::holds_alternative<std::vector<ChatMessage>>(req.payload);
}

const json& require(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw ProtocolFault(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ProtocolFault(path + "." + key, "missing");
  return *it;
}

double logprob_of(const json& v, const std::string& path) {
  if (!v.is_number()) throw ProtocolFault(path, "log-probability is not a number");
  return v.get<double>();
}

}  // namespace

std::string request_path(const CompletionRequest& req) {
  return is_chat(req) ? "/v1/chat/completions" : "/v1/completions";
}

json build_request_body(const EndpointConfig& cfg, const CompletionRequest& req) {
  const Decoding d = req.decoding.value_or(cfg.decoding);
  json body;
  body["model"] = cfg.model_name;
  body["top_p"] = d.top_p;
  body["temperature"] = d.temperature;
  body["max_tokens"] = d.max_tokens;
  if (!req.stop.empty()) body["stop"] = req.stop;
  if (const auto* msgs = std::get_if<std::vector<ChatMessage>>(&req.payload)) {
    body["messages"] = json::array();
    for (const auto& m : *msgs) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    if (req.top_logprobs > 0) {
      body["logprobs"] = true;
      body["top_logprobs"] = std::min(req.top_logprobs, 20);
    }
    // A trailing assistant turn is a prefix to continue, not a finished turn.
    if (!msgs->empty() && msgs->back().role == "assistant") {
      body["continue_final_message"] = true;
      body["add_generation_prompt"] = false;
    }
  } else {
    body["prompt"] = std::get<std::string>(req.payload);
    if (req.top_logprobs > 0) body["logprobs"] = req.top_logprobs;
  }
  return body;
}

CompletionResult parse_response_body(const std::string& body, bool chat) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw ProtocolFault("body", std::string("not valid JSON: ") + e.what());
  }
  CompletionResult r;
  if (auto it = j.find("id"); it != j.end() && it->is_string()) r.request_id = *it;
  if (auto it = j.find("model"); it != j.end() && it->is_string()) r.model = *it;
  const json& choices = require(j, "choices", "body");
  if (!choices.is_array() || choices.empty()) throw ProtocolFault("choices", "expected a non-empty array");
  const json& c0 = choices[0];
  if (!c0.is_object()) throw ProtocolFault("choices[0]", "expected an object");
  if (auto it = c0.find("finish_reason"); it != c0.end() && it->is_string()) r.finish_reason = *it;

  if (chat) {
    const json& msg = require(c0, "message", "choices[0]");
    const json& content = require(msg, "content", "choices[0].message");
    if (content.is_string()) {
      r.text = content.get<std::string>();
    } else if (!content.is_null()) {
      throw ProtocolFault("choices[0].message.content", "expected a string");
    }
    auto lp = c0.find("logprobs");
    if (lp != c0.end() && !lp->is_null()) {
      const json& entries = require(*lp, "content", "choices[0].logprobs");
      if (!entries.is_array()) throw ProtocolFault("choices[0].logprobs.content", "expected an array");
      TokenLogprobs out;
      for (std::size_t i = 0; i < entries.size(); ++i) {
        const std::string path = "choices[0].logprobs.content[" + std::to_string(i) + "]";
        std::vector<TokenAlternative> alts;
        const json& tok = require(entries[i], "token", path);
        if (!tok.is_string()) throw ProtocolFault(path + ".token", "expected a string");
        alts.push_back({tok.get<std::string>(), logprob_of(require(entries[i], "logprob", path), path + ".logprob")});
        if (auto top = entries[i].find("top_logprobs"); top != entries[i].end() && top->is_array()) {
          for (std::size_t k = 0; k < top->size(); ++k) {
            const std::string tpath = path + ".top_logprobs[" + std::to_string(k) + "]";
            const json& t = require((*top)[k], "token", tpath);
            if (!t.is_string()) throw ProtocolFault(tpath + ".token", "expected a string");
            const std::string token = t.get<std::string>();
            const double logprob = logprob_of(require((*top)[k], "logprob", tpath), tpath + ".logprob");
            // The sampled token usually reappears among the alternatives.
            if (token != alts.front().token) alts.push_back({token, logprob});
          }
        }
        out.push_back(std::move(alts));
      }
      r.token_logprobs = std::move(out);
    }
  } else {
    const json& text = require(c0, "text", "choices[0]");
    if (!text.is_string()) throw ProtocolFault("choices[0].text", "expected a string");
    r.text = text.get<std::string>();
    auto lp = c0.find("logprobs");
    if (lp != c0.end() && !lp->is_null()) {
      const json& top = require(*lp, "top_logprobs", "choices[0].logprobs");
      if (!top.is_array()) throw ProtocolFault("choices[0].logprobs.top_logprobs", "expected an array");
      TokenLogprobs out;
      for (std::size_t i = 0; i < top.size(); ++i) {
        const std::string path = "choices[0].logprobs.top_logprobs[" + std::to_string(i) + "]";
        std::vector<TokenAlternative> alts;
        if (top[i].is_object()) {
          for (auto it = top[i].begin(); it != top[i].end(); ++it) {
            alts.push_back({it.key(), logprob_of(it.value(), path + "." + it.key())});
          }
        } else if (!top[i].is_null()) {
          throw ProtocolFault(path, "expected an object of token -> logprob");
        }
        out.push_back(std::move(alts));
      }
      r.token_logprobs = std::move(out);
    }
  }
  validate(r);
  return r;
}

RemoteClient::RemoteClient(EndpointConfig cfg, std::shared_ptr<HttpTransport> transport,
                           std::optional<std::string> api_key, Sleeper sleeper)
    : cfg_(std::move(cfg)),
      transport_(std::move(transport)),
      api_key_(std::move(api_key)),
      sleeper_(sleeper ? std::move(sleeper)
                       : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })),
      in_flight_(cfg_.limits.max_in_flight),
      jitter_state_(static_cast<std::uint64_t>(
          std::chrono::steady_clock::now().time_since_epoch().count())) {
  cfg_.validate();
  if (!api_key_ && !cfg_.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg_.api_key_env.c_str())) api_key_ = key;
  }
}

std::string RemoteClient::identity() const { return cfg_.base_url + "#" + cfg_.model_name; }

std::chrono::milliseconds RemoteClient::backoff(int attempt) {
  const auto& p = cfg_.limits.retry;
  double delay = static_cast<double>(p.base_delay.count()) * std::ldexp(1.0, attempt - 1);
  delay = std::min(delay, static_cast<double>(p.max_delay.count()));
  double u;
  {
    std::lock_guard lock(jitter_mu_);
    jitter_state_ = mix64(jitter_state_);
    u = static_cast<double>(jitter_state_ >> 11) * 0x1.0p-53;
  }
  delay *= 1.0 + p.jitter * (2.0 * u - 1.0);
  return std::chrono::milliseconds(static_cast<long long>(std::max(0.0, delay)));
}

void RemoteClient::pace() {
  if (cfg_.limits.requests_per_second <= 0.0) return;
  const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / cfg_.limits.requests_per_second));
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(pace_mu_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + interval;
  }
  const auto wait = slot - std::chrono::steady_clock::now();
  if (wait > std::chrono::steady_clock::duration::zero()) {
    sleeper_(std::chrono::ceil<std::chrono::milliseconds>(wait));
  }
}

CompletionResult RemoteClient::complete(const CompletionRequest& request) {
  const bool chat = is_chat(request);
  const std::string body = build_request_body(cfg_, request).dump();
  std::vector<std::pair<std::string, std::string>> headers{{"Content-Type", "application/json"}};
  if (api_key_) headers.emplace_back("Authorization", "Bearer " + *api_key_);

  const int max_attempts = cfg_.limits.retry.max_attempts;
  std::string last_error;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    pace();
    const auto start = std::chrono::steady_clock::now();
    HttpResponse resp;
    in_flight_.acquire();
    try {
      resp = transport_->post(request_path(request), body, headers);
    } catch (...) {
      in_flight_.release();
      throw;
    }
    in_flight_.release();
    const auto latency =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);

    if (resp.status >= 200 && resp.status < 300) {
      CompletionResult r = parse_response_body(resp.body, chat);
      r.latency = latency;
      r.attempts = attempt;
      if (r.model.empty()) r.model = cfg_.model_name;
      return r;
    }
    const bool retryable = resp.status == 0 || resp.status == 408 || resp.status == 409 ||
                           resp.status == 429 || resp.status >= 500;
    if (!retryable) {
      throw ConfigFault("HTTP " + std::to_string(resp.status) + " from " + request_path(request) +
                            ": " + resp.body.substr(0, 300),
                        resp.status);
    }
    last_error = resp.status == 0 ? "connection failure: " + resp.error
                                  : "HTTP " + std::to_string(resp.status);
    if (attempt == max_attempts) break;
    auto delay = backoff(attempt);
    if (auto it = resp.headers.find("retry-after"); it != resp.headers.end()) {
      try {
        delay = std::max(delay, std::chrono::milliseconds(std::stoll(it->second) * 1000));
      } catch (const std::exception&) {
      }
    }
    sleeper_(delay);
  }
  throw TransportFault("retries exhausted after " + std::to_string(max_attempts) +
                           " attempts: " + last_error,
                       max_attempts);
}

}  // namespace cotfaith
