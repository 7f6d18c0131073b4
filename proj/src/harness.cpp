#include "cotfaith/harness.hpp"

#include <atomic>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cotfaith/digest.hpp"
#include "cotfaith/error.hpp"
#include "cotfaith/mock_model.hpp"

#ifndef COTFAITH_VERSION
#define COTFAITH_VERSION "0.0.0"
#endif

namespace cotfaith {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string_view harness_version() { return COTFAITH_VERSION; }

namespace {

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fresh_run_id() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  std::random_device rd;
  const std::uint64_t r = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  return std::string(buf) + "-" + sha256_hex(std::to_string(r)).substr(0, 8);
}

template <typename T>
T field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataFault(std::string("manifest field '") + key + "': " + e.what());
  }
}

const json& object(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_object()) {
    throw DataFault(std::string("manifest field '") + key + "' missing or not an object");
  }
  return *it;
}

}  // namespace

json RunManifest::to_json() const {
  ordered_json j;
  j["run_id"] = run_id;
  j["created_at"] = created_at;
  j["harness_version"] = harness_version;
  j["endpoint"] = {{"kind", endpoint_kind},
                   {"mock", mock_spec},
                   {"base_url", base_url},
                   {"model_name", model_name},
                   {"api_key_env", api_key_env},
                   {"fingerprint", endpoint_fingerprint}};
  j["model"] = {{"id", model_id},
                {"family", model_family},
                {"parameter_count", parameter_count ? json(*parameter_count) : json(nullptr)}};
  j["dataset"] = {{"name", dataset_name},       {"path", dataset_path},
                  {"content_hash", dataset_hash}, {"size", dataset_size},
                  {"sample_cap", sample_cap},     {"sample_seed", sample_seed},
                  {"sampled_hash", sampled_hash}, {"sampled_size", sampled_size}};
  std::vector<std::string> conds;
  for (auto c : conditions) conds.emplace_back(to_string(c));
  j["conditions"] = conds;
  j["decoding"] = {{"top_p", decoding.top_p},
                   {"temperature", decoding.temperature},
                   {"max_tokens", decoding.max_tokens}};
  j["extraction"] = {{"mode", std::string(to_string(extraction.mode))},
                     {"max_tokens", extraction.max_tokens},
                     {"min_top_logprobs", extraction.min_top_logprobs},
                     {"suffix", std::string(kExtractionSuffix)}};
  j["limits"] = {{"max_in_flight", limits.max_in_flight},
                 {"requests_per_second", limits.requests_per_second},
                 {"retry_max_attempts", limits.retry.max_attempts},
                 {"retry_base_delay_ms", limits.retry.base_delay.count()},
                 {"retry_max_delay_ms", limits.retry.max_delay.count()},
                 {"retry_jitter", limits.retry.jitter}};
  j["prompting"] = {{"style", std::string(to_string(style))},
                    {"templates_origin", templates_origin},
                    {"templates_digest", templates_digest}};
  j["run_seed"] = run_seed;
  return json(j);
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  m.run_id = field<std::string>(j, "run_id");
  m.created_at = field<std::string>(j, "created_at");
  m.harness_version = field<std::string>(j, "harness_version");
  const json& e = object(j, "endpoint");
  m.endpoint_kind = field<std::string>(e, "kind");
  m.mock_spec = field<std::string>(e, "mock");
  m.base_url = field<std::string>(e, "base_url");
  m.model_name = field<std::string>(e, "model_name");
  m.api_key_env = field<std::string>(e, "api_key_env");
  m.endpoint_fingerprint = field<std::string>(e, "fingerprint");
  const json& mo = object(j, "model");
  m.model_id = field<std::string>(mo, "id");
  m.model_family = field<std::string>(mo, "family");
  if (!mo.contains("parameter_count")) throw DataFault("manifest field 'parameter_count' missing");
  if (!mo.at("parameter_count").is_null()) m.parameter_count = field<std::uint64_t>(mo, "parameter_count");
  const json& d = object(j, "dataset");
  m.dataset_name = field<std::string>(d, "name");
  m.dataset_path = field<std::string>(d, "path");
  m.dataset_hash = field<std::string>(d, "content_hash");
  m.dataset_size = field<std::size_t>(d, "size");
  m.sample_cap = field<std::size_t>(d, "sample_cap");
  m.sample_seed = field<std::uint64_t>(d, "sample_seed");
  m.sampled_hash = field<std::string>(d, "sampled_hash");
  m.sampled_size = field<std::size_t>(d, "sampled_size");
  for (const auto& c : field<std::vector<std::string>>(j, "conditions")) {
    m.conditions.push_back(condition_from_string(c));
  }
  const json& dec = object(j, "decoding");
  m.decoding.top_p = field<double>(dec, "top_p");
  m.decoding.temperature = field<double>(dec, "temperature");
  m.decoding.max_tokens = field<int>(dec, "max_tokens");
  const json& ex = object(j, "extraction");
  m.extraction.mode = extraction_mode_from_string(field<std::string>(ex, "mode"));
  m.extraction.max_tokens = field<int>(ex, "max_tokens");
  m.extraction.min_top_logprobs = field<int>(ex, "min_top_logprobs");
  if (field<std::string>(ex, "suffix") != kExtractionSuffix) {
    throw DataFault("manifest extraction suffix differs from this harness");
  }
  const json& li = object(j, "limits");
  m.limits.max_in_flight = field<int>(li, "max_in_flight");
  m.limits.requests_per_second = field<double>(li, "requests_per_second");
  m.limits.retry.max_attempts = field<int>(li, "retry_max_attempts");
  m.limits.retry.base_delay = std::chrono::milliseconds(field<long long>(li, "retry_base_delay_ms"));
  m.limits.retry.max_delay = std::chrono::milliseconds(field<long long>(li, "retry_max_delay_ms"));
  m.limits.retry.jitter = field<double>(li, "retry_jitter");
  const json& pr = object(j, "prompting");
  m.style = prompt_style_from_string(field<std::string>(pr, "style"));
  m.templates_origin = field<std::string>(pr, "templates_origin");
  m.templates_digest = field<std::string>(pr, "templates_digest");
  m.run_seed = field<std::uint64_t>(j, "run_seed");
  return m;
}

std::string RunManifest::digest() const {
  json j = to_json();
  j.erase("run_id");
  j.erase("created_at");
  return sha256_hex(j.dump());
}

EndpointConfig RunManifest::endpoint_config() const {
  EndpointConfig cfg;
  cfg.base_url = base_url;
  cfg.model_name = model_name;
  cfg.api_key_env = api_key_env;
  cfg.decoding = decoding;
  cfg.limits = limits;
  return cfg;
}

std::string ProbeKey::str() const {
  return item_id + "/" + std::string(to_string(condition)) + "/" + std::string(to_string(probe));
}

std::size_t RunState::count(ProbeStatus s) const {
  std::size_t n = 0;
  for (const auto& [k, v] : status) n += v == s ? 1 : 0;
  return n;
}

namespace {

constexpr Probe kProbes[] = {Probe::nocot, Probe::cot, Probe::nocot_reshuffled};

PromptTemplates templates_for(const RunManifest& m) {
  if (m.templates_origin == "builtin:default") return PromptTemplates::defaults();
  return PromptTemplates::load(m.templates_origin);
}

void build_work(RunPlan& plan) {
  const auto& m = plan.manifest;
  for (std::size_t i = 0; i < plan.dataset.items.size(); ++i) {
    const McqItem& item = plan.dataset.items[i];
    for (Condition c : m.conditions) {
      OrderingPlan ordering;
      try {
        ordering = plan_orderings(item, c, m.run_seed);
      } catch (const ConditionUnsatisfiable& e) {
        plan.skipped.push_back({item.id, c, e.what()});
        continue;
      }
      for (Probe p : kProbes) {
        const Presentation& pres = p == Probe::nocot ? ordering.nocot
                                   : p == Probe::cot ? ordering.cot
                                                     : ordering.reshuffled;
        WorkUnit w;
        w.key = {item.id, c, p};
        w.item_index = i;
        w.presentation = pres;
        w.bundle = render_mcq_prompt(pres, p == Probe::cot, m.style, plan.templates,
                                     std::string(to_string(c)) + "/" + std::string(to_string(p)));
        plan.work.push_back(std::move(w));
      }
    }
  }
}

}  // namespace

RunPlan plan_run(const RunInputs& in) {
  if (in.endpoint_url.has_value() == in.mock.has_value()) {
    throw UsageError("exactly one of an endpoint or a mock must be given");
  }
  if (in.conditions.empty()) throw UsageError("at least one condition is required");
  if (std::set<Condition>(in.conditions.begin(), in.conditions.end()).size() != in.conditions.size()) {
    throw UsageError("conditions must not repeat");
  }
  if (in.sample_cap == 0) throw UsageError("sample cap must be positive");
  if (in.extraction.max_tokens < 1 || in.extraction.max_tokens > 4) {
    throw UsageError("extraction max tokens must be between 1 and 4");
  }

  RunPlan plan;
  RunManifest& m = plan.manifest;
  m.run_id = in.run_id.empty() ? fresh_run_id() : in.run_id;
  m.created_at = utc_now();
  m.harness_version = std::string(harness_version());

  EndpointConfig cfg;
  cfg.decoding = in.decoding;
  cfg.limits = in.limits;
  if (in.mock) {
    MockSpec spec = MockSpec::parse(*in.mock);
    m.endpoint_kind = "mock";
    m.mock_spec = spec.kind == MockSpec::Kind::scripted
                      ? "scripted:" + fs::absolute(spec.script_path).string()
                      : spec.description();
    m.model_name = in.model_name.empty() ? "mock-" + spec.description() : in.model_name;
    cfg.model_name = m.model_name;
    cfg.validate();
    m.endpoint_fingerprint = sha256_hex(m.mock_spec).substr(0, 16);
  } else {
    if (in.model_name.empty()) throw UsageError("a model name is required for remote endpoints");
    m.endpoint_kind = "remote";
    m.base_url = *in.endpoint_url;
    m.model_name = in.model_name;
    m.api_key_env = in.api_key_env;
    cfg.base_url = m.base_url;
    cfg.model_name = m.model_name;
    cfg.api_key_env = m.api_key_env;
    cfg.validate();
    m.endpoint_fingerprint = cfg.fingerprint();
  }
  m.model_id = m.model_name;
  m.model_family = in.model_family;
  m.parameter_count = in.parameter_count;

  const fs::path dataset_path = fs::absolute(in.dataset_path);
  const Dataset full = load_dataset(dataset_path);
  plan.dataset = sample_items(full, in.sample_cap, in.sample_seed);
  m.dataset_name = full.name;
  m.dataset_path = dataset_path.string();
  m.dataset_hash = full.content_hash;
  m.dataset_size = full.items.size();
  m.sample_cap = in.sample_cap;
  m.sample_seed = in.sample_seed;
  m.sampled_hash = plan.dataset.content_hash;
  m.sampled_size = plan.dataset.items.size();

  m.conditions = in.conditions;
  m.decoding = in.decoding;
  m.extraction = in.extraction;
  m.limits = in.limits;
  m.style = in.style;
  plan.templates = in.templates_path ? PromptTemplates::load(fs::absolute(*in.templates_path))
                                     : PromptTemplates::defaults();
  m.templates_origin = plan.templates.origin();
  m.templates_digest = plan.templates.digest();
  m.run_seed = in.run_seed;

  build_work(plan);
  return plan;
}

RunPlan plan_from_manifest(const RunManifest& manifest) {
  RunPlan plan;
  plan.manifest = manifest;
  Dataset full;
  try {
    full = load_dataset(manifest.dataset_path);
  } catch (const DataFault& e) {
    throw CorruptionError(std::string("dataset named by the manifest is unusable: ") + e.what());
  }
  if (full.content_hash != manifest.dataset_hash) {
    throw CorruptionError("dataset '" + manifest.dataset_path +
                          "' changed since the run started (content hash mismatch)");
  }
  plan.dataset = sample_items(full, manifest.sample_cap, manifest.sample_seed);
  if (plan.dataset.content_hash != manifest.sampled_hash) {
    throw CorruptionError("re-sampling the dataset did not reproduce the manifest's sample");
  }
  plan.templates = templates_for(manifest);
  if (plan.templates.digest() != manifest.templates_digest) {
    throw CorruptionError("prompt templates changed since the run started");
  }
  build_work(plan);
  return plan;
}

RunPlan replay_manifest(RunManifest manifest, const std::string& run_id) {
  manifest.run_id = run_id.empty() ? fresh_run_id() : run_id;
  manifest.created_at = utc_now();
  manifest.harness_version = std::string(harness_version());
  return plan_from_manifest(manifest);
}

json ProbeRecord::to_json() const {
  ordered_json j;
  j["manifest"] = manifest_digest;
  j["item_id"] = key.item_id;
  j["condition"] = std::string(to_string(key.condition));
  j["probe"] = std::string(to_string(key.probe));
  j["status"] = done ? "done" : "faulted";
  j["fault"] = std::string(to_string(fault));
  j["message"] = message;
  j["letter"] = answer.letter ? json(std::string(1, *answer.letter)) : json(nullptr);
  j["method"] = std::string(to_string(answer.method));
  j["tie"] = answer.tie;
  j["chosen_text"] = answer.chosen_text;
  j["raw"] = answer.raw_completion;
  j["reasoning"] = reasoning;
  j["permutation"] = permutation;
  j["attempts"] = attempts;
  return json(j);
}

ProbeRecord ProbeRecord::from_json(const json& j) {
  ProbeRecord r;
  try {
    r.manifest_digest = j.at("manifest").get<std::string>();
    r.key.item_id = j.at("item_id").get<std::string>();
    r.key.condition = condition_from_string(j.at("condition").get<std::string>());
    r.key.probe = probe_from_string(j.at("probe").get<std::string>());
    const auto status = j.at("status").get<std::string>();
    if (status != "done" && status != "faulted") throw DataFault("bad status '" + status + "'");
    r.done = status == "done";
    r.fault = fault_class_from_string(j.at("fault").get<std::string>());
    r.message = j.at("message").get<std::string>();
    if (!j.at("letter").is_null()) {
      const auto letter = j.at("letter").get<std::string>();
      if (letter.size() != 1) throw DataFault("bad letter '" + letter + "'");
      r.answer.letter = letter[0];
    }
    r.answer.method = extraction_method_from_string(j.at("method").get<std::string>());
    r.answer.tie = j.at("tie").get<bool>();
    r.answer.chosen_text = j.at("chosen_text").get<std::string>();
    r.answer.raw_completion = j.at("raw").get<std::string>();
    r.reasoning = j.at("reasoning").get<std::string>();
    r.permutation = j.at("permutation").get<Permutation>();
    r.attempts = j.at("attempts").get<int>();
  } catch (const json::exception& e) {
    throw DataFault(std::string("malformed probe record: ") + e.what());
  } catch (const UsageError& e) {
    throw DataFault(std::string("malformed probe record: ") + e.what());
  }
  return r;
}

fs::path manifest_path(const fs::path& run_dir) { return run_dir / "manifest.json"; }
fs::path log_path(const fs::path& run_dir) { return run_dir / "records.jsonl"; }

RunManifest load_manifest(const fs::path& run_dir) {
  std::ifstream in(manifest_path(run_dir));
  if (!in) throw DataFault("no manifest in '" + run_dir.string() + "'");
  try {
    return RunManifest::from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("manifest is not valid JSON: ") + e.what());
  }
}

namespace {

std::vector<ProbeRecord> read_log_impl(const fs::path& run_dir, const std::string& digest,
                                       bool repair) {
  const fs::path path = log_path(run_dir);
  std::vector<ProbeRecord> out;
  if (!fs::exists(path)) return out;
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string::npos) {
      // Interrupted append: the probe never counted as done.
      if (repair) {
        in.close();
        fs::resize_file(path, start);
      }
      break;
    }
    ++line_no;
    const std::string_view line(text.data() + start, nl - start);
    start = nl + 1;
    if (line.empty()) continue;
    ProbeRecord rec;
    try {
      rec = ProbeRecord::from_json(json::parse(line));
    } catch (const std::exception& e) {
      throw CorruptionError("record log line " + std::to_string(line_no) + ": " + e.what());
    }
    if (rec.manifest_digest != digest) {
      throw CorruptionError("record log line " + std::to_string(line_no) +
                            " belongs to a different manifest");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

ProbeRecord run_probe(const WorkUnit& w, ModelClient& client, const RunManifest& m,
                      const std::string& digest) {
  ProbeRecord rec;
  rec.manifest_digest = digest;
  rec.key = w.key;
  rec.permutation = w.presentation.permutation;
  try {
    if (w.bundle.with_cot) {
      const CompletionResult gen = client.complete(generation_request(w.bundle, m.decoding));
      rec.reasoning = gen.text;
      rec.attempts += gen.attempts;
    }
    const CompletionResult ext =
        client.complete(extraction_request(w.bundle, rec.reasoning, m.decoding, m.extraction));
    rec.attempts += ext.attempts;
    rec.answer = extract_letter(w.bundle, ext, m.extraction.mode);
    rec.done = true;
  } catch (const TransportFault& e) {
    rec.fault = FaultClass::transport;
    rec.message = e.what();
    rec.attempts += e.attempts();
  } catch (const ConfigFault& e) {
    rec.fault = FaultClass::config;
    rec.message = e.what();
  } catch (const ProtocolFault& e) {
    rec.fault = FaultClass::protocol;
    rec.message = e.what();
  } catch (const ExtractionFault& e) {
    rec.fault = FaultClass::extraction;
    rec.message = e.what();
  } catch (const ScriptedGap& e) {
    rec.fault = FaultClass::scripted_gap;
    rec.message = e.what();
  }
  return rec;
}

class LogWriter {
 public:
  explicit LogWriter(const fs::path& path) : out_(path, std::ios::binary | std::ios::app) {
    if (!out_) throw DataFault("cannot open record log '" + path.string() + "' for append");
  }

  void append(const ProbeRecord& rec) {
    const std::string line = rec.to_json().dump() + "\n";
    std::lock_guard lock(mu_);
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.flush();
    if (!out_) throw DataFault("write to record log failed");
  }

 private:
  std::mutex mu_;
  std::ofstream out_;
};

void apply(RunState& state, const ProbeRecord& rec) {
  state.status[rec.key] = rec.done ? ProbeStatus::done : ProbeStatus::faulted;
}

void collect_faults(RunState& state, const std::map<ProbeKey, ProbeRecord>& latest) {
  state.faults.clear();
  for (const auto& [key, rec] : latest) {
    if (!rec.done) state.faults.push_back({key, rec.fault, rec.message});
  }
}

}  // namespace

std::vector<ProbeRecord> read_log(const fs::path& run_dir, const std::string& manifest_digest) {
  return read_log_impl(run_dir, manifest_digest, false);
}

RunState execute_run(const RunPlan& plan, ModelClient& client, const fs::path& run_dir,
                     const ExecuteOptions& options) {
  fs::create_directories(run_dir);
  const std::string digest = plan.manifest.digest();
  if (fs::exists(manifest_path(run_dir))) {
    if (load_manifest(run_dir).digest() != digest) {
      throw CorruptionError("run directory '" + run_dir.string() +
                            "' holds a manifest for a different plan");
    }
  } else {
    const fs::path tmp = manifest_path(run_dir).string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      out << plan.manifest.to_json().dump(2) << '\n';
      if (!out) throw DataFault("cannot write manifest in '" + run_dir.string() + "'");
    }
    fs::rename(tmp, manifest_path(run_dir));
  }

  RunState state;
  state.run_id = plan.manifest.run_id;
  state.skipped = plan.skipped;
  for (const auto& w : plan.work) state.status[w.key] = ProbeStatus::pending;

  std::map<ProbeKey, ProbeRecord> latest;
  for (auto& rec : read_log_impl(run_dir, digest, true)) {
    if (!state.status.contains(rec.key)) {
      throw CorruptionError("record log holds probe '" + rec.key.str() + "' the plan does not");
    }
    apply(state, rec);
    latest[rec.key] = std::move(rec);
  }

  std::vector<const WorkUnit*> todo;
  for (const auto& w : plan.work) {
    const auto s = state.status.at(w.key);
    if (s == ProbeStatus::pending || (s == ProbeStatus::faulted && options.retry_faulted)) {
      todo.push_back(&w);
    }
  }
  if (options.stop_after && *options.stop_after < todo.size()) todo.resize(*options.stop_after);

  LogWriter writer(log_path(run_dir));
  std::mutex state_mu;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= todo.size()) return;
      try {
        ProbeRecord rec = run_probe(*todo[i], client, plan.manifest, digest);
        writer.append(rec);
        std::lock_guard lock(state_mu);
        apply(state, rec);
        ++state.executed;
        latest[rec.key] = std::move(rec);
      } catch (...) {
        std::lock_guard lock(state_mu);
        if (!failure) failure = std::current_exception();
        next.store(todo.size());
        return;
      }
    }
  };

  std::size_t workers = options.workers ? options.workers
                                        : static_cast<std::size_t>(plan.manifest.limits.max_in_flight);
  workers = std::max<std::size_t>(1, std::min(workers, todo.size()));
  if (todo.empty()) workers = 0;
  {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < workers; ++k) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  collect_faults(state, latest);
  return state;
}

std::shared_ptr<ModelClient> make_client(const RunManifest& manifest, const Dataset& dataset) {
  if (manifest.endpoint_kind == "mock") {
    return make_mock(MockSpec::parse(manifest.mock_spec), AnswerKey(dataset));
  }
  if (manifest.endpoint_kind == "remote") {
    const EndpointConfig cfg = manifest.endpoint_config();
    return std::make_shared<RemoteClient>(cfg, make_http_transport(cfg.base_url));
  }
  throw DataFault("manifest names unknown endpoint kind '" + manifest.endpoint_kind + "'");
}

RunState resume_run(const fs::path& run_dir, const ExecuteOptions& options,
                    std::shared_ptr<ModelClient> client) {
  const RunManifest manifest = load_manifest(run_dir);
  const RunPlan plan = plan_from_manifest(manifest);
  if (!client) client = make_client(manifest, plan.dataset);
  return execute_run(plan, *client, run_dir, options);
}

std::vector<ItemRecord> assemble_records(const RunPlan& plan, const std::vector<ProbeRecord>& log,
                                         Condition condition) {
  std::map<ProbeKey, const ProbeRecord*> latest;
  for (const auto& rec : log) latest[rec.key] = &rec;

  std::map<std::string, std::string> skipped;
  for (const auto& s : plan.skipped) {
    if (s.condition == condition) skipped[s.item_id] = s.reason;
  }

  std::vector<ItemRecord> out;
  out.reserve(plan.dataset.items.size());
  for (const auto& item : plan.dataset.items) {
    ItemRecord r;
    r.item_id = item.id;
    r.condition = condition;
    r.base_choices = item.texts();
    r.gold_text = item.gold_text();
    if (auto it = skipped.find(item.id); it != skipped.end()) {
      r.skip_reason = it->second;
      out.push_back(std::move(r));
      continue;
    }
    const OrderingPlan ordering = plan_orderings(item, condition, plan.manifest.run_seed);
    for (Probe p : kProbes) {
      const Presentation& pres = p == Probe::nocot ? ordering.nocot
                                 : p == Probe::cot ? ordering.cot
                                                   : ordering.reshuffled;
      ProbeOutcome& outcome = p == Probe::nocot ? r.nocot : p == Probe::cot ? r.cot : r.nocot_reshuffled;
      outcome.permutation = pres.permutation;
      auto it = latest.find(ProbeKey{item.id, condition, p});
      if (it == latest.end()) {
        outcome.present = false;
        continue;
      }
      const ProbeRecord& rec = *it->second;
      if (rec.permutation != pres.permutation) {
        throw CorruptionError("probe '" + rec.key.str() + "' saw a different ordering than planned");
      }
      outcome.answer = rec.answer;
      if (rec.done) {
        if (rec.answer.letter) {
          const std::string* text = pres.text_of(*rec.answer.letter);
          if (!text || *text != rec.answer.chosen_text) {
            throw CorruptionError("probe '" + rec.key.str() + "': letter does not name the stored answer text");
          }
        }
      } else {
        outcome.fault = rec.fault;
        outcome.fault_message = rec.message;
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<MetricSummary> score_run(const fs::path& run_dir) {
  const RunManifest manifest = load_manifest(run_dir);
  const RunPlan plan = plan_from_manifest(manifest);
  const auto log = read_log(run_dir, manifest.digest());
  std::vector<MetricSummary> out;
  for (Condition c : manifest.conditions) {
    const auto records = assemble_records(plan, log, c);
    out.push_back(summarize(records, SummaryLabels{manifest.model_id, manifest.model_family,
                                                   manifest.parameter_count,
                                                   manifest.dataset_name, c}));
  }
  return out;
}

}  // namespace cotfaith
