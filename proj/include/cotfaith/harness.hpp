#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cotfaith/mcq_data.hpp"
#include "cotfaith/metrics.hpp"
#include "cotfaith/model_client.hpp"
#include "cotfaith/prompting.hpp"
#include "cotfaith/templates.hpp"

namespace cotfaith {

std::string_view harness_version();

/// Everything `run` needs before a manifest exists.
struct RunInputs {
  std::filesystem::path dataset_path;
  std::optional<std::string> endpoint_url;  // exactly one of endpoint_url / mock
  std::optional<std::string> mock;
  std::string model_name;
  std::string api_key_env = "OPENAI_API_KEY";
  std::string model_family;
  std::optional<std::uint64_t> parameter_count;
  std::vector<Condition> conditions{Condition::same};
  std::size_t sample_cap = 500;
  std::uint64_t sample_seed = 0;
  std::uint64_t run_seed = 0;
  Decoding decoding;
  Limits limits;
  PromptStyle style = PromptStyle::chat_turns;
  std::optional<std::filesystem::path> templates_path;
  ExtractionSettings extraction;
  std::string run_id;  // generated when empty
};

/// Immutable reproducibility record of one run.
struct RunManifest {
  std::string run_id;
  std::string created_at;
  std::string harness_version;

  std::string endpoint_kind;  // "mock" | "remote"
  std::string mock_spec;
  std::string base_url;
  std::string model_name;
  std::string api_key_env;
  std::string endpoint_fingerprint;

  std::string model_id;
  std::string model_family;
  std::optional<std::uint64_t> parameter_count;

  std::string dataset_name;
  std::string dataset_path;
  std::string dataset_hash;
  std::size_t dataset_size = 0;
  std::size_t sample_cap = 500;
  std::uint64_t sample_seed = 0;
  std::string sampled_hash;
  std::size_t sampled_size = 0;

  std::vector<Condition> conditions;
  Decoding decoding;
  ExtractionSettings extraction;
  Limits limits;
  PromptStyle style = PromptStyle::chat_turns;
  std::string templates_origin;
  std::string templates_digest;
  std::uint64_t run_seed = 0;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  /// Digest of every field except run id and creation time.
  std::string digest() const;
  EndpointConfig endpoint_config() const;
};

struct ProbeKey {
  std::string item_id;
  Condition condition = Condition::same;
  Probe probe = Probe::nocot;

  std::string str() const;
  auto operator<=>(const ProbeKey&) const = default;
};

struct WorkUnit {
  ProbeKey key;
  std::size_t item_index = 0;
  Presentation presentation;
  PromptBundle bundle;
};

struct SkippedItem {
  std::string item_id;
  Condition condition = Condition::same;
  std::string reason;
};

struct RunPlan {
  RunManifest manifest;
  Dataset dataset;  // after sampling
  PromptTemplates templates;
  std::vector<WorkUnit> work;
  std::vector<SkippedItem> skipped;
};

/// Validates inputs, samples the dataset and lays out every probe. Nothing
/// is sent anywhere. Throws UsageError / DataFault on bad inputs.
RunPlan plan_run(const RunInputs& inputs);

/// Re-derives the plan a manifest describes. Throws CorruptionError when
/// the dataset or templates on disk no longer match the manifest.
RunPlan plan_from_manifest(const RunManifest& manifest);

/// Plan of a stored manifest under a new run id and creation time.
RunPlan replay_manifest(RunManifest manifest, const std::string& run_id = "");

/// One line of the append-only record log.
struct ProbeRecord {
  std::string manifest_digest;
  ProbeKey key;
  bool done = false;
  FaultClass fault = FaultClass::none;
  std::string message;
  ExtractedAnswer answer;
  Permutation permutation;
  std::string reasoning;
  int attempts = 0;

  nlohmann::json to_json() const;
  static ProbeRecord from_json(const nlohmann::json& j);
};

enum class ProbeStatus { pending, done, faulted };

struct FaultEntry {
  ProbeKey key;
  FaultClass fault = FaultClass::none;
  std::string message;
};

struct RunState {
  std::string run_id;
  std::map<ProbeKey, ProbeStatus> status;
  std::vector<FaultEntry> faults;  // currently faulted probes
  std::vector<SkippedItem> skipped;
  std::size_t executed = 0;  // probes sent during this call

  std::size_t count(ProbeStatus s) const;
  bool complete() const { return count(ProbeStatus::pending) == 0; }
};

struct ExecuteOptions {
  std::size_t workers = 0;                 // 0: the manifest's max_in_flight
  std::optional<std::size_t> stop_after;   // dispatch at most this many probes
  bool retry_faulted = false;
};

/// Run directory layout.
std::filesystem::path manifest_path(const std::filesystem::path& run_dir);
std::filesystem::path log_path(const std::filesystem::path& run_dir);

/// Writes the manifest (once), then executes every probe not yet done in
/// the log, appending each outcome before it counts as done. A truncated
/// trailing log line is dropped and its probe re-executed.
RunState execute_run(const RunPlan& plan, ModelClient& client,
                     const std::filesystem::path& run_dir, const ExecuteOptions& options = {});

RunManifest load_manifest(const std::filesystem::path& run_dir);

/// Client the manifest names: a mock keyed to the dataset, or a remote
/// endpoint reading its key from the named environment variable.
std::shared_ptr<ModelClient> make_client(const RunManifest& manifest, const Dataset& dataset);

/// Re-plans from the stored manifest and continues the run.
RunState resume_run(const std::filesystem::path& run_dir, const ExecuteOptions& options = {},
                    std::shared_ptr<ModelClient> client = nullptr);

/// Reads the log, checking every record against the manifest digest.
std::vector<ProbeRecord> read_log(const std::filesystem::path& run_dir,
                                  const std::string& manifest_digest);

/// Folds probe records into per-item records for one condition, in plan
/// order. Later records for a key supersede earlier ones.
std::vector<ItemRecord> assemble_records(const RunPlan& plan,
                                         const std::vector<ProbeRecord>& log, Condition condition);

/// One summary per condition in the manifest.
std::vector<MetricSummary> score_run(const std::filesystem::path& run_dir);

}  // namespace cotfaith
