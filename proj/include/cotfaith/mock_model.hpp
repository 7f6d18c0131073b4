#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cotfaith/mcq_data.hpp"
#include "cotfaith/model_client.hpp"

namespace cotfaith {

struct ScriptedReply {
  std::string text;
  /// First-position letter scores; omitted means the reply carries no
  /// log-probabilities and extraction falls back to the text.
  std::optional<std::map<std::string, double>> logprobs;
};

/// In-process deterministic model.
///
/// Text form, as accepted on the command line:
///   fixed_letter:A
///   uniform_random:SEED
///   content_oracle:ACCURACY:SEED
///   scripted:PATH        (JSONL of {"prompt_digest", "text", "logprobs"?})
struct MockSpec {
  enum class Kind { fixed_letter, uniform_random, content_oracle, scripted };

  Kind kind = Kind::fixed_letter;
  char letter = 'A';
  std::uint64_t seed = 0;
  double accuracy = 1.0;
  std::map<std::string, ScriptedReply> script;  // keyed by payload_digest
  std::string script_path;

  static MockSpec parse(std::string_view text);
  static MockSpec fixed(char letter);
  static MockSpec uniform(std::uint64_t seed);
  static MockSpec oracle(double accuracy, std::uint64_t seed);
  static MockSpec scripted(std::map<std::string, ScriptedReply> table);

  void validate() const;
  std::string description() const;
};

std::map<std::string, ScriptedReply> load_script(const std::filesystem::path& path);

/// Lets the content oracle recognise which item a prompt shows.
class AnswerKey {
 public:
  AnswerKey() = default;
  explicit AnswerKey(const Dataset& dataset);

  struct Entry {
    std::string id;
    std::string question;
    std::string gold_text;
    std::vector<std::string> texts;
  };

  /// Entry whose choice set equals `texts` and whose question occurs in `prompt`.
  const Entry* find(const std::vector<std::string>& texts, std::string_view prompt) const;

 private:
  std::multimap<std::string, Entry> by_choices_;
};

class MockModel final : public ModelClient {
 public:
  MockModel(MockSpec spec, AnswerKey key);

  CompletionResult complete(const CompletionRequest& request) override;
  std::string identity() const override { return "mock:" + spec_.description(); }

  std::size_t calls() const { return calls_.load(); }
  const MockSpec& spec() const { return spec_; }

 private:
  MockSpec spec_;
  AnswerKey key_;
  std::atomic<std::size_t> calls_{0};
};

std::shared_ptr<MockModel> make_mock(const MockSpec& spec, AnswerKey key = {});

}  // namespace cotfaith
