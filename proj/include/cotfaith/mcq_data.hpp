#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cotfaith/seed.hpp"

namespace cotfaith {

inline constexpr std::size_t kMaxChoices = 26;

struct Choice {
  char letter = 'A';
  std::string text;

  bool operator==(const Choice&) const = default;
};

/// Letter label for a 0-based choice position: 0 -> 'A'.
char letter_at(std::size_t position);
/// Position of `letter` among `count` choices, if it is one of them.
std::optional<std::size_t> position_of(char letter, std::size_t count);

struct McqItem {
  std::string id;
  std::string question;
  std::vector<Choice> choices;
  char gold_letter = 'A';

  std::size_t gold_index() const;
  const std::string& gold_text() const;
  std::vector<std::string> texts() const;
};

/// Throws DataFault on any violated item invariant.
void validate(const McqItem& item);

/// perm[old_position] = new_position.
using Permutation = std::vector<std::size_t>;

Permutation identity_permutation(std::size_t n);
bool is_identity(const Permutation& perm);
bool is_bijection(const Permutation& perm);
Permutation inverse(const Permutation& perm);
/// Applies `first`, then `then`: result[old] = then[first[old]].
Permutation compose(const Permutation& first, const Permutation& then);

/// An item as shown to the model: choices reordered by `permutation`.
/// Produced by shuffle_choices (always non-identity) or as the unshuffled
/// presentation for the original ordering condition.
struct Presentation {
  std::string base_id;
  std::string question;
  Permutation permutation;
  std::vector<Choice> choices;
  char gold_letter = 'A';
  std::optional<SeedTrace> seed_trace;

  /// Text of the choice labelled `letter`, or nullptr when absent.
  const std::string* text_of(char letter) const;
  std::vector<char> letters() const;
};

using ShuffledVariant = Presentation;

Presentation present(const McqItem& item, Permutation perm,
                     std::optional<SeedTrace> trace = std::nullopt);
Presentation identity_presentation(const McqItem& item);

struct Dataset {
  std::string name;
  std::vector<McqItem> items;
  std::string source_uri;
  std::string content_hash;
};

/// Digest over the sorted canonical encodings of the items.
std::string content_hash(std::span<const McqItem> items);

/// One line of the dataset file format.
nlohmann::json to_record(const McqItem& item);
McqItem from_record(const nlohmann::json& record);

/// Loads line-delimited records. Only the "jsonl" format is understood.
Dataset load_dataset(const std::filesystem::path& path,
                     std::optional<std::string> format_hint = std::nullopt);
Dataset parse_dataset(std::istream& in, std::string name, std::string source_uri);
void write_dataset(std::ostream& out, const Dataset& dataset);

/// Full dataset when it has at most `cap` items; otherwise a seeded uniform
/// subset of exactly `cap` items in original relative order.
Dataset sample_items(const Dataset& dataset, std::size_t cap, std::uint64_t seed);

/// Uniform non-identity permutation of n >= 2 positions, optionally also
/// rejecting `avoid`. Rejection sampling over Fisher-Yates shuffles.
Permutation draw_non_identity(std::size_t n, Rng& rng,
                              const Permutation* avoid = nullptr);

ShuffledVariant shuffle_choices(const McqItem& item, const SeedTrace& trace);

enum class Condition { original, same, different };

std::string_view to_string(Condition c);
Condition condition_from_string(std::string_view text);

/// Presentations for the three probes of one item under one condition.
/// `reshuffled` is the No-CoT presentation passed through a further
/// non-identity shuffle, so it never coincides with `nocot`.
struct OrderingPlan {
  Condition condition = Condition::same;
  Presentation nocot;
  Presentation cot;
  Presentation reshuffled;
};

OrderingPlan plan_orderings(const McqItem& item, Condition condition,
                            std::uint64_t run_seed);

}  // namespace cotfaith
