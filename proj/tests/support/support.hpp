// Helpers shared by the unit and acceptance suites.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

#include "cotfaith/mcq_data.hpp"
#include "cotfaith/metrics.hpp"
#include "cotfaith/seed.hpp"

namespace testing {

using namespace cotfaith;

inline McqItem make_item(std::string id, std::vector<std::string> texts, std::size_t gold,
                         std::string question = "") {
  McqItem item;
  item.id = std::move(id);
  item.question = question.empty() ? "Question " + item.id + "?" : std::move(question);
  for (std::size_t i = 0; i < texts.size(); ++i) item.choices.push_back({letter_at(i), texts[i]});
  item.gold_letter = letter_at(gold);
  return item;
}

/// `n` items with `k` distinct choices each; gold position varies with the index.
inline Dataset make_dataset(std::size_t n, std::size_t k, std::string name = "synthetic") {
  Dataset d;
  d.name = std::move(name);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> texts;
    for (std::size_t c = 0; c < k; ++c) texts.push_back("option " + std::to_string(i) + "-" + std::to_string(c));
    d.items.push_back(make_item("q" + std::to_string(i), texts, (i * 7) % k));
  }
  d.content_hash = content_hash(d.items);
  return d;
}

inline void write_jsonl(const std::filesystem::path& path, const Dataset& d) {
  std::ofstream out(path, std::ios::binary);
  write_dataset(out, d);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::uint64_t counter = 0;
  const auto base = std::filesystem::temp_directory_path() /
                    ("cotfaith-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(base);
  std::filesystem::create_directories(base);
  return base;
}

/// An answer naming `letter` in `presentation_perm` over `base`, with the
/// content filled in the way the harness fills it.
inline ExtractedAnswer answer_for(const std::vector<std::string>& base, const Permutation& perm,
                                  std::optional<char> letter) {
  ExtractedAnswer a;
  if (!letter) return a;
  a.letter = letter;
  a.method = ExtractionMethod::logprob_argmax;
  const std::size_t pos = static_cast<std::size_t>(*letter - 'A');
  for (std::size_t old = 0; old < perm.size(); ++old) {
    if (perm[old] == pos) a.chosen_text = base[old];
  }
  return a;
}

/// Random record set: mixed permutations, abstentions, faults, skips and
/// missing probes.
inline std::vector<ItemRecord> random_records(Rng& rng, std::size_t count) {
  std::vector<ItemRecord> out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t k = 2 + rng.below(4);
    ItemRecord r;
    r.item_id = "r" + std::to_string(i);
    r.condition = Condition::same;
    for (std::size_t c = 0; c < k; ++c) r.base_choices.push_back("t" + std::to_string(c));
    r.gold_text = r.base_choices[rng.below(k)];
    auto perm = [&] {
      Permutation p = identity_permutation(k);
      for (std::size_t j = k; j > 1; --j) std::swap(p[j - 1], p[rng.below(j)]);
      return p;
    };
    auto letter = [&]() -> std::optional<char> {
      if (rng.below(8) == 0) return std::nullopt;
      return letter_at(rng.below(k));
    };
    const Permutation shared = perm();
    r.nocot.permutation = shared;
    r.cot.permutation = rng.below(2) ? shared : perm();
    r.nocot_reshuffled.permutation = perm();
    for (ProbeOutcome* p : {&r.nocot, &r.cot, &r.nocot_reshuffled}) {
      p->answer = answer_for(r.base_choices, p->permutation, letter());
      if (rng.below(30) == 0) {
        p->fault = FaultClass::transport;
        p->answer = {};
      }
      if (rng.below(40) == 0) p->present = false;
    }
    if (rng.below(25) == 0) r.skip_reason = "fewer than 3 choices";
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace testing
