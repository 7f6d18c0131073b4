#include "cotfaith/mcq_data.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "cotfaith/digest.hpp"
#include "cotfaith/error.hpp"

namespace cotfaith {

using nlohmann::json;

char letter_at(std::size_t position) {
  if (position >= kMaxChoices) throw DataFault("choice position beyond 'Z'");
  return static_cast<char>('A' + position);
}

std::optional<std::size_t> position_of(char letter, std::size_t count) {
  if (letter < 'A' || letter > 'Z') return std::nullopt;
  const auto pos = static_cast<std::size_t>(letter - 'A');
  if (pos >= count) return std::nullopt;
  return pos;
}

std::size_t McqItem::gold_index() const {
  auto pos = position_of(gold_letter, choices.size());
  if (!pos) throw DataFault("item '" + id + "': gold letter not among choices");
  return *pos;
}

const std::string& McqItem::gold_text() const { return choices[gold_index()].text; }

std::vector<std::string> McqItem::texts() const {
  std::vector<std::string> out;
  out.reserve(choices.size());
  for (const auto& c : choices) out.push_back(c.text);
  return out;
}

void validate(const McqItem& item) {
  const std::string who = "item '" + item.id + "': ";
  if (item.id.empty()) throw DataFault("item with empty id");
  if (item.choices.size() < 2) throw DataFault(who + "fewer than 2 choices");
  if (item.choices.size() > kMaxChoices) throw DataFault(who + "more than 26 choices");
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < item.choices.size(); ++i) {
    if (item.choices[i].letter != letter_at(i)) {
      throw DataFault(who + "choice letters are not the contiguous prefix A..");
    }
    if (!seen.insert(item.choices[i].text).second) {
      throw DataFault(who + "duplicate choice text '" + item.choices[i].text + "'");
    }
  }
  if (!position_of(item.gold_letter, item.choices.size())) {
    throw DataFault(who + "gold missing from choices");
  }
}

Permutation identity_permutation(std::size_t n) {
  Permutation p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  return p;
}

bool is_identity(const Permutation& perm) {
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] != i) return false;
  }
  return true;
}

bool is_bijection(const Permutation& perm) {
  std::vector<bool> hit(perm.size(), false);
  for (auto p : perm) {
    if (p >= perm.size() || hit[p]) return false;
    hit[p] = true;
  }
  return true;
}

Permutation inverse(const Permutation& perm) {
  Permutation inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

Permutation compose(const Permutation& first, const Permutation& then) {
  Permutation out(first.size());
  for (std::size_t i = 0; i < first.size(); ++i) out[i] = then[first[i]];
  return out;
}

const std::string* Presentation::text_of(char letter) const {
  auto pos = position_of(letter, choices.size());
  return pos ? &choices[*pos].text : nullptr;
}

std::vector<char> Presentation::letters() const {
  std::vector<char> out;
  out.reserve(choices.size());
  for (const auto& c : choices) out.push_back(c.letter);
  return out;
}

Presentation present(const McqItem& item, Permutation perm,
                     std::optional<SeedTrace> trace) {
  if (perm.size() != item.choices.size() || !is_bijection(perm)) {
    throw std::invalid_argument("present: permutation is not a bijection over choices");
  }
  Presentation p;
  p.base_id = item.id;
  p.question = item.question;
  p.choices.resize(perm.size());
  for (std::size_t old = 0; old < perm.size(); ++old) {
    p.choices[perm[old]] = Choice{letter_at(perm[old]), item.choices[old].text};
  }
  p.gold_letter = letter_at(perm[item.gold_index()]);
  p.permutation = std::move(perm);
  p.seed_trace = std::move(trace);
  return p;
}

Presentation identity_presentation(const McqItem& item) {
  return present(item, identity_permutation(item.choices.size()));
}

namespace {

std::string canonical_encoding(const McqItem& item) {
  return json::array({item.id, item.question, item.texts(), item.gold_index()}).dump();
}

McqItem item_from_json(const json& record) {
  if (!record.is_object()) throw DataFault("record is not a JSON object");
  auto field = [&](const char* name) -> const json& {
    auto it = record.find(name);
    if (it == record.end()) throw DataFault(std::string("missing field '") + name + "'");
    return *it;
  };
  McqItem item;
  const json& id = field("id");
  if (id.is_string()) {
    item.id = id.get<std::string>();
  } else if (id.is_number_integer()) {
    item.id = std::to_string(id.get<long long>());
  } else {
    throw DataFault("field 'id' must be a string");
  }
  const json& question = field("question");
  if (!question.is_string()) throw DataFault("field 'question' must be a string");
  item.question = question.get<std::string>();
  const json& choices = field("choices");
  if (!choices.is_array()) throw DataFault("field 'choices' must be an array of strings");
  if (choices.size() < 2) throw DataFault("fewer than 2 choices");
  if (choices.size() > kMaxChoices) throw DataFault("more than 26 choices");
  for (std::size_t i = 0; i < choices.size(); ++i) {
    if (!choices[i].is_string()) throw DataFault("field 'choices' must be an array of strings");
    item.choices.push_back(Choice{letter_at(i), choices[i].get<std::string>()});
  }
  const json& gold = field("gold");
  if (gold.is_number_integer()) {
    const auto g = gold.get<long long>();
    if (g < 0 || static_cast<std::size_t>(g) >= item.choices.size()) {
      throw DataFault("gold out of range");
    }
    item.gold_letter = letter_at(static_cast<std::size_t>(g));
  } else if (gold.is_string() && gold.get<std::string>().size() == 1) {
    const char letter = static_cast<char>(std::toupper(gold.get<std::string>()[0]));
    if (!position_of(letter, item.choices.size())) throw DataFault("gold out of range");
    item.gold_letter = letter;
  } else {
    throw DataFault("field 'gold' must be a 0-based index or a letter");
  }
  validate(item);
  return item;
}

}  // namespace

std::string content_hash(std::span<const McqItem> items) {
  std::vector<std::string> enc;
  enc.reserve(items.size());
  for (const auto& item : items) enc.push_back(canonical_encoding(item));
  std::sort(enc.begin(), enc.end());
  std::string joined;
  for (const auto& e : enc) {
    joined += e;
    joined += '\n';
  }
  return sha256_hex(joined);
}

json to_record(const McqItem& item) {
  nlohmann::ordered_json r;
  r["id"] = item.id;
  r["question"] = item.question;
  r["choices"] = item.texts();
  r["gold"] = item.gold_index();
  return json(r);
}

McqItem from_record(const json& record) { return item_from_json(record); }

Dataset parse_dataset(std::istream& in, std::string name, std::string source_uri) {
  Dataset d;
  d.name = std::move(name);
  d.source_uri = std::move(source_uri);
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    McqItem item;
    try {
      item = item_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw DataFault("line " + std::to_string(line_no) + ": malformed record: " + e.what());
    } catch (const DataFault& e) {
      throw DataFault("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!ids.insert(item.id).second) {
      throw DataFault("line " + std::to_string(line_no) + ": duplicate id '" + item.id + "'");
    }
    d.items.push_back(std::move(item));
  }
  d.content_hash = content_hash(d.items);
  return d;
}

Dataset load_dataset(const std::filesystem::path& path,
                     std::optional<std::string> format_hint) {
  if (format_hint && *format_hint != "jsonl") {
    throw UsageError("unsupported dataset format '" + *format_hint + "' (expected jsonl)");
  }
  std::ifstream in(path);
  if (!in) throw DataFault("cannot open dataset '" + path.string() + "'");
  return parse_dataset(in, path.stem().string(), path.string());
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  for (const auto& item : dataset.items) out << to_record(item).dump() << '\n';
}

Dataset sample_items(const Dataset& dataset, std::size_t cap, std::uint64_t seed) {
  if (cap == 0) throw std::invalid_argument("sample_items: cap must be positive");
  if (dataset.items.size() <= cap) return dataset;
  // Partial Fisher-Yates over indices, then restore source order.
  Rng rng(mix64(seed ^ stable_hash(dataset.name)));
  std::vector<std::size_t> idx(dataset.items.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < cap; ++i) {
    const auto j = i + rng.below(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  Dataset out;
  out.name = dataset.name;
  out.source_uri = dataset.source_uri;
  out.items.reserve(cap);
  for (auto i : idx) out.items.push_back(dataset.items[i]);
  out.content_hash = content_hash(out.items);
  return out;
}

Permutation draw_non_identity(std::size_t n, Rng& rng, const Permutation* avoid) {
  if (n < 2) throw std::invalid_argument("draw_non_identity: need at least 2 positions");
  if (avoid && n == 2 && !is_identity(*avoid)) {
    throw ConditionUnsatisfiable("no non-identity permutation of 2 choices avoids the partner");
  }
  for (;;) {
    Permutation p = identity_permutation(n);
    for (std::size_t i = n - 1; i > 0; --i) {
      std::swap(p[i], p[rng.below(i + 1)]);
    }
    if (is_identity(p)) continue;
    if (avoid && p == *avoid) continue;
    return p;
  }
}

ShuffledVariant shuffle_choices(const McqItem& item, const SeedTrace& trace) {
  Rng rng(trace.derive());
  return present(item, draw_non_identity(item.choices.size(), rng), trace);
}

std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::original: return "original";
    case Condition::same: return "same";
    case Condition::different: return "different";
  }
  return "same";
}

Condition condition_from_string(std::string_view text) {
  if (text == "original") return Condition::original;
  if (text == "same") return Condition::same;
  if (text == "different") return Condition::different;
  throw UsageError("unknown condition '" + std::string(text) + "'");
}

OrderingPlan plan_orderings(const McqItem& item, Condition condition,
                            std::uint64_t run_seed) {
  const std::string tag(to_string(condition));
  auto trace = [&](const char* probe) { return SeedTrace{run_seed, item.id, tag, probe}; };

  OrderingPlan plan;
  plan.condition = condition;
  switch (condition) {
    case Condition::original:
      plan.nocot = identity_presentation(item);
      plan.cot = plan.nocot;
      break;
    case Condition::same:
      plan.nocot = shuffle_choices(item, trace("shared"));
      plan.cot = plan.nocot;
      break;
    case Condition::different: {
      if (item.choices.size() < 3) {
        throw ConditionUnsatisfiable("item '" + item.id +
                                     "': different ordering needs at least 3 choices");
      }
      plan.nocot = shuffle_choices(item, trace("nocot"));
      const SeedTrace cot_trace = trace("cot");
      Rng rng(cot_trace.derive());
      plan.cot = present(item,
                         draw_non_identity(item.choices.size(), rng, &plan.nocot.permutation),
                         cot_trace);
      break;
    }
  }
  const SeedTrace re_trace = trace("reshuffle");
  Rng rng(re_trace.derive());
  const Permutation extra = draw_non_identity(item.choices.size(), rng);
  plan.reshuffled = present(item, compose(plan.nocot.permutation, extra), re_trace);
  return plan;
}

}  // namespace cotfaith
