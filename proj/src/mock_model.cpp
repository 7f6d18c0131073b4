#include "cotfaith/mock_model.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cotfaith/error.hpp"
#include "cotfaith/prompting.hpp"
#include "cotfaith/seed.hpp"

namespace cotfaith {

namespace {

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto at = s.find(sep, start);
    out.emplace_back(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

std::uint64_t parse_u64(const std::string& s, const char* what) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw UsageError(std::string("mock spec: bad ") + what + " '" + s + "'");
  }
  return v;
}

std::string choice_key(std::vector<std::string> texts) {
  std::sort(texts.begin(), texts.end());
  std::string key;
  for (const auto& t : texts) {
    key += t;
    key += '\x1f';
  }
  return key;
}

// The text block an MCQ prompt shows the question and choices in.
std::string question_block(const Payload& payload) {
  if (const auto* msgs = std::get_if<std::vector<ChatMessage>>(&payload)) {
    for (const auto& m : *msgs) {
      if (m.role == "user") return m.content;
    }
    return {};
  }
  return std::get<std::string>(payload);
}

bool is_extraction(const Payload& payload) {
  if (const auto* msgs = std::get_if<std::vector<ChatMessage>>(&payload)) {
    return !msgs->empty() && msgs->back().role == "assistant" &&
           msgs->back().content == kExtractionSuffix;
  }
  return std::string_view(std::get<std::string>(payload)).ends_with(kExtractionSuffix);
}

// Last contiguous run of "(A) ...", "(B) ..." lines.
std::vector<Choice> parse_choices(std::string_view block) {
  std::vector<Choice> best;
  std::vector<Choice> run;
  std::istringstream in{std::string(block)};
  std::string line;
  while (std::getline(in, line)) {
    const bool is_choice = line.size() >= 4 && line[0] == '(' && line[2] == ')' && line[3] == ' ' &&
                           line[1] >= 'A' && line[1] <= 'Z';
    if (is_choice && line[1] == static_cast<char>('A' + run.size())) {
      run.push_back({line[1], line.substr(4)});
      continue;
    }
    if (run.size() >= 2) best = run;
    run.clear();
    if (is_choice && line[1] == 'A') run.push_back({'A', line.substr(4)});
  }
  if (run.size() >= 2) best = run;
  return best;
}

CompletionResult letter_reply(char chosen, const std::vector<Choice>& choices, int top_k) {
  CompletionResult r;
  r.text = std::string(1, chosen) + ")";
  r.finish_reason = "stop";
  if (top_k > 0) {
    std::vector<TokenAlternative> alts;
    alts.push_back({std::string(1, chosen), -0.05});
    double lp = -3.0;
    for (const auto& c : choices) {
      if (c.letter == chosen) continue;
      alts.push_back({std::string(1, c.letter), lp});
      lp -= 0.5;
    }
    if (alts.size() > static_cast<std::size_t>(top_k)) alts.resize(static_cast<std::size_t>(top_k));
    r.token_logprobs = TokenLogprobs{std::move(alts)};
  }
  return r;
}

}  // namespace

MockSpec MockSpec::fixed(char letter) {
  MockSpec s;
  s.kind = Kind::fixed_letter;
  s.letter = letter;
  return s;
}

MockSpec MockSpec::uniform(std::uint64_t seed) {
  MockSpec s;
  s.kind = Kind::uniform_random;
  s.seed = seed;
  return s;
}

MockSpec MockSpec::oracle(double accuracy, std::uint64_t seed) {
  MockSpec s;
  s.kind = Kind::content_oracle;
  s.accuracy = accuracy;
  s.seed = seed;
  return s;
}

MockSpec MockSpec::scripted(std::map<std::string, ScriptedReply> table) {
  MockSpec s;
  s.kind = Kind::scripted;
  s.script = std::move(table);
  return s;
}

MockSpec MockSpec::parse(std::string_view text) {
  const auto parts = split(text, ':');
  const std::string& kind = parts[0];
  MockSpec s;
  if (kind == "fixed_letter" && parts.size() == 2 && parts[1].size() == 1) {
    s = fixed(parts[1][0]);
  } else if (kind == "uniform_random" && parts.size() == 2) {
    s = uniform(parse_u64(parts[1], "seed"));
  } else if (kind == "content_oracle" && parts.size() == 3) {
    double acc = 0.0;
    try {
      std::size_t used = 0;
      acc = std::stod(parts[1], &used);
      if (used != parts[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw UsageError("mock spec: bad accuracy '" + parts[1] + "'");
    }
    s = oracle(acc, parse_u64(parts[2], "seed"));
  } else if (kind == "scripted" && parts.size() >= 2) {
    const auto at = text.find(':');
    s.kind = Kind::scripted;
    s.script_path = std::string(text.substr(at + 1));
    s.script = load_script(s.script_path);
  } else {
    throw UsageError("unrecognised mock spec '" + std::string(text) + "'");
  }
  s.validate();
  return s;
}

void MockSpec::validate() const {
  switch (kind) {
    case Kind::fixed_letter:
      if (letter < 'A' || letter > 'Z') throw UsageError("fixed_letter: letter must be A..Z");
      break;
    case Kind::content_oracle:
      if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw UsageError("content_oracle: accuracy must lie in [0, 1]");
      break;
    case Kind::uniform_random:
    case Kind::scripted:
      break;
  }
}

std::string MockSpec::description() const {
  switch (kind) {
    case Kind::fixed_letter: return std::string("fixed_letter:") + letter;
    case Kind::uniform_random: return "uniform_random:" + std::to_string(seed);
    case Kind::content_oracle: {
      std::ostringstream os;
      os << "content_oracle:" << accuracy << ":" << seed;
      return os.str();
    }
    case Kind::scripted:
      return "scripted:" + (script_path.empty() ? std::string("inline") : script_path);
  }
  return "unknown";
}

std::map<std::string, ScriptedReply> load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataFault("cannot open mock script '" + path.string() + "'");
  std::map<std::string, ScriptedReply> table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ScriptedReply r;
      r.text = j.at("text").get<std::string>();
      if (auto it = j.find("logprobs"); it != j.end() && !it->is_null()) {
        r.logprobs = it->get<std::map<std::string, double>>();
      }
      table[j.at("prompt_digest").get<std::string>()] = std::move(r);
    } catch (const nlohmann::json::exception& e) {
      throw DataFault("mock script line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return table;
}

AnswerKey::AnswerKey(const Dataset& dataset) {
  for (const auto& item : dataset.items) {
    Entry e{item.id, item.question, item.gold_text(), item.texts()};
    by_choices_.emplace(choice_key(e.texts), std::move(e));
  }
}

const AnswerKey::Entry* AnswerKey::find(const std::vector<std::string>& texts,
                                        std::string_view prompt) const {
  auto [lo, hi] = by_choices_.equal_range(choice_key(texts));
  if (lo == hi) return nullptr;
  if (std::next(lo) == hi) return &lo->second;
  for (auto it = lo; it != hi; ++it) {
    if (prompt.find(it->second.question) != std::string_view::npos) return &it->second;
  }
  return nullptr;
}

MockModel::MockModel(MockSpec spec, AnswerKey key) : spec_(std::move(spec)), key_(std::move(key)) {
  spec_.validate();
}

CompletionResult MockModel::complete(const CompletionRequest& request) {
  ++calls_;
  const std::string digest = payload_digest(request.payload);

  if (spec_.kind == MockSpec::Kind::scripted) {
    auto it = spec_.script.find(digest);
    if (it == spec_.script.end()) throw ScriptedGap("no scripted reply for prompt digest " + digest);
    CompletionResult r;
    r.text = it->second.text;
    r.finish_reason = "stop";
    if (it->second.logprobs && request.top_logprobs > 0) {
      std::vector<TokenAlternative> alts;
      for (const auto& [tok, lp] : *it->second.logprobs) alts.push_back({tok, lp});
      r.token_logprobs = TokenLogprobs{std::move(alts)};
    }
    r.model = identity();
    r.request_id = digest.substr(0, 16);
    return r;
  }

  CompletionResult r;
  r.model = identity();
  r.request_id = digest.substr(0, 16);
  if (!is_extraction(request.payload)) {
    r.text = "Weighing each option in turn before settling on one.";
    r.finish_reason = "stop";
    return r;
  }

  const std::string block = question_block(request.payload);
  const std::vector<Choice> choices = parse_choices(block);
  if (choices.empty()) throw ProtocolFault("prompt", "mock found no choice lines in the prompt");

  char chosen = 'A';
  switch (spec_.kind) {
    case MockSpec::Kind::fixed_letter:
      chosen = spec_.letter;
      break;
    case MockSpec::Kind::uniform_random: {
      Rng rng(mix64(spec_.seed ^ stable_hash(digest)));
      chosen = choices[rng.below(choices.size())].letter;
      break;
    }
    case MockSpec::Kind::content_oracle: {
      std::vector<std::string> texts;
      for (const auto& c : choices) texts.push_back(c.text);
      const AnswerKey::Entry* entry = key_.find(texts, block);
      if (!entry) throw ProtocolFault("prompt", "content_oracle: item not in the answer key");
      Rng rng(SeedTrace{spec_.seed, entry->id, "content_oracle", "answer"}.derive());
      std::string target = entry->gold_text;
      if (rng.unit() >= spec_.accuracy) {
        std::vector<std::string> wrong;
        for (const auto& t : entry->texts) {
          if (t != entry->gold_text) wrong.push_back(t);
        }
        std::sort(wrong.begin(), wrong.end());
        target = wrong[rng.below(wrong.size())];
      }
      for (const auto& c : choices) {
        if (c.text == target) chosen = c.letter;
      }
      break;
    }
    case MockSpec::Kind::scripted:
      break;
  }
  CompletionResult reply = letter_reply(chosen, choices, request.top_logprobs);
  reply.model = r.model;
  reply.request_id = r.request_id;
  return reply;
}

std::shared_ptr<MockModel> make_mock(const MockSpec& spec, AnswerKey key) {
  return std::make_shared<MockModel>(spec, std::move(key));
}

}  // namespace cotfaith
