#include "cotfaith/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "cotfaith/error.hpp"

namespace cotfaith {

std::string_view to_string(PromptStyle s) {
  return s == PromptStyle::chat_turns ? "chat_turns" : "direct";
}

PromptStyle prompt_style_from_string(std::string_view text) {
  if (text == "chat_turns" || text == "chat") return PromptStyle::chat_turns;
  if (text == "direct") return PromptStyle::direct;
  throw UsageError("unknown prompt style '" + std::string(text) + "'");
}

std::string_view to_string(ExtractionMode m) {
  return m == ExtractionMode::greedy ? "greedy" : "sampled";
}

ExtractionMode extraction_mode_from_string(std::string_view text) {
  if (text == "greedy") return ExtractionMode::greedy;
  if (text == "sampled") return ExtractionMode::sampled;
  throw UsageError("unknown extraction mode '" + std::string(text) + "'");
}

std::string_view to_string(ExtractionMethod m) {
  switch (m) {
    case ExtractionMethod::logprob_argmax: return "logprob_argmax";
    case ExtractionMethod::text_parse: return "text_parse";
    case ExtractionMethod::abstain: return "abstain";
  }
  return "abstain";
}

ExtractionMethod extraction_method_from_string(std::string_view text) {
  if (text == "logprob_argmax") return ExtractionMethod::logprob_argmax;
  if (text == "text_parse") return ExtractionMethod::text_parse;
  if (text == "abstain") return ExtractionMethod::abstain;
  throw DataFault("unknown extraction method '" + std::string(text) + "'");
}

std::string render_choice_lines(const Presentation& presentation) {
  std::string out;
  for (const auto& c : presentation.choices) {
    if (!out.empty()) out += '\n';
    out += '(';
    out += c.letter;
    out += ") ";
    out += c.text;
  }
  return out;
}

PromptBundle render_mcq_prompt(const Presentation& presentation, bool with_cot, PromptStyle style,
                               const PromptTemplates& templates, std::string plan_tag) {
  PromptBundle b;
  b.item_id = presentation.base_id;
  b.plan_tag = std::move(plan_tag);
  b.style = style;
  b.with_cot = with_cot;
  b.candidate_letters = presentation.letters();
  for (const auto& c : presentation.choices) b.candidate_texts.push_back(c.text);
  b.template_digest = templates.digest();

  const std::string question =
      fill(templates.section("mcq_question"),
           {{"question", presentation.question}, {"choices", render_choice_lines(presentation)}});
  const std::string suffix(kExtractionSuffix);

  if (style == PromptStyle::chat_turns) {
    if (with_cot) {
      b.prompt = std::vector<ChatMessage>{
          {"user", question + "\n\n" + templates.section("cot_instruction")}};
    } else {
      b.prompt = std::vector<ChatMessage>{{"user", question}, {"assistant", suffix}};
    }
  } else {
    if (with_cot) {
      b.prompt = question + "\n" + templates.section("cot_instruction") + "\n";
    } else {
      b.prompt = question + "\n" + suffix;
    }
  }
  if (with_cot) b.cot_followup = templates.section("cot_followup");
  return b;
}

Payload extraction_payload(const PromptBundle& bundle, std::string_view reasoning) {
  if (!bundle.with_cot) return bundle.prompt;
  const std::string suffix = bundle.extraction_suffix;
  if (const auto* msgs = std::get_if<std::vector<ChatMessage>>(&bundle.prompt)) {
    std::vector<ChatMessage> out = *msgs;
    out.push_back({"assistant", std::string(reasoning)});
    out.push_back({"user", bundle.cot_followup});
    out.push_back({"assistant", suffix});
    return out;
  }
  return std::get<std::string>(bundle.prompt) + std::string(reasoning) + "\n" +
         bundle.cot_followup + "\n" + suffix;
}

CompletionRequest generation_request(const PromptBundle& bundle, const Decoding& decoding) {
  if (!bundle.with_cot) throw std::logic_error("generation_request: bundle has no reasoning phase");
  CompletionRequest req;
  req.payload = bundle.prompt;
  req.decoding = decoding;
  return req;
}

CompletionRequest extraction_request(const PromptBundle& bundle, std::string_view reasoning,
                                     const Decoding& generation, const ExtractionSettings& settings) {
  CompletionRequest req;
  req.payload = extraction_payload(bundle, reasoning);
  Decoding d = generation;
  d.max_tokens = settings.max_tokens;
  if (settings.mode == ExtractionMode::greedy) {
    d.temperature = 0.0;
    d.top_p = 1.0;
  }
  req.decoding = d;
  req.top_logprobs = std::max<int>(settings.min_top_logprobs,
                                   static_cast<int>(bundle.candidate_letters.size()));
  return req;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// "B", " B", "B)" all name letter B.
std::optional<char> letter_token(std::string_view token) {
  token = trim(token);
  if (!token.empty() && token.back() == ')') token.remove_suffix(1);
  if (token.size() != 1) return std::nullopt;
  return token.front();
}

bool is_candidate(const PromptBundle& b, char c) {
  return std::find(b.candidate_letters.begin(), b.candidate_letters.end(), c) !=
         b.candidate_letters.end();
}

ExtractedAnswer with_letter(const PromptBundle& b, ExtractedAnswer a, char letter) {
  a.letter = letter;
  const auto pos = static_cast<std::size_t>(
      std::find(b.candidate_letters.begin(), b.candidate_letters.end(), letter) -
      b.candidate_letters.begin());
  a.chosen_text = b.candidate_texts.at(pos);
  return a;
}

}  // namespace

namespace {

std::optional<ExtractedAnswer> from_logprobs(const PromptBundle& bundle,
                                             const CompletionResult& result) {
  if (!result.token_logprobs || result.token_logprobs->empty()) return std::nullopt;
  std::map<char, double> best;
  for (const auto& alt : result.token_logprobs->front()) {
    auto l = letter_token(alt.token);
    if (!l || !is_candidate(bundle, *l)) continue;
    auto [it, inserted] = best.try_emplace(*l, alt.logprob);
    if (!inserted) it->second = std::max(it->second, alt.logprob);
  }
  if (best.empty()) return std::nullopt;
  // std::map iterates alphabetically, so strict > keeps the first letter on ties.
  auto winner = best.begin();
  for (auto it = std::next(best.begin()); it != best.end(); ++it) {
    if (it->second > winner->second) winner = it;
  }
  ExtractedAnswer ans;
  ans.raw_completion = result.text;
  ans.tie = std::count_if(best.begin(), best.end(),
                          [&](const auto& kv) { return kv.second == winner->second; }) > 1;
  ans.method = ExtractionMethod::logprob_argmax;
  return with_letter(bundle, std::move(ans), winner->first);
}

std::optional<ExtractedAnswer> from_text(const PromptBundle& bundle,
                                         const CompletionResult& result) {
  std::string_view text = result.text;
  if (auto at = text.rfind(bundle.extraction_suffix); at != std::string_view::npos) {
    text.remove_prefix(at + bundle.extraction_suffix.size());
  }
  text = trim(text);
  if (!text.empty() && text.front() == '(') text.remove_prefix(1);
  if (text.empty() || !is_candidate(bundle, text.front())) return std::nullopt;
  if (text.size() > 1 && std::isalnum(static_cast<unsigned char>(text[1]))) return std::nullopt;
  ExtractedAnswer ans;
  ans.raw_completion = result.text;
  ans.method = ExtractionMethod::text_parse;
  return with_letter(bundle, std::move(ans), text.front());
}

}  // namespace

ExtractedAnswer extract_letter(const PromptBundle& bundle, const CompletionResult& result,
                               ExtractionMode mode) {
  try {
    validate(result);
  } catch (const ProtocolFault& e) {
    throw ExtractionFault(std::string("structurally invalid completion: ") + e.what());
  }
  if (bundle.candidate_letters.size() != bundle.candidate_texts.size()) {
    throw ExtractionFault("bundle candidate letters and texts disagree");
  }

  auto first = mode == ExtractionMode::greedy ? from_logprobs : from_text;
  auto second = mode == ExtractionMode::greedy ? from_text : from_logprobs;
  if (auto a = first(bundle, result)) return *a;
  if (auto a = second(bundle, result)) return *a;
  ExtractedAnswer ans;
  ans.raw_completion = result.text;
  ans.method = ExtractionMethod::abstain;
  return ans;
}

}  // namespace cotfaith
