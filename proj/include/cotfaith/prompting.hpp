#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cotfaith/mcq_data.hpp"
#include "cotfaith/model_client.hpp"
#include "cotfaith/templates.hpp"

namespace cotfaith {

/// Literal continuation that elicits a single answer letter.
inline constexpr std::string_view kExtractionSuffix = "So the right answer is (";

enum class PromptStyle { chat_turns, direct };
enum class ExtractionMode { greedy, sampled };
enum class ExtractionMethod { logprob_argmax, text_parse, abstain };

std::string_view to_string(PromptStyle s);
PromptStyle prompt_style_from_string(std::string_view text);
std::string_view to_string(ExtractionMode m);
ExtractionMode extraction_mode_from_string(std::string_view text);
std::string_view to_string(ExtractionMethod m);
ExtractionMethod extraction_method_from_string(std::string_view text);

/// A rendered MCQ prompt.
///
/// For a No-CoT bundle `prompt` is already the extraction prompt, ending in
/// the suffix. For a CoT bundle `prompt` requests the reasoning; the
/// extraction prompt is built from it once the reasoning is known.
struct PromptBundle {
  std::string item_id;
  std::string plan_tag;
  PromptStyle style = PromptStyle::chat_turns;
  bool with_cot = false;
  Payload prompt;
  std::string cot_followup;  // CoT only: turn that asks for the final answer
  std::string extraction_suffix{kExtractionSuffix};
  std::vector<char> candidate_letters;
  std::vector<std::string> candidate_texts;
  std::string template_digest;
};

/// Choice lines as they appear in prompts: "(A) text", one per line.
std::string render_choice_lines(const Presentation& presentation);

PromptBundle render_mcq_prompt(const Presentation& presentation, bool with_cot, PromptStyle style,
                               const PromptTemplates& templates = PromptTemplates::defaults(),
                               std::string plan_tag = {});

/// Prompt that ends with the extraction suffix. `reasoning` is required for
/// CoT bundles and ignored otherwise.
Payload extraction_payload(const PromptBundle& bundle, std::string_view reasoning = {});

struct ExtractionSettings {
  ExtractionMode mode = ExtractionMode::greedy;
  int max_tokens = 4;
  int min_top_logprobs = 8;
};

CompletionRequest generation_request(const PromptBundle& bundle, const Decoding& decoding);
CompletionRequest extraction_request(const PromptBundle& bundle, std::string_view reasoning,
                                     const Decoding& generation, const ExtractionSettings& settings);

struct ExtractedAnswer {
  std::optional<char> letter;
  ExtractionMethod method = ExtractionMethod::abstain;
  std::string raw_completion;
  std::string chosen_text;
  bool tie = false;  // argmax was decided alphabetically among equal scores
};

/// Reads the answer letter from an extraction completion: argmax of the
/// candidate letters' first-position log-probabilities when any are
/// reported, else the first candidate letter right after the suffix echo,
/// else an abstention. Throws ExtractionFault for a structurally invalid
/// result.
///
/// Under ExtractionMode::sampled the letter the endpoint actually sampled
/// (the completion text) takes precedence and log-probabilities are only a
/// fallback.
ExtractedAnswer extract_letter(const PromptBundle& bundle, const CompletionResult& result,
                               ExtractionMode mode = ExtractionMode::greedy);

}  // namespace cotfaith
