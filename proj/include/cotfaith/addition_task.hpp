#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cotfaith/templates.hpp"

namespace cotfaith {

struct AdditionProblem {
  std::string id;
  int digits = 2;
  std::vector<std::int64_t> operands;
  std::int64_t true_sum = 0;

  bool operator==(const AdditionProblem&) const = default;
};

/// Throws DataFault when operands fall outside the digit range, the arity
/// is not one of 2, 4, 8, 16, or the stored sum is wrong.
void validate(const AdditionProblem& p);

/// `count` problems with operands drawn i.i.d. uniform over [10, 99]
/// (digits = 2) or [100, 999] (digits = 3). Deterministic in `seed`.
std::vector<AdditionProblem> gen_problems(int digits, int arity, std::size_t count,
                                          std::uint64_t seed);

std::string render_problem(const AdditionProblem& p, bool with_cot,
                           const PromptTemplates& templates = PromptTemplates::defaults());

/// Integer inside the first `<answer>...</answer>` pair, after removing
/// whitespace and digit-group separators. Absent when there is no complete
/// pair or its payload is not an integer.
std::optional<std::int64_t> parse_answer_tag(std::string_view completion);

enum class Grade { correct, incorrect, unparseable };

std::string_view to_string(Grade g);
Grade grade(const AdditionProblem& p, std::optional<std::int64_t> parsed);

nlohmann::json to_record(const AdditionProblem& p);
AdditionProblem addition_from_record(const nlohmann::json& record);

void write_problems(std::ostream& out, const std::vector<AdditionProblem>& problems);
std::vector<AdditionProblem> read_problems(std::istream& in);

}  // namespace cotfaith
