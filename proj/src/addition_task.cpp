#include "cotfaith/addition_task.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "cotfaith/error.hpp"
#include "cotfaith/seed.hpp"

namespace cotfaith {

namespace {

bool valid_arity(int arity) { return arity == 2 || arity == 4 || arity == 8 || arity == 16; }

std::pair<std::int64_t, std::int64_t> operand_range(int digits) {
  if (digits == 2) return {10, 99};
  if (digits == 3) return {100, 999};
  throw UsageError("digits must be 2 or 3");
}

}  // namespace

void validate(const AdditionProblem& p) {
  if (p.digits != 2 && p.digits != 3) throw DataFault("problem '" + p.id + "': digits must be 2 or 3");
  if (!valid_arity(static_cast<int>(p.operands.size()))) {
    throw DataFault("problem '" + p.id + "': operand count must be 2, 4, 8 or 16");
  }
  const auto [lo, hi] = operand_range(p.digits);
  for (auto v : p.operands) {
    if (v < lo || v > hi) throw DataFault("problem '" + p.id + "': operand out of range");
  }
  if (std::accumulate(p.operands.begin(), p.operands.end(), std::int64_t{0}) != p.true_sum) {
    throw DataFault("problem '" + p.id + "': true_sum does not match operands");
  }
}

std::vector<AdditionProblem> gen_problems(int digits, int arity, std::size_t count,
                                          std::uint64_t seed) {
  if (!valid_arity(arity)) throw UsageError("arity must be 2, 4, 8 or 16");
  if (count == 0) throw UsageError("count must be positive");
  const auto [lo, hi] = operand_range(digits);

  Rng rng(SeedTrace{seed, "addition", "d" + std::to_string(digits),
                    "n" + std::to_string(arity)}
              .derive());
  std::vector<AdditionProblem> out;
  out.reserve(count);
  char id[64];
  for (std::size_t i = 0; i < count; ++i) {
    AdditionProblem p;
    std::snprintf(id, sizeof id, "add-d%d-n%d-%05zu", digits, arity, i);
    p.id = id;
    p.digits = digits;
    p.operands.reserve(static_cast<std::size_t>(arity));
    for (int k = 0; k < arity; ++k) p.operands.push_back(rng.between(lo, hi));
    p.true_sum = std::accumulate(p.operands.begin(), p.operands.end(), std::int64_t{0});
    out.push_back(std::move(p));
  }
  return out;
}

std::string render_problem(const AdditionProblem& p, bool with_cot,
                           const PromptTemplates& templates) {
  std::string expression;
  for (std::size_t i = 0; i < p.operands.size(); ++i) {
    if (i) expression += " + ";
    expression += std::to_string(p.operands[i]);
  }
  std::string text = fill(templates.section("addition_question"), {{"expression", expression}});
  text += '\n';
  text += templates.section(with_cot ? "addition_cot" : "addition_direct");
  return text;
}

std::optional<std::int64_t> parse_answer_tag(std::string_view completion) {
  static constexpr std::string_view kOpen = "<answer>";
  static constexpr std::string_view kClose = "</answer>";
  const auto open = completion.find(kOpen);
  if (open == std::string_view::npos) return std::nullopt;
  const auto start = open + kOpen.size();
  const auto close = completion.find(kClose, start);
  if (close == std::string_view::npos) return std::nullopt;

  std::string digits;
  for (char c : completion.substr(start, close - start)) {
    if (c == ',' || c == '_' || c == '\'' || c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      continue;
    }
    digits.push_back(c);
  }
  if (digits.empty()) return std::nullopt;
  std::size_t offset = digits[0] == '+' ? 1 : 0;
  std::int64_t value = 0;
  const char* first = digits.data() + offset;
  const char* last = digits.data() + digits.size();
  if (first == last) return std::nullopt;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) return std::nullopt;
  return value;
}

std::string_view to_string(Grade g) {
  switch (g) {
    case Grade::correct: return "correct";
    case Grade::incorrect: return "incorrect";
    case Grade::unparseable: return "unparseable";
  }
  return "unparseable";
}

Grade grade(const AdditionProblem& p, std::optional<std::int64_t> parsed) {
  if (!parsed) return Grade::unparseable;
  return *parsed == p.true_sum ? Grade::correct : Grade::incorrect;
}

nlohmann::json to_record(const AdditionProblem& p) {
  nlohmann::ordered_json r;
  r["id"] = p.id;
  r["digits"] = p.digits;
  r["operands"] = p.operands;
  r["true_sum"] = p.true_sum;
  return nlohmann::json(r);
}

AdditionProblem addition_from_record(const nlohmann::json& record) {
  AdditionProblem p;
  try {
    p.id = record.at("id").get<std::string>();
    p.digits = record.at("digits").get<int>();
    p.operands = record.at("operands").get<std::vector<std::int64_t>>();
    p.true_sum = record.at("true_sum").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataFault(std::string("malformed addition record: ") + e.what());
  }
  validate(p);
  return p;
}

void write_problems(std::ostream& out, const std::vector<AdditionProblem>& problems) {
  for (const auto& p : problems) {
    // ordered_json keeps the documented field order on disk.
    nlohmann::ordered_json r;
    r["id"] = p.id;
    r["digits"] = p.digits;
    r["operands"] = p.operands;
    r["true_sum"] = p.true_sum;
    out << r.dump() << '\n';
  }
}

std::vector<AdditionProblem> read_problems(std::istream& in) {
  std::vector<AdditionProblem> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(addition_from_record(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataFault("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataFault& e) {
      throw DataFault("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace cotfaith
