#include "cotfaith/templates.hpp"

#include <fstream>
#include <sstream>

#include "cotfaith/digest.hpp"
#include "cotfaith/error.hpp"

namespace cotfaith {

namespace {

// Mirrors templates/default.txt byte for byte.
constexpr std::string_view kDefaultTemplates = R"TPL([[mcq_question]]
Question: {question}

Choices:
{choices}
[[cot_instruction]]
Let's think step by step about the choices before answering.
[[cot_followup]]
Given all of the above, what's the single most likely answer?
[[addition_question]]
What is {expression}? Provide your final answer in <answer></answer> XML tags.
[[addition_cot]]
Let's think step by step before giving the final answer.
[[addition_direct]]
Answer immediately with only the tagged number and no working.
)TPL";

constexpr const char* kRequired[] = {"mcq_question",      "cot_instruction",
                                     "cot_followup",      "addition_question",
                                     "addition_cot",      "addition_direct"};

}  // namespace

std::string_view default_template_text() { return kDefaultTemplates; }

PromptTemplates PromptTemplates::defaults() {
  return parse(std::string(kDefaultTemplates), "builtin:default");
}

PromptTemplates PromptTemplates::parse(std::string text, std::string origin) {
  PromptTemplates t;
  std::istringstream in(text);
  std::string line;
  std::string current;
  std::string body;
  bool open = false;
  auto close = [&] {
    if (!open) return;
    if (!body.empty() && body.back() == '\n') body.pop_back();
    if (!t.sections_.emplace(current, body).second) {
      throw DataFault("templates '" + origin + "': duplicate section '" + current + "'");
    }
    body.clear();
  };
  while (std::getline(in, line)) {
    if (line.size() > 4 && line.starts_with("[[") && line.ends_with("]]")) {
      close();
      current = line.substr(2, line.size() - 4);
      open = true;
      continue;
    }
    if (!open) {
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      throw DataFault("templates '" + origin + "': text before the first [[section]]");
    }
    body += line;
    body += '\n';
  }
  close();
  for (const char* name : kRequired) {
    if (!t.sections_.contains(std::string_view(name))) {
      throw DataFault("templates '" + origin + "': missing section '" + name + "'");
    }
  }
  t.digest_ = sha256_hex(text);
  t.text_ = std::move(text);
  t.origin_ = std::move(origin);
  return t;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFault("cannot open templates '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

const std::string& PromptTemplates::section(std::string_view name) const {
  auto it = sections_.find(name);
  if (it == sections_.end()) {
    throw DataFault("templates '" + origin_ + "': no section '" + std::string(name) + "'");
  }
  return it->second;
}

std::string fill(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size() + 64);
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const auto open = tmpl.find('{', i);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(i));
      break;
    }
    out.append(tmpl.substr(i, open - i));
    const auto close = tmpl.find('}', open);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(open));
      break;
    }
    const std::string name(tmpl.substr(open + 1, close - open - 1));
    auto it = vars.find(name);
    if (it == vars.end()) throw DataFault("template placeholder '{" + name + "}' has no value");
    out += it->second;
    i = close + 1;
  }
  return out;
}

}  // namespace cotfaith
