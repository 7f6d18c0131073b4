#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace cotfaith {

/// Named prompt fragments with `{placeholder}` slots.
///
/// File format: a line `[[name]]` opens a section; the section body runs to
/// the next header, with the final newline dropped. The digest covers the
/// exact file text so results can cite the templates that produced them.
class PromptTemplates {
 public:
  static PromptTemplates defaults();
  static PromptTemplates parse(std::string text, std::string origin = "inline");
  static PromptTemplates load(const std::filesystem::path& path);

  const std::string& section(std::string_view name) const;
  const std::string& digest() const { return digest_; }
  const std::string& origin() const { return origin_; }
  const std::string& text() const { return text_; }

 private:
  std::map<std::string, std::string, std::less<>> sections_;
  std::string text_;
  std::string digest_;
  std::string origin_;
};

/// Text of the in-repo default template file.
std::string_view default_template_text();

/// Substitutes every `{name}` in `tmpl`. Unknown placeholders are an error.
std::string fill(std::string_view tmpl, const std::map<std::string, std::string>& vars);

}  // namespace cotfaith
