#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cotfaith {

/// Quotes a field when it contains a comma, quote or line break.
std::string csv_field(std::string_view value);
/// One record, newline-terminated.
std::string csv_line(const std::vector<std::string>& fields);

/// Splits one CSV record, honouring double-quoted fields.
std::vector<std::string> parse_csv_line(std::string_view line);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const;
};

/// First line is the header. Lines starting with '#' are ignored.
CsvTable read_csv(std::istream& in);

}  // namespace cotfaith
