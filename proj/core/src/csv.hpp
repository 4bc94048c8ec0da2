#pragma once

// Minimal RFC 4180 reader/writer shared by the CSV-backed file formats.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sae::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column, if present.
  std::optional<std::size_t> column(std::string_view name) const;
  /// Index of a header column; throws SchemaError naming it otherwise.
  std::size_t require(std::string_view name) const;
};

/// Reads a header row plus data rows. Blank lines and lines starting with
/// '#' (outside quotes) are skipped; rows must match the header width.
Table read(std::istream& in);

/// Quotes a field when it contains a delimiter, quote or line break.
std::string escape(std::string_view field);

/// Strict number parsing: whole field must be consumed.
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

}  // namespace sae::csv
