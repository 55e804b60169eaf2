#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace notemort {

/// Streaming RFC 4180 reader. Quoted fields may contain commas, doubled
/// quotes and newlines (MIMIC note text does).
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  /// Reads the next record into `fields`. Returns false at end of input.
  /// Sets `malformed()` when the record ended inside an open quote.
  bool next(std::vector<std::string>& fields);

  bool malformed() const { return malformed_; }
  /// 1-based line number where the last record started.
  std::size_t record_line() const { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 1;
  std::size_t record_line_ = 0;
  bool malformed_ = false;
};

/// Quotes a field when it contains a delimiter, quote or line break.
std::string csv_escape(std::string_view field);

/// Joins already-formatted fields into one CSV line (no trailing newline).
std::string csv_join(const std::vector<std::string>& fields);

/// Column lookup by header name. Header names are matched after trimming
/// and upper-casing.
class CsvHeader {
 public:
  explicit CsvHeader(const std::vector<std::string>& names);

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
};

std::string trim(std::string_view s);
std::string to_upper(std::string_view s);
std::string to_lower(std::string_view s);

}  // namespace notemort
