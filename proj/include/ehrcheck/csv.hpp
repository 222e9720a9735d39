#pragma once

// RFC-4180 CSV reading and writing.

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace ehrcheck {

struct CsvField {
  std::string text;
  bool quoted = false;
};

class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  /// Reads one record. Returns false at end of input. Throws ParseError on an
  /// unterminated quote or stray characters after a closing quote.
  bool next(std::vector<CsvField>& record);
  /// Physical line on which the last record started (1-based).
  long record_line() const { return record_line_; }

 private:
  std::istream& in_;
  long line_ = 1;
  long record_line_ = 0;
};

/// Writes one record; nullopt fields are written empty and unquoted, which
/// reads back as null. Empty strings are written as "".
void write_csv_record(std::ostream& out, const std::vector<std::optional<std::string>>& fields);

}  // namespace ehrcheck
