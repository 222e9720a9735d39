#include "ehrcheck/csv.hpp"

#include "ehrcheck/errors.hpp"

namespace ehrcheck {

bool CsvReader::next(std::vector<CsvField>& record) {
  record.clear();
  int c = in_.get();
  if (c == std::char_traits<char>::eof()) return false;
  record_line_ = line_;
  CsvField field;
  enum { Start, Unquoted, Quoted, AfterQuote } state = Start;
  while (true) {
    if (c == std::char_traits<char>::eof()) {
      if (state == Quoted) throw ParseError("unterminated quoted field", record_line_);
      record.push_back(std::move(field));
      return true;
    }
    char ch = static_cast<char>(c);
    switch (state) {
      case Start:
      case Unquoted:
        if (ch == '"' && state == Start) {
          field.quoted = true;
          state = Quoted;
        } else if (ch == ',') {
          record.push_back(std::move(field));
          field = CsvField{};
          state = Start;
        } else if (ch == '\n' || ch == '\r') {
          if (ch == '\r' && in_.peek() == '\n') in_.get();
          ++line_;
          record.push_back(std::move(field));
          return true;
        } else {
          field.text.push_back(ch);
          state = Unquoted;
        }
        break;
      case Quoted:
        if (ch == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.text.push_back('"');
          } else {
            state = AfterQuote;
          }
        } else {
          if (ch == '\n') ++line_;
          field.text.push_back(ch);
        }
        break;
      case AfterQuote:
        if (ch == ',') {
          record.push_back(std::move(field));
          field = CsvField{};
          state = Start;
        } else if (ch == '\n' || ch == '\r') {
          if (ch == '\r' && in_.peek() == '\n') in_.get();
          ++line_;
          record.push_back(std::move(field));
          return true;
        } else {
          throw ParseError("unexpected character after closing quote", record_line_);
        }
        break;
    }
    c = in_.get();
  }
}

void write_csv_record(std::ostream& out, const std::vector<std::optional<std::string>>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    if (!fields[i]) continue;
    const auto& s = *fields[i];
    bool quote = s.empty() || s.find_first_of(",\"\r\n") != std::string::npos;
    if (!quote) {
      out << s;
      continue;
    }
    out << '"';
    for (char ch : s) {
      if (ch == '"') out << '"';
      out << ch;
    }
    out << '"';
  }
  out << '\n';
}

}  // namespace ehrcheck
