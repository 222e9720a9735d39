#pragma once

// Typed cell values shared by the record store, the planner and the
// extraction stages.

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace ehrcheck {

using Date = std::chrono::sys_days;

/// Exact decimal: mantissa * 10^-scale, normalized so that the mantissa has
/// no trailing zeros. At most 15 significant digits, which keeps every value
/// exactly representable as an IEEE double for the SQL path.
class Decimal {
 public:
  Decimal() = default;

  static std::optional<Decimal> parse(std::string_view text);
  static Decimal from_int(std::int64_t v) { return Decimal(v, 0); }

  std::string to_string() const;
  /// Like to_string() but integral values keep one fractional digit
  /// ("94.0"), the form used in rendered SQL.
  std::string to_sql_literal() const;
  double to_double() const;

  std::int64_t mantissa() const { return mantissa_; }
  int scale() const { return scale_; }

  friend bool operator==(const Decimal&, const Decimal&) = default;
  friend std::strong_ordering operator<=>(const Decimal& a, const Decimal& b);

 private:
  Decimal(std::int64_t m, int s);
  std::int64_t mantissa_ = 0;
  int scale_ = 0;
};

/// Calendar date with an optional time of day at second precision.
struct DateTime {
  Date date{};
  std::optional<int> seconds;  // seconds since midnight

  /// Accepts exactly `YYYY-MM-DD` or `YYYY-MM-DD HH:MM:SS`.
  static std::optional<DateTime> parse(std::string_view text);
  static DateTime on(Date d) { return DateTime{d, std::nullopt}; }
  static DateTime at(Date d, int h, int m, int s) { return DateTime{d, h * 3600 + m * 60 + s}; }

  bool has_time() const { return seconds.has_value(); }
  /// Seconds since epoch; a date-only value counts as midnight.
  std::int64_t instant() const;
  std::string to_string() const;
  std::string date_string() const;
  /// Always `YYYY-MM-DD HH:MM:SS`.
  std::string full_string() const;

  friend bool operator==(const DateTime&, const DateTime&) = default;
};

std::optional<Date> parse_date(std::string_view text);
std::string format_date(Date d);
Date add_days(Date d, int n);

struct Null {
  friend bool operator==(Null, Null) { return true; }
};

using CellValue = std::variant<Null, std::string, Decimal, DateTime, std::int64_t>;

inline bool is_null(const CellValue& v) { return std::holds_alternative<Null>(v); }
std::string cell_to_string(const CellValue& v);

}  // namespace ehrcheck
