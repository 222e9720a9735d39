#include "ehrcheck/cell.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace ehrcheck {

namespace {

constexpr int kMaxDigits = 15;

std::int64_t pow10(int n) {
  std::int64_t r = 1;
  while (n-- > 0) r *= 10;
  return r;
}

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

int to_int(std::string_view s) {
  int v = 0;
  for (char c : s) v = v * 10 + (c - '0');
  return v;
}

}  // namespace

Decimal::Decimal(std::int64_t m, int s) : mantissa_(m), scale_(s) {
  while (scale_ > 0 && mantissa_ % 10 == 0) {
    mantissa_ /= 10;
    --scale_;
  }
  if (mantissa_ == 0) scale_ = 0;
}

std::optional<Decimal> Decimal::parse(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (text.empty()) return std::nullopt;
  bool negative = false;
  if (text.front() == '-' || text.front() == '+') {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  auto dot = text.find('.');
  std::string_view int_part = text.substr(0, dot);
  std::string_view frac_part = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  if (int_part.empty() && frac_part.empty()) return std::nullopt;
  if (!int_part.empty() && !all_digits(int_part)) return std::nullopt;
  if (dot != std::string_view::npos && !frac_part.empty() && !all_digits(frac_part)) return std::nullopt;
  if (dot != std::string_view::npos && frac_part.empty() && int_part.empty()) return std::nullopt;

  // Strip insignificant zeros before counting digits.
  while (int_part.size() > 1 && int_part.front() == '0') int_part.remove_prefix(1);
  while (!frac_part.empty() && frac_part.back() == '0') frac_part.remove_suffix(1);
  std::string digits;
  digits.append(int_part);
  digits.append(frac_part);
  std::size_t lead = 0;
  while (lead + 1 < digits.size() && digits[lead] == '0') ++lead;
  if (digits.size() - lead > kMaxDigits) return std::nullopt;

  std::int64_t m = 0;
  for (char c : digits) m = m * 10 + (c - '0');
  return Decimal(negative ? -m : m, static_cast<int>(frac_part.size()));
}

std::string Decimal::to_string() const {
  std::string s = std::to_string(mantissa_ < 0 ? -mantissa_ : mantissa_);
  if (scale_ > 0) {
    if (static_cast<int>(s.size()) <= scale_) s.insert(0, scale_ - s.size() + 1, '0');
    s.insert(s.size() - scale_, ".");
  }
  if (mantissa_ < 0) s.insert(0, "-");
  return s;
}

std::string Decimal::to_sql_literal() const {
  std::string s = to_string();
  if (scale_ == 0) s += ".0";
  return s;
}

double Decimal::to_double() const {
  // strtod on the exact text gives the correctly rounded double.
  return std::strtod(to_string().c_str(), nullptr);
}

std::strong_ordering operator<=>(const Decimal& a, const Decimal& b) {
  int s = std::max(a.scale_, b.scale_);
  // Both mantissas fit in 15 digits, so aligning scales stays below 2^63.
  __int128 am = static_cast<__int128>(a.mantissa_) * pow10(s - a.scale_);
  __int128 bm = static_cast<__int128>(b.mantissa_) * pow10(s - b.scale_);
  if (am < bm) return std::strong_ordering::less;
  if (am > bm) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

std::optional<Date> parse_date(std::string_view t) {
  if (t.size() != 10 || t[4] != '-' || t[7] != '-') return std::nullopt;
  auto y = t.substr(0, 4), m = t.substr(5, 2), d = t.substr(8, 2);
  if (!all_digits(y) || !all_digits(m) || !all_digits(d)) return std::nullopt;
  std::chrono::year_month_day ymd{std::chrono::year{to_int(y)}, std::chrono::month{static_cast<unsigned>(to_int(m))},
                                  std::chrono::day{static_cast<unsigned>(to_int(d))}};
  if (!ymd.ok()) return std::nullopt;
  return Date{ymd};
}

std::string format_date(Date d) {
  std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

Date add_days(Date d, int n) { return d + std::chrono::days{n}; }

std::optional<DateTime> DateTime::parse(std::string_view text) {
  if (text.size() == 10) {
    auto d = parse_date(text);
    if (!d) return std::nullopt;
    return DateTime::on(*d);
  }
  if (text.size() != 19 || text[10] != ' ' || text[13] != ':' || text[16] != ':') return std::nullopt;
  auto d = parse_date(text.substr(0, 10));
  auto h = text.substr(11, 2), m = text.substr(14, 2), s = text.substr(17, 2);
  if (!d || !all_digits(h) || !all_digits(m) || !all_digits(s)) return std::nullopt;
  int hh = to_int(h), mm = to_int(m), ss = to_int(s);
  if (hh > 23 || mm > 59 || ss > 59) return std::nullopt;
  return DateTime::at(*d, hh, mm, ss);
}

std::int64_t DateTime::instant() const {
  return static_cast<std::int64_t>(date.time_since_epoch().count()) * 86400 + seconds.value_or(0);
}

std::string DateTime::date_string() const { return format_date(date); }

std::string DateTime::full_string() const {
  int s = seconds.value_or(0);
  char buf[32];
  std::snprintf(buf, sizeof buf, " %02d:%02d:%02d", s / 3600, (s / 60) % 60, s % 60);
  return format_date(date) + buf;
}

std::string DateTime::to_string() const { return has_time() ? full_string() : date_string(); }

std::string cell_to_string(const CellValue& v) {
  struct Visitor {
    std::string operator()(Null) const { return ""; }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(const Decimal& d) const { return d.to_string(); }
    std::string operator()(const DateTime& d) const { return d.to_string(); }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
  };
  return std::visit(Visitor{}, v);
}

}  // namespace ehrcheck
