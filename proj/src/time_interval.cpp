#include "tkgqa/time_interval.hpp"

#include <cstdio>

#include "tkgqa/errors.hpp"

namespace tkgqa {

bool is_leap_year(int year) {
  return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

int days_in_month(int year, int month) {
  static const int kDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month < 1 || month > 12) return 0;
  if (month == 2 && is_leap_year(year)) return 29;
  return kDays[month - 1];
}

std::int32_t date_to_ordinal(int year, int month, int day) {
  if (year < 1 || year > 9999 || month < 1 || month > 12 || day < 1 ||
      day > days_in_month(year, month)) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
    throw MalformedTimestamp(buf);
  }
  // Count full years before `year`, then days within the year.
  const int y = year - 1;
  std::int32_t days = 365 * y + y / 4 - y / 100 + y / 400;
  static const int kCum[12] = {0,   31,  59,  90,  120, 151,
                               181, 212, 243, 273, 304, 334};
  days += kCum[month - 1];
  if (month > 2 && is_leap_year(year)) days += 1;
  return days + day;
}

void ordinal_to_date(std::int32_t ordinal, int& year, int& month, int& day) {
  if (ordinal < 1) throw MalformedTimestamp("ordinal " + std::to_string(ordinal));
  // 400-year Gregorian cycle arithmetic.
  std::int32_t n = ordinal - 1;
  const std::int32_t n400 = n / 146097;
  n %= 146097;
  std::int32_t n100 = n / 36524;
  if (n100 == 4) n100 = 3;  // last day of a 400-year cycle
  n -= n100 * 36524;
  const std::int32_t n4 = n / 1461;
  n %= 1461;
  std::int32_t n1 = n / 365;
  if (n1 == 4) n1 = 3;  // last day of a leap year
  n -= n1 * 365;

  year = static_cast<int>(400 * n400 + 100 * n100 + 4 * n4 + n1 + 1);
  int doy = static_cast<int>(n) + 1;
  for (month = 1; month <= 12; ++month) {
    const int dim = days_in_month(year, month);
    if (doy <= dim) break;
    doy -= dim;
  }
  day = doy;
}

namespace {

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  return true;
}

int to_int(std::string_view s) {
  int v = 0;
  for (char c : s) v = v * 10 + (c - '0');
  return v;
}

// Parses a single endpoint (no '/').
TimeInterval parse_point(std::string_view text) {
  // YYYY | YYYY-MM | YYYY-MM-DD with fixed field widths.
  if (text.size() == 4 && all_digits(text)) {
    const int year = to_int(text);
    TimeInterval iv;
    iv.start_day = date_to_ordinal(year, 1, 1);
    iv.end_day = date_to_ordinal(year, 12, 31);
    iv.granularity = Granularity::Year;
    return iv;
  }
  if (text.size() == 7 && text[4] == '-' && all_digits(text.substr(0, 4)) &&
      all_digits(text.substr(5, 2))) {
    const int year = to_int(text.substr(0, 4));
    const int month = to_int(text.substr(5, 2));
    if (month < 1 || month > 12) throw MalformedTimestamp(std::string(text));
    TimeInterval iv;
    iv.start_day = date_to_ordinal(year, month, 1);
    iv.end_day = date_to_ordinal(year, month, days_in_month(year, month));
    iv.granularity = Granularity::Month;
    return iv;
  }
  if (text.size() == 10 && text[4] == '-' && text[7] == '-' &&
      all_digits(text.substr(0, 4)) && all_digits(text.substr(5, 2)) &&
      all_digits(text.substr(8, 2))) {
    const int year = to_int(text.substr(0, 4));
    const int month = to_int(text.substr(5, 2));
    const int day = to_int(text.substr(8, 2));
    TimeInterval iv;
    iv.start_day = date_to_ordinal(year, month, day);
    iv.end_day = iv.start_day;
    iv.granularity = Granularity::Day;
    return iv;
  }
  throw MalformedTimestamp(std::string(text));
}

}  // namespace

TimeInterval parse_timestamp(std::string_view text) {
  const std::size_t slash = text.find('/');
  if (slash == std::string_view::npos) return parse_point(text);
  if (text.find('/', slash + 1) != std::string_view::npos) {
    throw MalformedTimestamp(std::string(text));
  }
  const TimeInterval a = parse_point(text.substr(0, slash));
  const TimeInterval b = parse_point(text.substr(slash + 1));
  TimeInterval iv;
  iv.start_day = a.start_day;
  iv.end_day = b.end_day;
  iv.granularity = Granularity::Interval;
  if (iv.start_day > iv.end_day) throw MalformedTimestamp(std::string(text));
  return iv;
}

namespace {
std::string format_day(std::int32_t ordinal) {
  int y, m, d;
  ordinal_to_date(ordinal, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
  return buf;
}
}  // namespace

std::string format_interval(const TimeInterval& iv) {
  int y, m, d;
  char buf[16];
  switch (iv.granularity) {
    case Granularity::Day:
      return format_day(iv.start_day);
    case Granularity::Month:
      ordinal_to_date(iv.start_day, y, m, d);
      std::snprintf(buf, sizeof(buf), "%04d-%02d", y, m);
      return buf;
    case Granularity::Year:
      ordinal_to_date(iv.start_day, y, m, d);
      std::snprintf(buf, sizeof(buf), "%04d", y);
      return buf;
    case Granularity::Interval:
      return format_day(iv.start_day) + "/" + format_day(iv.end_day);
  }
  return {};
}

std::string granularity_name(Granularity g) {
  switch (g) {
    case Granularity::Day: return "day";
    case Granularity::Month: return "month";
    case Granularity::Year: return "year";
    case Granularity::Interval: return "interval";
  }
  return {};
}

}  // namespace tkgqa
