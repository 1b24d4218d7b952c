#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace tkgqa {

enum class Granularity { Day, Month, Year, Interval };

// Inclusive day-level interval. Day indices are proleptic Gregorian
// ordinals (0001-01-01 = 1, as in Rata Die); no timezone semantics.
struct TimeInterval {
  std::int32_t start_day = 0;
  std::int32_t end_day = 0;
  Granularity granularity = Granularity::Day;

  bool operator==(const TimeInterval&) const = default;

  // Inclusive-overlap test: the only window semantics consistent with
  // multi-granularity facts (a year fact must match a month window).
  bool overlaps(const TimeInterval& w) const {
    return start_day <= w.end_day && end_day >= w.start_day;
  }
};

// Open-ended window bounds used when a tool call supplies only one endpoint.
inline constexpr std::int32_t kMinDay = INT32_MIN / 4;
inline constexpr std::int32_t kMaxDay = INT32_MAX / 4;

bool is_leap_year(int year);
int days_in_month(int year, int month);

// Proleptic Gregorian ordinal of a calendar date (0001-01-01 -> 1).
// Throws MalformedTimestamp on invalid dates (month 13, Feb 30, ...).
std::int32_t date_to_ordinal(int year, int month, int day);

// Inverse of date_to_ordinal.
void ordinal_to_date(std::int32_t ordinal, int& year, int& month, int& day);

// Parses YYYY, YYYY-MM, YYYY-MM-DD, or a two-endpoint range "A/B" where
// A and B each match one of the former. A coarse timestamp covers the
// full span of its calendar unit. Throws MalformedTimestamp otherwise.
TimeInterval parse_timestamp(std::string_view text);

// Canonical date text: YYYY, YYYY-MM or YYYY-MM-DD depending on granularity.
// Interval granularity renders as "start/end" at day granularity.
std::string format_interval(const TimeInterval& iv);

std::string granularity_name(Granularity g);

}  // namespace tkgqa
