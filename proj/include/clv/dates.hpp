// Calendar dates and timestamps. Timestamps are seconds since the Unix epoch
// (UTC); dates parse to midnight.
#pragma once

#include <cstdint>
#include <string>

namespace clv {

using Timestamp = std::int64_t;

inline constexpr std::int64_t kSecondsPerDay = 86400;

// days since 1970-01-01 for a civil date
std::int64_t days_from_civil(int y, int m, int d);
void civil_from_days(std::int64_t days, int* y, int* m, int* d);

// Parses a date (or timestamp) under a token format: "ymd", "dmy" or "mdy",
// with '-', '/', '.' or no separator, optionally followed by HH:MM:SS.
// Throws InputError on malformed input.
Timestamp parse_date(const std::string& text, const std::string& format);

// "YYYY-MM-DD"; appends " HH:MM:SS" when the timestamp has a time component.
std::string format_date(Timestamp ts);

// Truncate to midnight of the same UTC day.
inline Timestamp truncate_to_day(Timestamp ts) {
    std::int64_t d = ts / kSecondsPerDay;
    if (ts < 0 && ts % kSecondsPerDay != 0) --d;
    return d * kSecondsPerDay;
}

}  // namespace clv
