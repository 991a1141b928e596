#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace flakyci {

/// UTC instant with millisecond resolution.
using timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

/// Parses an RFC 3339 date-time ("2024-07-11T10:00:00Z",
/// "2024-07-11T10:00:00.250+02:00"). Naive timestamps (no offset) are
/// rejected. Throws input_error.
timestamp parse_rfc3339(std::string_view text);

/// Canonical UTC form: "YYYY-MM-DDTHH:MM:SSZ", with ".mmm" only when the
/// millisecond part is non-zero.
std::string format_rfc3339(timestamp t);

/// "YYYY-MM-DD" of the UTC calendar day containing t.
std::string format_date(timestamp t);

/// Start of the UTC calendar day containing t.
timestamp floor_to_day(timestamp t);

inline double minutes_between(timestamp from, timestamp to) {
  return static_cast<double>((to - from).count()) / 60'000.0;
}

inline double days_between(timestamp from, timestamp to) {
  return static_cast<double>((to - from).count()) / 86'400'000.0;
}

}  // namespace flakyci
