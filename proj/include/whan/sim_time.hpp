#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace whan {

/// Simulated wall time: milliseconds since the Unix epoch (UTC).
using Millis = std::int64_t;

inline constexpr Millis kSecond = 1000;
inline constexpr Millis kMinute = 60 * kSecond;
inline constexpr Millis kHour = 60 * kMinute;
inline constexpr Millis kDay = 24 * kHour;

/// Seconds since local (UTC) midnight, in [0, 86400).
inline std::int64_t seconds_of_day(Millis t) {
  auto s = t / kSecond;
  auto r = s % 86400;
  return r < 0 ? r + 86400 : r;
}

inline std::int64_t day_index(Millis t) {
  auto d = t / kDay;
  return (t % kDay < 0) ? d - 1 : d;
}

/// "HH:MM" or "HH:MM:SS" -> seconds of day.
std::optional<std::int64_t> parse_time_of_day(std::string_view text);
std::string format_time_of_day(std::int64_t seconds);

/// "YYYY-MM-DDTHH:MM:SS" (UTC) or a plain integer of Unix seconds.
std::optional<Millis> parse_instant(std::string_view text);
std::string format_instant(Millis t);

/// Unix seconds with millisecond precision, e.g. "1372680005.100".
std::string format_seconds(Millis t);
/// Accepts integer or decimal Unix seconds.
std::optional<Millis> parse_seconds(std::string_view text);

}  // namespace whan
