#include "whan/sim_time.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include <fmt/format.h>

namespace whan {

namespace {

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

// Howard Hinnant's days_from_civil.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<int>(static_cast<std::int64_t>(yoe) + era * 400 + (m <= 2));
}

}  // namespace

std::optional<std::int64_t> parse_time_of_day(std::string_view text) {
  if (text.size() != 5 && text.size() != 8) return std::nullopt;
  if (text[2] != ':' || (text.size() == 8 && text[5] != ':')) return std::nullopt;
  auto h = parse_int(text.substr(0, 2));
  auto m = parse_int(text.substr(3, 2));
  auto s = text.size() == 8 ? parse_int(text.substr(6, 2)) : std::optional<int>(0);
  if (!h || !m || !s || *h > 23 || *m > 59 || *s > 59 || *h < 0 || *m < 0 || *s < 0) {
    return std::nullopt;
  }
  return *h * 3600 + *m * 60 + *s;
}

std::string format_time_of_day(std::int64_t seconds) {
  return fmt::format("{:02}:{:02}:{:02}", seconds / 3600, (seconds / 60) % 60, seconds % 60);
}

std::optional<Millis> parse_instant(std::string_view text) {
  if (text.size() == 19 && text[4] == '-' && text[7] == '-' && text[10] == 'T') {
    auto y = parse_int(text.substr(0, 4));
    auto mo = parse_int(text.substr(5, 2));
    auto d = parse_int(text.substr(8, 2));
    auto tod = parse_time_of_day(text.substr(11));
    if (!y || !mo || !d || !tod || *mo < 1 || *mo > 12 || *d < 1 || *d > 31) return std::nullopt;
    auto days = days_from_civil(*y, static_cast<unsigned>(*mo), static_cast<unsigned>(*d));
    return (days * 86400 + *tod) * kSecond;
  }
  return parse_seconds(text);
}

std::string format_instant(Millis t) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  civil_from_days(day_index(t), y, m, d);
  return fmt::format("{:04}-{:02}-{:02}T{}", y, m, d, format_time_of_day(seconds_of_day(t)));
}

std::string format_seconds(Millis t) {
  const char* sign = t < 0 ? "-" : "";
  auto a = t < 0 ? -t : t;
  return fmt::format("{}{}.{:03}", sign, a / 1000, a % 1000);
}

std::optional<Millis> parse_seconds(std::string_view text) {
  if (text.empty()) return std::nullopt;
  double v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
  return static_cast<Millis>(std::llround(v * 1000.0));
}

}  // namespace whan
