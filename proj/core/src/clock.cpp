#include "ruleflow/clock.hpp"

#include <cstdio>
#include <ctime>

namespace ruleflow {

std::int64_t now_ms() { return to_ms(SystemClock::now()); }

std::int64_t to_ms(SystemClock::time_point tp) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(tp.time_since_epoch()).count();
}

SystemClock::time_point from_ms(std::int64_t ms) {
  return SystemClock::time_point(std::chrono::milliseconds(ms));
}

std::string format_rfc3339_ms(SystemClock::time_point tp) {
  std::int64_t ms = to_ms(tp);
  std::time_t secs = ms / 1000;
  int frac = static_cast<int>(ms % 1000);
  if (frac < 0) {
    frac += 1000;
    --secs;
  }
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec, frac);
  return buf;
}

std::optional<SystemClock::time_point> parse_fire_at(std::string_view text,
                                                     SystemClock::time_point now) {
  if (text.empty()) return std::nullopt;

  if (text.front() == '+') {
    // Relative form: "+Ns" with an optional fractional part.
    if (text.size() < 3 || text.back() != 's') return std::nullopt;
    std::string digits(text.substr(1, text.size() - 2));
    char* end = nullptr;
    double seconds = std::strtod(digits.c_str(), &end);
    if (end != digits.c_str() + digits.size() || seconds < 0) return std::nullopt;
    return now + std::chrono::milliseconds(static_cast<std::int64_t>(seconds * 1000.0));
  }

  // RFC 3339: YYYY-MM-DDTHH:MM:SS(.fff)?(Z|±HH:MM)
  int year, month, day, hour, minute, second;
  int consumed = 0;
  std::string s(text);
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &year, &month, &day,
                  &hour, &minute, &second, &consumed) != 6) {
    return std::nullopt;
  }
  std::size_t pos = static_cast<std::size_t>(consumed);
  std::int64_t frac_ms = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    std::size_t start = pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    if (pos == start) return std::nullopt;
    std::string frac = s.substr(start, pos - start);
    frac.resize(3, '0');
    frac_ms = std::stoll(frac.substr(0, 3));
  }
  std::int64_t offset_s = 0;
  if (pos >= s.size()) return std::nullopt;
  if (s[pos] == 'Z' || s[pos] == 'z') {
    ++pos;
  } else if (s[pos] == '+' || s[pos] == '-') {
    int oh, om;
    int sign = (s[pos] == '-') ? -1 : 1;
    int off_consumed = 0;
    if (std::sscanf(s.c_str() + pos + 1, "%2d:%2d%n", &oh, &om, &off_consumed) != 2) {
      return std::nullopt;
    }
    offset_s = sign * (oh * 3600LL + om * 60LL);
    pos += 1 + static_cast<std::size_t>(off_consumed);
  } else {
    return std::nullopt;
  }
  if (pos != s.size()) return std::nullopt;

  std::tm tm{};
  tm.tm_year = year - 1900;
  tm.tm_mon = month - 1;
  tm.tm_mday = day;
  tm.tm_hour = hour;
  tm.tm_min = minute;
  tm.tm_sec = second;
  std::time_t utc = timegm(&tm);
  if (utc == -1) return std::nullopt;
  return from_ms((static_cast<std::int64_t>(utc) - offset_s) * 1000 + frac_ms);
}

}  // namespace ruleflow
