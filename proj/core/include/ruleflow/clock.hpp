#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ruleflow {

using SystemClock = std::chrono::system_clock;

std::int64_t now_ms();
std::int64_t to_ms(SystemClock::time_point tp);
SystemClock::time_point from_ms(std::int64_t ms);

/// "2024-05-01T12:30:00.250Z" (UTC, millisecond precision).
std::string format_rfc3339_ms(SystemClock::time_point tp);

/// Accepts RFC 3339 timestamps ("2024-05-01T12:30:00Z", fractional seconds
/// and "+HH:MM"/"-HH:MM" offsets allowed) and relative "+Ns" / "+N.Ms"
/// forms resolved against `now`.
std::optional<SystemClock::time_point> parse_fire_at(std::string_view text,
                                                     SystemClock::time_point now);

}  // namespace ruleflow
