// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace twin {

// Millisecond resolution covers every cadence the turbine produces and keeps
// ISO-8601 round trips exact.
using Duration = std::chrono::milliseconds;
using Instant = std::chrono::time_point<std::chrono::system_clock, Duration>;

constexpr Duration seconds(std::int64_t s) { return Duration{s * 1000}; }

inline Instant from_unix_ms(std::int64_t ms) { return Instant{Duration{ms}}; }
inline std::int64_t to_unix_ms(Instant t) { return t.time_since_epoch().count(); }

// "2022-02-01T00:00:00Z", with ".mmm" only when the millisecond part is non-zero.
std::string format_iso8601(Instant t);

// Accepts "YYYY-MM-DDTHH:MM:SS[.fff][Z|+hh:mm|-hh:mm]". A missing zone means UTC.
// Throws ParseError.
Instant parse_iso8601(std::string_view text);

// Grid instants are integer multiples of `step` counted from the UNIX epoch.
Instant floor_to_grid(Instant t, Duration step);
Instant ceil_to_grid(Instant t, Duration step);
bool on_grid(Instant t, Duration step);

// "250ms", "90s", "15m", "1h", "2d"; a bare integer means seconds.
// Throws ParseError.
Duration parse_duration(std::string_view text);

// Injectable wall clock so time-dependent components can be tested without sleeping.
using Clock = std::function<Instant()>;
Instant wall_now();
Clock wall_clock();

}  // namespace twin
