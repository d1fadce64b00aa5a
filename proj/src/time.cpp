// SPDX-License-Identifier: Apache-2.0

#include "twin/time.hpp"

#include <charconv>
#include <cstdio>

#include "twin/errors.hpp"
#include "twin/text.hpp"

namespace twin {

namespace {

int read_digits(std::string_view text, std::size_t pos, std::size_t count) {
  if (pos + count > text.size()) {
    throw ParseError("truncated timestamp '" + std::string(text) + "'");
  }
  int value = 0;
  for (std::size_t i = pos; i < pos + count; ++i) {
    char c = text[i];
    if (c < '0' || c > '9') {
      throw ParseError("bad digit in timestamp '" + std::string(text) + "'");
    }
    value = value * 10 + (c - '0');
  }
  return value;
}

void expect(std::string_view text, std::size_t pos, char c) {
  if (pos >= text.size() || text[pos] != c) {
    throw ParseError("malformed timestamp '" + std::string(text) + "'");
  }
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

std::string format_iso8601(Instant t) {
  using namespace std::chrono;
  auto day = floor<days>(t);
  year_month_day ymd{sys_days{day}};
  auto ms_of_day = (t - day).count();
  int hh = static_cast<int>(ms_of_day / 3'600'000);
  int mm = static_cast<int>(ms_of_day / 60'000 % 60);
  int ss = static_cast<int>(ms_of_day / 1000 % 60);
  int ms = static_cast<int>(ms_of_day % 1000);
  char buf[40];
  if (ms == 0) {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hh, mm, ss);
  } else {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ",
                  static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()), hh, mm, ss, ms);
  }
  return buf;
}

Instant parse_iso8601(std::string_view text) {
  using namespace std::chrono;
  int y = read_digits(text, 0, 4);
  expect(text, 4, '-');
  int mo = read_digits(text, 5, 2);
  expect(text, 7, '-');
  int d = read_digits(text, 8, 2);
  if (text.size() <= 10 || (text[10] != 'T' && text[10] != ' ')) {
    throw ParseError("malformed timestamp '" + std::string(text) + "'");
  }
  int hh = read_digits(text, 11, 2);
  expect(text, 13, ':');
  int mi = read_digits(text, 14, 2);
  expect(text, 16, ':');
  int ss = read_digits(text, 17, 2);
  std::size_t pos = 19;
  int ms = 0;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    int digits = 0;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      if (digits < 3) {
        ms = ms * 10 + (text[pos] - '0');
      } else if (text[pos] != '0') {
        throw ParseError("sub-millisecond precision in '" + std::string(text) + "'");
      }
      ++digits;
      ++pos;
    }
    if (digits == 0) throw ParseError("empty fraction in '" + std::string(text) + "'");
    for (int i = digits; i < 3; ++i) ms *= 10;
  }
  std::int64_t offset_min = 0;
  if (pos < text.size()) {
    char z = text[pos];
    if (z == 'Z') {
      ++pos;
    } else if (z == '+' || z == '-') {
      int oh = read_digits(text, pos + 1, 2);
      expect(text, pos + 3, ':');
      int om = read_digits(text, pos + 4, 2);
      offset_min = (z == '+' ? 1 : -1) * (oh * 60 + om);
      pos += 6;
    }
  }
  if (pos != text.size()) throw ParseError("trailing characters in '" + std::string(text) + "'");

  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh > 23 || mi > 59 || ss > 60) {
    throw ParseError("out-of-range field in '" + std::string(text) + "'");
  }
  auto base = time_point_cast<Duration>(sys_days{ymd});
  return base + hours{hh} + minutes{mi} + std::chrono::seconds{ss} + Duration{ms} -
         minutes{offset_min};
}

Instant floor_to_grid(Instant t, Duration step) {
  auto ms = to_unix_ms(t);
  return from_unix_ms(floor_div(ms, step.count()) * step.count());
}

Instant ceil_to_grid(Instant t, Duration step) {
  Instant f = floor_to_grid(t, step);
  return f == t ? f : f + step;
}

bool on_grid(Instant t, Duration step) { return floor_to_grid(t, step) == t; }

Duration parse_duration(std::string_view text) {
  std::string_view t = trim(text);
  std::size_t digits = 0;
  while (digits < t.size() && t[digits] >= '0' && t[digits] <= '9') ++digits;
  if (digits == 0) throw ParseError("duration '" + std::string(text) + "' must start with a number");
  long long n = parse_int(t.substr(0, digits));
  std::string_view unit = t.substr(digits);
  std::int64_t scale = 0;
  if (unit.empty() || unit == "s") scale = 1000;
  else if (unit == "ms") scale = 1;
  else if (unit == "m" || unit == "min") scale = 60'000;
  else if (unit == "h") scale = 3'600'000;
  else if (unit == "d") scale = 86'400'000;
  else throw ParseError("unknown duration unit '" + std::string(unit) + "' (ms|s|m|h|d)");
  return Duration{n * scale};
}

Instant wall_now() { return std::chrono::time_point_cast<Duration>(std::chrono::system_clock::now()); }

Clock wall_clock() { return &wall_now; }

}  // namespace twin
