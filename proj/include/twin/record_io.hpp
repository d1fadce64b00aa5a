// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "twin/store.hpp"

namespace twin {

// Record file lines look like
//   2022-02-01T00:00:01Z, WMET.WindSpeed, 11.734
// Values are written in shortest round-trip form, so a write/read cycle is
// bit-exact. Blank lines and lines starting with '#' are ignored on read.
std::string format_record_line(const TelemetryRecord& r);
TelemetryRecord parse_record_line(std::string_view line, Source source = Source::file);

void write_records(std::ostream& out, std::span<const TelemetryRecord> records);
std::vector<TelemetryRecord> read_records(std::istream& in, Source source = Source::file);

void save_records(const std::string& path, std::span<const TelemetryRecord> records);
std::vector<TelemetryRecord> load_records(const std::string& path, Source source = Source::file);

}  // namespace twin
