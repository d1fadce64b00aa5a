// SPDX-License-Identifier: Apache-2.0

#include "twin/record_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "twin/errors.hpp"
#include "twin/text.hpp"

namespace twin {

std::string format_record_line(const TelemetryRecord& r) {
  std::string line = format_iso8601(r.timestamp);
  line += ", ";
  line += r.parameter;
  line += ", ";
  line += format_double(r.value);
  return line;
}

TelemetryRecord parse_record_line(std::string_view line, Source source) {
  auto cols = split(line, ',');
  if (cols.size() != 3) {
    throw ParseError("expected 'timestamp, parameter, value' but got '" + std::string(line) + "'");
  }
  TelemetryRecord r;
  r.timestamp = parse_iso8601(cols[0]);
  if (cols[1].empty()) throw ParseError("empty parameter id in '" + std::string(line) + "'");
  r.parameter = std::string(cols[1]);
  r.value = parse_double(cols[2]);
  r.source = source;
  return r;
}

void write_records(std::ostream& out, std::span<const TelemetryRecord> records) {
  for (const auto& r : records) out << format_record_line(r) << '\n';
}

std::vector<TelemetryRecord> read_records(std::istream& in, Source source) {
  std::vector<TelemetryRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    try {
      out.push_back(parse_record_line(t, source));
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void save_records(const std::string& path, std::span<const TelemetryRecord> records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("IoError", "cannot write '" + path + "'");
  write_records(out, records);
  if (!out) throw Error("IoError", "write failed for '" + path + "'");
}

std::vector<TelemetryRecord> load_records(const std::string& path, Source source) {
  std::ifstream in(path);
  if (!in) throw Error("IoError", "cannot open '" + path + "'");
  return read_records(in, source);
}

}  // namespace twin
