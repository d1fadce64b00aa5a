// SPDX-License-Identifier: Apache-2.0

#include "twin/forecast/task.hpp"

#include <set>

#include "twin/errors.hpp"

namespace twin::forecast {

Duration step_of(Timescale ts) {
  switch (ts) {
    case Timescale::seconds:
      return seconds(1);
    case Timescale::minutes:
      return seconds(60);
    case Timescale::hours:
      return seconds(3600);
  }
  return seconds(1);
}

const char* to_string(Timescale ts) {
  switch (ts) {
    case Timescale::seconds:
      return "seconds";
    case Timescale::minutes:
      return "minutes";
    case Timescale::hours:
      return "hours";
  }
  return "seconds";
}

Timescale parse_timescale(std::string_view s) {
  if (s == "seconds") return Timescale::seconds;
  if (s == "minutes") return Timescale::minutes;
  if (s == "hours") return Timescale::hours;
  throw ConfigError("unknown timescale '" + std::string(s) + "' (seconds|minutes|hours)");
}

void ForecastTask::validate() const {
  if (m < 1 || k < 1) throw ConfigError("task needs m >= 1 and k >= 1");
  if (parameters.empty()) throw ConfigError("task needs at least one parameter");
  std::set<std::string> seen(parameters.begin(), parameters.end());
  if (seen.size() != parameters.size()) throw ConfigError("task parameters must be distinct");
}

std::string ForecastTask::describe() const {
  return std::string(to_string(timescale)) + " m=" + std::to_string(m) + " k=" + std::to_string(k) +
         " l=" + std::to_string(l());
}

}  // namespace twin::forecast
