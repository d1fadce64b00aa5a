// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "twin/time.hpp"

namespace twin::forecast {

enum class Timescale { seconds, minutes, hours };

Duration step_of(Timescale ts);
const char* to_string(Timescale ts);
Timescale parse_timescale(std::string_view s);

// What a model predicts: k future steps of every parameter from the m most
// recent steps, on the grid of the given timescale.
struct ForecastTask {
  Timescale timescale = Timescale::seconds;
  std::size_t m = 30;
  std::size_t k = 10;
  std::vector<std::string> parameters;

  std::size_t l() const { return parameters.size(); }
  Duration step() const { return step_of(timescale); }
  void validate() const;  // throws ConfigError
  std::string describe() const;

  bool operator==(const ForecastTask&) const = default;
};

}  // namespace twin::forecast
