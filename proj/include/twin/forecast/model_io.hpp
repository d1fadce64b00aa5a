// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "twin/forecast/model.hpp"

namespace twin::forecast {

// Self-describing JSON container: format tag, kind, task, topology, flat
// weights (round-trip doubles), normalisation stats, provenance, history.
std::string serialize_model(const ForecastModel& model);

// Re-verifies shape invariants. Throws ParseError, ShapeMismatch.
ForecastModel deserialize_model(const std::string& text);

void save_model(const ForecastModel& model, const std::string& path);
ForecastModel load_model(const std::string& path);

}  // namespace twin::forecast
