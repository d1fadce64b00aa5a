// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "twin/forecast/dataset.hpp"
#include "twin/forecast/model.hpp"

namespace twin::forecast {

struct BenchmarkRow {
  std::string model;
  Timescale timescale = Timescale::seconds;
  double nrmse = 0.0;
  double relative = 0.0;  // nrmse / persistence nrmse on the same data

  bool operator==(const BenchmarkRow&) const = default;
};

// "persistence", "dnn", "lstm", "dnn-pretrained", "lstm-pretrained".
std::string model_label(const ForecastModel& model);

// One row per model plus a leading persistence row (exactly 1.0). Models
// must share one task. Throws TaskMismatch, EmptyDataset, and
// DegenerateDelta when persistence is already perfect on `test`.
std::vector<BenchmarkRow> benchmark(const std::vector<ForecastModel>& models, const Dataset& test);

// Aligned text table and `model,timescale,nrmse,relative` CSV.
std::string format_table(const std::vector<BenchmarkRow>& rows);
std::string format_csv(const std::vector<BenchmarkRow>& rows);

}  // namespace twin::forecast
