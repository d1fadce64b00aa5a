// SPDX-License-Identifier: Apache-2.0

#include "twin/forecast/benchmark.hpp"

#include <algorithm>
#include <cstdio>

#include "twin/errors.hpp"
#include "twin/text.hpp"

namespace twin::forecast {

std::string model_label(const ForecastModel& model) {
  std::string s = to_string(model.kind);
  if (model.provenance == Provenance::persistence_pretrained) s += "-pretrained";
  return s;
}

std::vector<BenchmarkRow> benchmark(const std::vector<ForecastModel>& models, const Dataset& test) {
  if (test.n_samples() == 0) throw EmptyDataset("benchmark needs at least one test instant");
  ForecastTask task;
  if (models.empty()) {
    task.m = test.m();
    task.k = test.k();
    task.parameters.assign(test.l(), "");
  } else {
    task = models.front().task;
  }
  for (const auto& m : models) {
    if (!(m.task == task)) {
      throw TaskMismatch(model_label(m) + " has task " + m.task.describe() + ", expected " + task.describe());
    }
  }
  auto persistence = make_persistence(task);
  double base = nrmse_dataset(persistence, test);
  if (!(base > 0.0)) throw DegenerateDelta("persistence error is zero on the test data; relative score undefined");

  std::vector<BenchmarkRow> rows;
  rows.push_back({"persistence", task.timescale, base, 1.0});
  for (const auto& m : models) {
    if (m.kind == ModelKind::persistence) continue;
    double e = nrmse_dataset(m, test);
    rows.push_back({model_label(m), task.timescale, e, e / base});
  }
  return rows;
}

std::string format_table(const std::vector<BenchmarkRow>& rows) {
  std::size_t w = 5;
  for (const auto& r : rows) w = std::max(w, r.model.size());
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-*s  %-9s  %12s  %9s\n", static_cast<int>(w), "model", "timescale", "nrmse",
                "relative");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %-9s  %12.6g  %9.4f\n", static_cast<int>(w), r.model.c_str(),
                  to_string(r.timescale), r.nrmse, r.relative);
    out += buf;
  }
  return out;
}

std::string format_csv(const std::vector<BenchmarkRow>& rows) {
  std::string out = "model,timescale,nrmse,relative\n";
  for (const auto& r : rows) {
    out += r.model + "," + to_string(r.timescale) + "," + format_double(r.nrmse) + "," + format_double(r.relative) +
           "\n";
  }
  return out;
}

}  // namespace twin::forecast
