// SPDX-License-Identifier: Apache-2.0

#include "twin/forecast/metrics.hpp"

#include <cmath>
#include <string>

#include "twin/errors.hpp"

namespace twin::forecast {

double nmse(double truth, double pred, double delta) {
  if (!(delta > 0.0)) throw DegenerateDelta("delta must be positive, got " + std::to_string(delta));
  double e = (truth - pred) / delta;
  return e * e;
}

double nrmse_single(const Matrix& truth, const Matrix& pred, std::span<const double> deltas) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols() || deltas.size() != truth.cols()) {
    throw ShapeMismatch("truth, prediction and deltas disagree in shape");
  }
  if (truth.empty()) throw ShapeMismatch("empty prediction");
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.rows(); ++i) {
    for (std::size_t p = 0; p < truth.cols(); ++p) sum += nmse(truth(i, p), pred(i, p), deltas[p]);
  }
  return std::sqrt(sum / static_cast<double>(truth.size()));
}

}  // namespace twin::forecast
