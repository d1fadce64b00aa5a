// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "twin/matrix.hpp"

namespace twin::forecast {

// Squared error normalised by the parameter's min-max range:
//   ((truth - pred) / delta)^2
// Throws DegenerateDelta unless delta > 0.
double nmse(double truth, double pred, double delta);

// Root of the mean NMSE over the k forecast steps and l parameters of one
// prediction. truth and pred are [k x l]; deltas has l entries.
double nrmse_single(const Matrix& truth, const Matrix& pred, std::span<const double> deltas);

}  // namespace twin::forecast
