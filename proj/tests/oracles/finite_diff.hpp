// SPDX-License-Identifier: Apache-2.0
//
// Fourth-order central difference. The plain two-point stencil leaves
// roundoff near 1e-10 absolute, which is too coarse to resolve 1e-5 relative
// agreement on gradient entries of order 1e-6.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

namespace oracle {

inline double derivative(const std::function<double(double)>& f, double x, double h = 1e-3) {
  return (8.0 * (f(x + h) - f(x - h)) - (f(x + 2 * h) - f(x - 2 * h))) / (12.0 * h);
}

// |a - b| / max(|a|, |b|), 0 when both vanish.
inline double relative_error(double a, double b) {
  double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace oracle
