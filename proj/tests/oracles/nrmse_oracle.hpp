// SPDX-License-Identifier: Apache-2.0
//
// Brute-force reference for the dataset NRMSE, written straight from the
// definitions with plain nested loops and no shared code with the library:
//   nmse(x, f, d)    = ((x - f) / d)^2
//   nrmse_t(j)       = sqrt( sum_p sum_i nmse / (l k) ),  i = 1..k, p = 1..l
//   nrmse            = sqrt( sum_j nrmse_t(j)^2 / (n - m - k) ),  j = m .. n-k-1
// Series rows are indexed 0..n-1; instant j forecasts rows j+1..j+k.

#pragma once

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

// series[row][param]; forecast(j) returns pred[i][p] for i = 0..k-1.
inline double nrmse(const std::vector<std::vector<double>>& series, const std::vector<double>& deltas, int m, int k,
                    const std::function<std::vector<std::vector<double>>(int)>& forecast) {
  const int n = static_cast<int>(series.size());
  const int l = static_cast<int>(deltas.size());
  double outer = 0.0;
  for (int j = m; j <= n - k - 1; ++j) {
    std::vector<std::vector<double>> f = forecast(j);
    double inner = 0.0;
    for (int p = 0; p < l; ++p) {
      for (int i = 1; i <= k; ++i) {
        double e = (series[j + i][p] - f[i - 1][p]) / deltas[p];
        inner += e * e;
      }
    }
    double single = std::sqrt(inner / (l * k));
    outer += single * single;
  }
  return std::sqrt(outer / (n - m - k));
}

}  // namespace oracle
