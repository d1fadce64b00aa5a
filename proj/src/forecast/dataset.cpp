// SPDX-License-Identifier: Apache-2.0

#include "twin/forecast/dataset.hpp"

#include <cmath>

#include "twin/errors.hpp"

namespace twin::forecast {

std::size_t prediction_instant_count(std::size_t n, std::size_t m, std::size_t k) {
  return n > m + k ? n - m - k : 0;
}

Dataset::Dataset(Matrix rows, std::size_t m, std::size_t k, std::vector<std::uint8_t> row_valid,
                 std::vector<double> deltas)
    : rows_(std::make_shared<const Matrix>(std::move(rows))), m_(m), k_(k), deltas_(std::move(deltas)) {
  if (m_ < 1 || k_ < 1) throw ShapeMismatch("dataset needs m >= 1 and k >= 1");
  std::size_t n = rows_->rows();
  if (deltas_.empty()) deltas_.assign(rows_->cols(), 1.0);
  if (deltas_.size() != rows_->cols()) throw ShapeMismatch("one delta per parameter expected");
  if (!row_valid.empty() && row_valid.size() != n) throw ShapeMismatch("row validity mask has wrong length");
  if (prediction_instant_count(n, m_, k_) == 0) return;

  // invalid_before[r] = number of invalid rows in [0, r)
  std::vector<std::size_t> invalid_before(n + 1, 0);
  for (std::size_t r = 0; r < n; ++r) {
    bool ok = row_valid.empty() || row_valid[r] != 0;
    invalid_before[r + 1] = invalid_before[r] + (ok ? 0 : 1);
  }
  for (std::size_t j = m_; j + k_ < n; ++j) {
    std::size_t lo = j + 1 - m_;
    std::size_t hi = j + k_ + 1;
    if (invalid_before[hi] == invalid_before[lo]) instants_.push_back(j);
  }
}

std::span<const double> Dataset::input_span(std::size_t j) const {
  return rows_->flat().subspan((j + 1 - m_) * l(), m_ * l());
}

std::span<const double> Dataset::target_span(std::size_t j) const {
  return rows_->flat().subspan((j + 1) * l(), k_ * l());
}

Matrix Dataset::input(std::size_t j) const {
  auto s = input_span(j);
  return Matrix(m_, l(), std::vector<double>(s.begin(), s.end()));
}

Matrix Dataset::target(std::size_t j) const {
  auto s = target_span(j);
  return Matrix(k_, l(), std::vector<double>(s.begin(), s.end()));
}

Dataset Dataset::subset(std::size_t first, std::size_t last) const {
  if (first > last || last > instants_.size()) throw ShapeMismatch("subset out of range");
  Dataset d;
  d.rows_ = rows_;
  d.m_ = m_;
  d.k_ = k_;
  d.deltas_ = deltas_;
  d.instants_.assign(instants_.begin() + static_cast<std::ptrdiff_t>(first),
                     instants_.begin() + static_cast<std::ptrdiff_t>(last));
  return d;
}

Dataset build_dataset(const FrameSeries& series, const NormalizationStats& stats, std::size_t m,
                      std::size_t k) {
  if (stats.parameters != series.parameters) {
    throw ShapeMismatch("normalisation stats do not cover the series parameters in order");
  }
  std::size_t n = series.rows();
  std::size_t l = series.cols();
  Matrix rows(n, l);
  std::vector<std::uint8_t> valid(n, 1);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < l; ++c) {
      if (series.is_missing(r, c)) {
        valid[r] = 0;
        rows(r, c) = 0.0;
      } else {
        rows(r, c) = stats.normalize(c, series.values(r, c));
      }
    }
  }
  return Dataset(std::move(rows), m, k, std::move(valid));
}

Split chronological_split(const Dataset& data, double validation_fraction) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in (0, 1)");
  }
  std::size_t total = data.n_samples();
  auto n_val = static_cast<std::size_t>(std::ceil(validation_fraction * static_cast<double>(total)));
  std::size_t purge = data.k();
  if (total < n_val + purge + 1 || n_val == 0) throw InsufficientData("too few instants to split");
  std::size_t train_end = total - n_val - purge;
  return {data.subset(0, train_end), data.subset(total - n_val, total)};
}

}  // namespace twin::forecast
