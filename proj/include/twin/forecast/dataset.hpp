// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "twin/forecast/task.hpp"
#include "twin/matrix.hpp"
#include "twin/store.hpp"

namespace twin::forecast {

// Number of prediction instants in a series of n grid rows:
// j = m ... n - k - 1, i.e. n - m - k (0 when the series is too short).
std::size_t prediction_instant_count(std::size_t n, std::size_t m, std::size_t k);

// A series of n rows x l parameters plus the prediction instants drawn from
// it. Instant j reads rows j-m+1 .. j as input and rows j+1 .. j+k as target,
// so no sample's input overlaps its own target. Subsets share the rows.
class Dataset {
 public:
  Dataset() = default;

  // Rows flagged invalid (a missing cell) disqualify every instant whose
  // input or target touches them. deltas default to 1 (already normalised).
  Dataset(Matrix rows, std::size_t m, std::size_t k, std::vector<std::uint8_t> row_valid = {},
          std::vector<double> deltas = {});

  std::size_t n() const { return rows_ ? rows_->rows() : 0; }
  std::size_t l() const { return rows_ ? rows_->cols() : 0; }
  std::size_t m() const { return m_; }
  std::size_t k() const { return k_; }
  std::size_t n_samples() const { return instants_.size(); }
  std::span<const std::size_t> instants() const { return instants_; }
  std::span<const double> deltas() const { return deltas_; }
  const Matrix& rows() const { return *rows_; }

  // Contiguous views into the row storage: [m x l] and [k x l] row-major.
  std::span<const double> input_span(std::size_t j) const;
  std::span<const double> target_span(std::size_t j) const;
  Matrix input(std::size_t j) const;
  Matrix target(std::size_t j) const;

  // Instants [first, last) of this dataset's instant list.
  Dataset subset(std::size_t first, std::size_t last) const;

 private:
  std::shared_ptr<const Matrix> rows_;
  std::size_t m_ = 0;
  std::size_t k_ = 0;
  std::vector<std::size_t> instants_;
  std::vector<double> deltas_;
};

// Normalises a resampled series with the given stats (min-max to [0, 1] over
// the reference range; other data may leave that interval).
Dataset build_dataset(const FrameSeries& series, const NormalizationStats& stats, std::size_t m,
                      std::size_t k);

// Chronological split: the last `validation_fraction` of instants become the
// validation set, with k instants purged between the two so no training
// target overlaps a validation target.
struct Split {
  Dataset train;
  Dataset validation;
};
Split chronological_split(const Dataset& data, double validation_fraction);

}  // namespace twin::forecast
