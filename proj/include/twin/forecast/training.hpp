// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>

#include "twin/forecast/dataset.hpp"
#include "twin/forecast/model.hpp"

namespace twin::forecast {

struct TrainConfig {
  std::size_t batch_size = 32;
  double validation_fraction = 0.10;
  std::size_t max_epochs = 20;
  std::size_t patience = 1;
  double learning_rate = 1e-3;
  std::uint64_t seed = 42;
  // 0 = every batch of the training split each epoch; otherwise a cap on the
  // number of shuffled batches drawn per epoch (desk-scale budgets).
  std::size_t max_batches_per_epoch = 0;
  // Called after each epoch including epoch 0 (the untouched model).
  std::function<void(const EpochRecord&)> on_epoch;

  void validate() const;  // throws ConfigError
};

// Mini-batch Adam on the chronological train split of `data`; the last
// validation_fraction of instants (after a k-instant purge gap) is held out.
// Returns the best-validation snapshot, which may be the untouched input
// (epoch 0), with the full history attached. Throws EmptyDataset,
// InsufficientData, NonFiniteLoss, ShapeMismatch.
ForecastModel train(const ForecastModel& model, const Dataset& data, const TrainConfig& config);

// train() starting from persistence-pretrained weights. Throws ConfigError
// for any other provenance.
ForecastModel finetune(const ForecastModel& pretrained, const Dataset& data, const TrainConfig& config);

struct PretrainConfig {
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 7;
  std::size_t eval_windows = 1000;   // held-out synthetic windows
  std::size_t eval_interval = 8192;  // samples between evaluations
  // Learning rate is multiplied by this each time an evaluation fails to
  // improve on the best NRMSE so far (1 = constant).
  double plateau_decay = 0.5;
  double min_learning_rate = 1e-5;
};

struct PretrainResult {
  ForecastModel model;
  std::size_t samples_used = 0;
  double final_nrmse = 0.0;
  bool reached = false;  // false: budget exhausted above threshold
};

// Trains `initial` to emulate the persistence forecast on i.i.d. uniform
// [0,1] windows until its NRMSE against persistence on the held-out windows
// drops below `threshold` or n_synthetic samples are consumed. The returned
// model is the best evaluated snapshot, marked persistence-pretrained.
// threshold = infinity evaluates once and returns.
PretrainResult pretrain_persistence(const ForecastModel& initial, std::size_t n_synthetic, double threshold,
                                    const PretrainConfig& config = {});

// Default-topology network of the given kind, then the above.
PretrainResult pretrain_persistence(ModelKind kind, const ForecastTask& task, std::size_t n_synthetic,
                                    double threshold, const PretrainConfig& config = {});

// NRMSE of `model` against the persistence forecast on `count` uniform
// windows drawn from `seed` (unit deltas).
double persistence_emulation_nrmse(const ForecastModel& model, std::size_t count, std::uint64_t seed);

}  // namespace twin::forecast
