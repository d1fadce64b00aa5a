// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "twin/forecast/dataset.hpp"
#include "twin/forecast/task.hpp"
#include "twin/matrix.hpp"
#include "twin/store.hpp"

namespace twin::forecast {

enum class ModelKind { persistence, dnn, lstm };
const char* to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view s);

enum class Provenance { random_init, persistence_pretrained };
const char* to_string(Provenance p);
Provenance parse_provenance(std::string_view s);

// Layer widths between the fixed input and output.
//   dnn:  hidden = {h1, h2, ...}      m*l -> h1 ReLU -> h2 ReLU ... -> k*l
//   lstm: hidden = {cell, dense}      l x m -> LSTM(cell) -> dense ReLU -> k*l
struct Topology {
  std::vector<std::size_t> hidden;

  bool operator==(const Topology&) const = default;
};

std::size_t parameter_count(ModelKind kind, const ForecastTask& task, const Topology& topo);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;       // mean NMSE over the epoch's batches
  double validation_nrmse = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct ForecastModel {
  ModelKind kind = ModelKind::persistence;
  ForecastTask task;
  Topology topology;
  std::vector<double> weights;
  NormalizationStats norm;
  Provenance provenance = Provenance::random_init;
  std::vector<EpochRecord> history;
  double initial_validation_nrmse = 0.0;

  // Checks widths and weight count against kind and task. Throws ShapeMismatch.
  void verify() const;

  // [m x l] window in normalised units -> [k x l] forecast.
  Matrix predict(const Matrix& window) const;
  void predict_into(std::span<const double> window, std::span<double> out) const;

  bool operator==(const ForecastModel&) const = default;
};

// Default widths: DNN 512/256, LSTM cell 128 with a 128-wide dense layer.
Topology default_topology(ModelKind kind);

ForecastModel make_persistence(const ForecastTask& task);
// Seeded fan-in scaled uniform initialisation.
ForecastModel make_dnn(const ForecastTask& task, Topology topo, std::uint64_t seed);
ForecastModel make_lstm(const ForecastTask& task, Topology topo, std::uint64_t seed);
ForecastModel make_model(ModelKind kind, const ForecastTask& task, Topology topo, std::uint64_t seed);

// Every output row equals the last input row.
Matrix persistence_forecast(const Matrix& window, std::size_t k);

Matrix dnn_forward(const ForecastModel& model, const Matrix& window);
Matrix lstm_forward(const ForecastModel& model, const Matrix& window);

// Loss of one sample: mean over k*l cells of the squared error in normalised
// units (NMSE with delta 1).
double sample_loss(const ForecastModel& model, const Matrix& window, const Matrix& target);

// Exact gradient of sample_loss with respect to every weight.
std::vector<double> backward(const ForecastModel& model, const Matrix& window, const Matrix& target);

// Adds the gradient of sample_loss, multiplied by `scale`, into `grad` and
// returns the unscaled loss. The training hot path.
double accumulate_gradient(const ForecastModel& model, std::span<const double> window,
                           std::span<const double> target, std::span<double> grad, double scale);

// Predictions for one instant of a dataset. The instant index lets test
// oracles see the truth; models ignore it.
using PredictFn = std::function<void(std::size_t instant, std::span<const double> window, std::span<double> out)>;
PredictFn predictor(const ForecastModel& model);

// Dataset NRMSE: root of the mean squared single-prediction NRMSE over all
// prediction instants. Throws EmptyDataset.
double nrmse_dataset(const ForecastModel& model, const Dataset& data);
double nrmse_dataset(const PredictFn& predict, const Dataset& data);

// Feeds each k-step block back as input (dropping the oldest rows) and
// predicts again; returns [horizons*k x l].
Matrix stack_forecasts(const ForecastModel& model, const Matrix& window, std::size_t horizons);

}  // namespace twin::forecast
