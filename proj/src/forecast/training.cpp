// SPDX-License-Identifier: Apache-2.0

#include "twin/forecast/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "twin/errors.hpp"

namespace twin::forecast {

namespace {

struct Adam {
  double lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-7;
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;

  Adam(std::size_t n, double learning_rate) : lr(learning_rate), m(n, 0.0), v(n, 0.0) {}

  void step(std::vector<double>& w, const std::vector<double>& g) {
    ++t;
    double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    double a = lr * std::sqrt(c2) / c1;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      w[i] -= a * m[i] / (std::sqrt(v[i]) + eps);
    }
  }
};

void check_shape(const ForecastModel& model, const Dataset& data) {
  if (data.l() != model.task.l() || data.m() != model.task.m || data.k() != model.task.k) {
    throw ShapeMismatch("dataset (m=" + std::to_string(data.m()) + ", k=" + std::to_string(data.k()) +
                        ", l=" + std::to_string(data.l()) + ") does not fit model task " +
                        model.task.describe());
  }
}

// Mean sample loss over at most `cap` evenly strided instants.
double mean_loss(const ForecastModel& model, const Dataset& data, std::size_t cap) {
  std::size_t n = data.n_samples();
  std::size_t count = cap == 0 ? n : std::min(n, cap);
  auto inst = data.instants();
  std::vector<double> pred(model.task.k * model.task.l());
  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = inst[i * n / count];
    model.predict_into(data.input_span(j), pred);
    auto t = data.target_span(j);
    double s = 0.0;
    for (std::size_t c = 0; c < pred.size(); ++c) s += (pred[c] - t[c]) * (pred[c] - t[c]);
    sum += s / static_cast<double>(pred.size());
  }
  return sum / static_cast<double>(count);
}

void require_finite(double x, const char* what, std::size_t epoch) {
  if (!std::isfinite(x)) {
    throw NonFiniteLoss(std::string(what) + " became non-finite in epoch " + std::to_string(epoch));
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in (0, 1)");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
}

ForecastModel train(const ForecastModel& model, const Dataset& data, const TrainConfig& config) {
  config.validate();
  model.verify();
  if (model.kind == ModelKind::persistence) throw ShapeMismatch("persistence has no trainable weights");
  check_shape(model, data);
  if (data.n_samples() == 0) throw EmptyDataset("no prediction instants to train on");
  if (data.n_samples() < config.batch_size) {
    throw InsufficientData(std::to_string(data.n_samples()) + " instants is fewer than one batch of " +
                           std::to_string(config.batch_size));
  }
  auto split = chronological_split(data, config.validation_fraction);
  const Dataset& tr = split.train;
  const Dataset& va = split.validation;
  if (tr.n_samples() < config.batch_size) throw InsufficientData("training split smaller than one batch");

  std::size_t batches = tr.n_samples() / config.batch_size;
  if (config.max_batches_per_epoch != 0) batches = std::min(batches, config.max_batches_per_epoch);

  ForecastModel current = model;
  current.history.clear();
  double val0 = nrmse_dataset(current, va);
  require_finite(val0, "validation NRMSE", 0);
  EpochRecord rec0{0, mean_loss(current, tr, batches * config.batch_size), val0};
  current.history.push_back(rec0);
  current.initial_validation_nrmse = val0;
  if (config.on_epoch) config.on_epoch(rec0);

  ForecastModel best = current;
  double best_val = val0;
  std::size_t stale = 0;

  Adam opt(current.weights.size(), config.learning_rate);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(tr.n_samples());
  std::vector<double> grad(current.weights.size());
  double inv_batch = 1.0 / static_cast<double>(config.batch_size);
  auto inst = tr.instants();

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t s = 0; s < config.batch_size; ++s) {
        std::size_t j = inst[order[b * config.batch_size + s]];
        batch_loss += accumulate_gradient(current, tr.input_span(j), tr.target_span(j), grad, inv_batch);
      }
      batch_loss *= inv_batch;
      require_finite(batch_loss, "training loss", epoch);
      loss_sum += batch_loss;
      opt.step(current.weights, grad);
    }
    double val = nrmse_dataset(current, va);
    require_finite(val, "validation NRMSE", epoch);
    EpochRecord rec{epoch, loss_sum / static_cast<double>(batches), val};
    current.history.push_back(rec);
    if (config.on_epoch) config.on_epoch(rec);

    if (val < best_val) {
      best_val = val;
      best = current;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  best.history = current.history;
  return best;
}

ForecastModel finetune(const ForecastModel& pretrained, const Dataset& data, const TrainConfig& config) {
  if (pretrained.provenance != Provenance::persistence_pretrained) {
    throw ConfigError("finetune needs a persistence-pretrained model, got " +
                      std::string(to_string(pretrained.provenance)));
  }
  return train(pretrained, data, config);
}

double persistence_emulation_nrmse(const ForecastModel& model, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw EmptyDataset("no evaluation windows");
  std::size_t m = model.task.m;
  std::size_t k = model.task.k;
  std::size_t l = model.task.l();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> window(m * l);
  std::vector<double> pred(k * l);
  double total = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    for (auto& x : window) x = u(rng);
    model.predict_into(window, pred);
    const double* last = window.data() + (m - 1) * l;
    double s = 0.0;
    for (std::size_t c = 0; c < pred.size(); ++c) {
      double e = pred[c] - last[c % l];
      s += e * e;
    }
    total += s / static_cast<double>(pred.size());
  }
  return std::sqrt(total / static_cast<double>(count));
}

PretrainResult pretrain_persistence(const ForecastModel& initial, std::size_t n_synthetic, double threshold,
                                    const PretrainConfig& config) {
  if (n_synthetic < 1) throw ConfigError("n_synthetic must be at least 1");
  if (config.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (config.eval_interval < 1) throw ConfigError("eval_interval must be at least 1");
  initial.verify();
  if (initial.kind == ModelKind::persistence) throw ShapeMismatch("persistence has no trainable weights");

  // The held-out windows come from their own stream so training never sees them.
  std::uint64_t eval_seed = config.seed ^ 0x9e3779b97f4a7c15ULL;
  PretrainResult out;
  out.model = initial;
  out.model.provenance = Provenance::persistence_pretrained;
  out.final_nrmse = persistence_emulation_nrmse(out.model, config.eval_windows, eval_seed);
  out.reached = out.final_nrmse < threshold;
  if (out.reached || std::isinf(threshold)) return out;

  std::size_t m = initial.task.m;
  std::size_t k = initial.task.k;
  std::size_t l = initial.task.l();
  ForecastModel current = out.model;
  Adam opt(current.weights.size(), config.learning_rate);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> window(m * l);
  std::vector<double> target(k * l);
  std::vector<double> grad(current.weights.size());
  std::size_t used = 0;
  std::size_t since_eval = 0;
  double best = out.final_nrmse;

  while (used < n_synthetic) {
    std::size_t bs = std::min(config.batch_size, n_synthetic - used);
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (std::size_t s = 0; s < bs; ++s) {
      for (auto& x : window) x = u(rng);
      const double* last = window.data() + (m - 1) * l;
      for (std::size_t i = 0; i < k; ++i) std::copy(last, last + l, target.begin() + i * l);
      loss += accumulate_gradient(current, window, target, grad, 1.0 / static_cast<double>(bs));
    }
    if (!std::isfinite(loss)) throw NonFiniteLoss("pre-training loss became non-finite");
    opt.step(current.weights, grad);
    used += bs;
    since_eval += bs;
    if (since_eval >= config.eval_interval || used == n_synthetic) {
      since_eval = 0;
      double e = persistence_emulation_nrmse(current, config.eval_windows, eval_seed);
      if (e < best) {
        best = e;
        out.model = current;
        out.final_nrmse = e;
      } else {
        opt.lr = std::max(config.min_learning_rate, opt.lr * config.plateau_decay);
      }
      if (e < threshold) {
        out.reached = true;
        break;
      }
    }
  }
  out.samples_used = used;
  return out;
}

PretrainResult pretrain_persistence(ModelKind kind, const ForecastTask& task, std::size_t n_synthetic,
                                    double threshold, const PretrainConfig& config) {
  auto model = make_model(kind, task, default_topology(kind), config.seed);
  return pretrain_persistence(model, n_synthetic, threshold, config);
}

}  // namespace twin::forecast
