// SPDX-License-Identifier: Apache-2.0

#include "twin/forecast/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "twin/errors.hpp"

namespace twin::forecast {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y = W x + b for W [rows x cols] row-major.
void affine(const double* w, const double* b, const double* x, std::size_t rows, std::size_t cols, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w + r * cols;
    double acc = b[r];
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

// gW += d x^T, gb += d, scaled.
void affine_grad(const double* d, const double* x, std::size_t rows, std::size_t cols, double* gw, double* gb) {
  for (std::size_t r = 0; r < rows; ++r) {
    double dr = d[r];
    if (dr == 0.0) continue;
    double* gr = gw + r * cols;
    for (std::size_t c = 0; c < cols; ++c) gr[c] += dr * x[c];
    gb[r] += dr;
  }
}

// dx = W^T d (overwrites dx).
void affine_back(const double* w, const double* d, std::size_t rows, std::size_t cols, double* dx) {
  std::fill(dx, dx + cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double dr = d[r];
    if (dr == 0.0) continue;
    const double* wr = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) dx[c] += dr * wr[c];
  }
}

struct DnnLayout {
  std::vector<std::size_t> widths;  // input, hidden..., output
  std::vector<std::size_t> w_off;
  std::vector<std::size_t> b_off;
  std::size_t total = 0;
};

DnnLayout dnn_layout(const ForecastTask& task, const Topology& topo) {
  DnnLayout lay;
  lay.widths.push_back(task.m * task.l());
  for (auto h : topo.hidden) lay.widths.push_back(h);
  lay.widths.push_back(task.k * task.l());
  for (std::size_t i = 0; i + 1 < lay.widths.size(); ++i) {
    lay.w_off.push_back(lay.total);
    lay.total += lay.widths[i + 1] * lay.widths[i];
    lay.b_off.push_back(lay.total);
    lay.total += lay.widths[i + 1];
  }
  return lay;
}

// Gate order inside the 4H blocks: input, forget, candidate, output.
struct LstmLayout {
  std::size_t l = 0, hidden = 0, dense = 0, out = 0;
  std::size_t wx = 0, wh = 0, b = 0, wd = 0, bd = 0, wo = 0, bo = 0, total = 0;
};

LstmLayout lstm_layout(const ForecastTask& task, const Topology& topo) {
  if (topo.hidden.size() != 2) throw ShapeMismatch("lstm topology needs {cell, dense} widths");
  LstmLayout lay;
  lay.l = task.l();
  lay.hidden = topo.hidden[0];
  lay.dense = topo.hidden[1];
  lay.out = task.k * task.l();
  std::size_t g = 4 * lay.hidden;
  lay.wx = 0;
  lay.wh = lay.wx + g * lay.l;
  lay.b = lay.wh + g * lay.hidden;
  lay.wd = lay.b + g;
  lay.bd = lay.wd + lay.dense * lay.hidden;
  lay.wo = lay.bd + lay.dense;
  lay.bo = lay.wo + lay.out * lay.dense;
  lay.total = lay.bo + lay.out;
  return lay;
}

// Scratch buffers reused across calls on the same thread.
struct Scratch {
  std::vector<double> a;      // activations
  std::vector<double> z;      // pre-activations
  std::vector<double> d;      // deltas
  std::vector<double> d2;
  std::vector<double> gates;  // lstm: T x 4H post-activation
  std::vector<double> cells;  // lstm: (T+1) x H
  std::vector<double> hs;     // lstm: (T+1) x H
  std::vector<double> tanh_c;
};

Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

void check_window(const ForecastModel& model, std::size_t window_size) {
  if (window_size != model.task.m * model.task.l()) {
    throw ShapeMismatch("window must be [" + std::to_string(model.task.m) + " x " +
                        std::to_string(model.task.l()) + "]");
  }
}

void dnn_run(const ForecastModel& model, std::span<const double> x, std::span<double> y, Scratch& s) {
  auto lay = dnn_layout(model.task, model.topology);
  const double* w = model.weights.data();
  std::size_t layers = lay.widths.size() - 1;
  // a holds every layer's activation back to back (input copied first).
  std::size_t total = 0;
  for (auto wdt : lay.widths) total += wdt;
  s.a.resize(total);
  s.z.resize(total);
  std::copy(x.begin(), x.end(), s.a.begin());
  std::size_t in_off = 0;
  for (std::size_t i = 0; i < layers; ++i) {
    std::size_t out_off = in_off + lay.widths[i];
    affine(w + lay.w_off[i], w + lay.b_off[i], s.a.data() + in_off, lay.widths[i + 1], lay.widths[i],
           s.z.data() + out_off);
    bool last = i + 1 == layers;
    for (std::size_t u = 0; u < lay.widths[i + 1]; ++u) {
      double zu = s.z[out_off + u];
      s.a[out_off + u] = last ? zu : (zu > 0.0 ? zu : 0.0);
    }
    in_off = out_off;
  }
  std::copy(s.a.begin() + static_cast<std::ptrdiff_t>(in_off),
            s.a.begin() + static_cast<std::ptrdiff_t>(in_off + lay.widths.back()), y.begin());
}

double dnn_grad(const ForecastModel& model, std::span<const double> x, std::span<const double> t,
                std::span<double> grad, double scale, Scratch& s) {
  auto lay = dnn_layout(model.task, model.topology);
  std::size_t out_n = lay.widths.back();
  std::vector<double>& y = s.d2;
  y.resize(out_n);
  dnn_run(model, x, y, s);
  const double* w = model.weights.data();
  double loss = 0.0;
  s.d.resize(*std::max_element(lay.widths.begin(), lay.widths.end()));
  std::vector<double> delta(out_n);
  for (std::size_t o = 0; o < out_n; ++o) {
    double e = y[o] - t[o];
    loss += e * e;
    delta[o] = scale * 2.0 * e / static_cast<double>(out_n);
  }
  loss /= static_cast<double>(out_n);

  std::size_t layers = lay.widths.size() - 1;
  std::vector<std::size_t> offs(lay.widths.size(), 0);
  for (std::size_t i = 1; i < lay.widths.size(); ++i) offs[i] = offs[i - 1] + lay.widths[i - 1];
  std::vector<double> prev;
  for (std::size_t ii = layers; ii-- > 0;) {
    const double* a_in = s.a.data() + offs[ii];
    affine_grad(delta.data(), a_in, lay.widths[ii + 1], lay.widths[ii], grad.data() + lay.w_off[ii],
                grad.data() + lay.b_off[ii]);
    if (ii == 0) break;
    prev.resize(lay.widths[ii]);
    affine_back(w + lay.w_off[ii], delta.data(), lay.widths[ii + 1], lay.widths[ii], prev.data());
    const double* z_in = s.z.data() + offs[ii];
    for (std::size_t u = 0; u < lay.widths[ii]; ++u) {
      if (!(z_in[u] > 0.0)) prev[u] = 0.0;
    }
    delta.swap(prev);
  }
  return loss;
}

// Runs the recurrence and head; caches what backprop needs in s.
void lstm_run(const ForecastModel& model, std::span<const double> x, std::span<double> y, Scratch& s) {
  auto lay = lstm_layout(model.task, model.topology);
  const double* w = model.weights.data();
  std::size_t T = model.task.m;
  std::size_t H = lay.hidden;
  std::size_t G = 4 * H;
  s.gates.resize(T * G);
  s.cells.assign((T + 1) * H, 0.0);
  s.hs.assign((T + 1) * H, 0.0);
  s.tanh_c.resize(T * H);
  std::vector<double>& z = s.z;
  z.resize(G);
  for (std::size_t t = 0; t < T; ++t) {
    const double* xt = x.data() + t * lay.l;
    const double* hprev = s.hs.data() + t * H;
    affine(w + lay.wx, w + lay.b, xt, G, lay.l, z.data());
    for (std::size_t r = 0; r < G; ++r) {
      const double* wr = w + lay.wh + r * H;
      double acc = 0.0;
      for (std::size_t c = 0; c < H; ++c) acc += wr[c] * hprev[c];
      z[r] += acc;
    }
    double* gt = s.gates.data() + t * G;
    const double* cprev = s.cells.data() + t * H;
    double* cnext = s.cells.data() + (t + 1) * H;
    double* hnext = s.hs.data() + (t + 1) * H;
    double* tc = s.tanh_c.data() + t * H;
    for (std::size_t u = 0; u < H; ++u) {
      double ig = sigmoid(z[u]);
      double fg = sigmoid(z[H + u]);
      double gg = std::tanh(z[2 * H + u]);
      double og = sigmoid(z[3 * H + u]);
      gt[u] = ig;
      gt[H + u] = fg;
      gt[2 * H + u] = gg;
      gt[3 * H + u] = og;
      cnext[u] = fg * cprev[u] + ig * gg;
      tc[u] = std::tanh(cnext[u]);
      hnext[u] = og * tc[u];
    }
  }
  s.a.resize(lay.dense);
  s.d2.resize(lay.dense);  // dense pre-activation
  affine(w + lay.wd, w + lay.bd, s.hs.data() + T * H, lay.dense, H, s.d2.data());
  for (std::size_t u = 0; u < lay.dense; ++u) s.a[u] = s.d2[u] > 0.0 ? s.d2[u] : 0.0;
  affine(w + lay.wo, w + lay.bo, s.a.data(), lay.out, lay.dense, y.data());
}

double lstm_grad(const ForecastModel& model, std::span<const double> x, std::span<const double> t,
                 std::span<double> grad, double scale, Scratch& s) {
  auto lay = lstm_layout(model.task, model.topology);
  std::vector<double> y(lay.out);
  lstm_run(model, x, y, s);
  const double* w = model.weights.data();
  double* g = grad.data();
  std::size_t T = model.task.m;
  std::size_t H = lay.hidden;
  std::size_t G = 4 * H;

  double loss = 0.0;
  std::vector<double> dy(lay.out);
  for (std::size_t o = 0; o < lay.out; ++o) {
    double e = y[o] - t[o];
    loss += e * e;
    dy[o] = scale * 2.0 * e / static_cast<double>(lay.out);
  }
  loss /= static_cast<double>(lay.out);

  affine_grad(dy.data(), s.a.data(), lay.out, lay.dense, g + lay.wo, g + lay.bo);
  std::vector<double> du(lay.dense);
  affine_back(w + lay.wo, dy.data(), lay.out, lay.dense, du.data());
  for (std::size_t u = 0; u < lay.dense; ++u) {
    if (!(s.d2[u] > 0.0)) du[u] = 0.0;
  }
  affine_grad(du.data(), s.hs.data() + T * H, lay.dense, H, g + lay.wd, g + lay.bd);
  std::vector<double> dh(H);
  affine_back(w + lay.wd, du.data(), lay.dense, H, dh.data());

  std::vector<double> dc(H, 0.0);
  std::vector<double> dz(G);
  for (std::size_t step = T; step-- > 0;) {
    const double* gt = s.gates.data() + step * G;
    const double* cprev = s.cells.data() + step * H;
    const double* tc = s.tanh_c.data() + step * H;
    for (std::size_t u = 0; u < H; ++u) {
      double ig = gt[u];
      double fg = gt[H + u];
      double gg = gt[2 * H + u];
      double og = gt[3 * H + u];
      double d_o = dh[u] * tc[u];
      dc[u] += dh[u] * og * (1.0 - tc[u] * tc[u]);
      dz[u] = dc[u] * gg * ig * (1.0 - ig);
      dz[H + u] = dc[u] * cprev[u] * fg * (1.0 - fg);
      dz[2 * H + u] = dc[u] * ig * (1.0 - gg * gg);
      dz[3 * H + u] = d_o * og * (1.0 - og);
      dc[u] *= fg;
    }
    const double* xt = x.data() + step * lay.l;
    const double* hprev = s.hs.data() + step * H;
    affine_grad(dz.data(), xt, G, lay.l, g + lay.wx, g + lay.b);
    // W_h gradient; the bias was already accumulated above.
    for (std::size_t r = 0; r < G; ++r) {
      double dr = dz[r];
      if (dr == 0.0) continue;
      double* gr = g + lay.wh + r * H;
      for (std::size_t c = 0; c < H; ++c) gr[c] += dr * hprev[c];
    }
    affine_back(w + lay.wh, dz.data(), G, H, dh.data());
  }
  return loss;
}

void init_uniform(std::mt19937_64& rng, double* w, std::size_t n, double bound) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (std::size_t i = 0; i < n; ++i) w[i] = u(rng);
}

}  // namespace

const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::persistence:
      return "persistence";
    case ModelKind::dnn:
      return "dnn";
    case ModelKind::lstm:
      return "lstm";
  }
  return "persistence";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "persistence") return ModelKind::persistence;
  if (s == "dnn") return ModelKind::dnn;
  if (s == "lstm") return ModelKind::lstm;
  throw ConfigError("unknown model kind '" + std::string(s) + "' (persistence|dnn|lstm)");
}

const char* to_string(Provenance p) {
  return p == Provenance::persistence_pretrained ? "persistence-pretrained" : "random-init";
}

Provenance parse_provenance(std::string_view s) {
  if (s == "random-init") return Provenance::random_init;
  if (s == "persistence-pretrained") return Provenance::persistence_pretrained;
  throw ParseError("unknown provenance '" + std::string(s) + "'");
}

std::size_t parameter_count(ModelKind kind, const ForecastTask& task, const Topology& topo) {
  switch (kind) {
    case ModelKind::persistence:
      return 0;
    case ModelKind::dnn:
      return dnn_layout(task, topo).total;
    case ModelKind::lstm:
      return lstm_layout(task, topo).total;
  }
  return 0;
}

void ForecastModel::verify() const {
  task.validate();
  if (kind == ModelKind::persistence) {
    if (!weights.empty() || !topology.hidden.empty()) throw ShapeMismatch("persistence has no weights");
  } else {
    if (kind == ModelKind::lstm && topology.hidden.size() != 2) {
      throw ShapeMismatch("lstm topology needs {cell, dense} widths");
    }
    for (auto h : topology.hidden) {
      if (h == 0) throw ShapeMismatch("layer widths must be positive");
    }
    std::size_t expected = parameter_count(kind, task, topology);
    if (weights.size() != expected) {
      throw ShapeMismatch("expected " + std::to_string(expected) + " weights, found " +
                          std::to_string(weights.size()));
    }
  }
  if (!norm.parameters.empty() && norm.parameters != task.parameters) {
    throw ShapeMismatch("normalisation stats do not match task parameters");
  }
}

Matrix ForecastModel::predict(const Matrix& window) const {
  if (window.rows() != task.m || window.cols() != task.l()) {
    throw ShapeMismatch("window must be [" + std::to_string(task.m) + " x " + std::to_string(task.l()) + "]");
  }
  Matrix out(task.k, task.l());
  predict_into(window.flat(), out.flat());
  return out;
}

void ForecastModel::predict_into(std::span<const double> window, std::span<double> out) const {
  check_window(*this, window.size());
  std::size_t l = task.l();
  switch (kind) {
    case ModelKind::persistence: {
      auto last = window.subspan(window.size() - l, l);
      for (std::size_t i = 0; i < task.k; ++i) std::copy(last.begin(), last.end(), out.begin() + i * l);
      break;
    }
    case ModelKind::dnn:
      dnn_run(*this, window, out, scratch());
      break;
    case ModelKind::lstm:
      lstm_run(*this, window, out, scratch());
      break;
  }
}

Topology default_topology(ModelKind kind) {
  switch (kind) {
    case ModelKind::persistence:
      return {};
    case ModelKind::dnn:
      return {{512, 256}};
    case ModelKind::lstm:
      return {{128, 128}};
  }
  return {};
}

ForecastModel make_persistence(const ForecastTask& task) {
  task.validate();
  ForecastModel m;
  m.kind = ModelKind::persistence;
  m.task = task;
  return m;
}

ForecastModel make_dnn(const ForecastTask& task, Topology topo, std::uint64_t seed) {
  task.validate();
  ForecastModel m;
  m.kind = ModelKind::dnn;
  m.task = task;
  m.topology = std::move(topo);
  auto lay = dnn_layout(task, m.topology);
  m.weights.assign(lay.total, 0.0);
  std::mt19937_64 rng(seed);
  std::size_t layers = lay.widths.size() - 1;
  for (std::size_t i = 0; i < layers; ++i) {
    double fan_in = static_cast<double>(lay.widths[i]);
    double bound = i + 1 == layers ? 1.0 / std::sqrt(fan_in) : std::sqrt(6.0 / fan_in);
    init_uniform(rng, m.weights.data() + lay.w_off[i], lay.widths[i] * lay.widths[i + 1], bound);
  }
  m.verify();
  return m;
}

ForecastModel make_lstm(const ForecastTask& task, Topology topo, std::uint64_t seed) {
  task.validate();
  ForecastModel m;
  m.kind = ModelKind::lstm;
  m.task = task;
  m.topology = std::move(topo);
  auto lay = lstm_layout(task, m.topology);
  m.weights.assign(lay.total, 0.0);
  std::mt19937_64 rng(seed);
  double rec = 1.0 / std::sqrt(static_cast<double>(lay.hidden));
  init_uniform(rng, m.weights.data() + lay.wx, 4 * lay.hidden * lay.l, rec);
  init_uniform(rng, m.weights.data() + lay.wh, 4 * lay.hidden * lay.hidden, rec);
  for (std::size_t u = 0; u < lay.hidden; ++u) m.weights[lay.b + lay.hidden + u] = 1.0;  // forget gate
  init_uniform(rng, m.weights.data() + lay.wd, lay.dense * lay.hidden,
               std::sqrt(6.0 / static_cast<double>(lay.hidden)));
  init_uniform(rng, m.weights.data() + lay.wo, lay.out * lay.dense, 1.0 / std::sqrt(static_cast<double>(lay.dense)));
  m.verify();
  return m;
}

ForecastModel make_model(ModelKind kind, const ForecastTask& task, Topology topo, std::uint64_t seed) {
  switch (kind) {
    case ModelKind::persistence:
      return make_persistence(task);
    case ModelKind::dnn:
      return make_dnn(task, std::move(topo), seed);
    case ModelKind::lstm:
      return make_lstm(task, std::move(topo), seed);
  }
  return make_persistence(task);
}

Matrix persistence_forecast(const Matrix& window, std::size_t k) {
  if (window.empty()) throw ShapeMismatch("persistence needs a non-empty window");
  Matrix out(k, window.cols());
  auto last = window.row(window.rows() - 1);
  for (std::size_t i = 0; i < k; ++i) std::copy(last.begin(), last.end(), out.row(i).begin());
  return out;
}

Matrix dnn_forward(const ForecastModel& model, const Matrix& window) {
  if (model.kind != ModelKind::dnn) throw ShapeMismatch("model is not a dnn");
  return model.predict(window);
}

Matrix lstm_forward(const ForecastModel& model, const Matrix& window) {
  if (model.kind != ModelKind::lstm) throw ShapeMismatch("model is not an lstm");
  return model.predict(window);
}

double sample_loss(const ForecastModel& model, const Matrix& window, const Matrix& target) {
  auto pred = model.predict(window);
  if (target.rows() != pred.rows() || target.cols() != pred.cols()) throw ShapeMismatch("target shape");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double e = pred.flat()[i] - target.flat()[i];
    sum += e * e;
  }
  return sum / static_cast<double>(pred.size());
}

double accumulate_gradient(const ForecastModel& model, std::span<const double> window,
                           std::span<const double> target, std::span<double> grad, double scale) {
  check_window(model, window.size());
  if (target.size() != model.task.k * model.task.l()) throw ShapeMismatch("target must be [k x l]");
  if (grad.size() != model.weights.size()) throw ShapeMismatch("gradient buffer has wrong length");
  switch (model.kind) {
    case ModelKind::dnn:
      return dnn_grad(model, window, target, grad, scale, scratch());
    case ModelKind::lstm:
      return lstm_grad(model, window, target, grad, scale, scratch());
    case ModelKind::persistence:
      break;
  }
  throw ShapeMismatch("persistence has no trainable weights");
}

std::vector<double> backward(const ForecastModel& model, const Matrix& window, const Matrix& target) {
  std::vector<double> grad(model.weights.size(), 0.0);
  accumulate_gradient(model, window.flat(), target.flat(), grad, 1.0);
  return grad;
}

PredictFn predictor(const ForecastModel& model) {
  return [&model](std::size_t, std::span<const double> window, std::span<double> out) {
    model.predict_into(window, out);
  };
}

double nrmse_dataset(const ForecastModel& model, const Dataset& data) {
  if (data.l() != model.task.l() || data.m() != model.task.m || data.k() != model.task.k) {
    throw ShapeMismatch("dataset shape does not match model task " + model.task.describe());
  }
  return nrmse_dataset(predictor(model), data);
}

double nrmse_dataset(const PredictFn& predict, const Dataset& data) {
  if (data.n_samples() == 0) throw EmptyDataset("no prediction instants");
  std::size_t cells = data.k() * data.l();
  std::vector<double> pred(cells);
  auto deltas = data.deltas();
  double total = 0.0;
  for (auto j : data.instants()) {
    predict(j, data.input_span(j), pred);
    auto truth = data.target_span(j);
    double sum = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
      double e = (truth[c] - pred[c]) / deltas[c % data.l()];
      sum += e * e;
    }
    // Squared single-prediction NRMSE.
    total += sum / static_cast<double>(cells);
  }
  return std::sqrt(total / static_cast<double>(data.n_samples()));
}

Matrix stack_forecasts(const ForecastModel& model, const Matrix& window, std::size_t horizons) {
  if (horizons < 1) throw ShapeMismatch("horizons must be at least 1");
  std::size_t m = model.task.m;
  std::size_t k = model.task.k;
  std::size_t l = model.task.l();
  if (window.rows() != m || window.cols() != l) throw ShapeMismatch("window must be [m x l]");
  Matrix out(horizons * k, l);
  std::vector<double> history(window.flat().begin(), window.flat().end());
  std::vector<double> block(k * l);
  for (std::size_t h = 0; h < horizons; ++h) {
    std::span<const double> current(history.data() + history.size() - m * l, m * l);
    model.predict_into(current, block);
    std::copy(block.begin(), block.end(), out.flat().begin() + static_cast<std::ptrdiff_t>(h * k * l));
    history.insert(history.end(), block.begin(), block.end());
  }
  return out;
}

}  // namespace twin::forecast
