// SPDX-License-Identifier: Apache-2.0

#include "twin/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <ostream>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "twin/errors.hpp"
#include "twin/forecast/benchmark.hpp"
#include "twin/forecast/model_io.hpp"
#include "twin/forecast/training.hpp"
#include "twin/record_io.hpp"
#include "twin/server/http_server.hpp"
#include "twin/server/replay.hpp"
#include "twin/sim.hpp"
#include "twin/text.hpp"

namespace twin::cli {

namespace {

using namespace twin::forecast;

struct Globals {
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

struct SimulateOpts {
  std::string scenario;
  std::string duration = "1h";
  std::string start;
  std::string out;
};

struct IngestOpts {
  std::string data;
  std::string url;
  std::string token;
  std::string out;
  std::size_t batch = 10000;
};

struct TrainOpts {
  std::string data;
  std::string kind = "lstm";
  std::string timescale = "seconds";
  std::string out;
  std::string params;
  std::string hidden;
  std::size_t m = 30;
  std::size_t k = 10;
  bool pretrain = false;
  std::size_t pretrain_samples = 200000;
  double pretrain_threshold = 0.01;
  std::size_t epochs = 20;
  std::size_t patience = 1;
  std::size_t batch_size = 32;
  std::size_t batches = 0;
  double lr = 1e-3;
  double validation_fraction = 0.10;
};

struct BenchmarkOpts {
  std::string data;
  std::vector<std::string> models;
  std::string timescale = "seconds";
  std::string params;
  std::size_t m = 30;
  std::size_t k = 10;
  std::string csv;
  std::string format = "table";
};

struct ServeOpts {
  std::string bind = "127.0.0.1:8080";
  std::string token;
  std::string store;
  std::vector<std::string> models;
  std::string weather;
  std::string weather_refresh = "1h";
  std::string port_file;
  // replay only
  std::string data;
  double speed = 1.0;
  std::size_t wait_subscribers = 0;
  bool exit_when_done = false;
};

std::vector<std::string> param_list(const std::string& text) {
  if (trim(text).empty()) return Catalog::builtin().forecast_set();
  std::vector<std::string> out;
  for (auto p : split(text, ',')) out.emplace_back(p);
  return out;
}

Topology topology_from(const std::string& text, ModelKind kind) {
  if (trim(text).empty()) return default_topology(kind);
  Topology t;
  for (auto w : split(text, ',')) {
    long long v = parse_int(w);
    if (v < 1) throw ConfigError("layer widths must be positive");
    t.hidden.push_back(static_cast<std::size_t>(v));
  }
  return t;
}

std::vector<TelemetryRecord> load_data(const std::string& path) {
  if (!std::filesystem::exists(path)) throw Error("IoError", "no such file: " + path);
  return load_records(path);
}

// Store holding the file plus its covered range.
struct LoadedData {
  TimeseriesStore store;
  Instant first{};
  Instant last{};
};

std::unique_ptr<LoadedData> load_store(const std::string& path) {
  auto d = std::make_unique<LoadedData>();
  auto records = load_data(path);
  d->store.ingest_batch(records);
  auto first = d->store.first_time();
  auto last = d->store.last_time();
  if (!first || !last) throw InsufficientData(path + " holds no usable records");
  d->first = *first;
  d->last = *last;
  return d;
}

int cmd_simulate(const Globals& g, const SimulateOpts& o, std::ostream& out, std::ostream& err) {
  SimConfig cfg = o.scenario.empty() ? SimConfig{} : SimConfig::load(o.scenario);
  if (g.seed) cfg.seed = *g.seed;
  if (!o.start.empty()) cfg.start = parse_iso8601(o.start);
  Duration dur = parse_duration(o.duration);
  if (dur <= Duration::zero()) throw ConfigError("duration must be positive");
  cfg.validate();
  auto records = generate(cfg, dur);
  save_records(o.out, records);
  std::map<std::string, std::size_t> per_node;
  for (const auto& r : records) per_node[r.parameter.substr(0, r.parameter.find('.'))]++;
  out << "records " << records.size() << "\n";
  for (const auto& [node, n] : per_node) out << node << " " << n << "\n";
  if (g.verbose) err << "wrote " << o.out << "\n";
  return kOk;
}

int cmd_ingest(const Globals& g, const IngestOpts& o, std::ostream& out, std::ostream& err) {
  auto records = load_data(o.data);
  IngestReport total;
  if (!o.url.empty()) {
    httplib::Client client(o.url);
    client.set_read_timeout(60, 0);
    httplib::Headers headers;
    if (!o.token.empty()) headers.emplace("Authorization", "Bearer " + o.token);
    std::size_t batch = std::max<std::size_t>(1, o.batch);
    for (std::size_t i = 0; i < records.size(); i += batch) {
      std::size_t n = std::min(batch, records.size() - i);
      std::string body;
      for (std::size_t j = i; j < i + n; ++j) body += format_record_line(records[j]) + "\n";
      auto res = client.Post("/api/v1/ingest", headers, body, "text/plain");
      if (!res) throw NetworkError(o.url + ": " + httplib::to_string(res.error()));
      if (res->status == 401) throw Unauthorized(res->body);
      if (res->status != 200) throw MalformedPayload("server answered " + std::to_string(res->status) + ": " + res->body);
      auto rep = nlohmann::json::parse(res->body);
      total += IngestReport{rep.at("accepted").get<std::size_t>(), rep.at("rejected_unphysical").get<std::size_t>(),
                            rep.at("deduplicated").get<std::size_t>(), rep.at("unknown_parameter").get<std::size_t>()};
      if (g.verbose) err << "posted " << i + n << "/" << records.size() << "\n";
    }
  } else {
    if (o.out.empty()) throw ConfigError("ingest needs --url or --out");
    TimeseriesStore store;
    if (std::filesystem::exists(o.out)) store.ingest_batch(load_records(o.out));
    total = store.ingest_batch(records);
    store.save(o.out);
  }
  out << "accepted " << total.accepted << "\nrejected_unphysical " << total.rejected_unphysical
      << "\ndeduplicated " << total.deduplicated << "\nunknown_parameter " << total.unknown_parameter << "\n";
  return kOk;
}

int cmd_train(const Globals& g, const TrainOpts& o, std::ostream& out, std::ostream& err) {
  ForecastTask task;
  task.timescale = parse_timescale(o.timescale);
  task.m = o.m;
  task.k = o.k;
  task.parameters = param_list(o.params);
  task.validate();
  ModelKind kind = parse_model_kind(o.kind);
  if (kind == ModelKind::persistence) throw ConfigError("persistence needs no training");
  std::uint64_t seed = g.seed.value_or(42);

  auto data = load_store(o.data);
  auto series = data->store.resample(data->first, data->last, task.parameters, task.step());
  auto stats = data->store.normalization_stats(data->first, data->last, task.parameters);
  auto ds = build_dataset(series, stats, task.m, task.k);
  if (ds.n_samples() < o.batch_size + task.k + 2) {
    throw InsufficientData(std::to_string(series.rows()) + " " + o.timescale + " grid rows give " +
                           std::to_string(ds.n_samples()) + " prediction instants, too few to train (m=" +
                           std::to_string(task.m) + ", k=" + std::to_string(task.k) + ")");
  }

  ForecastModel model = make_model(kind, task, topology_from(o.hidden, kind), seed);
  if (o.pretrain) {
    PretrainConfig pc;
    pc.seed = seed;
    auto pre = pretrain_persistence(model, o.pretrain_samples, o.pretrain_threshold, pc);
    out << "pretrain samples " << pre.samples_used << " nrmse " << format_double(pre.final_nrmse)
        << (pre.reached ? " reached" : " budget-exhausted") << "\n";
    if (!pre.reached) err << "warning: BudgetExhausted: pre-training stopped above the threshold\n";
    model = pre.model;
  }
  model.norm = stats;

  TrainConfig tc;
  tc.batch_size = o.batch_size;
  tc.validation_fraction = o.validation_fraction;
  tc.max_epochs = o.epochs;
  tc.patience = o.patience;
  tc.learning_rate = o.lr;
  tc.seed = seed;
  tc.max_batches_per_epoch = o.batches;
  tc.on_epoch = [&](const EpochRecord& r) {
    out << "epoch " << r.epoch << " train_loss " << format_double(r.train_loss) << " validation_nrmse "
        << format_double(r.validation_nrmse) << "\n";
    out.flush();
  };
  ForecastModel trained = o.pretrain ? finetune(model, ds, tc) : train(model, ds, tc);
  save_model(trained, o.out);
  if (g.verbose) err << "wrote " << o.out << "\n";
  return kOk;
}

int cmd_benchmark(const Globals&, const BenchmarkOpts& o, std::ostream& out, std::ostream&) {
  std::vector<ForecastModel> models;
  for (const auto& p : o.models) models.push_back(load_model(p));

  // One group per timescale, in first-seen order.
  std::vector<std::pair<Timescale, std::vector<ForecastModel>>> groups;
  for (auto& m : models) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& gr) { return gr.first == m.task.timescale; });
    if (it == groups.end()) {
      groups.push_back({m.task.timescale, {}});
      it = groups.end() - 1;
    }
    it->second.push_back(std::move(m));
  }
  if (groups.empty()) groups.push_back({parse_timescale(o.timescale), {}});

  auto data = load_store(o.data);
  std::vector<BenchmarkRow> rows;
  for (auto& [ts, group] : groups) {
    ForecastTask task;
    if (group.empty()) {
      task.timescale = ts;
      task.m = o.m;
      task.k = o.k;
      task.parameters = param_list(o.params);
      task.validate();
    } else {
      task = group.front().task;
    }
    const NormalizationStats* norm = nullptr;
    for (const auto& m : group) {
      if (!(m.task == task)) {
        throw TaskMismatch(model_label(m) + " expects " + m.task.describe() + " but " + model_label(group.front()) +
                           " expects " + task.describe());
      }
      if (m.norm.parameters.empty()) continue;
      if (norm && !(m.norm == *norm)) throw TaskMismatch("models of one timescale were trained with different normalisation");
      norm = &m.norm;
    }
    NormalizationStats stats = norm ? *norm : data->store.normalization_stats(data->first, data->last, task.parameters);
    auto series = data->store.resample(data->first, data->last, task.parameters, task.step());
    auto ds = build_dataset(series, stats, task.m, task.k);
    if (ds.n_samples() == 0) throw InsufficientData("test data yields no prediction instants at " + std::string(to_string(ts)));
    auto r = benchmark(group.empty() ? std::vector<ForecastModel>{make_persistence(task)} : group, ds);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  if (o.format == "csv") {
    out << format_csv(rows);
  } else {
    out << format_table(rows);
  }
  if (!o.csv.empty()) write_file(o.csv, format_csv(rows));
  return kOk;
}

std::pair<std::string, int> split_bind(const std::string& bind) {
  auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw ConfigError("bind address must be host:port");
  long long port = parse_int(bind.substr(colon + 1));
  if (port < 0 || port > 65535) throw ConfigError("port out of range");
  return {bind.substr(0, colon), static_cast<int>(port)};
}

bool wait_or_stop(const std::atomic<bool>* stop, Duration d) {
  auto until = std::chrono::steady_clock::now() + d;
  while (std::chrono::steady_clock::now() < until) {
    if (stop && stop->load()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  return stop && stop->load();
}

int cmd_serve(const Globals& g, const ServeOpts& o, bool replay_mode, std::ostream& out, std::ostream& err,
              const std::atomic<bool>* stop) {
  TimeseriesStore store;
  if (!o.store.empty() && std::filesystem::exists(o.store)) {
    auto rep = store.ingest_batch(load_records(o.store));
    if (g.verbose) err << "restored " << rep.accepted << " records from " << o.store << "\n";
  }
  server::ServiceConfig sc;
  sc.token = o.token;
  server::TwinService service(store, sc);
  for (const auto& spec : o.models) {
    auto eq = spec.find('=');
    if (eq == std::string::npos) throw ConfigError("--model takes id=path");
    service.add_model(spec.substr(0, eq), load_model(spec.substr(eq + 1)));
  }
  if (!o.weather.empty()) {
    weather::ForecastEndpoint ep;
    ep.url = o.weather;
    ep.refresh_interval = parse_duration(o.weather_refresh);
    service.set_weather(std::make_shared<weather::WeatherClient>(ep));
  }
  std::vector<TelemetryRecord> replay_records;
  if (replay_mode) replay_records = load_data(o.data);

  auto [host, port] = split_bind(o.bind);
  server::HttpServer http(service);
  int bound = http.bind(host, port);
  http.start();
  if (!o.port_file.empty()) write_file(o.port_file, std::to_string(bound) + "\n");
  err << "listening on " << host << ":" << bound << "\n";

  if (replay_mode) {
    while (service.hub().subscriber_count() < o.wait_subscribers) {
      if (wait_or_stop(stop, Duration{20})) break;
    }
    server::ReplayOptions ro;
    ro.speed = o.speed;
    ro.stop = stop;
    auto rep = server::replay(service, std::move(replay_records), ro);
    out << "replayed " << rep.instants << " instants, accepted " << rep.ingest.accepted << "\n";
    out.flush();
    if (!o.exit_when_done) {
      while (!wait_or_stop(stop, Duration{200})) {
      }
    } else {
      // Let open streams drain what was published.
      wait_or_stop(stop, Duration{300});
    }
  } else {
    http.start_ticker();
    while (!wait_or_stop(stop, Duration{200})) {
    }
  }
  http.stop();
  if (!o.store.empty()) {
    store.save(o.store);
    if (g.verbose) err << "flushed " << store.size() << " records to " << o.store << "\n";
  }
  return kOk;
}

int exit_code_for(const Error& e) {
  static const std::set<std::string> data_errors = {
      "ParseError",  "MalformedPayload", "UnknownParameter", "InsufficientData", "InsufficientHistory",
      "EmptyDataset", "EmptyRange",      "InvalidRange",     "ShapeMismatch",    "TaskMismatch",
      "ConfigError", "ShapeError",       "DegenerateDelta",  "UnknownModel"};
  return data_errors.count(e.code()) ? kDataError : kRuntimeError;
}

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const std::atomic<bool>* stop) {
  CLI::App app{"Offshore wind turbine digital twin backend", "twin"};
  app.set_config("--config", "", "key=value configuration file; command-line flags win");
  app.require_subcommand(1, 1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "random seed");
  app.add_flag("--verbose,-v", g.verbose, "log progress to stderr");

  SimulateOpts so;
  auto* sim = app.add_subcommand("simulate", "run the turbine simulator and write records");
  sim->add_option("--scenario", so.scenario, "scenario key=value file");
  sim->add_option("--duration", so.duration, "simulated span, e.g. 3600s, 1h, 2d")->capture_default_str();
  sim->add_option("--start", so.start, "ISO-8601 start instant");
  sim->add_option("--out", so.out, "record file to write")->required();

  IngestOpts io;
  auto* ing = app.add_subcommand("ingest", "load a record file into a server or a store file");
  ing->add_option("--data", io.data, "record file")->required();
  ing->add_option("--url", io.url, "server origin, e.g. http://127.0.0.1:8080");
  ing->add_option("--token", io.token, "bearer token");
  ing->add_option("--out", io.out, "store file to merge into");
  ing->add_option("--batch", io.batch, "records per request")->capture_default_str();

  TrainOpts to;
  auto* tr = app.add_subcommand("train", "train a forecaster on a record file");
  tr->add_option("--data", to.data, "record file")->required();
  tr->add_option("--kind", to.kind, "dnn or lstm")->capture_default_str();
  tr->add_option("--timescale", to.timescale, "seconds, minutes or hours")->capture_default_str();
  tr->add_option("--out", to.out, "model file to write")->required();
  tr->add_option("--params", to.params, "comma-separated parameter ids (default: forecast set)");
  tr->add_option("--hidden", to.hidden, "layer widths, e.g. 512,256");
  tr->add_option("--m", to.m, "input steps")->capture_default_str();
  tr->add_option("--k", to.k, "output steps")->capture_default_str();
  tr->add_flag("--pretrain", to.pretrain, "pre-train on the persistence forecast first");
  tr->add_option("--pretrain-samples", to.pretrain_samples, "synthetic sample budget")->capture_default_str();
  tr->add_option("--pretrain-threshold", to.pretrain_threshold, "target emulation NRMSE")->capture_default_str();
  tr->add_option("--epochs", to.epochs, "maximum epochs")->capture_default_str();
  tr->add_option("--patience", to.patience, "epochs without improvement before stopping")->capture_default_str();
  tr->add_option("--batch-size", to.batch_size, "mini-batch size")->capture_default_str();
  tr->add_option("--batches", to.batches, "cap on batches per epoch (0 = all)")->capture_default_str();
  tr->add_option("--lr", to.lr, "learning rate")->capture_default_str();
  tr->add_option("--validation-fraction", to.validation_fraction, "held-out share")->capture_default_str();

  BenchmarkOpts bo;
  auto* bm = app.add_subcommand("benchmark", "relative NRMSE table against persistence");
  bm->add_option("--data", bo.data, "test record file")->required();
  bm->add_option("--models", bo.models, "model files");
  bm->add_option("--timescale", bo.timescale, "timescale when no model is given")->capture_default_str();
  bm->add_option("--params", bo.params, "parameters when no model is given");
  bm->add_option("--m", bo.m, "input steps when no model is given")->capture_default_str();
  bm->add_option("--k", bo.k, "output steps when no model is given")->capture_default_str();
  bm->add_option("--csv", bo.csv, "also write model,timescale,nrmse,relative rows here");
  bm->add_option("--format", bo.format, "table or csv")->check(CLI::IsMember({"table", "csv"}))->capture_default_str();

  ServeOpts sv;
  auto add_server_opts = [&](CLI::App* c) {
    c->add_option("--bind", sv.bind, "host:port (port 0 picks one)")->capture_default_str();
    c->add_option("--token", sv.token, "bearer token required for ingest");
    c->add_option("--store", sv.store, "record file restored on start and flushed on exit");
    c->add_option("--model", sv.models, "id=path of a model file to serve");
    c->add_option("--weather", sv.weather, "wind grid endpoint URL or fixture file");
    c->add_option("--weather-refresh", sv.weather_refresh, "weather refresh interval")->capture_default_str();
    c->add_option("--port-file", sv.port_file, "write the bound port here");
  };
  auto* srv = app.add_subcommand("serve", "run the HTTP server until interrupted");
  add_server_opts(srv);
  auto* rp = app.add_subcommand("replay", "serve while playing a recorded file into the pipeline");
  add_server_opts(rp);
  rp->add_option("--data", sv.data, "recorded record file")->required();
  rp->add_option("--speed", sv.speed, "recorded seconds per wall second")->capture_default_str();
  rp->add_option("--wait-subscribers", sv.wait_subscribers, "stream subscribers to wait for before playing")
      ->capture_default_str();
  rp->add_flag("--exit-when-done", sv.exit_when_done, "stop serving once the file is played");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  if (seed_opt->count() > 0) g.seed = seed_value;

  try {
    if (sim->parsed()) return cmd_simulate(g, so, out, err);
    if (ing->parsed()) return cmd_ingest(g, io, out, err);
    if (tr->parsed()) return cmd_train(g, to, out, err);
    if (bm->parsed()) return cmd_benchmark(g, bo, out, err);
    if (srv->parsed()) return cmd_serve(g, sv, false, out, err, stop);
    if (rp->parsed()) return cmd_serve(g, sv, true, out, err, stop);
  } catch (const Error& e) {
    err << "twin: error: " << one_line(e.what()) << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "twin: error: InternalError: " << one_line(e.what()) << "\n";
    return kRuntimeError;
  }
  return kUsage;
}

}  // namespace twin::cli
