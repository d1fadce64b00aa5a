// SPDX-License-Identifier: Apache-2.0

#include "twin/server/service.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "twin/record_io.hpp"
#include "twin/text.hpp"

namespace twin::server {

namespace {

using nlohmann::json;

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

const std::string* find(const Query& q, std::string_view key) {
  auto it = q.find(key);
  return it == q.end() ? nullptr : &it->second;
}

const std::string& require(const Query& q, std::string_view key) {
  const auto* v = find(q, key);
  if (!v || v->empty()) throw MalformedPayload("missing query parameter '" + std::string(key) + "'");
  return *v;
}

std::vector<std::string> parse_list(std::string_view text) {
  std::vector<std::string> out;
  if (trim(text).empty()) return out;
  for (auto p : split(text, ',')) {
    if (p.empty()) throw MalformedPayload("empty entry in parameter list");
    out.emplace_back(p);
  }
  return out;
}

Instant parse_instant(std::string_view text, const char* what) {
  try {
    return parse_iso8601(text);
  } catch (const ParseError& e) {
    throw MalformedPayload(std::string(what) + ": " + e.what());
  }
}

json state_json(const TimeState& s) {
  return {{"real_time", format_iso8601(s.real_time)},
          {"system_time", format_iso8601(s.system_time)},
          {"simulation_time", format_iso8601(s.simulation_time)},
          {"simulation_speed", s.simulation_speed},
          {"animation_speed", s.animation_speed}};
}

TelemetryRecord record_from_json(const json& r) {
  if (!r.is_object()) throw MalformedPayload("each record must be an object");
  TelemetryRecord rec;
  auto ts = r.find("timestamp");
  auto param = r.find("parameter");
  auto value = r.find("value");
  if (ts == r.end() || !ts->is_string()) throw MalformedPayload("record needs a string 'timestamp'");
  if (param == r.end() || !param->is_string()) throw MalformedPayload("record needs a string 'parameter'");
  if (value == r.end() || !value->is_number()) throw MalformedPayload("record needs a numeric 'value'");
  rec.timestamp = parse_instant(ts->get<std::string>(), "timestamp");
  rec.parameter = param->get<std::string>();
  rec.value = value->get<double>();
  rec.source = Source::live;
  if (auto src = r.find("source"); src != r.end()) {
    if (!src->is_string()) throw MalformedPayload("'source' must be a string");
    try {
      rec.source = parse_source(src->get<std::string>());
    } catch (const Error& e) {
      throw MalformedPayload(e.what());
    }
  }
  return rec;
}

}  // namespace

TwinService::TwinService(TimeseriesStore& store, ServiceConfig config, Clock clock)
    : store_(store),
      config_(std::move(config)),
      time_(std::move(clock)),
      hub_(store_, config_.stream_step, config_.stream_queue) {}

void TwinService::add_model(const std::string& id, forecast::ForecastModel model) {
  model.verify();
  std::lock_guard lock(models_mutex_);
  models_[id] = std::make_shared<const forecast::ForecastModel>(std::move(model));
}

std::vector<std::string> TwinService::model_ids() const {
  std::lock_guard lock(models_mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, m] : models_) ids.push_back(id);
  return ids;
}

void TwinService::set_weather(std::shared_ptr<weather::WeatherClient> client) { weather_ = std::move(client); }

std::string TwinService::ingest(std::string_view authorization, std::string_view content_type,
                                std::string_view body) {
  if (!config_.token.empty() && authorization != "Bearer " + config_.token) {
    throw Unauthorized("missing or wrong bearer token");
  }
  std::vector<TelemetryRecord> records;
  if (content_type.rfind("text/plain", 0) == 0) {
    std::size_t line_no = 0;
    for (auto line : split(body, '\n')) {
      ++line_no;
      if (line.empty() || line.front() == '#') continue;
      try {
        records.push_back(parse_record_line(line, Source::live));
      } catch (const Error& e) {
        throw MalformedPayload("line " + std::to_string(line_no) + ": " + e.what());
      }
    }
  } else {
    json doc;
    try {
      doc = json::parse(body);
    } catch (const json::exception& e) {
      throw MalformedPayload(std::string("body is not JSON: ") + e.what());
    }
    const json* list = &doc;
    if (doc.is_object()) {
      auto it = doc.find("records");
      if (it == doc.end()) throw MalformedPayload("expected {\"records\": [...]}");
      list = &*it;
    }
    if (!list->is_array()) throw MalformedPayload("records must be an array");
    records.reserve(list->size());
    for (const auto& r : *list) records.push_back(record_from_json(r));
  }
  auto rep = store_.ingest_batch(records);
  json out = {{"accepted", rep.accepted},
              {"rejected_unphysical", rep.rejected_unphysical},
              {"deduplicated", rep.deduplicated},
              {"unknown_parameter", rep.unknown_parameter}};
  return out.dump();
}

std::string TwinService::historic(const Query& q) const {
  Instant from = parse_instant(require(q, "from"), "from");
  Instant to = parse_instant(require(q, "to"), "to");
  Duration step = seconds(1);
  if (const auto* s = find(q, "step"); s && !s->empty()) {
    try {
      step = parse_duration(*s);
    } catch (const ParseError& e) {
      throw MalformedPayload(std::string("step: ") + e.what());
    }
    if (step <= Duration::zero()) throw InvalidRange("step must be positive");
  }
  std::vector<std::string> params;
  if (const auto* p = find(q, "params")) params = parse_list(*p);
  if (from > to) throw InvalidRange("from is after to");
  Instant sys = time_.system_time();
  if (to > sys) {
    throw FutureRange("to " + format_iso8601(to) + " is after system time " + format_iso8601(sys));
  }
  auto fs = store_.resample(from, to, params, step);
  json ts = json::array();
  json values = json::array();
  json padded = json::array();
  for (std::size_t r = 0; r < fs.rows(); ++r) {
    ts.push_back(format_iso8601(fs.time_at(r)));
    json row = json::array();
    json prow = json::array();
    for (std::size_t c = 0; c < fs.cols(); ++c) {
      row.push_back(number_or_null(fs.values(r, c)));
      prow.push_back(fs.is_padded(r, c));
    }
    values.push_back(std::move(row));
    padded.push_back(std::move(prow));
  }
  json out = {{"parameters", fs.parameters},
              {"step_ms", step.count()},
              {"timestamps", std::move(ts)},
              {"values", std::move(values)},
              {"padded", std::move(padded)}};
  return out.dump();
}

std::string TwinService::forecast(const Query& q) const {
  const std::string& id = require(q, "model");
  std::shared_ptr<const forecast::ForecastModel> model;
  {
    std::lock_guard lock(models_mutex_);
    auto it = models_.find(id);
    if (it == models_.end()) throw UnknownModel("no model '" + id + "' is loaded");
    model = it->second;
  }
  Instant sys = time_.system_time();
  Instant at = sys;
  if (const auto* a = find(q, "at"); a && !a->empty()) at = parse_instant(*a, "at");
  if (at > sys) throw FutureRange("at " + format_iso8601(at) + " is after system time " + format_iso8601(sys));

  const auto& task = model->task;
  Duration step = task.step();
  Instant anchor = floor_to_grid(at, step);
  Matrix window = store_.window(anchor, task.m, task.parameters, step);
  bool scaled = !model->norm.parameters.empty();
  if (scaled) {
    for (std::size_t r = 0; r < window.rows(); ++r) {
      for (std::size_t c = 0; c < window.cols(); ++c) window(r, c) = model->norm.normalize(c, window(r, c));
    }
  }
  Matrix pred = model->predict(window);
  json per_param = json::object();
  for (std::size_t c = 0; c < task.l(); ++c) {
    json col = json::array();
    for (std::size_t r = 0; r < task.k; ++r) {
      double v = scaled ? model->norm.denormalize(c, pred(r, c)) : pred(r, c);
      col.push_back(number_or_null(v));
    }
    per_param[task.parameters[c]] = std::move(col);
  }
  json ts = json::array();
  for (std::size_t r = 1; r <= task.k; ++r) ts.push_back(format_iso8601(anchor + step * static_cast<std::int64_t>(r)));
  json out = {{"model", id},
              {"kind", forecast::to_string(model->kind)},
              {"provenance", forecast::to_string(model->provenance)},
              {"timescale", forecast::to_string(task.timescale)},
              {"step_ms", step.count()},
              {"at", format_iso8601(anchor)},
              {"parameters", task.parameters},
              {"timestamps", std::move(ts)},
              {"forecast", std::move(per_param)},
              {"norm_version", scaled ? norm_version(model->norm) : std::string("raw")}};
  return out.dump();
}

std::string TwinService::time_get() const { return state_json(time_.state()).dump(); }

std::string TwinService::time_put(std::string_view body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    throw MalformedPayload(std::string("body is not JSON: ") + e.what());
  }
  if (!doc.is_object()) throw MalformedPayload("time update must be an object");
  TimeUpdate u;
  for (const auto& [key, value] : doc.items()) {
    if (key == "system_time" || key == "simulation_time") {
      if (!value.is_string()) throw MalformedPayload(key + " must be an ISO-8601 string");
      Instant t = parse_instant(value.get<std::string>(), key.c_str());
      (key == "system_time" ? u.system_time : u.simulation_time) = t;
    } else if (key == "simulation_speed" || key == "animation_speed") {
      if (!value.is_number()) throw MalformedPayload(key + " must be a number");
      (key == "simulation_speed" ? u.simulation_speed : u.animation_speed) = value.get<double>();
    } else if (key == "real_time") {
      throw MalformedPayload("real_time is read-only");
    } else {
      throw MalformedPayload("unknown time field '" + key + "'");
    }
  }
  return state_json(time_.update(u)).dump();
}

std::string TwinService::windfield(const Query& q) const {
  if (!weather_) throw NoFieldAvailable("no weather source configured");
  weather::BBox bbox;
  try {
    bbox = weather::parse_bbox(require(q, "bbox"));
  } catch (const ParseError& e) {
    throw MalformedPayload(e.what());
  } catch (const ShapeError& e) {
    throw MalformedPayload(e.what());
  }
  int hours = config_.default_weather_hours;
  if (const auto* h = find(q, "hours"); h && !h->empty()) {
    long long v = 0;
    try {
      v = parse_int(*h);
    } catch (const ParseError& e) {
      throw MalformedPayload(std::string("hours: ") + e.what());
    }
    if (v < 0 || v > 24 * 31) throw MalformedPayload("hours must lie in 0..744");
    hours = static_cast<int>(v);
  }
  weather::FetchResult res;
  try {
    res = weather_->fetch(bbox, hours);
  } catch (const NetworkError& e) {
    throw NoFieldAvailable(e.what());
  }
  const auto& f = *res.field;
  if (!f.bbox.intersects(bbox)) {
    throw NoFieldAvailable("requested bbox " + weather::format_bbox(bbox) + " lies outside the field " +
                           weather::format_bbox(f.bbox));
  }
  json times = json::array();
  for (auto t : f.times) times.push_back(format_iso8601(t));
  json out = {{"stale", res.stale},
              {"source", f.source},
              {"issued_at", format_iso8601(f.issued_at)},
              {"bbox",
               {{"lon_min", f.bbox.lon_min},
                {"lon_max", f.bbox.lon_max},
                {"lat_min", f.bbox.lat_min},
                {"lat_max", f.bbox.lat_max}}},
              {"nx", f.nx},
              {"ny", f.ny},
              {"times", std::move(times)},
              {"u", f.u},
              {"v", f.v}};
  return out.dump();
}

std::string TwinService::catalog() const {
  const auto& cat = store_.catalog();
  json nodes = json::array();
  for (const auto& n : cat.nodes()) nodes.push_back({{"code", n.code}, {"description", n.description}});
  json params = json::array();
  for (const auto& p : cat.parameters()) {
    json j = {{"id", p.id},
              {"node", p.node},
              {"unit", p.unit},
              {"kind", p.kind == ParamKind::status ? "status" : "continuous"},
              {"lower_bound", p.lower_bound},
              {"upper_bound", p.upper_bound},
              {"forecastable", p.forecastable}};
    if (p.kind == ParamKind::status) j["codes"] = p.codes;
    params.push_back(std::move(j));
  }
  json out = {{"nodes", std::move(nodes)},
              {"parameters", std::move(params)},
              {"forecast_set", cat.forecast_set()},
              {"models", model_ids()}};
  return out.dump();
}

std::vector<std::string> TwinService::stream_parameters(const Query& q) const {
  std::vector<std::string> params;
  if (const auto* p = find(q, "params")) params = parse_list(*p);
  if (params.empty()) params = store_.catalog().forecast_set();
  for (const auto& p : params) store_.catalog().index_of(p);
  return params;
}

std::string TwinService::frame_json(const StreamFrame& f) {
  json values = json::array();
  for (double v : f.values) values.push_back(number_or_null(v));
  json padded = json::array();
  for (auto p : f.padded) padded.push_back(p != 0);
  json out = {{"seq", f.sequence},
              {"ts", format_iso8601(f.timestamp)},
              {"parameters", f.parameters},
              {"values", std::move(values)},
              {"padded", std::move(padded)}};
  return out.dump();
}

void TwinService::tick() { hub_.publish_through(time_.system_time()); }

int http_status(const Error& e) {
  const std::string& c = e.code();
  if (c == "Unauthorized") return 401;
  if (c == "UnknownModel" || c == "NoFieldAvailable") return 404;
  if (c == "FutureRange" || c == "InvalidTime" || c == "InsufficientHistory") return 422;
  if (c == "MalformedPayload" || c == "InvalidRange" || c == "UnknownParameter" || c == "ParseError" ||
      c == "ConfigError") {
    return 400;
  }
  return 500;
}

std::string error_json(const Error& e) {
  json out = {{"error", e.code()}, {"detail", e.what()}};
  return out.dump();
}

std::string norm_version(const NormalizationStats& stats) {
  // FNV-1a over ids and the exact bit patterns of the bounds.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t x) {
    for (int i = 0; i < 8; ++i) {
      h ^= (x >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (std::size_t i = 0; i < stats.size(); ++i) {
    for (char ch : stats.parameters[i]) mix(static_cast<unsigned char>(ch));
    mix(std::bit_cast<std::uint64_t>(stats.min[i]));
    mix(std::bit_cast<std::uint64_t>(stats.delta[i]));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace twin::server
