// SPDX-License-Identifier: Apache-2.0

#include "twin/forecast/model_io.hpp"

#include <json.hpp>

#include "twin/errors.hpp"
#include "twin/text.hpp"

namespace twin::forecast {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "twin-forecast-model/1";

json stats_to_json(const NormalizationStats& s) {
  json j;
  j["parameters"] = s.parameters;
  j["min"] = s.min;
  j["max"] = s.max;
  j["delta"] = s.delta;
  std::vector<bool> c(s.constant.begin(), s.constant.end());
  j["constant"] = c;
  return j;
}

NormalizationStats stats_from_json(const json& j) {
  NormalizationStats s;
  s.parameters = j.at("parameters").get<std::vector<std::string>>();
  s.min = j.at("min").get<std::vector<double>>();
  s.max = j.at("max").get<std::vector<double>>();
  s.delta = j.at("delta").get<std::vector<double>>();
  s.constant = j.at("constant").get<std::vector<bool>>();
  std::size_t n = s.parameters.size();
  if (s.min.size() != n || s.max.size() != n || s.delta.size() != n || s.constant.size() != n) {
    throw ShapeMismatch("normalisation arrays differ in length");
  }
  for (double d : s.delta) {
    if (!(d > 0.0)) throw ShapeMismatch("normalisation delta must be positive");
  }
  return s;
}

}  // namespace

std::string serialize_model(const ForecastModel& model) {
  model.verify();
  json j;
  j["format"] = kFormat;
  j["kind"] = to_string(model.kind);
  j["task"] = {{"timescale", to_string(model.task.timescale)},
               {"m", model.task.m},
               {"k", model.task.k},
               {"parameters", model.task.parameters}};
  j["topology"] = {{"hidden", model.topology.hidden}};
  j["weights"] = model.weights;
  j["norm"] = stats_to_json(model.norm);
  j["provenance"] = to_string(model.provenance);
  j["initial_validation_nrmse"] = model.initial_validation_nrmse;
  json hist = json::array();
  for (const auto& r : model.history) {
    hist.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"validation_nrmse", r.validation_nrmse}});
  }
  j["history"] = hist;
  return j.dump() + "\n";
}

ForecastModel deserialize_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format", "") != kFormat) throw ParseError("not a forecast model file");
    ForecastModel m;
    m.kind = parse_model_kind(j.at("kind").get<std::string>());
    const auto& t = j.at("task");
    m.task.timescale = parse_timescale(t.at("timescale").get<std::string>());
    m.task.m = t.at("m").get<std::size_t>();
    m.task.k = t.at("k").get<std::size_t>();
    m.task.parameters = t.at("parameters").get<std::vector<std::string>>();
    m.topology.hidden = j.at("topology").at("hidden").get<std::vector<std::size_t>>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.norm = stats_from_json(j.at("norm"));
    m.provenance = parse_provenance(j.at("provenance").get<std::string>());
    m.initial_validation_nrmse = j.at("initial_validation_nrmse").get<double>();
    for (const auto& r : j.at("history")) {
      m.history.push_back({r.at("epoch").get<std::size_t>(), r.at("train_loss").get<double>(),
                           r.at("validation_nrmse").get<double>()});
    }
    m.verify();
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model file: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const ForecastModel& model, const std::string& path) { write_file(path, serialize_model(model)); }

ForecastModel load_model(const std::string& path) { return deserialize_model(read_file(path)); }

}  // namespace twin::forecast
