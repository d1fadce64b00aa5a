// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "twin/errors.hpp"
#include "twin/forecast/model.hpp"
#include "twin/server/stream_hub.hpp"
#include "twin/server/time_keeper.hpp"
#include "twin/store.hpp"
#include "twin/weather.hpp"

namespace twin::server {

struct ServiceConfig {
  std::string token;  // bearer token for ingest; empty disables the check
  Duration stream_step = seconds(1);
  std::size_t stream_queue = 4096;
  int default_weather_hours = 24;
};

// Query string values as received; absent keys are simply missing.
using Query = std::map<std::string, std::string, std::less<>>;

// Every endpoint of the v1 API as a plain function from request text to JSON
// text, so the HTTP layer stays a thin adapter and tests can call the exact
// payload producers. Failures are thrown as twin::Error; see http_status().
class TwinService {
 public:
  TwinService(TimeseriesStore& store, ServiceConfig config = {}, Clock clock = wall_clock());

  TimeseriesStore& store() { return store_; }
  TimeKeeper& time() { return time_; }
  StreamHub& hub() { return hub_; }
  const ServiceConfig& config() const { return config_; }

  void add_model(const std::string& id, forecast::ForecastModel model);
  std::vector<std::string> model_ids() const;
  void set_weather(std::shared_ptr<weather::WeatherClient> client);

  // POST /api/v1/ingest. JSON {"records": [...]} or, with a text/plain
  // content type, record lines. Throws Unauthorized, MalformedPayload.
  std::string ingest(std::string_view authorization, std::string_view content_type, std::string_view body);
  // GET /api/v1/historic?from&to&params&step. Throws InvalidRange, FutureRange.
  std::string historic(const Query& q) const;
  // GET /api/v1/forecast?model&at. Throws UnknownModel, InsufficientHistory, FutureRange.
  std::string forecast(const Query& q) const;
  // GET and PUT /api/v1/time. Throws InvalidTime, MalformedPayload.
  std::string time_get() const;
  std::string time_put(std::string_view body);
  // GET /api/v1/windfield?bbox&hours. Throws NoFieldAvailable.
  std::string windfield(const Query& q) const;
  // GET /api/v1/catalog.
  std::string catalog() const;

  // Parameters for a stream subscription from ?params (empty: forecast set).
  std::vector<std::string> stream_parameters(const Query& q) const;
  static std::string frame_json(const StreamFrame& frame);

  // Publishes stream frames up to the current system time.
  void tick();

 private:
  TimeseriesStore& store_;
  ServiceConfig config_;
  TimeKeeper time_;
  StreamHub hub_;
  mutable std::mutex models_mutex_;
  std::map<std::string, std::shared_ptr<const forecast::ForecastModel>> models_;
  std::shared_ptr<weather::WeatherClient> weather_;
};

// HTTP status for a library error, and the JSON body {"error": code, "detail": ...}.
int http_status(const Error& e);
std::string error_json(const Error& e);

// Short stable hash of normalisation stats, reported with forecasts.
std::string norm_version(const NormalizationStats& stats);

}  // namespace twin::server
