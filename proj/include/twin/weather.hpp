// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "twin/time.hpp"

namespace twin::weather {

struct BBox {
  double lon_min = 0.0;
  double lon_max = 0.0;
  double lat_min = 0.0;
  double lat_max = 0.0;

  bool contains(double lon, double lat) const;
  bool intersects(const BBox& o) const;
  void validate() const;  // throws ShapeError
  bool operator==(const BBox&) const = default;
};

// "lon_min,lat_min,lon_max,lat_max" (the usual west,south,east,north order).
BBox parse_bbox(std::string_view text);
std::string format_bbox(const BBox& b);

// Gridded 10 m wind forecast. Node (i, j) sits at
//   lon = lon_min + i * (lon_max - lon_min) / (nx - 1)
//   lat = lat_min + j * (lat_max - lat_min) / (ny - 1)
// and u, v are stored [time][j][i].
struct WindField {
  BBox bbox;
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<Instant> times;
  std::vector<double> u;
  std::vector<double> v;
  Instant issued_at{};
  std::string source;

  void validate() const;  // throws ShapeError
  std::size_t index(std::size_t t, std::size_t j, std::size_t i) const { return (t * ny + j) * nx + i; }
  bool operator==(const WindField&) const = default;
};

// Text grid payload, see docs/weather_grid.md. Writer and reader round-trip
// every double exactly. parse_grid throws ParseError or ShapeError.
std::string write_grid(const WindField& field);
WindField parse_grid(std::string_view text);

struct WindVector {
  double u = 0.0;
  double v = 0.0;
};

// Bilinear in space, linear in time. Throws OutOfDomain.
WindVector sample(const WindField& field, double lon, double lat, Instant at);

struct SpeedDirection {
  double speed = 0.0;
  double direction = 0.0;  // degrees clockwise from north the wind blows FROM
  bool calm = false;
};
SpeedDirection speed_direction(double u, double v);

// Keeps only forecast times within `hours` of the first one (at least one).
WindField crop_hours(const WindField& field, int hours);

struct ForecastEndpoint {
  // http://host[:port]/path, or a fixture file path (optionally file://).
  std::string url;
  Duration refresh_interval = seconds(3600);
  Duration timeout = seconds(10);
  int retries = 2;  // extra attempts after the first failure

  void validate() const;  // throws ConfigError
};

// Returns the raw payload for `url` with query parameters bbox and hours.
// Must throw NetworkError on any transport failure.
using Transport = std::function<std::string(const std::string& url, const BBox& bbox, int hours, Duration timeout)>;
Transport default_transport();

struct FetchResult {
  std::shared_ptr<const WindField> field;
  bool stale = false;
  bool from_cache = false;
};

// Caches one field per (endpoint, bbox). Within the refresh interval no
// request is made; after it, a failed refresh serves the cached field with
// stale = true. Safe for concurrent callers.
class WeatherClient {
 public:
  explicit WeatherClient(ForecastEndpoint endpoint, Transport transport = default_transport(),
                         Clock clock = wall_clock());

  // Throws NetworkError (no cache to fall back on), ParseError, ShapeError.
  FetchResult fetch(const BBox& bbox, int hours);

  std::size_t requests_made() const;
  const ForecastEndpoint& endpoint() const { return endpoint_; }

 private:
  struct Entry {
    std::shared_ptr<const WindField> field;
    Instant fetched_at{};
  };

  ForecastEndpoint endpoint_;
  Transport transport_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::map<std::string, Entry> cache_;
  std::size_t requests_ = 0;
};

}  // namespace twin::weather
