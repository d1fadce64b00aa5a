// SPDX-License-Identifier: Apache-2.0

#include "twin/weather.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <httplib.h>

#include "twin/errors.hpp"
#include "twin/text.hpp"

namespace twin::weather {

namespace {

constexpr std::string_view kFormat = "twin-wind-grid/1";

// Fractional grid coordinate, snapped onto a node when rounding noise is all
// that separates it from one so node queries return stored values exactly.
double grid_coordinate(double x, double lo, double hi, std::size_t n) {
  double f = (x - lo) / (hi - lo) * static_cast<double>(n - 1);
  double r = std::round(f);
  if (std::abs(f - r) < 1e-9) f = r;
  return std::clamp(f, 0.0, static_cast<double>(n - 1));
}

void cell(double f, std::size_t n, std::size_t& i0, double& w) {
  auto i = static_cast<std::size_t>(std::floor(f));
  if (i >= n - 1) i = n - 2;
  i0 = i;
  w = f - static_cast<double>(i);
}

bool is_file_url(const std::string& url) { return url.rfind("http://", 0) != 0 && url.rfind("https://", 0) != 0; }

std::string strip_file_scheme(const std::string& url) {
  return url.rfind("file://", 0) == 0 ? url.substr(7) : url;
}

}  // namespace

bool BBox::contains(double lon, double lat) const {
  return lon >= lon_min && lon <= lon_max && lat >= lat_min && lat <= lat_max;
}

bool BBox::intersects(const BBox& o) const {
  return lon_min <= o.lon_max && o.lon_min <= lon_max && lat_min <= o.lat_max && o.lat_min <= lat_max;
}

void BBox::validate() const {
  if (!(std::isfinite(lon_min) && std::isfinite(lon_max) && std::isfinite(lat_min) && std::isfinite(lat_max))) {
    throw ShapeError("bbox corners must be finite");
  }
  if (!(lon_min < lon_max && lat_min < lat_max)) throw ShapeError("bbox must have min < max on both axes");
}

BBox parse_bbox(std::string_view text) {
  auto parts = split(text, ',');
  if (parts.size() != 4) throw ParseError("bbox must be lon_min,lat_min,lon_max,lat_max");
  BBox b{parse_double(parts[0]), parse_double(parts[2]), parse_double(parts[1]), parse_double(parts[3])};
  b.validate();
  return b;
}

std::string format_bbox(const BBox& b) {
  return format_double(b.lon_min) + "," + format_double(b.lat_min) + "," + format_double(b.lon_max) + "," +
         format_double(b.lat_max);
}

void WindField::validate() const {
  bbox.validate();
  if (nx < 2 || ny < 2) throw ShapeError("grid needs at least 2 x 2 nodes");
  if (times.empty()) throw ShapeError("grid needs at least one forecast time");
  for (std::size_t t = 1; t < times.size(); ++t) {
    if (!(times[t - 1] < times[t])) throw ShapeError("forecast times must be strictly increasing");
  }
  std::size_t expected = times.size() * nx * ny;
  if (u.size() != expected || v.size() != expected) {
    throw ShapeError("expected " + std::to_string(expected) + " values per component, found u=" +
                     std::to_string(u.size()) + " v=" + std::to_string(v.size()));
  }
  for (std::size_t n = 0; n < expected; ++n) {
    if (!std::isfinite(u[n]) || !std::isfinite(v[n])) throw ShapeError("wind components must be finite");
  }
}

std::string write_grid(const WindField& f) {
  f.validate();
  std::string out;
  out += "format ";
  out += kFormat;
  out += "\nbbox " + format_double(f.bbox.lon_min) + " " + format_double(f.bbox.lon_max) + " " +
         format_double(f.bbox.lat_min) + " " + format_double(f.bbox.lat_max) + "\n";
  out += "nx " + std::to_string(f.nx) + "\nny " + std::to_string(f.ny) + "\ntimes";
  for (auto t : f.times) out += " " + format_iso8601(t);
  out += "\nissued_at " + format_iso8601(f.issued_at) + "\nsource " + (f.source.empty() ? "-" : f.source) + "\n";
  auto block = [&](const char* name, const std::vector<double>& a, std::size_t t) {
    out += std::string(name) + " " + std::to_string(t) + "\n";
    for (std::size_t j = 0; j < f.ny; ++j) {
      for (std::size_t i = 0; i < f.nx; ++i) {
        if (i) out += ' ';
        out += format_double(a[f.index(t, j, i)]);
      }
      out += '\n';
    }
  };
  for (std::size_t t = 0; t < f.times.size(); ++t) {
    block("u", f.u, t);
    block("v", f.v, t);
  }
  return out;
}

WindField parse_grid(std::string_view text) {
  std::vector<std::string_view> lines;
  for (auto line : split(text, '\n')) {
    if (line.empty() || line.front() == '#') continue;
    lines.push_back(line);
  }
  WindField f;
  std::size_t pos = 0;
  auto next = [&](std::string_view key) {
    if (pos >= lines.size()) throw ParseError("grid payload ends before '" + std::string(key) + "'");
    auto words = split_ws(lines[pos]);
    if (words.empty() || words[0] != key) {
      throw ParseError("grid line " + std::to_string(pos + 1) + ": expected '" + std::string(key) + "'");
    }
    ++pos;
    return std::vector<std::string_view>(words.begin() + 1, words.end());
  };
  auto fmt = next("format");
  if (fmt.size() != 1 || fmt[0] != kFormat) throw ParseError("unsupported grid format");
  auto bb = next("bbox");
  if (bb.size() != 4) throw ParseError("bbox needs 4 numbers");
  f.bbox = {parse_double(bb[0]), parse_double(bb[1]), parse_double(bb[2]), parse_double(bb[3])};
  auto nx = next("nx");
  auto ny = next("ny");
  if (nx.size() != 1 || ny.size() != 1) throw ParseError("nx and ny take one integer each");
  long long nxv = parse_int(nx[0]);
  long long nyv = parse_int(ny[0]);
  if (nxv < 2 || nyv < 2 || nxv > 100000 || nyv > 100000) throw ShapeError("grid needs 2..100000 nodes per axis");
  f.nx = static_cast<std::size_t>(nxv);
  f.ny = static_cast<std::size_t>(nyv);
  for (auto t : next("times")) f.times.push_back(parse_iso8601(t));
  auto issued = next("issued_at");
  if (issued.size() != 1) throw ParseError("issued_at takes one instant");
  f.issued_at = parse_iso8601(issued[0]);
  auto src = next("source");
  f.source = src.size() == 1 && src[0] != "-" ? std::string(src[0]) : std::string();
  if (f.times.empty()) throw ShapeError("grid needs at least one forecast time");

  std::size_t plane = f.nx * f.ny;
  f.u.assign(f.times.size() * plane, 0.0);
  f.v.assign(f.times.size() * plane, 0.0);
  auto read_block = [&](const char* name, std::vector<double>& a, std::size_t t) {
    auto hdr = next(name);
    if (hdr.size() != 1 || parse_int(hdr[0]) != static_cast<long long>(t)) {
      throw ParseError(std::string(name) + " block out of order at time " + std::to_string(t));
    }
    for (std::size_t j = 0; j < f.ny; ++j) {
      if (pos >= lines.size()) throw ShapeError("grid payload ends inside a " + std::string(name) + " block");
      auto row = split_ws(lines[pos++]);
      if (row.size() != f.nx) {
        throw ShapeError("row " + std::to_string(j) + " of " + name + " " + std::to_string(t) + " has " +
                         std::to_string(row.size()) + " values, expected " + std::to_string(f.nx));
      }
      for (std::size_t i = 0; i < f.nx; ++i) a[f.index(t, j, i)] = parse_double(row[i]);
    }
  };
  for (std::size_t t = 0; t < f.times.size(); ++t) {
    read_block("u", f.u, t);
    read_block("v", f.v, t);
  }
  if (pos != lines.size()) throw ShapeError("unexpected trailing lines in grid payload");
  f.validate();
  return f;
}

WindVector sample(const WindField& f, double lon, double lat, Instant at) {
  if (!f.bbox.contains(lon, lat)) {
    throw OutOfDomain("(" + format_double(lon) + ", " + format_double(lat) + ") lies outside " + format_bbox(f.bbox));
  }
  if (at < f.times.front() || at > f.times.back()) {
    throw OutOfDomain(format_iso8601(at) + " lies outside the forecast period");
  }
  std::size_t i0 = 0, j0 = 0;
  double wx = 0.0, wy = 0.0;
  cell(grid_coordinate(lon, f.bbox.lon_min, f.bbox.lon_max, f.nx), f.nx, i0, wx);
  cell(grid_coordinate(lat, f.bbox.lat_min, f.bbox.lat_max, f.ny), f.ny, j0, wy);

  std::size_t t0 = 0;
  double wt = 0.0;
  if (f.times.size() > 1) {
    auto it = std::lower_bound(f.times.begin(), f.times.end(), at);
    std::size_t s = static_cast<std::size_t>(it - f.times.begin());
    if (s == 0) {
      t0 = 0;
    } else {
      t0 = s - 1;
      auto span = static_cast<double>((f.times[s] - f.times[t0]).count());
      wt = static_cast<double>((at - f.times[t0]).count()) / span;
    }
  }

  auto plane = [&](const std::vector<double>& a, std::size_t t) {
    double s00 = a[f.index(t, j0, i0)];
    double s10 = a[f.index(t, j0, i0 + 1)];
    double s01 = a[f.index(t, j0 + 1, i0)];
    double s11 = a[f.index(t, j0 + 1, i0 + 1)];
    double south = (1.0 - wx) * s00 + wx * s10;
    double north = (1.0 - wx) * s01 + wx * s11;
    return (1.0 - wy) * south + wy * north;
  };
  auto component = [&](const std::vector<double>& a) {
    double c0 = plane(a, t0);
    if (wt == 0.0) return c0;
    return (1.0 - wt) * c0 + wt * plane(a, t0 + 1);
  };
  return {component(f.u), component(f.v)};
}

SpeedDirection speed_direction(double u, double v) {
  SpeedDirection sd;
  sd.speed = std::hypot(u, v);
  if (sd.speed == 0.0) {
    sd.calm = true;
    return sd;
  }
  double deg = std::atan2(-u, -v) * 180.0 / std::numbers::pi;
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  sd.direction = deg;
  return sd;
}

WindField crop_hours(const WindField& field, int hours) {
  if (hours < 0) throw ConfigError("hours must be non-negative");
  Instant limit = field.times.front() + seconds(3600LL * hours);
  std::size_t keep = 1;
  while (keep < field.times.size() && field.times[keep] <= limit) ++keep;
  if (keep == field.times.size()) return field;
  WindField out = field;
  std::size_t plane = field.nx * field.ny;
  out.times.resize(keep);
  out.u.resize(keep * plane);
  out.v.resize(keep * plane);
  return out;
}

void ForecastEndpoint::validate() const {
  if (url.empty()) throw ConfigError("weather endpoint url is empty");
  if (url.rfind("https://", 0) == 0) {
    throw ConfigError("https endpoints need a TLS-terminating proxy; point the client at its http side");
  }
  if (refresh_interval <= Duration::zero()) throw ConfigError("refresh interval must be positive");
  if (timeout <= Duration::zero()) throw ConfigError("timeout must be positive");
  if (retries < 0) throw ConfigError("retry budget must be non-negative");
}

Transport default_transport() {
  return [](const std::string& url, const BBox& bbox, int hours, Duration timeout) -> std::string {
    if (is_file_url(url)) {
      try {
        return read_file(strip_file_scheme(url));
      } catch (const Error& e) {
        throw NetworkError(std::string("fixture unavailable: ") + e.what());
      }
    }
    // http://host[:port][/path]
    std::size_t host_start = url.find("://") + 3;
    std::size_t slash = url.find('/', host_start);
    std::string origin = url.substr(0, slash);
    std::string path = slash == std::string::npos ? "/" : url.substr(slash);
    httplib::Client client(origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout).count();
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout).count() % 1'000'000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    httplib::Params params{{"bbox", format_bbox(bbox)}, {"hours", std::to_string(hours)}};
    auto res = client.Get(path, params, httplib::Headers{});
    if (!res) throw NetworkError(url + ": " + httplib::to_string(res.error()));
    if (res->status != 200) throw NetworkError(url + ": HTTP " + std::to_string(res->status));
    return res->body;
  };
}

WeatherClient::WeatherClient(ForecastEndpoint endpoint, Transport transport, Clock clock)
    : endpoint_(std::move(endpoint)), transport_(std::move(transport)), clock_(std::move(clock)) {
  endpoint_.validate();
}

FetchResult WeatherClient::fetch(const BBox& bbox, int hours) {
  bbox.validate();
  if (hours < 0) throw ConfigError("hours must be non-negative");
  std::string key = endpoint_.url + "|" + format_bbox(bbox) + "|" + std::to_string(hours);
  std::lock_guard lock(mutex_);
  Instant now = clock_();
  auto it = cache_.find(key);
  if (it != cache_.end() && now - it->second.fetched_at < endpoint_.refresh_interval) {
    return {it->second.field, false, true};
  }
  std::string payload;
  std::string last_error;
  bool ok = false;
  for (int attempt = 0; attempt <= endpoint_.retries && !ok; ++attempt) {
    ++requests_;
    try {
      payload = transport_(endpoint_.url, bbox, hours, endpoint_.timeout);
      ok = true;
    } catch (const NetworkError& e) {
      last_error = e.what();
    }
  }
  if (!ok) {
    if (it != cache_.end()) return {it->second.field, true, true};
    throw NetworkError("gave up after " + std::to_string(endpoint_.retries + 1) + " attempts: " + last_error);
  }
  auto field = std::make_shared<const WindField>(crop_hours(parse_grid(payload), hours));
  cache_[key] = {field, now};
  return {field, false, false};
}

std::size_t WeatherClient::requests_made() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

}  // namespace twin::weather
