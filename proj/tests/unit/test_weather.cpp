// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "twin/errors.hpp"
#include "twin/text.hpp"
#include "twin/weather.hpp"
#include "unit/support.hpp"

using namespace twin;
using namespace twin::weather;

namespace {

std::string fixture_path() { return std::string(TWIN_SOURCE_DIR) + "/data/fixtures/windfield_karmoy.grid"; }

WindField fixture() { return parse_grid(read_file(fixture_path())); }

double node_lon(const WindField& f, std::size_t i) {
  return f.bbox.lon_min + static_cast<double>(i) * (f.bbox.lon_max - f.bbox.lon_min) / static_cast<double>(f.nx - 1);
}
double node_lat(const WindField& f, std::size_t j) {
  return f.bbox.lat_min + static_cast<double>(j) * (f.bbox.lat_max - f.bbox.lat_min) / static_cast<double>(f.ny - 1);
}

// Manual clock for cache expiry.
struct FakeClock {
  std::shared_ptr<Instant> now = std::make_shared<Instant>(testing::t0());
  Clock clock() const {
    auto n = now;
    return [n] { return *n; };
  }
};

}  // namespace

TEST_CASE("bbox parsing and geometry") {
  BBox b = parse_bbox("4.5,58.9,5.5,59.5");
  CHECK(b.lon_min == 4.5);
  CHECK(b.lat_min == 58.9);
  CHECK(b.lon_max == 5.5);
  CHECK(b.lat_max == 59.5);
  CHECK(parse_bbox(format_bbox(b)) == b);
  CHECK(b.contains(5.0, 59.0));
  CHECK(b.contains(4.5, 59.5));
  CHECK_FALSE(b.contains(4.4, 59.0));
  CHECK(b.intersects(parse_bbox("5.4,59.4,6,60")));
  CHECK_FALSE(b.intersects(parse_bbox("6,60,7,61")));
  CHECK_THROWS_AS(parse_bbox("1,2,3"), ParseError);
  CHECK_THROWS_AS(parse_bbox("5,59,4,60"), ShapeError);
}

TEST_CASE("fixture grid parses and round trips bit exactly") {
  WindField f = fixture();
  CHECK(f.nx == 5);
  CHECK(f.ny == 4);
  CHECK(f.times.size() == 4);
  CHECK(f.u.size() == 80);
  CHECK(f.source == "fixture-karmoy");
  CHECK(f.issued_at == parse_iso8601("2022-01-31T22:00:00Z"));
  CHECK(f.u[f.index(0, 1, 0)] == 6.4);
  std::string text = write_grid(f);
  WindField again = parse_grid(text);
  CHECK(again == f);
  CHECK(write_grid(again) == text);

  WindField odd = f;
  odd.u[3] = 1.0 / 3.0;
  odd.v[7] = -2.0e-17;
  CHECK(parse_grid(write_grid(odd)) == odd);
}

TEST_CASE("grid parser rejects malformed payloads") {
  std::string good = write_grid(fixture());
  CHECK_THROWS_AS(parse_grid("format other/1\n"), ParseError);
  CHECK_THROWS_AS(parse_grid(""), ParseError);
  std::string truncated = good.substr(0, good.size() / 2);
  CHECK_THROWS(parse_grid(truncated));
  std::string bad_number = good;
  bad_number.replace(bad_number.find("6.36"), 4, "x.yz");
  CHECK_THROWS_AS(parse_grid(bad_number), ParseError);
}

TEST_CASE("sampling is exact at nodes and bilinear between them") {
  WindField f = fixture();
  for (std::size_t t = 0; t < f.times.size(); ++t)
    for (std::size_t j = 0; j < f.ny; ++j)
      for (std::size_t i = 0; i < f.nx; ++i) {
        auto w = sample(f, node_lon(f, i), node_lat(f, j), f.times[t]);
        CHECK(w.u == f.u[f.index(t, j, i)]);
        CHECK(w.v == f.v[f.index(t, j, i)]);
      }

  // Cell centre is the mean of its four corners.
  double lon = 0.5 * (node_lon(f, 1) + node_lon(f, 2));
  double lat = 0.5 * (node_lat(f, 2) + node_lat(f, 3));
  auto w = sample(f, lon, lat, f.times[0]);
  double want = 0.25 * (f.u[f.index(0, 2, 1)] + f.u[f.index(0, 2, 2)] + f.u[f.index(0, 3, 1)] + f.u[f.index(0, 3, 2)]);
  CHECK(w.u == doctest::Approx(want).epsilon(1e-12));

  // Halfway in time is the mean of the two frames.
  Instant mid = f.times[1] + (f.times[2] - f.times[1]) / 2;
  auto tm = sample(f, node_lon(f, 4), node_lat(f, 0), mid);
  CHECK(tm.v == doctest::Approx(0.5 * (f.v[f.index(1, 0, 4)] + f.v[f.index(2, 0, 4)])).epsilon(1e-12));

  CHECK_THROWS_AS(sample(f, 4.4, 59.0, f.times[0]), OutOfDomain);
  CHECK_THROWS_AS(sample(f, 5.0, 59.0, f.times[0] - seconds(1)), OutOfDomain);
  CHECK_THROWS_AS(sample(f, 5.0, 59.0, f.times.back() + seconds(1)), OutOfDomain);
}

TEST_CASE("speed and meteorological direction") {
  auto from_south = speed_direction(0.0, 5.0);
  CHECK(from_south.speed == 5.0);
  CHECK(from_south.direction == doctest::Approx(180.0));
  CHECK(speed_direction(-3.0, 0.0).direction == doctest::Approx(90.0));  // from the east
  CHECK(speed_direction(0.0, -2.0).direction == doctest::Approx(0.0));   // from the north
  CHECK(speed_direction(4.0, 0.0).direction == doctest::Approx(270.0));  // from the west
  auto sw = speed_direction(1.0, 1.0);
  CHECK(sw.direction == doctest::Approx(225.0));
  CHECK(sw.speed == doctest::Approx(std::sqrt(2.0)));
  CHECK(speed_direction(0.0, 0.0).calm);
  CHECK_FALSE(sw.calm);
}

TEST_CASE("crop keeps forecast times within the horizon") {
  WindField f = fixture();
  CHECK(crop_hours(f, 24).times.size() == 4);
  CHECK(crop_hours(f, 3).times.size() == 2);
  CHECK(crop_hours(f, 0).times.size() == 1);
  CHECK(crop_hours(f, 3).u.size() == 40);
}

TEST_CASE("endpoint validation") {
  ForecastEndpoint e;
  e.url = "https://example.org/wind";
  CHECK_THROWS_AS(e.validate(), ConfigError);
  e.url = "";
  CHECK_THROWS_AS(e.validate(), ConfigError);
  e.url = "http://localhost:1/wind";
  CHECK_NOTHROW(e.validate());
}

TEST_CASE("client caches within the refresh interval and serves stale on failure") {
  std::string payload = read_file(fixture_path());
  bool fail = false;
  int calls = 0;
  Transport transport = [&](const std::string&, const BBox&, int, Duration) {
    ++calls;
    if (fail) throw NetworkError("unreachable");
    return payload;
  };
  FakeClock clock;
  ForecastEndpoint ep;
  ep.url = "fixture";
  ep.refresh_interval = seconds(600);
  ep.retries = 2;
  WeatherClient client(ep, transport, clock.clock());
  BBox box = parse_bbox("4.5,58.9,5.5,59.5");

  auto first = client.fetch(box, 24);
  CHECK_FALSE(first.stale);
  CHECK_FALSE(first.from_cache);
  CHECK(*first.field == parse_grid(payload));
  CHECK(calls == 1);

  *clock.now += seconds(300);
  auto cached = client.fetch(box, 24);
  CHECK(cached.from_cache);
  CHECK(calls == 1);

  *clock.now += seconds(400);
  fail = true;
  auto stale = client.fetch(box, 24);
  CHECK(stale.stale);
  CHECK(*stale.field == *first.field);
  CHECK(calls == 4);  // one attempt plus two retries
  CHECK(client.requests_made() == 4);

  // Another key has nothing to fall back on.
  CHECK_THROWS_AS(client.fetch(box, 6), NetworkError);

  fail = false;
  auto fresh = client.fetch(box, 24);
  CHECK_FALSE(fresh.stale);
  CHECK_FALSE(fresh.from_cache);
}

TEST_CASE("a malformed refresh leaves the cache untouched") {
  std::string payload = read_file(fixture_path());
  std::string reply = payload;
  Transport transport = [&](const std::string&, const BBox&, int, Duration) -> std::string {
    if (reply.empty()) throw NetworkError("down");
    return reply;
  };
  FakeClock clock;
  ForecastEndpoint ep;
  ep.url = "fixture";
  ep.refresh_interval = seconds(60);
  WeatherClient client(ep, transport, clock.clock());
  BBox box = parse_bbox("4.5,58.9,5.5,59.5");
  auto good = client.fetch(box, 24);

  *clock.now += seconds(120);
  reply = "format twin-wind-grid/1\nbbox garbage\n";
  CHECK_THROWS_AS(client.fetch(box, 24), ParseError);

  // The earlier good field is still what a failing refresh falls back on.
  reply = "";
  auto fallback = client.fetch(box, 24);
  CHECK(fallback.stale);
  CHECK(*fallback.field == *good.field);
}

TEST_CASE("default transport reads fixture files") {
  auto t = default_transport();
  BBox box = parse_bbox("4.5,58.9,5.5,59.5");
  CHECK(parse_grid(t(fixture_path(), box, 24, seconds(1))) == fixture());
  CHECK(parse_grid(t("file://" + fixture_path(), box, 24, seconds(1))) == fixture());
  CHECK_THROWS_AS(t("/no/such/file.grid", box, 24, seconds(1)), NetworkError);
  CHECK_THROWS_AS(t("http://127.0.0.1:1/wind", box, 24, seconds(1)), NetworkError);
}
