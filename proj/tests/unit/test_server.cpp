// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <httplib.h>

#include <cmath>
#include <json.hpp>
#include <limits>
#include <thread>

#include "twin/errors.hpp"
#include "twin/forecast/model.hpp"
#include "twin/record_io.hpp"
#include "twin/server/http_server.hpp"
#include "twin/server/replay.hpp"
#include "twin/server/service.hpp"
#include "twin/text.hpp"
#include "unit/support.hpp"

using namespace twin;
using namespace twin::server;
using nlohmann::json;
using testing::at_s;
using testing::rec;

namespace {

struct ManualClock {
  std::shared_ptr<Instant> now = std::make_shared<Instant>(at_s(1000));
  Clock clock() const {
    auto n = now;
    return [n] { return *n; };
  }
};

const std::string kWind = "WMET.WindSpeed";
const std::string kHeave = "WTOW.Heave";

std::vector<TelemetryRecord> ramp(int from, int to) {
  std::vector<TelemetryRecord> out;
  for (int s = from; s <= to; ++s) {
    out.push_back(rec(s, kWind, 5.0 + 0.01 * s));
    if (s % 2 == 0) out.push_back(rec(s, kHeave, 0.001 * s));
  }
  return out;
}

forecast::ForecastModel persistence_model(std::size_t m = 5, std::size_t k = 3) {
  forecast::ForecastTask t;
  t.m = m;
  t.k = k;
  t.parameters = {kWind, kHeave};
  return forecast::make_persistence(t);
}

}  // namespace

TEST_CASE("time keeper runs system and simulation time from the clock") {
  ManualClock clock;
  TimeKeeper tk(clock.clock());
  auto s = tk.state();
  CHECK(s.real_time == at_s(1000));
  CHECK(s.system_time == at_s(1000));
  CHECK(s.simulation_time == at_s(1000));

  TimeUpdate u;
  u.system_time = at_s(400);
  u.simulation_speed = 4.0;
  tk.update(u);
  *clock.now += seconds(10);
  s = tk.state();
  CHECK(s.real_time == at_s(1010));
  CHECK(s.system_time == at_s(410));
  CHECK(s.simulation_time == at_s(1040));
  CHECK(s.simulation_speed == 4.0);

  // Speed change keeps simulation time continuous.
  TimeUpdate slow;
  slow.simulation_speed = 0.5;
  tk.update(slow);
  *clock.now += seconds(10);
  CHECK(tk.state().simulation_time == at_s(1045));

  TimeUpdate sim;
  sim.simulation_time = at_s(0);
  tk.update(sim);
  CHECK(tk.state().simulation_time == at_s(0));
}

TEST_CASE("time keeper updates are all or nothing") {
  ManualClock clock;
  TimeKeeper tk(clock.clock());
  auto before = tk.state();
  TimeUpdate bad;
  bad.animation_speed = 3.0;
  bad.system_time = at_s(2000);  // ahead of real time
  CHECK_THROWS_AS(tk.update(bad), InvalidTime);
  CHECK(tk.state() == before);
  TimeUpdate nan;
  nan.simulation_speed = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(tk.update(nan), InvalidTime);
  CHECK(tk.state() == before);
}

TEST_CASE("hub publishes each grid instant once with resampled values") {
  TimeseriesStore store;
  store.ingest_batch(ramp(0, 20));
  StreamHub hub(store);
  auto sub = hub.subscribe({kWind, kHeave});
  CHECK(hub.subscriber_count() == 1);
  CHECK_THROWS_AS(hub.subscribe({"X.Y"}), UnknownParameter);

  hub.publish_through(at_s(5) + Duration{300});
  auto first = sub->try_next();
  REQUIRE(first);
  CHECK(first->sequence == 1);
  CHECK(first->timestamp == at_s(5));
  CHECK(first->values[0] == 5.05);
  CHECK(first->values[1] == 0.004);
  CHECK(first->padded[1] == 1);
  CHECK_FALSE(sub->try_next());

  hub.publish_through(at_s(8));
  hub.publish_through(at_s(8));  // nothing new
  std::vector<Instant> seen;
  while (auto f = sub->try_next()) seen.push_back(f->timestamp);
  CHECK(seen == std::vector<Instant>{at_s(6), at_s(7), at_s(8)});
  CHECK(hub.cursor() == at_s(8));

  // Frames equal store resampling for the same instant.
  hub.publish_through(at_s(9));
  auto f9 = sub->try_next();
  REQUIRE(f9);
  auto fs9 = store.resample(at_s(9), at_s(9), {kWind, kHeave});
  CHECK(f9->values == std::vector<double>(fs9.values.flat().begin(), fs9.values.flat().end()));
  CHECK(f9->padded == fs9.padded);

  hub.unsubscribe(sub);
  CHECK(hub.subscriber_count() == 0);
}

TEST_CASE("a slow subscriber overflows and is closed") {
  TimeseriesStore store;
  store.ingest_batch(ramp(0, 50));
  StreamHub hub(store, seconds(1), 4);
  auto slow = hub.subscribe({kWind});
  auto fast = hub.subscribe({kWind});
  hub.set_cursor(at_s(0));
  hub.publish_through(at_s(3));
  while (fast->try_next()) {
  }
  hub.publish_through(at_s(6));
  CHECK(slow->closed());
  CHECK(slow->close_reason().rfind("SubscriberOverflow", 0) == 0);
  CHECK(hub.subscriber_count() == 1);
  int drained = 0;
  server::StreamFrame f;
  while (slow->next(f, Duration{1}) == Subscription::Status::frame) ++drained;
  CHECK(drained == 4);
  CHECK(slow->next(f, Duration{1}) == Subscription::Status::closed);
  CHECK(fast->next(f, Duration{1}) == Subscription::Status::frame);
}

TEST_CASE("frames compare missing values bitwise") {
  StreamFrame a;
  a.values = {std::nan(""), 1.0};
  StreamFrame b = a;
  CHECK(a == b);
  b.values[1] = 1.0000000000000002;
  CHECK_FALSE(a == b);
  auto j = json::parse(TwinService::frame_json(a));
  CHECK(j["values"][0].is_null());
}

TEST_CASE("service ingest") {
  TimeseriesStore store;
  ManualClock clock;
  TwinService svc(store, ServiceConfig{.token = "s3cret"}, clock.clock());
  std::string body = R"({"records":[
    {"timestamp":"2022-02-01T00:00:01Z","parameter":"WMET.WindSpeed","value":7.5},
    {"timestamp":"2022-02-01T00:00:01Z","parameter":"WMET.WindSpeed","value":7.6},
    {"timestamp":"2022-02-01T00:00:02Z","parameter":"WMET.WindSpeed","value":-3},
    {"timestamp":"2022-02-01T00:00:02Z","parameter":"WMET.Nope","value":1,"source":"file"}]})";
  CHECK_THROWS_AS(svc.ingest("", "application/json", body), Unauthorized);
  CHECK_THROWS_AS(svc.ingest("Bearer wrong", "application/json", body), Unauthorized);
  auto rep = json::parse(svc.ingest("Bearer s3cret", "application/json", body));
  CHECK(rep["accepted"] == 1);
  CHECK(rep["deduplicated"] == 1);
  CHECK(rep["rejected_unphysical"] == 1);
  CHECK(rep["unknown_parameter"] == 1);
  CHECK(store.query(at_s(0), at_s(5), {kWind}).front().value == 7.6);

  auto text = json::parse(svc.ingest("Bearer s3cret", "text/plain; charset=utf-8",
                                     "# lines\n2022-02-01T00:00:03Z, WMET.WindSpeed, 8\n"));
  CHECK(text["accepted"] == 1);
  auto bare = json::parse(svc.ingest("Bearer s3cret", "application/json",
                                     R"([{"timestamp":"2022-02-01T00:00:04Z","parameter":"WTOW.Heave","value":0.5}])"));
  CHECK(bare["accepted"] == 1);

  CHECK_THROWS_AS(svc.ingest("Bearer s3cret", "application/json", "{"), MalformedPayload);
  CHECK_THROWS_AS(svc.ingest("Bearer s3cret", "application/json", R"({"rows":[]})"), MalformedPayload);
  CHECK_THROWS_AS(svc.ingest("Bearer s3cret", "application/json", R"([{"timestamp":"x","parameter":"a","value":1}])"),
                  MalformedPayload);
  CHECK_THROWS_AS(svc.ingest("Bearer s3cret", "application/json", R"([{"parameter":"a","value":1}])"),
                  MalformedPayload);
  CHECK_THROWS_AS(svc.ingest("Bearer s3cret", "text/plain", "not a record\n"), MalformedPayload);
}

TEST_CASE("service historic") {
  TimeseriesStore store;
  store.ingest_batch(ramp(0, 100));
  ManualClock clock;
  *clock.now = at_s(200);
  TwinService svc(store, {}, clock.clock());
  Query q{{"from", "2022-02-01T00:00:10Z"}, {"to", "2022-02-01T00:00:14Z"}, {"params", kWind + "," + kHeave}};
  auto j = json::parse(svc.historic(q));
  CHECK(j["step_ms"] == 1000);
  REQUIRE(j["timestamps"].size() == 5);
  CHECK(j["timestamps"][0] == "2022-02-01T00:00:10Z");
  CHECK(j["values"][1][0] == 5.11);
  CHECK(j["padded"][1][1] == true);
  CHECK(j["padded"][2][1] == false);

  q["step"] = "2s";
  CHECK(json::parse(svc.historic(q))["timestamps"].size() == 3);

  TimeUpdate u;
  u.system_time = at_s(12);
  svc.time().update(u);
  q.erase("step");
  CHECK_THROWS_AS(svc.historic(q), FutureRange);
  q["to"] = "2022-02-01T00:00:12Z";
  CHECK_NOTHROW(svc.historic(q));

  CHECK_THROWS_AS(svc.historic(Query{{"from", "x"}, {"to", "2022-02-01T00:00:12Z"}}), MalformedPayload);
  CHECK_THROWS_AS(svc.historic(Query{{"to", "2022-02-01T00:00:12Z"}}), MalformedPayload);
  CHECK_THROWS_AS(svc.historic(Query{{"from", "2022-02-01T00:00:12Z"}, {"to", "2022-02-01T00:00:11Z"}}),
                  InvalidRange);
  CHECK_THROWS_AS(svc.historic(Query{{"from", "2022-02-01T00:00:10Z"}, {"to", "2022-02-01T00:00:11Z"},
                                     {"params", "Nope.X"}}),
                  UnknownParameter);
}

TEST_CASE("service forecast") {
  TimeseriesStore store;
  store.ingest_batch(ramp(0, 100));
  ManualClock clock;
  *clock.now = at_s(50) + Duration{400};
  TwinService svc(store, {}, clock.clock());
  svc.add_model("p", persistence_model());
  CHECK_THROWS_AS(svc.forecast(Query{{"model", "none"}}), UnknownModel);

  auto j = json::parse(svc.forecast(Query{{"model", "p"}}));
  CHECK(j["at"] == "2022-02-01T00:00:50Z");
  CHECK(j["kind"] == "persistence");
  CHECK(j["provenance"] == "random-init");
  CHECK(j["norm_version"] == "raw");
  REQUIRE(j["timestamps"].size() == 3);
  CHECK(j["timestamps"][0] == "2022-02-01T00:00:51Z");
  CHECK(j["forecast"][kWind][2] == 5.5);
  CHECK(j["forecast"][kHeave][0] == 0.05);

  CHECK_THROWS_AS(svc.forecast(Query{{"model", "p"}, {"at", "2022-02-01T00:00:52Z"}}), FutureRange);
  CHECK_THROWS_AS(svc.forecast(Query{{"model", "p"}, {"at", "2022-02-01T00:00:02Z"}}), InsufficientHistory);

  // Normalisation stats round trip through the model's units.
  auto scaled = persistence_model();
  scaled.norm = store.normalization_stats(at_s(0), at_s(100), {kWind, kHeave});
  svc.add_model("s", scaled);
  auto js = json::parse(svc.forecast(Query{{"model", "s"}}));
  CHECK(js["forecast"][kWind][0].get<double>() == doctest::Approx(5.5));
  CHECK(js["norm_version"] == norm_version(scaled.norm));
  CHECK(js["norm_version"].get<std::string>().size() == 16);
}

TEST_CASE("service time and catalog") {
  TimeseriesStore store;
  ManualClock clock;
  TwinService svc(store, {}, clock.clock());
  auto t = json::parse(svc.time_get());
  CHECK(t["real_time"] == "2022-02-01T00:16:40Z");
  auto put = json::parse(svc.time_put(R"({"system_time":"2022-02-01T00:10:00Z","animation_speed":2})"));
  CHECK(put["system_time"] == "2022-02-01T00:10:00Z");
  CHECK(put["animation_speed"] == 2.0);
  CHECK_THROWS_AS(svc.time_put(R"({"system_time":"2022-02-01T01:00:00Z"})"), InvalidTime);
  CHECK_THROWS_AS(svc.time_put(R"({"real_time":"2022-02-01T00:00:00Z"})"), MalformedPayload);
  CHECK_THROWS_AS(svc.time_put(R"({"speed":1})"), MalformedPayload);
  CHECK_THROWS_AS(svc.time_put("[]"), MalformedPayload);

  svc.add_model("p", persistence_model());
  auto c = json::parse(svc.catalog());
  CHECK(c["parameters"].size() == 58);
  CHECK(c["nodes"].size() == 12);
  CHECK(c["forecast_set"].size() == 17);
  CHECK(c["models"] == json::array({"p"}));
}

TEST_CASE("service windfield") {
  TimeseriesStore store;
  ManualClock clock;
  TwinService svc(store, {}, clock.clock());
  Query q{{"bbox", "4.5,58.9,5.5,59.5"}};
  CHECK_THROWS_AS(svc.windfield(q), NoFieldAvailable);

  weather::ForecastEndpoint ep;
  ep.url = std::string(TWIN_SOURCE_DIR) + "/data/fixtures/windfield_karmoy.grid";
  svc.set_weather(std::make_shared<weather::WeatherClient>(ep, weather::default_transport(), clock.clock()));
  auto j = json::parse(svc.windfield(q));
  CHECK(j["stale"] == false);
  CHECK(j["nx"] == 5);
  CHECK(j["u"].size() == 80);
  q["hours"] = "3";
  CHECK(json::parse(svc.windfield(q))["times"].size() == 2);
  CHECK_THROWS_AS(svc.windfield(Query{{"bbox", "10,10,11,11"}}), NoFieldAvailable);
  CHECK_THROWS_AS(svc.windfield(Query{{"bbox", "nope"}}), MalformedPayload);
  CHECK_THROWS_AS(svc.windfield(Query{{"bbox", "4.5,58.9,5.5,59.5"}, {"hours", "-1"}}), MalformedPayload);

  ep.url = "/no/such.grid";
  svc.set_weather(std::make_shared<weather::WeatherClient>(ep, weather::default_transport(), clock.clock()));
  CHECK_THROWS_AS(svc.windfield(Query{{"bbox", "4.5,58.9,5.5,59.5"}}), NoFieldAvailable);
}

TEST_CASE("error mapping") {
  CHECK(http_status(Unauthorized("x")) == 401);
  CHECK(http_status(UnknownModel("x")) == 404);
  CHECK(http_status(NoFieldAvailable("x")) == 404);
  CHECK(http_status(FutureRange("x")) == 422);
  CHECK(http_status(InsufficientHistory("x")) == 422);
  CHECK(http_status(MalformedPayload("x")) == 400);
  CHECK(http_status(UnknownParameter("x")) == 400);
  CHECK(http_status(Error("Boom", "x")) == 500);
  auto j = json::parse(error_json(FutureRange("late")));
  CHECK(j["error"] == "FutureRange");
}

TEST_CASE("replay pacing never changes the frames") {
  auto records = ramp(0, 30);
  auto run = [&](double speed, std::vector<double>* sleeps) {
    TimeseriesStore store;
    ManualClock clock;
    *clock.now = at_s(100000);
    TwinService svc(store, {}, clock.clock());
    auto sub = svc.hub().subscribe({kWind, kHeave});
    ReplayOptions opt;
    opt.speed = speed;
    auto start = std::chrono::steady_clock::now();
    opt.sleep_until = [&, start](std::chrono::steady_clock::time_point t) {
      sleeps->push_back(std::chrono::duration<double>(t - start).count());
    };
    auto rep = replay(svc, records, opt);
    CHECK(rep.instants == 31);
    CHECK(rep.ingest.accepted == records.size());
    CHECK(svc.time().system_time() == at_s(30));
    std::vector<StreamFrame> frames;
    while (auto f = sub->try_next()) frames.push_back(*f);
    return frames;
  };
  std::vector<double> s1, s10;
  auto a = run(1.0, &s1);
  auto b = run(10.0, &s10);
  REQUIRE(a.size() == 31);
  CHECK(a == b);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].timestamp == at_s(static_cast<long long>(i)));
  REQUIRE(s1.size() == 30);
  CHECK(s1.back() == doctest::Approx(30.0).epsilon(0.01));
  CHECK(s10.back() == doctest::Approx(3.0).epsilon(0.01));

  TimeseriesStore store;
  TwinService svc(store);
  CHECK_THROWS_AS(replay(svc, records, ReplayOptions{.speed = 0.0}), ConfigError);
}

TEST_CASE("http routes") {
  TimeseriesStore store;
  store.ingest_batch(ramp(0, 100));
  ManualClock clock;
  *clock.now = at_s(100);
  TwinService svc(store, ServiceConfig{.token = "tok"}, clock.clock());
  svc.add_model("p", persistence_model());
  HttpServer server(svc);
  int port = server.bind("127.0.0.1", 0);
  server.start();
  httplib::Client cli("127.0.0.1", port);

  auto cat = cli.Get("/api/v1/catalog");
  REQUIRE(cat);
  CHECK(cat->status == 200);
  CHECK(cat->get_header_value("Content-Type") == "application/json");

  auto unauth = cli.Post("/api/v1/ingest", "[]", "application/json");
  REQUIRE(unauth);
  CHECK(unauth->status == 401);
  CHECK(json::parse(unauth->body)["error"] == "Unauthorized");

  httplib::Headers auth{{"Authorization", "Bearer tok"}};
  auto ok = cli.Post("/api/v1/ingest", auth, "2022-02-01T00:01:41Z, WMET.WindSpeed, 9\n", "text/plain");
  REQUIRE(ok);
  CHECK(ok->status == 200);
  CHECK(json::parse(ok->body)["accepted"] == 1);

  auto hist = cli.Get("/api/v1/historic?from=2022-02-01T00:00:10Z&to=2022-02-01T00:00:12Z&params=WMET.WindSpeed");
  REQUIRE(hist);
  CHECK(hist->status == 200);
  CHECK(hist->body == svc.historic(Query{{"from", "2022-02-01T00:00:10Z"},
                                         {"to", "2022-02-01T00:00:12Z"},
                                         {"params", kWind}}));
  auto future = cli.Get("/api/v1/historic?from=2022-02-01T00:00:10Z&to=2022-02-01T01:00:00Z");
  REQUIRE(future);
  CHECK(future->status == 422);

  auto fc = cli.Get("/api/v1/forecast?model=p");
  REQUIRE(fc);
  CHECK(fc->status == 200);
  CHECK(cli.Get("/api/v1/forecast?model=q")->status == 404);
  CHECK(cli.Get("/api/v1/windfield?bbox=4.5,58.9,5.5,59.5")->status == 404);

  auto put = cli.Put("/api/v1/time", R"({"simulation_speed":2})", "application/json");
  REQUIRE(put);
  CHECK(put->status == 200);
  CHECK(json::parse(cli.Get("/api/v1/time")->body)["simulation_speed"] == 2.0);
  CHECK(cli.Put("/api/v1/time", "{", "application/json")->status == 400);
  CHECK(cli.Get("/api/v1/stream?params=No.Such")->status == 400);

  // A second bind on the same port fails cleanly.
  TwinService other(store);
  HttpServer clash(other);
  try {
    clash.bind("127.0.0.1", port);
    FAIL("expected BindError");
  } catch (const Error& e) {
    CHECK(e.code() == "BindError");
  }
  server.stop();
}

TEST_CASE("http stream delivers frames as server-sent events") {
  TimeseriesStore store;
  store.ingest_batch(ramp(0, 100));
  ManualClock clock;
  *clock.now = at_s(100);
  TwinService svc(store, {}, clock.clock());
  HttpServer server(svc);
  int port = server.bind("127.0.0.1", 0);
  server.start();

  std::string received;
  std::thread reader([&] {
    httplib::Client cli("127.0.0.1", port);
    cli.set_read_timeout(5, 0);
    cli.Get("/api/v1/stream?params=WMET.WindSpeed", [&](const char* data, std::size_t n) {
      received.append(data, n);
      return received.find("event: error") == std::string::npos;
    });
  });
  for (int i = 0; i < 200 && svc.hub().subscriber_count() == 0; ++i) std::this_thread::sleep_for(Duration{10});
  REQUIRE(svc.hub().subscriber_count() == 1);
  svc.hub().set_cursor(at_s(9));
  svc.hub().publish_through(at_s(12));
  std::this_thread::sleep_for(Duration{300});
  server.stop();
  reader.join();

  CHECK(received.find("id: 1\nevent: frame\ndata: {") != std::string::npos);
  CHECK(received.find("\"ts\":\"2022-02-01T00:00:12Z\"") != std::string::npos);
  CHECK(received.find("id: 3\n") != std::string::npos);
  CHECK(received.find("id: 4\n") == std::string::npos);
  CHECK(received.find("event: error") != std::string::npos);
}
