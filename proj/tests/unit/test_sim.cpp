// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <map>

#include "oracles/dft.hpp"
#include "twin/errors.hpp"
#include "twin/sim.hpp"
#include "twin/store.hpp"
#include "twin/text.hpp"
#include "unit/support.hpp"

using namespace twin;

namespace {

std::map<std::string, std::size_t> count_by_node(const std::vector<TelemetryRecord>& rs) {
  std::map<std::string, std::size_t> out;
  for (const auto& r : rs) ++out[r.parameter.substr(0, r.parameter.find('.'))];
  return out;
}

std::vector<double> series_of(const std::vector<TelemetryRecord>& rs, const std::string& id) {
  std::vector<double> out;
  for (const auto& r : rs)
    if (r.parameter == id) out.push_back(r.value);
  return out;
}

}  // namespace

TEST_CASE("simulation is a pure function of seed and config") {
  SimConfig cfg;
  auto a = generate(cfg, seconds(300));
  auto b = generate(cfg, seconds(300));
  CHECK(a == b);
  cfg.seed = 43;
  CHECK(generate(cfg, seconds(300)) != a);
}

TEST_CASE("chunked simulation equals one run") {
  SimConfig cfg;
  cfg.faults.gap = 0.01;
  cfg.faults.duplicate = 0.01;
  auto whole = generate(cfg, seconds(600));
  TurbineSimulator sim(cfg);
  std::vector<TelemetryRecord> pieces;
  for (int i = 0; i < 6; ++i) {
    auto chunk = sim.advance(seconds(100));
    pieces.insert(pieces.end(), chunk.begin(), chunk.end());
  }
  CHECK(pieces == whole);
}

TEST_CASE("per-node cadence sets record counts") {
  SimConfig cfg;
  auto rs = generate(cfg, seconds(120));
  const auto& cat = Catalog::builtin();
  auto counts = count_by_node(rs);
  for (const auto& [node, cadence] : cfg.cadence_s) {
    CAPTURE(node);
    std::size_t instants = (120 + static_cast<std::size_t>(cadence) - 1) / static_cast<std::size_t>(cadence);
    CHECK(counts[node] == instants * cat.count_in(node));
  }
  for (const auto& r : rs) {
    CHECK(r.timestamp >= cfg.start);
    CHECK(r.timestamp < cfg.start + seconds(120));
    CHECK(r.source == Source::simulator);
  }
  CHECK(std::is_sorted(rs.begin(), rs.end(),
                       [](const TelemetryRecord& x, const TelemetryRecord& y) { return x.timestamp < y.timestamp; }));
}

TEST_CASE("a clean run produces only physical values") {
  SimConfig cfg;
  auto rs = generate(cfg, seconds(3600));
  TimeseriesStore store;
  auto r = store.ingest_batch(rs);
  CHECK(r.rejected_unphysical == 0);
  CHECK(r.unknown_parameter == 0);
  CHECK(r.deduplicated == 0);
  CHECK(r.accepted == rs.size());
}

TEST_CASE("fault injection shows up in the ingest report") {
  SimConfig cfg;
  cfg.faults = {0.02, 0.02, 0.01, 0.02};
  auto clean = generate(SimConfig{}, seconds(600));
  auto rs = generate(cfg, seconds(600));
  TimeseriesStore store;
  auto r = store.ingest_batch(rs);
  CHECK(r.rejected_unphysical > 0);
  CHECK(r.deduplicated > 0);
  CHECK(r.accepted < clean.size());
  bool unsorted = false;
  for (std::size_t i = 1; i < rs.size(); ++i) unsorted |= rs[i].timestamp < rs[i - 1].timestamp;
  CHECK(unsorted);
}

TEST_CASE("power curve shape") {
  SimConfig cfg;
  CHECK(power_curve(cfg, 0.0) == 0.0);
  CHECK(power_curve(cfg, cfg.cut_in) == 0.0);
  CHECK(power_curve(cfg, cfg.rated_speed) == doctest::Approx(cfg.rated_power_kw));
  CHECK(power_curve(cfg, 20.0) == doctest::Approx(cfg.rated_power_kw));
  CHECK(power_curve(cfg, 25.1) == 0.0);
  double prev = 0.0;
  for (double w = cfg.cut_in; w <= cfg.rated_speed; w += 0.25) {
    double p = power_curve(cfg, w);
    CHECK(p >= prev);
    prev = p;
  }
}

TEST_CASE("produced power follows the wind") {
  SimConfig cfg;
  auto rs = generate(cfg, seconds(1800));
  auto wind = series_of(rs, "WMET.WindSpeed");
  auto power = series_of(rs, "WTUR.ActivePower");
  double mean_w = 0.0;
  for (double w : wind) mean_w += w;
  mean_w /= static_cast<double>(wind.size());
  double mean_p = 0.0;
  for (double p : power) mean_p += p;
  mean_p /= static_cast<double>(power.size());
  CHECK(mean_p > 0.3 * power_curve(cfg, mean_w));
  CHECK(mean_p < 1.2 * cfg.rated_power_kw);
}

TEST_CASE("heave responds in the wave band") {
  SimConfig cfg;
  auto rs = generate(cfg, seconds(2048));
  auto heave = series_of(rs, "WTOW.Heave");
  REQUIRE(heave.size() == 2048);
  auto mag = oracle::dft_magnitude(heave);
  std::size_t peak = static_cast<std::size_t>(std::max_element(mag.begin() + 1, mag.end()) - mag.begin());
  double period = 2048.0 / static_cast<double>(peak);
  CHECK(period > 5.0);
  CHECK(period < 30.0);
  for (double h : heave) CHECK(std::abs(h) <= tower_motion_bound(cfg, Dof::heave));
}

TEST_CASE("scenario files") {
  testing::TempDir dir;
  std::string path = dir.file("s.conf");
  write_file(path, "seed = 7\nwind.mean = 12\nfaults.gap = 0.1\n");
  auto cfg = SimConfig::load(path);
  CHECK(cfg.seed == 7);
  CHECK(cfg.wind.mean == 12.0);
  CHECK(cfg.faults.gap == 0.1);

  write_file(path, "no.such.key = 1\n");
  CHECK_THROWS_AS(SimConfig::load(path), ConfigError);

  auto shipped = SimConfig::load(std::string(TWIN_SOURCE_DIR) + "/data/scenarios/default.conf");
  CHECK(generate(shipped, seconds(60)) == generate(SimConfig{}, seconds(60)));

  SimConfig bad;
  bad.cut_in = 30.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  SimConfig bad_cadence;
  bad_cadence.cadence_s["WMET"] = 0;
  CHECK_THROWS_AS(bad_cadence.validate(), ConfigError);
}
