// SPDX-License-Identifier: Apache-2.0

#include "twin/server/replay.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "twin/errors.hpp"

namespace twin::server {

ReplayReport replay(TwinService& service, std::vector<TelemetryRecord> records, const ReplayOptions& options) {
  if (!(options.speed > 0.0) || !std::isfinite(options.speed)) throw ConfigError("replay speed must be positive");
  ReplayReport report;
  if (records.empty()) return report;
  std::stable_sort(records.begin(), records.end(),
                   [](const TelemetryRecord& a, const TelemetryRecord& b) { return a.timestamp < b.timestamp; });

  auto& hub = service.hub();
  Duration step = hub.step();
  Instant first = ceil_to_grid(records.front().timestamp, step);
  Instant last = ceil_to_grid(records.back().timestamp, step);
  hub.set_cursor(first - step);
  TimeUpdate start;
  start.system_time = first;
  start.simulation_time = first;
  start.simulation_speed = options.speed;
  service.time().update(start);

  auto sleep_until = options.sleep_until ? options.sleep_until
                                         : [](std::chrono::steady_clock::time_point t) { std::this_thread::sleep_until(t); };
  auto wall_start = std::chrono::steady_clock::now();
  auto per_step = std::chrono::duration<double>(std::chrono::duration<double>(step).count() / options.speed);

  std::size_t next = 0;
  std::size_t i = 0;
  for (Instant g = first; g <= last; g += step, ++i) {
    if (options.stop && options.stop->load()) break;
    if (i > 0) {
      sleep_until(wall_start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(per_step * static_cast<double>(i)));
    }
    std::size_t end = next;
    while (end < records.size() && records[end].timestamp <= g) ++end;
    if (end > next) {
      report.ingest += service.store().ingest_batch(
          std::span<const TelemetryRecord>(records.data() + next, end - next));
      next = end;
    }
    TimeUpdate now;
    now.system_time = g;
    now.simulation_time = g;
    service.time().update(now);
    hub.publish_through(g);
    ++report.instants;
  }
  return report;
}

}  // namespace twin::server
