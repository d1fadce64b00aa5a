// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <functional>
#include <vector>

#include "twin/server/service.hpp"
#include "twin/store.hpp"

namespace twin::server {

struct ReplayOptions {
  double speed = 1.0;  // recorded seconds per wall second, > 0
  // Waits until the given wall-clock deadline; swapped out in tests.
  std::function<void(std::chrono::steady_clock::time_point)> sleep_until;
  const std::atomic<bool>* stop = nullptr;
};

struct ReplayReport {
  std::size_t instants = 0;
  IngestReport ingest;
};

// Plays recorded telemetry into the service one grid instant at a time: all
// records up to the instant are ingested, system time moves to it, and the
// stream publishes it. The frames depend only on the records, so any speed
// yields the same sequence; speed only sets the wall-clock pacing.
ReplayReport replay(TwinService& service, std::vector<TelemetryRecord> records, const ReplayOptions& options);

}  // namespace twin::server
