// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <mutex>
#include <optional>

#include "twin/time.hpp"

namespace twin::server {

struct TimeState {
  Instant real_time{};
  Instant system_time{};      // pretended "now", never ahead of real_time
  Instant simulation_time{};  // the instant being viewed
  double simulation_speed = 1.0;
  double animation_speed = 1.0;

  bool operator==(const TimeState&) const = default;
};

// Partial update; absent fields keep their value. Applied atomically: either
// every field changes or none does.
struct TimeUpdate {
  std::optional<Instant> system_time;
  std::optional<Instant> simulation_time;
  std::optional<double> simulation_speed;
  std::optional<double> animation_speed;
};

// Both system_time and simulation_time are stored as anchors against the
// clock so reading them never needs a background thread:
//   system_time     = real_time - lag                     (runs at 1x)
//   simulation_time = sim_anchor + speed * (real - real_anchor)
class TimeKeeper {
 public:
  explicit TimeKeeper(Clock clock = wall_clock());

  TimeState state() const;
  Instant system_time() const;

  // Throws InvalidTime when system_time would pass real_time or a speed is
  // not finite. Simulation time is re-anchored so it is continuous across a
  // speed change.
  TimeState update(const TimeUpdate& u);

  const Clock& clock() const { return clock_; }

 private:
  TimeState compute(Instant real) const;

  Clock clock_;
  mutable std::mutex mutex_;
  Duration lag_{0};
  Instant sim_anchor_{};
  Instant real_anchor_{};
  double speed_ = 1.0;
  double animation_ = 1.0;
};

}  // namespace twin::server
