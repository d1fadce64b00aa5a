// SPDX-License-Identifier: Apache-2.0

#include "twin/server/time_keeper.hpp"

#include <cmath>

#include "twin/errors.hpp"

namespace twin::server {

TimeKeeper::TimeKeeper(Clock clock) : clock_(std::move(clock)) {
  Instant now = clock_();
  sim_anchor_ = now;
  real_anchor_ = now;
}

TimeState TimeKeeper::compute(Instant real) const {
  TimeState s;
  s.real_time = real;
  s.system_time = real - lag_;
  auto elapsed = static_cast<double>((real - real_anchor_).count());
  s.simulation_time = sim_anchor_ + Duration{static_cast<std::int64_t>(std::llround(speed_ * elapsed))};
  s.simulation_speed = speed_;
  s.animation_speed = animation_;
  return s;
}

TimeState TimeKeeper::state() const {
  std::lock_guard lock(mutex_);
  return compute(clock_());
}

Instant TimeKeeper::system_time() const {
  std::lock_guard lock(mutex_);
  return clock_() - lag_;
}

TimeState TimeKeeper::update(const TimeUpdate& u) {
  std::lock_guard lock(mutex_);
  Instant real = clock_();
  if (u.system_time && *u.system_time > real) {
    throw InvalidTime("system_time " + format_iso8601(*u.system_time) + " is ahead of real time " +
                      format_iso8601(real));
  }
  if (u.simulation_speed && !std::isfinite(*u.simulation_speed)) throw InvalidTime("simulation_speed must be finite");
  if (u.animation_speed && !std::isfinite(*u.animation_speed)) throw InvalidTime("animation_speed must be finite");

  TimeState now = compute(real);
  if (u.system_time) lag_ = real - *u.system_time;
  sim_anchor_ = u.simulation_time ? *u.simulation_time : now.simulation_time;
  real_anchor_ = real;
  if (u.simulation_speed) speed_ = *u.simulation_speed;
  if (u.animation_speed) animation_ = *u.animation_speed;
  return compute(real);
}

}  // namespace twin::server
