// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "twin/catalog.hpp"
#include "twin/store.hpp"
#include "twin/text.hpp"
#include "twin/time.hpp"

namespace twin {

struct WaveComponent {
  double amplitude_m = 0.0;
  double period_s = 10.0;
  double direction_rad = 0.0;
};

// Mean-reverting (Ornstein-Uhlenbeck) wind: a slow base process plus faster
// turbulence on top of it.
struct WindProcess {
  double mean = 10.0;            // m/s
  double reversion_rate = 0.002; // 1/s
  double volatility = 0.158;     // m/s per sqrt(s)
  double turbulence_std = 0.4;   // stationary std of the fast component, m/s
  double turbulence_rate = 0.3;  // 1/s
  double direction_mean = 225.0; // deg, meteorological
  double direction_std = 15.0;   // stationary std, deg
};

// Per-record fault probabilities, applied after the clean stream is produced.
struct FaultInjection {
  double gap = 0.0;        // drop the record
  double duplicate = 0.0;  // emit it twice
  double spike = 0.0;      // replace the value with an unphysical one
  double swap = 0.0;       // swap with the previous record (unsorted pair)

  bool any() const { return gap > 0 || duplicate > 0 || spike > 0 || swap > 0; }
};

enum Dof : std::size_t { surge = 0, sway, heave, roll, pitch, yaw };
inline constexpr std::size_t kDofCount = 6;

struct SimConfig {
  std::uint64_t seed = 42;
  Instant start = from_unix_ms(1643673600000);  // 2022-02-01T00:00:00Z
  double rated_power_kw = 2300.0;
  double cut_in = 4.0;
  double rated_speed = 13.0;
  double cut_out = 25.0;
  WindProcess wind;
  std::vector<WaveComponent> waves{{1.0, 10.0, 0.3}, {0.5, 7.0, 0.8}, {0.3, 14.0, -0.4}};
  // Tower response per metre of wave amplitude (m/m for translations, rad/m for rotations).
  std::array<double, kDofCount> dof_gain{20.0, 12.0, 3.0, 0.2, 0.25, 0.1};
  // Undamped natural periods (s) and damping ratio of each DOF.
  std::array<double, kDofCount> dof_natural_period{100.0, 100.0, 25.0, 30.0, 30.0, 60.0};
  double dof_damping = 0.1;
  // Thrust-driven mean offsets at rated thrust for surge and pitch.
  double surge_offset_m = 8.0;
  double pitch_offset_rad = 0.06;
  std::map<std::string, int, std::less<>> cadence_s{
      {"WMET", 2}, {"WROT", 1}, {"WYAW", 2}, {"WTOW", 1}, {"WTRM", 4}, {"WTUR", 1},
      {"WGEN", 1}, {"WCNV", 2}, {"WTRF", 3}, {"WSTR", 4}, {"WPPD", 4}, {"WAVL", 4}};
  FaultInjection faults;

  // Throws ConfigError.
  void validate(const Catalog& catalog = Catalog::builtin()) const;

  // Scenario files are "key = value" text; unknown keys are rejected.
  static SimConfig from_key_values(const KeyValues& kv);
  static SimConfig load(const std::string& path);
};

// Everything the simulator carries between steps, including the random
// engine, so step() is a pure function of (state, config, dt).
struct SimState {
  Instant time{};
  std::int64_t elapsed_ms = 0;
  std::mt19937_64 rng;

  double wind_base = 0.0;
  double wind_turbulence = 0.0;
  double wind_speed = 0.0;
  double wind_direction = 0.0;
  double direction_lowpass = 0.0;
  double air_temperature = 8.0;
  double water_temperature = 10.0;
  double ballast_depth = 20.0;

  std::vector<double> wave_phase;
  double wave_height = 0.0;
  double avg_wave_height = 0.0;

  std::array<double, 3> blade_pitch{};
  double yaw = 0.0;
  bool yawing = false;
  double rotor_rpm = 0.0;
  double generator_rpm = 0.0;
  double thrust_lowpass = 0.0;
  std::array<double, kDofCount> dof{};

  double active_power = 0.0;
  double reactive_power = 0.0;
  double power_lowpass = 0.0;  // drives the slow thermal states
  double shaft_bearing_temp = 35.0;
  double gearbox_oil_temp = 45.0;
  double generator_temp = 50.0;
  double stator_temp = 55.0;
  double transformer_oil_temp = 40.0;
  double winding_temp = 50.0;
  double grid_frequency = 50.0;
  std::array<double, 3> phase_current{};
  std::array<double, 3> phase_voltage{690.0, 690.0, 690.0};

  double availability_h = 10000.0;
  double operation_h = 8000.0;
  double energy_kwh = 1.2e7;
  double grid_fault_h = 12.0;
  double standby_h = 1500.0;
  double maintenance_h = 480.0;
};

// Steady-state power curve: 0 below cut-in and above cut-out, cubic ramp to
// rated power at rated speed, flat in between.
double power_curve(const SimConfig& config, double wind_speed);

// Largest excursion of a DOF from zero the configuration can produce.
double tower_motion_bound(const SimConfig& config, Dof dof);

SimState initial_state(const SimConfig& config);

// Measurements of the given state for every node whose cadence divides the elapsed time.
std::vector<TelemetryRecord> emit(const SimState& state, const SimConfig& config,
                                  const Catalog& catalog = Catalog::builtin());

// Advances by dt seconds (> 0) and returns the new state with its measurements.
std::pair<SimState, std::vector<TelemetryRecord>> step(SimState state, const SimConfig& config,
                                                       double dt,
                                                       const Catalog& catalog = Catalog::builtin());

// Stateful wrapper producing the record stream chunk by chunk. Concatenated
// chunks equal one generate() call over the summed duration.
class TurbineSimulator {
 public:
  explicit TurbineSimulator(SimConfig config, const Catalog& catalog = Catalog::builtin());

  // Records for the next `span` of simulated time, faults applied.
  std::vector<TelemetryRecord> advance(Duration span);

  const SimState& state() const { return state_; }
  const SimConfig& config() const { return config_; }

 private:
  void apply_faults(std::vector<TelemetryRecord>& records);

  SimConfig config_;
  const Catalog* catalog_;
  SimState state_;
  std::mt19937_64 fault_rng_;
  bool started_ = false;
  std::int64_t covered_ms_ = 0;
};

// Records covering [start, start + duration) at 1 s resolution. duration > 0.
std::vector<TelemetryRecord> generate(const SimConfig& config, Duration duration,
                                      const Catalog& catalog = Catalog::builtin());

}  // namespace twin
