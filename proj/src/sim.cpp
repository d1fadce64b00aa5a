// SPDX-License-Identifier: Apache-2.0

#include "twin/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "twin/errors.hpp"

namespace twin {

namespace {

constexpr double kGearRatio = 91.0;
constexpr double kRotorMinRpm = 6.0;
constexpr double kRotorMaxRpm = 16.5;
constexpr double kLineVoltage = 690.0;
constexpr double kPowerFactor = 0.95;

double gaussian(std::mt19937_64& rng, double sd) {
  if (sd <= 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, sd)(rng);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Exact discretisation of dx = rate (mean - x) dt + vol dW.
double ou_step(std::mt19937_64& rng, double x, double mean, double rate, double vol, double dt) {
  if (rate <= 0.0) return x + gaussian(rng, vol * std::sqrt(dt));
  double decay = std::exp(-rate * dt);
  double sd = vol * std::sqrt((1.0 - decay * decay) / (2.0 * rate));
  return mean + (x - mean) * decay + gaussian(rng, sd);
}

double lag(double x, double target, double tau, double dt) {
  return target + (x - target) * std::exp(-dt / tau);
}

double wrap_degrees(double d) {
  d = std::fmod(d, 360.0);
  return d < 0.0 ? d + 360.0 : d;
}

double thrust_factor(const SimConfig& c, double v) {
  if (v < c.cut_in || v > c.cut_out) return 0.0;
  if (v <= c.rated_speed) return (v / c.rated_speed) * (v / c.rated_speed);
  return c.rated_speed / v;
}

double rotor_target(const SimConfig& c, double v) {
  if (v < c.cut_in || v > c.cut_out) return 0.0;
  double frac = std::min(1.0, (v - c.cut_in) / (c.rated_speed - c.cut_in));
  return kRotorMinRpm + frac * (kRotorMaxRpm - kRotorMinRpm);
}

double pitch_target(const SimConfig& c, double v) {
  if (v > c.cut_out) return 88.0;
  if (v <= c.rated_speed) return 0.0;
  return 1.6 * (v - c.rated_speed);
}

double direction_factor(Dof d, double dir) {
  switch (d) {
    case surge:
    case pitch:
      return std::cos(dir);
    case sway:
    case roll:
    case yaw:
      return std::sin(dir);
    case heave:
      return 1.0;
  }
  return 1.0;
}

struct Response {
  double amplitude;
  double phase_lag;
};

// Steady-state response of a damped oscillator driven at the wave period.
Response dof_response(const SimConfig& c, Dof d, const WaveComponent& w) {
  double r = c.dof_natural_period[d] / w.period_s;
  double re = 1.0 - r * r;
  double im = 2.0 * c.dof_damping * r;
  double gain = 1.0 / std::sqrt(re * re + im * im);
  return {c.dof_gain[d] * w.amplitude_m * gain * direction_factor(d, w.direction_rad), std::atan2(im, re)};
}

double dof_wave_amplitude_sum(const SimConfig& c, Dof d) {
  double sum = 0.0;
  for (const auto& w : c.waves) sum += std::abs(dof_response(c, d, w).amplitude);
  return sum;
}

double dof_noise(const SimConfig& c, Dof d) { return 0.02 * dof_wave_amplitude_sum(c, d); }

double dof_offset_max(const SimConfig& c, Dof d) {
  if (d == surge) return std::abs(c.surge_offset_m);
  if (d == pitch) return std::abs(c.pitch_offset_rad);
  return 0.0;
}

double wave_amplitude_sum(const SimConfig& c) {
  double s = 0.0;
  for (const auto& w : c.waves) s += std::abs(w.amplitude_m);
  return s;
}

double elevation(const SimConfig& c, const SimState& s, double t) {
  double eta = 0.0;
  for (std::size_t i = 0; i < c.waves.size(); ++i) {
    eta += c.waves[i].amplitude_m * std::cos(2.0 * std::numbers::pi * t / c.waves[i].period_s + s.wave_phase[i]);
  }
  return eta;
}

void update_tower(const SimConfig& c, SimState& s, double t) {
  for (std::size_t d = 0; d < kDofCount; ++d) {
    auto dof = static_cast<Dof>(d);
    double x = 0.0;
    for (std::size_t i = 0; i < c.waves.size(); ++i) {
      auto resp = dof_response(c, dof, c.waves[i]);
      x += resp.amplitude *
           std::cos(2.0 * std::numbers::pi * t / c.waves[i].period_s + s.wave_phase[i] - resp.phase_lag);
    }
    double noise = dof_noise(c, dof);
    if (noise > 0.0) x += uniform(s.rng, -noise, noise);
    if (dof == surge) x += c.surge_offset_m * s.thrust_lowpass;
    if (dof == pitch) x += c.pitch_offset_rad * s.thrust_lowpass;
    s.dof[d] = x;
  }
}

void update_electrical(SimState& s) {
  double current = s.active_power * 1000.0 / (std::sqrt(3.0) * kLineVoltage * kPowerFactor);
  for (std::size_t ph = 0; ph < 3; ++ph) {
    s.phase_current[ph] = std::clamp(current * (1.0 + 0.005 * static_cast<double>(ph) - 0.005) +
                                         gaussian(s.rng, 0.5),
                                     0.0, 4900.0);
    s.phase_voltage[ph] = std::clamp(kLineVoltage + gaussian(s.rng, 1.5), 600.0, 780.0);
  }
  s.grid_frequency = 50.0 + gaussian(s.rng, 0.01);
}

int operation_state(const SimConfig& c, double v) {
  if (v < c.cut_in) return 0;
  if (v > c.cut_out) return 3;
  return v >= c.rated_speed ? 2 : 1;
}

void add(std::vector<TelemetryRecord>& out, const SimState& s, const char* id, double value) {
  out.push_back({s.time, id, value, Source::simulator});
}

}  // namespace

double power_curve(const SimConfig& c, double v) {
  if (v < c.cut_in || v > c.cut_out) return 0.0;
  if (v >= c.rated_speed) return c.rated_power_kw;
  double ci3 = c.cut_in * c.cut_in * c.cut_in;
  double rs3 = c.rated_speed * c.rated_speed * c.rated_speed;
  return c.rated_power_kw * (v * v * v - ci3) / (rs3 - ci3);
}

double tower_motion_bound(const SimConfig& c, Dof dof) {
  return dof_offset_max(c, dof) + dof_wave_amplitude_sum(c, dof) + dof_noise(c, dof);
}

void SimConfig::validate(const Catalog& catalog) const {
  if (!(cut_in < rated_speed && rated_speed < cut_out)) {
    throw ConfigError("require cut_in < rated_speed < cut_out");
  }
  if (!(rated_power_kw > 0.0)) throw ConfigError("rated_power_kw must be positive");
  if (wind.reversion_rate < 0.0 || wind.volatility < 0.0 || wind.turbulence_std < 0.0 ||
      wind.turbulence_rate <= 0.0 || wind.direction_std < 0.0) {
    throw ConfigError("wind process parameters must be non-negative");
  }
  for (const auto& w : waves) {
    if (!(w.period_s > 0.0) || w.amplitude_m < 0.0) throw ConfigError("wave periods must be positive");
  }
  for (const auto& node : catalog.nodes()) {
    auto it = cadence_s.find(node.code);
    if (it == cadence_s.end()) throw ConfigError("no cadence for node " + node.code);
    if (it->second < 1 || it->second > 4) {
      throw ConfigError("cadence of " + node.code + " must be within [1, 4] s");
    }
  }
  for (double p : {faults.gap, faults.duplicate, faults.spike, faults.swap}) {
    if (p < 0.0 || p > 1.0) throw ConfigError("fault rates must lie in [0, 1]");
  }
}

SimConfig SimConfig::from_key_values(const KeyValues& kv) {
  SimConfig c;
  bool waves_given = false;
  for (const auto& [key, value] : kv) {
    auto num = [&] { return parse_double(value); };
    if (key == "seed") {
      c.seed = static_cast<std::uint64_t>(parse_int(value));
    } else if (key == "start") {
      c.start = parse_iso8601(value);
    } else if (key == "rated_power_kw") {
      c.rated_power_kw = num();
    } else if (key == "cut_in") {
      c.cut_in = num();
    } else if (key == "rated_speed") {
      c.rated_speed = num();
    } else if (key == "cut_out") {
      c.cut_out = num();
    } else if (key == "wind.mean") {
      c.wind.mean = num();
    } else if (key == "wind.reversion_rate") {
      c.wind.reversion_rate = num();
    } else if (key == "wind.volatility") {
      c.wind.volatility = num();
    } else if (key == "wind.turbulence_std") {
      c.wind.turbulence_std = num();
    } else if (key == "wind.turbulence_rate") {
      c.wind.turbulence_rate = num();
    } else if (key == "wind.direction_mean") {
      c.wind.direction_mean = num();
    } else if (key == "wind.direction_std") {
      c.wind.direction_std = num();
    } else if (key.rfind("wave.", 0) == 0) {
      if (!waves_given) c.waves.clear();
      waves_given = true;
      auto cols = split_ws(value);
      if (cols.size() != 3) throw ConfigError(key + ": expected 'amplitude_m period_s direction_rad'");
      c.waves.push_back({parse_double(cols[0]), parse_double(cols[1]), parse_double(cols[2])});
    } else if (key.rfind("cadence.", 0) == 0) {
      c.cadence_s[key.substr(8)] = static_cast<int>(parse_int(value));
    } else if (key == "faults.gap") {
      c.faults.gap = num();
    } else if (key == "faults.duplicate") {
      c.faults.duplicate = num();
    } else if (key == "faults.spike") {
      c.faults.spike = num();
    } else if (key == "faults.swap") {
      c.faults.swap = num();
    } else if (key == "dof.damping") {
      c.dof_damping = num();
    } else if (key == "dof.surge_offset_m") {
      c.surge_offset_m = num();
    } else if (key == "dof.pitch_offset_rad") {
      c.pitch_offset_rad = num();
    } else {
      throw ConfigError("unknown scenario key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

SimConfig SimConfig::load(const std::string& path) { return from_key_values(parse_key_values(read_file(path))); }

SimState initial_state(const SimConfig& c) {
  SimState s;
  s.time = c.start;
  s.rng.seed(c.seed);
  s.wind_base = c.wind.mean;
  s.wind_turbulence = 0.0;
  s.wind_speed = std::max(0.0, c.wind.mean);
  s.wind_direction = wrap_degrees(c.wind.direction_mean);
  s.direction_lowpass = s.wind_direction;
  s.yaw = s.wind_direction;
  for (std::size_t i = 0; i < c.waves.size(); ++i) {
    s.wave_phase.push_back(uniform(s.rng, 0.0, 2.0 * std::numbers::pi));
  }
  double asum = wave_amplitude_sum(c);
  s.wave_height = 2.0 * asum + elevation(c, s, 0.0);
  s.avg_wave_height = 2.0 * asum;
  s.rotor_rpm = rotor_target(c, s.wind_speed);
  s.generator_rpm = s.rotor_rpm * kGearRatio;
  double pitch0 = pitch_target(c, s.wind_speed);
  s.blade_pitch = {pitch0, pitch0, pitch0};
  s.thrust_lowpass = thrust_factor(c, s.wind_speed);
  s.active_power = power_curve(c, s.wind_speed);
  s.reactive_power = 0.05 * s.active_power;
  s.power_lowpass = s.active_power;
  double load = s.active_power / c.rated_power_kw;
  s.shaft_bearing_temp = 35.0 + 15.0 * load;
  s.gearbox_oil_temp = 45.0 + 20.0 * load;
  s.generator_temp = 50.0 + 40.0 * load;
  s.stator_temp = 55.0 + 45.0 * load;
  s.transformer_oil_temp = 40.0 + 20.0 * load;
  s.winding_temp = 50.0 + 30.0 * load;
  update_tower(c, s, 0.0);
  update_electrical(s);
  return s;
}

std::pair<SimState, std::vector<TelemetryRecord>> step(SimState s, const SimConfig& c, double dt,
                                                       const Catalog& catalog) {
  if (!(dt > 0.0)) throw ConfigError("step requires dt > 0");
  s.elapsed_ms += static_cast<std::int64_t>(std::llround(dt * 1000.0));
  s.time = c.start + Duration{s.elapsed_ms};
  double t = static_cast<double>(s.elapsed_ms) / 1000.0;

  // Wind.
  s.wind_base = ou_step(s.rng, s.wind_base, c.wind.mean, c.wind.reversion_rate, c.wind.volatility, dt);
  double turb_vol = c.wind.turbulence_std * std::sqrt(2.0 * c.wind.turbulence_rate);
  s.wind_turbulence = ou_step(s.rng, s.wind_turbulence, 0.0, c.wind.turbulence_rate, turb_vol, dt);
  s.wind_speed = std::clamp(s.wind_base + s.wind_turbulence, 0.0, 59.0);
  double dir_rate = 0.001;
  double dir_vol = c.wind.direction_std * std::sqrt(2.0 * dir_rate);
  double dir = ou_step(s.rng, s.wind_direction, c.wind.direction_mean, dir_rate, dir_vol, dt);
  s.wind_direction = wrap_degrees(dir);
  s.direction_lowpass = lag(s.direction_lowpass, s.wind_direction, 30.0, dt);
  s.air_temperature = std::clamp(ou_step(s.rng, s.air_temperature, 8.0, 1e-4, 0.02, dt), -40.0, 40.0);
  s.water_temperature = std::clamp(ou_step(s.rng, s.water_temperature, 10.0, 1e-5, 0.002, dt), -2.0, 30.0);
  s.ballast_depth = std::clamp(ou_step(s.rng, s.ballast_depth, 20.0, 1e-4, 0.01, dt), 5.0, 40.0);

  // Waves.
  double asum = wave_amplitude_sum(c);
  s.wave_height = std::max(0.0, 2.0 * asum + elevation(c, s, t));
  s.avg_wave_height = lag(s.avg_wave_height, s.wave_height, 600.0, dt);

  // Rotor, pitch and yaw.
  double v = s.wind_speed;
  s.rotor_rpm = std::clamp(lag(s.rotor_rpm, rotor_target(c, v), 8.0, dt), 0.0, 29.0);
  s.generator_rpm = s.rotor_rpm * kGearRatio;
  double pt = pitch_target(c, v);
  for (auto& p : s.blade_pitch) p = std::clamp(lag(p, pt, 3.0, dt) + gaussian(s.rng, 0.02), -4.0, 92.0);
  double err = s.direction_lowpass - s.yaw;
  if (err > 180.0) err -= 360.0;
  if (err < -180.0) err += 360.0;
  if (std::abs(err) > 8.0) s.yawing = true;
  if (std::abs(err) < 1.0) s.yawing = false;
  if (s.yawing) s.yaw = wrap_degrees(s.yaw + std::clamp(err, -0.5 * dt, 0.5 * dt));
  s.thrust_lowpass = lag(s.thrust_lowpass, thrust_factor(c, v), 60.0, dt);

  // Production.
  double target = power_curve(c, v);
  if (target > 0.0) {
    double p = lag(s.active_power, target, 4.0, dt) + gaussian(s.rng, 0.004 * c.rated_power_kw);
    s.active_power = std::clamp(p, 0.0, 1.05 * c.rated_power_kw);
  } else {
    s.active_power = 0.0;
  }
  s.reactive_power = std::clamp(0.05 * s.active_power + gaussian(s.rng, 2.0), -1400.0, 1400.0);
  s.power_lowpass = lag(s.power_lowpass, s.active_power, 900.0, dt);
  double load = s.power_lowpass / c.rated_power_kw;
  s.shaft_bearing_temp = lag(s.shaft_bearing_temp, 35.0 + 15.0 * load, 600.0, dt);
  s.gearbox_oil_temp = lag(s.gearbox_oil_temp, 45.0 + 20.0 * load, 900.0, dt);
  s.generator_temp = lag(s.generator_temp, 50.0 + 40.0 * load, 600.0, dt);
  s.stator_temp = lag(s.stator_temp, 55.0 + 45.0 * load, 600.0, dt);
  s.transformer_oil_temp = lag(s.transformer_oil_temp, 40.0 + 20.0 * load, 1200.0, dt);
  s.winding_temp = lag(s.winding_temp, 50.0 + 30.0 * load, 900.0, dt);
  update_electrical(s);
  update_tower(c, s, t);

  // Counters. Energy integrates exactly the power value emitted at this step.
  double hours = dt / 3600.0;
  s.availability_h += hours;
  if (s.active_power > 0.0) {
    s.operation_h += hours;
  } else {
    s.standby_h += hours;
  }
  s.energy_kwh += s.active_power * hours;

  auto records = emit(s, c, catalog);
  return {std::move(s), std::move(records)};
}

std::vector<TelemetryRecord> emit(const SimState& s, const SimConfig& c, const Catalog& catalog) {
  std::vector<TelemetryRecord> out;
  auto due = [&](const char* node) {
    auto it = c.cadence_s.find(node);
    return it != c.cadence_s.end() && s.elapsed_ms % (std::int64_t{it->second} * 1000) == 0;
  };
  double v = s.wind_speed;
  double load = s.power_lowpass / c.rated_power_kw;
  if (due("WMET")) {
    add(out, s, "WMET.WindSpeed", v);
    add(out, s, "WMET.WindDirection", s.wind_direction);
    add(out, s, "WMET.WaveHeight", s.wave_height);
    add(out, s, "WMET.AvgWaveHeight", s.avg_wave_height);
    double e = 0.0;
    double et = 0.0;
    for (const auto& w : c.waves) {
      e += w.amplitude_m * w.amplitude_m;
      et += w.amplitude_m * w.amplitude_m * w.period_s;
    }
    add(out, s, "WMET.WavePeriod", e > 0.0 ? et / e : 0.0);
    add(out, s, "WMET.AirTemperature", s.air_temperature);
    add(out, s, "WMET.WaterTemperature", s.water_temperature);
  }
  if (due("WROT")) {
    add(out, s, "WROT.BladePitch1", s.blade_pitch[0]);
    add(out, s, "WROT.BladePitch2", s.blade_pitch[1]);
    add(out, s, "WROT.BladePitch3", s.blade_pitch[2]);
    add(out, s, "WROT.RotorRPM", s.rotor_rpm);
  }
  if (due("WYAW")) {
    add(out, s, "WYAW.YawAngle", s.yaw);
    add(out, s, "WYAW.YawStatus", s.yawing ? 1.0 : 0.0);
  }
  if (due("WTOW")) {
    add(out, s, "WTOW.Surge", s.dof[surge]);
    add(out, s, "WTOW.Sway", s.dof[sway]);
    add(out, s, "WTOW.Heave", s.dof[heave]);
    add(out, s, "WTOW.Roll", s.dof[roll]);
    add(out, s, "WTOW.Pitch", s.dof[pitch]);
    add(out, s, "WTOW.Yaw", s.dof[yaw]);
  }
  if (due("WTRM")) {
    add(out, s, "WTRM.ShaftBearingTemp", s.shaft_bearing_temp);
    add(out, s, "WTRM.ShaftBearingStatus", 0.0);
    add(out, s, "WTRM.BrakeStatus", s.rotor_rpm > 0.5 ? 0.0 : 1.0);
    add(out, s, "WTRM.GearboxOilTemp", s.gearbox_oil_temp);
    add(out, s, "WTRM.GearboxOilStatus", 0.0);
  }
  if (due("WTUR")) {
    add(out, s, "WTUR.ActivePower", s.active_power);
    add(out, s, "WTUR.ReactivePower", s.reactive_power);
    add(out, s, "WTUR.GeneratorTemp", s.generator_temp);
    add(out, s, "WTUR.StatorTemp", s.stator_temp);
    add(out, s, "WTUR.OperationState", operation_state(c, v));
    add(out, s, "WTUR.StatusCode", 0.0);
    add(out, s, "WTUR.WarningCode", load > 0.98 ? 1.0 : 0.0);
  }
  if (due("WGEN")) {
    add(out, s, "WGEN.GeneratorStatus", s.active_power > 0.0 ? 1.0 : 0.0);
    add(out, s, "WGEN.GeneratorRPM", s.generator_rpm);
  }
  if (due("WCNV")) add(out, s, "WCNV.GeneratorFrequency", s.grid_frequency);
  if (due("WTRF")) {
    add(out, s, "WTRF.CurrentL1", s.phase_current[0]);
    add(out, s, "WTRF.CurrentL2", s.phase_current[1]);
    add(out, s, "WTRF.CurrentL3", s.phase_current[2]);
    add(out, s, "WTRF.VoltageL1L2", s.phase_voltage[0]);
    add(out, s, "WTRF.VoltageL2L3", s.phase_voltage[1]);
    add(out, s, "WTRF.VoltageL3L1", s.phase_voltage[2]);
    add(out, s, "WTRF.OilStatus", 0.0);
    add(out, s, "WTRF.OilTemp", s.transformer_oil_temp);
    add(out, s, "WTRF.OilLevelStatus", 0.0);
    add(out, s, "WTRF.WindingTemp", s.winding_temp);
  }
  if (due("WSTR")) add(out, s, "WSTR.BallastDepth", s.ballast_depth);
  if (due("WPPD")) add(out, s, "WPPD.ControlStatus", 1.0);
  if (due("WAVL")) {
    add(out, s, "WAVL.AvailabilityTime", s.availability_h);
    add(out, s, "WAVL.OperationTime", s.operation_h);
    add(out, s, "WAVL.AccumulatedEnergy", s.energy_kwh);
    add(out, s, "WAVL.GridFaultTime", s.grid_fault_h);
    add(out, s, "WAVL.StandbyTime", s.standby_h);
    add(out, s, "WAVL.MaintenanceTime", s.maintenance_h);
    add(out, s, "WAVL.ServiceMode", 0.0);
    add(out, s, "WAVL.AvailabilityStatus", 1.0);
    add(out, s, "WAVL.GridStatus", 1.0);
    add(out, s, "WAVL.RemoteControl", 1.0);
    add(out, s, "WAVL.SafetyChain", 1.0);
    add(out, s, "WAVL.Communication", 1.0);
  }
  (void)catalog;
  return out;
}

TurbineSimulator::TurbineSimulator(SimConfig config, const Catalog& catalog)
    : config_(std::move(config)), catalog_(&catalog) {
  config_.validate(catalog);
  state_ = initial_state(config_);
  // Derived from the same seed; kept apart so enabling faults leaves the physics untouched.
  std::seed_seq seq{config_.seed, std::uint64_t{0x5eed'fa17}};
  fault_rng_.seed(seq);
}

std::vector<TelemetryRecord> TurbineSimulator::advance(Duration span) {
  std::vector<TelemetryRecord> out;
  if (!started_) {
    out = emit(state_, config_, *catalog_);
    started_ = true;
  }
  covered_ms_ += span.count();
  // Each step emits at its new elapsed time; stop before the end of the span.
  while (state_.elapsed_ms + 1000 < covered_ms_) {
    auto [next, recs] = step(std::move(state_), config_, 1.0, *catalog_);
    state_ = std::move(next);
    out.insert(out.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
  }
  if (config_.faults.any()) apply_faults(out);
  return out;
}

void TurbineSimulator::apply_faults(std::vector<TelemetryRecord>& records) {
  const auto& f = config_.faults;
  std::vector<TelemetryRecord> out;
  out.reserve(records.size() + records.size() / 10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& r : records) {
    double draw_gap = u(fault_rng_);
    double draw_spike = u(fault_rng_);
    double draw_dup = u(fault_rng_);
    double draw_swap = u(fault_rng_);
    if (draw_gap < f.gap) continue;
    if (draw_spike < f.spike) {
      const auto& def = catalog_->lookup(r.parameter);
      double span = def.upper_bound - def.lower_bound;
      r.value = def.kind == ParamKind::status ? def.upper_bound + 100.0
                                              : def.upper_bound + (span > 0 ? span : 1.0) * (1.0 + u(fault_rng_));
    }
    out.push_back(r);
    if (draw_dup < f.duplicate) out.push_back(r);
    if (draw_swap < f.swap && out.size() >= 2) std::swap(out[out.size() - 1], out[out.size() - 2]);
  }
  records = std::move(out);
}

std::vector<TelemetryRecord> generate(const SimConfig& config, Duration duration, const Catalog& catalog) {
  if (duration <= Duration::zero()) throw ConfigError("duration must be positive");
  TurbineSimulator sim(config, catalog);
  return sim.advance(duration);
}

}  // namespace twin
