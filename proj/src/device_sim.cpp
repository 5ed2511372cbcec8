#include "whan/device_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace whan::sim {

double diurnal_light(const std::vector<LightPoint>& profile, Millis now) {
  if (profile.empty()) throw std::invalid_argument("empty diurnal profile");
  if (profile.size() == 1) return profile.front().percent;

  const double t = static_cast<double>(seconds_of_day(now)) + static_cast<double>(now % kSecond) / 1000.0;
  auto sorted = profile;
  std::sort(sorted.begin(), sorted.end(),
            [](const LightPoint& a, const LightPoint& b) { return a.second_of_day < b.second_of_day; });

  // Segment (prev, next) around the circle that contains t.
  const LightPoint* prev = &sorted.back();
  const LightPoint* next = &sorted.front();
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (static_cast<double>(sorted[i].second_of_day) > t) {
      next = &sorted[i];
      prev = i == 0 ? &sorted.back() : &sorted[i - 1];
      break;
    }
    prev = &sorted[i];
    next = i + 1 < sorted.size() ? &sorted[i + 1] : &sorted.front();
  }
  double span = static_cast<double>(next->second_of_day - prev->second_of_day);
  double offset = t - static_cast<double>(prev->second_of_day);
  if (span <= 0) span += 86400.0;
  if (offset < 0) offset += 86400.0;
  return prev->percent + (next->percent - prev->percent) * (offset / span);
}

double light_level(const RoomEnv& env, Millis now) {
  double light = env.ambient_light;
  for (const auto& m : env.light_modifiers) {
    if (!m.window.active(now)) continue;
    light = m.effect == LightEffect::Scale ? light * m.amount : light + m.amount;
  }
  return std::clamp(light, 0.0, 100.0);
}

RoomEnv step_env(RoomEnv env, bool heater_on, Millis now, double dt_s, const EnvParams& params) {
  if (!(dt_s > 0.0)) throw std::invalid_argument("environment step needs dt > 0");
  double rate = params.k_loss * (params.outside_c - env.temperature_c);
  if (heater_on) rate += params.k_heat;
  for (const auto& h : env.heat_events) {
    if (h.window.active(now)) rate += h.delta_c_per_s;
  }
  env.temperature_c += dt_s * rate;

  const Millis after = now + static_cast<Millis>(std::llround(dt_s * 1000.0));
  if (!env.diurnal.empty()) env.ambient_light = diurnal_light(env.diurnal, after);
  env.ambient_light = std::clamp(env.ambient_light, 0.0, 100.0);
  return env;
}

double wrap_pan(double degrees) {
  double r = std::fmod(degrees, 360.0);
  if (r < 0) r += 360.0;
  if (r >= 360.0) r -= 360.0;
  return r;
}

TiltStep step_tilt(double tilt, double delta) {
  const double wanted = tilt + delta;
  if (wanted > kTiltLimitDeg) return {kTiltLimitDeg, true};
  if (wanted < -kTiltLimitDeg) return {-kTiltLimitDeg, true};
  return {wanted, false};
}

ActuatorOutcome apply_actuator(EndDeviceState state, const wire::CommandPayload& command) {
  using wire::Action;
  using wire::ActuatorId;
  ActuatorOutcome out{state, false, std::nullopt};
  auto reject = [&](std::string why) {
    out.state = state;
    out.error = std::move(why);
    return out;
  };

  switch (command.actuator) {
    case ActuatorId::Lamp:
      switch (command.action) {
        case Action::Off: out.state.lamp_on = false; break;
        case Action::On:
          out.state.lamp_on = true;
          if (out.state.lamp_level == 0) out.state.lamp_level = 100;
          break;
        case Action::SetLevel:
          if (command.argument < 0 || command.argument > 100) {
            return reject(fmt::format("lamp level {} outside 0..100", command.argument));
          }
          out.state.lamp_level = command.argument;
          out.state.lamp_on = command.argument > 0;
          break;
        case Action::Step: return reject("lamp does not step");
      }
      break;
    case ActuatorId::Heater:
      switch (command.action) {
        case Action::Off: out.state.heater_on = false; break;
        case Action::On: out.state.heater_on = true; break;
        default: return reject(fmt::format("heater does not accept {}", wire::to_string(command.action)));
      }
      break;
    case ActuatorId::Pan:
      if (command.action != Action::Step) return reject("pan motor only steps");
      out.state.pan = wrap_pan(state.pan + command.argument);
      break;
    case ActuatorId::Tilt: {
      if (command.action != Action::Step) return reject("tilt motor only steps");
      auto step = step_tilt(state.tilt, command.argument);
      out.state.tilt = step.tilt;
      out.limit_reached = step.clamped;
      break;
    }
    default: return reject("unknown actuator");
  }
  return out;
}

wire::ReadingPayload read_sensor(const EndDeviceState& ed, const RoomEnv& env, wire::SensorId sensor,
                                 Millis now) {
  switch (sensor) {
    case wire::SensorId::Temperature: {
      // Truncate toward zero; the epsilon absorbs binary noise such as 64.99999999.
      const double centi = env.temperature_c * 100.0;
      const double nudged = centi + (centi >= 0 ? 1e-7 : -1e-7);
      const double clamped = std::clamp(std::trunc(nudged), -32768.0, 32767.0);
      return {sensor, static_cast<std::int16_t>(clamped)};
    }
    case wire::SensorId::Light: {
      const double light = light_level(env, now);
      return {sensor, static_cast<std::int16_t>(std::floor(light + 0.5))};
    }
    case wire::SensorId::Motion:
      return {sensor, static_cast<std::int16_t>(now < ed.motion_latch_until ? 1 : 0)};
  }
  throw std::invalid_argument(fmt::format("unknown sensor id {}", static_cast<int>(sensor)));
}

double duty_cycle_current(const PowerProfile& profile, double active_fraction) {
  if (!(active_fraction >= 0.0 && active_fraction <= 1.0)) {
    throw std::invalid_argument("active fraction must lie in [0, 1]");
  }
  const double idle_ma = (profile.radio_sleep_ua + profile.temp_sensor_ua + profile.motion_sensor_ua +
                          profile.light_sensor_ua) /
                         1000.0;
  return active_fraction * profile.ed_active_ma + (1.0 - active_fraction) * idle_ma;
}

double other_expansion_load_a(const PowerProfile& profile) {
  return profile.expansion_a - profile.camera_motor_a * profile.camera_motors;
}

std::vector<PowerRow> power_table(const PowerProfile& p) {
  return {
      {"temperature sensor", p.temp_sensor_ua * 1e-6, p.temp_sensor_v},
      {"motion sensor", p.motion_sensor_ua * 1e-6, p.motion_sensor_v},
      {"light sensor", p.light_sensor_ua * 1e-6, p.light_sensor_v},
      {"end device", p.ed_active_ma * 1e-3, p.ed_v},
      {"expansion board", p.expansion_a, p.expansion_v},
      {"camera motors", p.camera_motor_a * p.camera_motors, p.expansion_v},
      {"other expansion load", other_expansion_load_a(p), p.expansion_v},
  };
}

EndDevice::EndDevice(EdConfig config, Millis start)
    : config_(std::move(config)), next_report_(start + config_.report_period) {
  state_.address = config_.address;
}

wire::TxId EndDevice::fresh_txid() {
  state_.txid_counter = wire::next_txid(state_.txid_counter);
  return state_.txid_counter;
}

wire::RadioFrame EndDevice::send_reading(const RoomEnv& env, wire::SensorId sensor, Millis now) {
  wire::RadioFrame frame{config_.address, wire::kApAddress, fresh_txid(), wire::FrameKind::Reading,
                         wire::encode_reading(read_sensor(state_, env, sensor, now))};
  pending_[frame.txid] = Pending{frame, config_.retry_count, now + config_.retry_spacing};
  ++stats_.readings_sent;
  return frame;
}

std::vector<wire::RadioFrame> EndDevice::tick(const RoomEnv& env, Millis now,
                                              std::span<const wire::RadioFrame> inbound) {
  std::vector<wire::RadioFrame> out;
  ++stats_.ticks;

  for (const auto& occ : env.occupancy) {
    if (occ.window.start <= now) {
      state_.motion_latch_until = std::max(state_.motion_latch_until, occ.window.end() + config_.motion_latch);
    }
  }

  bool heard = false;
  for (const auto& frame : inbound) {
    if (frame.dst != config_.address) continue;
    heard = true;
    if (frame.kind == wire::FrameKind::Ack) {
      if (pending_.erase(frame.payload.at(0)) != 0) ++stats_.acks_received;
      continue;
    }
    if (frame.kind != wire::FrameKind::Command) continue;

    if (wire::dedup_check(dedup_, frame.src, frame.txid) == wire::DedupVerdict::Duplicate) {
      ++stats_.duplicate_commands;
    } else if (auto cmd = wire::decode_command(frame.payload)) {
      auto outcome = apply_actuator(state_, *cmd);
      state_ = outcome.state;
      if (outcome.error) {
        events_.push_back({now, EdEventKind::CommandRejected, *outcome.error});
      } else {
        ++stats_.commands_applied;
      }
      if (outcome.limit_reached) {
        events_.push_back({now, EdEventKind::LimitReached, fmt::format("tilt {:.1f}", state_.tilt)});
      }
    } else {
      events_.push_back({now, EdEventKind::CommandRejected, "malformed command"});
    }
    out.push_back(wire::make_ack(config_.address, frame.src, fresh_txid(), frame.txid));
  }

  bool motion_sent = false;
  if (now >= next_report_) {
    for (auto sensor : config_.sensors) {
      out.push_back(send_reading(env, sensor, now));
      if (sensor == wire::SensorId::Motion) {
        motion_sent = true;
        reported_motion_ = read_sensor(state_, env, sensor, now).value;
      }
    }
    while (next_report_ <= now) next_report_ += config_.report_period;
  }

  if (!motion_sent && config_.sensors.count(wire::SensorId::Motion)) {
    const int motion = read_sensor(state_, env, wire::SensorId::Motion, now).value;
    if (motion != reported_motion_) {
      out.push_back(send_reading(env, wire::SensorId::Motion, now));
      reported_motion_ = motion;
    }
  }

  for (auto it = pending_.begin(); it != pending_.end();) {
    auto& p = it->second;
    if (p.next_retry > now) {
      ++it;
      continue;
    }
    if (p.retries_left > 0) {
      --p.retries_left;
      p.next_retry = now + config_.retry_spacing;
      out.push_back(p.frame);
      ++stats_.retransmissions;
      ++it;
    } else {
      events_.push_back({now, EdEventKind::DeliveryFailed, fmt::format("txid {}", it->first)});
      ++stats_.delivery_failures;
      it = pending_.erase(it);
    }
  }

  state_.radio_mode = (heard || !out.empty() || !pending_.empty()) ? RadioMode::Active : RadioMode::Sleep;
  if (state_.radio_mode == RadioMode::Active) ++stats_.active_ticks;
  return out;
}

}  // namespace whan::sim
