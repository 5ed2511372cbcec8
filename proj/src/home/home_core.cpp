#include "whan/home/home_core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "whan/device_sim.hpp"

namespace whan::home {

namespace {

std::optional<double> parse_number(std::string_view text) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<bool> parse_switch(std::string_view text) {
  if (text == "on" || text == "On" || text == "ON" || text == "true" || text == "1") return true;
  if (text == "off" || text == "Off" || text == "OFF" || text == "false" || text == "0") return false;
  return std::nullopt;
}

SubmitResult fail(Status status, std::string message) { return {status, std::nullopt, std::move(message)}; }

constexpr double kMaxGimbalStep = 360.0;

}  // namespace

HomeCore::HomeCore(Registry registry, RuleEngine rules, std::vector<ModeConfig> modes, Store& store,
                   serial::ByteStream& serial, HomeConfig config)
    : registry_(std::move(registry)),
      rules_(std::move(rules)),
      modes_(std::move(modes)),
      trackers_(modes_.size()),
      store_(store),
      serial_(serial),
      config_(config) {}

void HomeCore::boot(Millis now) {
  boot_time_ = now;
  for (auto e : store_.take_recovery_events()) {
    e.ts = now;
    log_event(std::move(e));
  }
  // The scenario's modes win; modes saved by an earlier run are kept too.
  for (const auto& [name, entries] : store_.modes()) {
    auto it = std::find_if(modes_.begin(), modes_.end(), [&](const ModeConfig& m) { return m.name == name; });
    if (it == modes_.end()) modes_.push_back({name, entries, std::nullopt});
  }
  for (const auto& m : modes_) {
    auto stored = store_.modes().find(m.name);
    if (stored == store_.modes().end() || stored->second != m.entries) store_.put_mode(m.name, m.entries);
  }
  trackers_.resize(modes_.size());
}

void HomeCore::notify(Notification note) {
  if (listener_) listener_(note);
}

void HomeCore::log_event(EventRecord event, std::optional<SessionId> origin) {
  store_.append_event(event);
  notify(EventNote{std::move(event), origin});
}

bool HomeCore::in_flight(std::string_view device) const {
  return std::any_of(pending_.begin(), pending_.end(), [&](const auto& kv) { return kv.second.device == device; });
}

void HomeCore::tick(Millis now) {
  auto bytes = serial_.read_available();
  if (!bytes.empty()) {
    for (const auto& frame : decoder_.push(bytes)) dispatch(frame, now);
    stats_.serial_bad_checksum = decoder_.bad_checksum();
  }

  run(rules_.run_timers(registry_, now), now, "timer");

  for (std::size_t i = 0; i < modes_.size(); ++i) {
    if (!modes_[i].trigger) continue;
    const auto& trigger = *modes_[i].trigger;
    const Device* light = registry_.find(trigger.light_device);
    std::optional<double> level;
    if (light && light->updated_at != Device::kNeverSeen) level = light->value;
    if (trackers_[i].step(trigger, level, now)) {
      const std::string name = modes_[i].name;
      apply_mode(name, now);
    }
  }

  check_staleness(now);
}

void HomeCore::dispatch(const wire::SerialFrame& frame, Millis now) {
  switch (frame.kind) {
    case wire::serial_kind::kReading:
      if (auto up = wire::decode_uplink(frame)) ingest_reading(*up, now);
      break;
    case wire::serial_kind::kCommandReport:
      if (auto report = wire::decode_report(frame)) on_report(*report, now);
      break;
    case wire::serial_kind::kApStatus:
      if (auto status = wire::decode_status(frame)) ap_status_ = *status;
      break;
    default:
      break;
  }
}

void HomeCore::ingest_reading(const wire::UplinkReading& up, Millis now) {
  Device* d = registry_.find_sensor(up.src, up.reading.sensor);
  if (!d) {
    ++stats_.unknown_readings;
    log_event({now, Severity::Info, EventKind::UnknownDevice,
               fmt::format("unknown device: node {} sensor {}", up.src, wire::to_string(up.reading.sensor))});
    return;
  }
  ++stats_.readings;

  std::optional<double> previous;
  if (d->updated_at != Device::kNeverSeen) previous = d->value;
  const double value =
      up.reading.sensor == wire::SensorId::Temperature ? up.reading.value / 100.0 : double(up.reading.value);
  d->value = value;
  d->updated_at = now;
  if (up.reading.sensor == wire::SensorId::Motion) {
    d->state = value != 0.0 ? DeviceState::On : DeviceState::Off;
  } else {
    d->state = DeviceState::On;
  }

  try {
    store_.append_reading({d->name, now, value, up.rssi_dbm});
  } catch (const std::invalid_argument&) {
    ++stats_.samples_rejected;  // stored history runs ahead of this clock
  }
  notify(ReadingNote{d->name, now, format_value(*d), up.rssi_dbm});

  const std::string name = d->name;
  run(rules_.evaluate(registry_, *d, previous, now), now, name);

  if (up.reading.sensor == wire::SensorId::Temperature) {
    for (const auto& heater : registry_.all()) {
      if (heater.kind == DeviceKind::Heater && heater.thermostat_sensor == name) regulate(heater, now);
    }
  }
}

void HomeCore::run(RuleOutput output, Millis now, std::string_view cause) {
  for (auto& e : output.events) log_event(std::move(e));
  for (const auto& setting : output.commands) {
    auto r = submit(setting, std::nullopt, now);
    if (!r.ok()) {
      log_event({now, Severity::Alert, EventKind::CommandRejected,
                 fmt::format("{}: {} ({})", cause, setting.str(), static_cast<int>(r.status))});
    }
  }
}

void HomeCore::regulate(const Device& heater, Millis now) {
  if (!heater.set_point || heater.thermostat_sensor.empty()) return;
  const Device* sensor = registry_.find(heater.thermostat_sensor);
  if (!sensor || sensor->updated_at == Device::kNeverSeen) return;
  auto decision = thermostat_step(*heater.set_point, heater.band, sensor->value, heater.state,
                                  now - sensor->updated_at, config_.stale_after);
  if (decision.stale) return;  // check_staleness raises the alert
  stale_[heater.name] = false;
  if (decision.heater_on && !in_flight(heater.name)) {
    const std::string name = heater.name;
    auto r = submit({name, "state", *decision.heater_on ? "on" : "off"}, std::nullopt, now);
    if (!r.ok()) {
      log_event({now, Severity::Alert, EventKind::CommandRejected,
                 fmt::format("thermostat: {} ({})", name, static_cast<int>(r.status))});
    }
  }
}

void HomeCore::check_staleness(Millis now) {
  for (const auto& heater : registry_.all()) {
    if (heater.kind != DeviceKind::Heater || !heater.set_point || heater.thermostat_sensor.empty()) continue;
    const Device* sensor = registry_.find(heater.thermostat_sensor);
    if (!sensor) continue;
    const Millis seen = std::max(sensor->updated_at, boot_time_);
    auto& flagged = stale_[heater.name];
    if (now - seen > config_.stale_after) {
      if (!flagged) {
        flagged = true;
        log_event({now, Severity::Alert, EventKind::SensorStale,
                   fmt::format("{}: no reading from {} for {} s", heater.name, sensor->name,
                               (now - seen) / kSecond)});
      }
    } else if (sensor->updated_at != Device::kNeverSeen && now - sensor->updated_at <= config_.stale_after) {
      flagged = false;
    }
  }
}

SubmitResult HomeCore::send(Device& device, wire::CommandPayload command, std::optional<SessionId> origin) {
  if (!wire::is_valid(command)) return fail(Status::Rejected, "invalid command");
  const std::uint32_t seq = next_seq_++;
  pending_[seq] = {seq, device.name, device.node, command, origin};
  awaiting_txid_.push_back(seq);
  serial_.write(wire::encode_serial(wire::encode_downlink({device.node, command})));
  ++stats_.commands_sent;
  return {Status::Ok, seq, {}};
}

SubmitResult HomeCore::submit(const Setting& setting, std::optional<SessionId> origin, Millis now) {
  Device* d = registry_.find(setting.device);
  if (!d) return fail(Status::UnknownDevice, "unknown device");
  const auto& prop = setting.property;
  const auto& text = setting.value;

  static const char* const kKnown[] = {"state", "level", "pan",   "tilt",    "setpoint", "band",
                                       "armed", "low",   "high",  "on-time", "off-time"};
  if (std::none_of(std::begin(kKnown), std::end(kKnown), [&](const char* k) { return prop == k; })) {
    return fail(Status::Malformed, "unknown property");
  }

  auto not_applicable = [&] { return fail(Status::Rejected, fmt::format("{} has no {}", d->name, prop)); };

  if (prop == "state") {
    if (d->kind != DeviceKind::Lamp && d->kind != DeviceKind::Heater) return not_applicable();
    auto on = parse_switch(text);
    if (!on) return fail(Status::Malformed, "state must be on or off");
    const auto actuator = d->kind == DeviceKind::Lamp ? wire::ActuatorId::Lamp : wire::ActuatorId::Heater;
    return send(*d, {actuator, *on ? wire::Action::On : wire::Action::Off, 0}, origin);
  }
  if (prop == "level") {
    if (d->kind != DeviceKind::Lamp) return not_applicable();
    auto v = parse_number(text);
    if (!v || *v != std::floor(*v)) return fail(Status::Malformed, "level must be an integer");
    if (*v < 0 || *v > 100) return fail(Status::Rejected, "level out of range");
    return send(*d, {wire::ActuatorId::Lamp, wire::Action::SetLevel, static_cast<std::int16_t>(*v)}, origin);
  }
  if (prop == "pan" || prop == "tilt") {
    if (d->kind != DeviceKind::CameraGimbal) return not_applicable();
    auto v = parse_number(text);
    if (!v || *v != std::floor(*v)) return fail(Status::Malformed, "step must be integer degrees");
    if (std::abs(*v) > kMaxGimbalStep) return fail(Status::Rejected, "step out of range");
    const auto actuator = prop == "pan" ? wire::ActuatorId::Pan : wire::ActuatorId::Tilt;
    return send(*d, {actuator, wire::Action::Step, static_cast<std::int16_t>(*v)}, origin);
  }
  return apply_local(*d, setting, now);
}

SubmitResult HomeCore::apply_local(Device& d, const Setting& setting, Millis now) {
  const auto& prop = setting.property;
  const auto& text = setting.value;
  auto not_applicable = [&] { return fail(Status::Rejected, fmt::format("{} has no {}", d.name, prop)); };
  auto announce = [&](std::optional<SessionId> origin = std::nullopt) {
    notify(StateNote{d.name, d.state, format_value(d), origin});
    return SubmitResult{};
  };

  if (prop == "setpoint" || prop == "band") {
    if (d.kind != DeviceKind::Heater) return not_applicable();
    auto v = parse_number(text);
    if (!v) return fail(Status::Malformed, "expected a number");
    if (prop == "setpoint") {
      if (*v < 5.0 || *v > 35.0) return fail(Status::Rejected, "set point out of range");
      d.set_point = *v;
    } else {
      if (*v <= 0.0 || *v > 10.0) return fail(Status::Rejected, "band out of range");
      d.band = *v;
    }
    auto r = announce();
    regulate(d, now);
    return r;
  }

  if (prop == "armed") {
    if (d.kind != DeviceKind::MotionSensor) return not_applicable();
    auto on = parse_switch(text);
    if (!on) return fail(Status::Malformed, "armed must be on or off");
    d.armed = *on;
    return announce();
  }

  if (prop == "low" || prop == "high") {
    auto v = parse_number(text);
    if (!v) return fail(Status::Malformed, "expected a number");
    const auto kind = prop == "low" ? RuleKind::LowThreshold : RuleKind::HighThreshold;
    bool any = false;
    for (auto& rule : rules_.rules()) {
      if (rule.kind != kind || rule.source != d.name) continue;
      rule.threshold = *v;
      rule.armed = true;
      any = true;
    }
    if (!any) return not_applicable();
    return {};
  }

  // on-time / off-time
  std::optional<std::int64_t> at;
  if (text != "none") {
    at = parse_time_of_day(text);
    if (!at) return fail(Status::Malformed, "expected HH:MM or none");
  }
  bool any = false;
  for (auto& rule : rules_.rules()) {
    if (rule.kind != RuleKind::Timer || rule.target != d.name) continue;
    (prop == "on-time" ? rule.on_time : rule.off_time) = at;
    mark_timer_passed(rule, now);
    any = true;
  }
  if (!any) return not_applicable();
  return {};
}

void HomeCore::on_report(const wire::CommandReport& report, Millis now) {
  using wire::ReportStatus;
  if (report.status == ReportStatus::Queued || report.status == ReportStatus::Rejected) {
    if (awaiting_txid_.empty()) return;  // issued before a restart
    const auto seq = awaiting_txid_.front();
    awaiting_txid_.pop_front();
    auto it = pending_.find(seq);
    if (it == pending_.end()) return;
    if (report.status == ReportStatus::Queued) {
      by_txid_[{report.dst, report.txid}] = seq;
      return;
    }
    auto cmd = std::move(it->second);
    pending_.erase(it);
    log_event({now, Severity::Alert, EventKind::CommandRejected, fmt::format("{} rejected by AP", seq)}, cmd.origin);
    return;
  }

  auto key = std::make_pair(report.dst, report.txid);
  auto it = by_txid_.find(key);
  if (it == by_txid_.end()) return;
  const auto seq = it->second;
  by_txid_.erase(it);
  auto pit = pending_.find(seq);
  if (pit == pending_.end()) return;
  auto cmd = std::move(pit->second);
  pending_.erase(pit);

  if (report.status == ReportStatus::Acked) {
    ++stats_.commands_acked;
    apply_ack(cmd, now);
  } else {
    ++stats_.commands_failed;
    log_event({now, Severity::Alert, EventKind::DeliveryFailed, std::to_string(seq)}, cmd.origin);
  }
}

void HomeCore::apply_ack(const PendingCommand& cmd, Millis now) {
  Device* d = registry_.find(cmd.device);
  if (!d) return;
  const auto& c = cmd.command;
  bool limit = false;
  switch (c.actuator) {
    case wire::ActuatorId::Lamp:
      if (c.action == wire::Action::Off) {
        d->state = DeviceState::Off;
      } else if (c.action == wire::Action::On) {
        d->state = DeviceState::On;
        if (d->value == 0.0) d->value = 100.0;
      } else if (c.action == wire::Action::SetLevel) {
        d->value = c.argument;
        d->state = c.argument > 0 ? DeviceState::On : DeviceState::Off;
      }
      break;
    case wire::ActuatorId::Heater:
      d->state = c.action == wire::Action::On ? DeviceState::On : DeviceState::Off;
      d->value = d->state == DeviceState::On ? 1.0 : 0.0;
      break;
    case wire::ActuatorId::Pan:
      d->value = sim::wrap_pan(d->value + c.argument);
      d->state = DeviceState::On;
      break;
    case wire::ActuatorId::Tilt: {
      auto step = sim::step_tilt(d->tilt, c.argument);
      d->tilt = step.tilt;
      d->state = DeviceState::On;
      limit = step.clamped;
      break;
    }
  }
  d->updated_at = now;
  notify(StateNote{d->name, d->state, format_value(*d), cmd.origin});
  if (limit) {
    log_event({now, Severity::Alert, EventKind::LimitReached, fmt::format("{} tilt {:.1f}", d->name, d->tilt)},
              cmd.origin);
  }
}

SubmitResult HomeCore::apply_mode(std::string_view name, Millis now) {
  auto it = std::find_if(modes_.begin(), modes_.end(), [&](const ModeConfig& m) { return m.name == name; });
  if (it == modes_.end()) return fail(Status::UnknownDevice, "unknown mode");
  const auto entries = it->entries;
  const std::string mode = it->name;
  for (const auto& entry : entries) {
    auto r = submit(entry, std::nullopt, now);
    if (!r.ok()) {
      log_event({now, Severity::Alert, EventKind::ModeEntrySkipped,
                 fmt::format("{}: {} ({})", mode, entry.str(), static_cast<int>(r.status))});
    }
  }
  current_mode_ = mode;
  log_event({now, Severity::Info, EventKind::ModeChanged, mode});
  return {};
}

std::optional<std::vector<SensorSample>> HomeCore::query_history(std::string_view device, Millis from,
                                                                 Millis to) const {
  if (!registry_.find(device)) return std::nullopt;
  return store_.history(device, from, to);
}

}  // namespace whan::home
