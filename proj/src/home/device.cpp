#include "whan/home/device.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace whan::home {

const char* to_string(DeviceKind kind) {
  switch (kind) {
    case DeviceKind::TemperatureSensor: return "TemperatureSensor";
    case DeviceKind::LightSensor: return "LightSensor";
    case DeviceKind::MotionSensor: return "MotionSensor";
    case DeviceKind::Lamp: return "Lamp";
    case DeviceKind::Heater: return "Heater";
    case DeviceKind::CameraGimbal: return "CameraGimbal";
  }
  return "?";
}

const char* to_string(DeviceState state) {
  switch (state) {
    case DeviceState::On: return "On";
    case DeviceState::Off: return "Off";
    case DeviceState::Unknown: return "Unknown";
  }
  return "?";
}

const char* to_string(DeviceGroup group) {
  return group == DeviceGroup::Sensor ? "Sensor" : "Actuator";
}

std::optional<DeviceKind> parse_device_kind(std::string_view text) {
  static constexpr std::pair<std::string_view, DeviceKind> kNames[] = {
      {"temperature", DeviceKind::TemperatureSensor}, {"TemperatureSensor", DeviceKind::TemperatureSensor},
      {"light", DeviceKind::LightSensor},             {"LightSensor", DeviceKind::LightSensor},
      {"motion", DeviceKind::MotionSensor},           {"MotionSensor", DeviceKind::MotionSensor},
      {"lamp", DeviceKind::Lamp},                     {"Lamp", DeviceKind::Lamp},
      {"heater", DeviceKind::Heater},                 {"Heater", DeviceKind::Heater},
      {"gimbal", DeviceKind::CameraGimbal},           {"CameraGimbal", DeviceKind::CameraGimbal},
  };
  for (const auto& [name, kind] : kNames) {
    if (name == text) return kind;
  }
  return std::nullopt;
}

DeviceGroup group_of(DeviceKind kind) {
  switch (kind) {
    case DeviceKind::TemperatureSensor:
    case DeviceKind::LightSensor:
    case DeviceKind::MotionSensor: return DeviceGroup::Sensor;
    default: return DeviceGroup::Actuator;
  }
}

std::optional<wire::SensorId> sensor_of(DeviceKind kind) {
  switch (kind) {
    case DeviceKind::TemperatureSensor: return wire::SensorId::Temperature;
    case DeviceKind::LightSensor: return wire::SensorId::Light;
    case DeviceKind::MotionSensor: return wire::SensorId::Motion;
    default: return std::nullopt;
  }
}

std::string format_value(const Device& device) {
  switch (device.kind) {
    case DeviceKind::TemperatureSensor: return fmt::format("{:.2f}", device.value);
    case DeviceKind::CameraGimbal: return fmt::format("{:g},{:g}", device.value, device.tilt);
    default: return fmt::format("{}", std::llround(device.value));
  }
}

void Registry::add(Device device) {
  if (device.name.empty() ||
      std::any_of(device.name.begin(), device.name.end(), [](unsigned char c) { return std::isspace(c); })) {
    throw std::invalid_argument(fmt::format("invalid device name '{}'", device.name));
  }
  if (find(device.name)) throw std::invalid_argument(fmt::format("duplicate device name '{}'", device.name));
  if (auto sensor = sensor_of(device.kind)) {
    if (find_sensor(device.node, *sensor)) {
      throw std::invalid_argument(
          fmt::format("node {} already has a {} sensor", device.node, wire::to_string(*sensor)));
    }
  }
  devices_.push_back(std::move(device));
}

bool Registry::remove(std::string_view name) {
  auto it = std::find_if(devices_.begin(), devices_.end(), [&](const Device& d) { return d.name == name; });
  if (it == devices_.end()) return false;
  devices_.erase(it);
  return true;
}

Device* Registry::find(std::string_view name) {
  auto it = std::find_if(devices_.begin(), devices_.end(), [&](const Device& d) { return d.name == name; });
  return it == devices_.end() ? nullptr : &*it;
}

const Device* Registry::find(std::string_view name) const {
  return const_cast<Registry*>(this)->find(name);
}

Device* Registry::find_sensor(wire::NodeAddress node, wire::SensorId sensor) {
  auto it = std::find_if(devices_.begin(), devices_.end(),
                         [&](const Device& d) { return d.node == node && sensor_of(d.kind) == sensor; });
  return it == devices_.end() ? nullptr : &*it;
}

std::optional<Setting> parse_setting(std::string_view text) {
  auto next_word = [&text]() -> std::string_view {
    auto start = text.find_first_not_of(" \t");
    if (start == std::string_view::npos) {
      text = {};
      return {};
    }
    text.remove_prefix(start);
    auto end = text.find_first_of(" \t");
    auto word = text.substr(0, end);
    text.remove_prefix(end == std::string_view::npos ? text.size() : end);
    return word;
  };
  Setting s;
  s.device = std::string(next_word());
  s.property = std::string(next_word());
  auto start = text.find_first_not_of(" \t");
  auto end = text.find_last_not_of(" \t");
  if (start != std::string_view::npos) s.value = std::string(text.substr(start, end - start + 1));
  if (s.device.empty() || s.property.empty() || s.value.empty()) return std::nullopt;
  return s;
}

const char* to_string(Severity severity) { return severity == Severity::Alert ? "Alert" : "Info"; }

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Intrusion: return "Intrusion";
    case EventKind::ThresholdLow: return "ThresholdLow";
    case EventKind::ThresholdHigh: return "ThresholdHigh";
    case EventKind::TimerFired: return "TimerFired";
    case EventKind::ModeChanged: return "ModeChanged";
    case EventKind::LimitReached: return "LimitReached";
    case EventKind::DeliveryFailed: return "DeliveryFailed";
    case EventKind::AuthFailure: return "AuthFailure";
    case EventKind::UnknownDevice: return "UnknownDevice";
    case EventKind::RuleSuspended: return "RuleSuspended";
    case EventKind::SensorStale: return "SensorStale";
    case EventKind::ModeEntrySkipped: return "ModeEntrySkipped";
    case EventKind::StoreRecovered: return "StoreRecovered";
    case EventKind::CommandRejected: return "CommandRejected";
  }
  return "?";
}

}  // namespace whan::home
