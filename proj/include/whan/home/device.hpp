#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "whan/sim_time.hpp"
#include "whan/wire.hpp"

namespace whan::home {

enum class DeviceKind { TemperatureSensor, LightSensor, MotionSensor, Lamp, Heater, CameraGimbal };
enum class DeviceState { On, Off, Unknown };
enum class DeviceGroup { Sensor, Actuator };

const char* to_string(DeviceKind kind);
const char* to_string(DeviceState state);
const char* to_string(DeviceGroup group);

/// Accepts the short scenario names (temperature, light, motion, lamp,
/// heater, gimbal) as well as the full kind names.
std::optional<DeviceKind> parse_device_kind(std::string_view text);

DeviceGroup group_of(DeviceKind kind);
std::optional<wire::SensorId> sensor_of(DeviceKind kind);

/// Logical home device, mirrored from what the end devices report and ack.
/// "Unknown" state means no reading or ack has been seen yet.
struct Device {
  std::string name;
  DeviceKind kind = DeviceKind::TemperatureSensor;
  DeviceState state = DeviceState::Unknown;
  double value = 0.0;  // degC, light %, motion 0/1, lamp level %, heater 0/1, gimbal pan deg
  std::optional<double> set_point;
  wire::NodeAddress node = 0;

  bool armed = true;              // motion sensors: raise intrusion alerts
  double tilt = 0.0;              // camera gimbal only
  std::string thermostat_sensor;  // heaters: temperature device driving the set point
  double band = 1.0;              // heaters: thermostat dead band, degC
  Millis updated_at = kNeverSeen;

  static constexpr Millis kNeverSeen = INT64_MIN;

  DeviceGroup group() const { return group_of(kind); }
};

/// Text form used on the wire and in the UI: "23.00", "88", "10,-5" (pan,tilt).
std::string format_value(const Device& device);

class Registry {
 public:
  /// Throws std::invalid_argument on a duplicate name, a name containing
  /// whitespace, or a second sensor of the same type on one node.
  void add(Device device);
  bool remove(std::string_view name);

  Device* find(std::string_view name);
  const Device* find(std::string_view name) const;
  Device* find_sensor(wire::NodeAddress node, wire::SensorId sensor);

  const std::vector<Device>& all() const { return devices_; }
  std::vector<Device>& all() { return devices_; }
  std::size_t size() const { return devices_.size(); }

 private:
  std::vector<Device> devices_;
};

/// A textual "<device> <property> <value>" instruction: what clients send,
/// what modes store and what rules fire.
struct Setting {
  std::string device;
  std::string property;
  std::string value;

  bool operator==(const Setting&) const = default;
  std::string str() const { return device + " " + property + " " + value; }
};

/// Parses "device property value"; the value may contain spaces.
std::optional<Setting> parse_setting(std::string_view text);

enum class Severity : std::uint8_t { Info = 0, Alert = 1 };

enum class EventKind : std::uint8_t {
  Intrusion = 0,
  ThresholdLow,
  ThresholdHigh,
  TimerFired,
  ModeChanged,
  LimitReached,
  DeliveryFailed,
  AuthFailure,
  UnknownDevice,
  RuleSuspended,
  SensorStale,
  ModeEntrySkipped,
  StoreRecovered,
  CommandRejected,
};

inline constexpr std::uint8_t kEventKindCount = 14;

const char* to_string(Severity severity);
const char* to_string(EventKind kind);

struct EventRecord {
  Millis ts = 0;
  Severity severity = Severity::Info;
  EventKind kind = EventKind::Intrusion;
  std::string detail;

  bool operator==(const EventRecord&) const = default;
};

}  // namespace whan::home
