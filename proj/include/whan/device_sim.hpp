#pragma once

// Simulated end devices and the rooms they sit in.

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "whan/sim_time.hpp"
#include "whan/wire.hpp"

namespace whan::sim {

// ---------------------------------------------------------------------------
// Room environment
// ---------------------------------------------------------------------------

struct EnvParams {
  double k_loss = 0.001;    // 1/s, heat loss towards outside
  double k_heat = 0.02;     // degC/s while the heater is on
  double outside_c = 10.0;
};

/// Half-open activity window [start, start + duration).
struct TimedWindow {
  Millis start = 0;
  Millis duration = 0;

  Millis end() const { return start + duration; }
  bool active(Millis now) const { return now >= start && now < end(); }
};

struct HeatEvent {
  TimedWindow window;
  double delta_c_per_s = 0.0;
};

enum class LightEffect { Scale, Boost };

struct LightModifier {
  TimedWindow window;
  LightEffect effect = LightEffect::Scale;
  double amount = 1.0;
};

struct OccupancyEvent {
  TimedWindow window;
};

struct LightPoint {
  std::int64_t second_of_day = 0;
  double percent = 0.0;
};

struct RoomEnv {
  double temperature_c = 21.0;
  double ambient_light = 50.0;       // base level, before modifiers
  std::vector<LightPoint> diurnal;   // empty: ambient_light stays put
  std::vector<HeatEvent> heat_events;
  std::vector<LightModifier> light_modifiers;
  std::vector<OccupancyEvent> occupancy;
};

/// Linear interpolation around the 24 h circle. Requires a non-empty profile.
double diurnal_light(const std::vector<LightPoint>& profile, Millis now);

/// Ambient light with every active modifier applied, clamped to [0, 100].
double light_level(const RoomEnv& env, Millis now);

/// One explicit Euler step over [now, now + dt).
RoomEnv step_env(RoomEnv env, bool heater_on, Millis now, double dt_s, const EnvParams& params);

// ---------------------------------------------------------------------------
// End-device state and actuators
// ---------------------------------------------------------------------------

inline constexpr double kTiltLimitDeg = 151.5;  // half of the 303 deg mechanism travel
inline constexpr Millis kNever = std::numeric_limits<Millis>::min();

enum class RadioMode { Sleep, Active };

struct EndDeviceState {
  wire::NodeAddress address = 0;
  bool lamp_on = false;
  int lamp_level = 0;
  bool heater_on = false;
  double pan = 0.0;   // [0, 360)
  double tilt = 0.0;  // [-151.5, +151.5]
  Millis motion_latch_until = kNever;
  RadioMode radio_mode = RadioMode::Sleep;
  wire::TxId txid_counter = 0;

  bool operator==(const EndDeviceState&) const = default;
};

double wrap_pan(double degrees);

struct TiltStep {
  double tilt = 0.0;
  bool clamped = false;
};

TiltStep step_tilt(double tilt, double delta);

struct ActuatorOutcome {
  EndDeviceState state;
  bool limit_reached = false;
  std::optional<std::string> error;  // set when the command was rejected
};

ActuatorOutcome apply_actuator(EndDeviceState state, const wire::CommandPayload& command);

/// Throws std::invalid_argument for an unknown sensor id.
wire::ReadingPayload read_sensor(const EndDeviceState& ed, const RoomEnv& env, wire::SensorId sensor,
                                 Millis now);

// ---------------------------------------------------------------------------
// Power accounting
// ---------------------------------------------------------------------------

struct PowerProfile {
  double temp_sensor_ua = 2.26;
  double motion_sensor_ua = 1.90;
  double light_sensor_ua = 2.16;
  double ed_active_ma = 23.50;
  double expansion_a = 2.10;
  double radio_sleep_ua = 1.9;
  double camera_motor_a = 0.86;
  int camera_motors = 2;

  double temp_sensor_v = 2.9492;
  double motion_sensor_v = 2.9121;
  double light_sensor_v = 0.5323;
  double ed_v = 3.0430;
  double expansion_v = 5.0708;
};

/// Average current in mA for a radio active fraction in [0, 1]. Asleep, the
/// node draws radio sleep current plus the three sensors.
double duty_cycle_current(const PowerProfile& profile, double active_fraction);

/// Expansion-board current not attributed to the camera motors.
double other_expansion_load_a(const PowerProfile& profile);

struct PowerRow {
  std::string component;
  double current_a = 0.0;
  double voltage_v = 0.0;
  double power_w() const { return current_a * voltage_v; }
};

std::vector<PowerRow> power_table(const PowerProfile& profile);

// ---------------------------------------------------------------------------
// End device node
// ---------------------------------------------------------------------------

struct EdConfig {
  wire::NodeAddress address = 1;
  std::set<wire::SensorId> sensors;
  Millis report_period = 5 * kSecond;
  int retry_count = 3;
  Millis retry_spacing = 200;
  Millis motion_latch = 3 * kSecond;
};

enum class EdEventKind { DeliveryFailed, LimitReached, CommandRejected };

struct EdEvent {
  Millis at = 0;
  EdEventKind kind = EdEventKind::DeliveryFailed;
  std::string detail;
};

struct EdStats {
  std::uint64_t readings_sent = 0;
  std::uint64_t retransmissions = 0;
  std::uint64_t delivery_failures = 0;
  std::uint64_t commands_applied = 0;
  std::uint64_t duplicate_commands = 0;
  std::uint64_t acks_received = 0;
  std::uint64_t active_ticks = 0;
  std::uint64_t ticks = 0;
};

class EndDevice {
 public:
  EndDevice(EdConfig config, Millis start);

  /// Advances the node to `now`: consumes frames heard this tick, emits
  /// readings (periodic plus motion edges), acks and retransmissions.
  std::vector<wire::RadioFrame> tick(const RoomEnv& env, Millis now,
                                     std::span<const wire::RadioFrame> inbound);

  const EndDeviceState& state() const { return state_; }
  const EdConfig& config() const { return config_; }
  const EdStats& stats() const { return stats_; }
  const std::vector<EdEvent>& events() const { return events_; }
  std::size_t pending() const { return pending_.size(); }

  double active_fraction() const {
    return stats_.ticks == 0 ? 0.0 : static_cast<double>(stats_.active_ticks) / stats_.ticks;
  }

 private:
  struct Pending {
    wire::RadioFrame frame;
    int retries_left = 0;
    Millis next_retry = 0;
  };

  wire::TxId fresh_txid();
  wire::RadioFrame send_reading(const RoomEnv& env, wire::SensorId sensor, Millis now);

  EdConfig config_;
  EndDeviceState state_;
  EdStats stats_;
  std::vector<EdEvent> events_;
  wire::DedupState dedup_;
  std::map<wire::TxId, Pending> pending_;
  Millis next_report_;
  int reported_motion_ = -1;
};

}  // namespace whan::sim
