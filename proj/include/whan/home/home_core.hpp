#pragma once

// The home server's brain. Owns the device registry, rule engine and modes,
// talks to the access point over a serial byte stream and persists samples
// and events. Not thread-safe: one owner serializes every call.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "whan/home/device.hpp"
#include "whan/home/modes.hpp"
#include "whan/home/rules.hpp"
#include "whan/home/store.hpp"
#include "whan/serial_link.hpp"
#include "whan/wire.hpp"

namespace whan::home {

using SessionId = std::uint64_t;

struct ReadingNote {
  std::string device;
  Millis ts = 0;
  std::string value;
  int rssi = 0;
};

struct StateNote {
  std::string device;
  DeviceState state = DeviceState::Unknown;
  std::string value;
  std::optional<SessionId> origin;
};

struct EventNote {
  EventRecord event;
  std::optional<SessionId> origin;
};

using Notification = std::variant<ReadingNote, StateNote, EventNote>;

/// Numeric values double as the client protocol's ERR codes.
enum class Status { Ok = 0, Malformed = 400, Unauthenticated = 401, UnknownDevice = 404, Rejected = 409 };

struct SubmitResult {
  Status status = Status::Ok;
  std::optional<std::uint32_t> txid;  // set for commands that go over the air
  std::string message;

  bool ok() const { return status == Status::Ok; }
};

struct HomeConfig {
  Millis stale_after = 30 * kSecond;
};

struct HomeStats {
  std::uint64_t readings = 0;
  std::uint64_t unknown_readings = 0;
  std::uint64_t samples_rejected = 0;  // older than what the store already holds
  std::uint64_t commands_sent = 0;
  std::uint64_t commands_acked = 0;
  std::uint64_t commands_failed = 0;
  std::uint64_t serial_bad_checksum = 0;
};

class HomeCore {
 public:
  HomeCore(Registry registry, RuleEngine rules, std::vector<ModeConfig> modes, Store& store,
           serial::ByteStream& serial, HomeConfig config = {});

  void set_listener(std::function<void(const Notification&)> listener) { listener_ = std::move(listener); }

  /// Records store recovery alerts, syncs modes with the store.
  void boot(Millis now);

  /// Drains the serial link, then runs timers, mode triggers and staleness checks.
  void tick(Millis now);

  /// Routes a setting: actuator commands go to the AP, the rest apply locally.
  SubmitResult submit(const Setting& setting, std::optional<SessionId> origin, Millis now);

  SubmitResult apply_mode(std::string_view name, Millis now);

  void log_event(EventRecord event, std::optional<SessionId> origin = std::nullopt);

  /// nullopt when the device is unknown.
  std::optional<std::vector<SensorSample>> query_history(std::string_view device, Millis from, Millis to) const;

  const Registry& registry() const { return registry_; }
  const RuleEngine& rules() const { return rules_; }
  const std::vector<ModeConfig>& modes() const { return modes_; }
  const std::optional<std::string>& current_mode() const { return current_mode_; }
  const Store& store() const { return store_; }
  Store& store() { return store_; }
  const HomeStats& stats() const { return stats_; }
  const std::optional<wire::ApStatus>& ap_status() const { return ap_status_; }
  bool in_flight(std::string_view device) const;

 private:
  struct PendingCommand {
    std::uint32_t seq = 0;
    std::string device;
    wire::NodeAddress dst = 0;
    wire::CommandPayload command;
    std::optional<SessionId> origin;
  };

  void dispatch(const wire::SerialFrame& frame, Millis now);
  void ingest_reading(const wire::UplinkReading& up, Millis now);
  void on_report(const wire::CommandReport& report, Millis now);
  void apply_ack(const PendingCommand& cmd, Millis now);
  void run(RuleOutput output, Millis now, std::string_view cause);
  void regulate(const Device& heater, Millis now);
  void check_staleness(Millis now);
  void notify(Notification note);
  SubmitResult send(Device& device, wire::CommandPayload command, std::optional<SessionId> origin);
  SubmitResult apply_local(Device& device, const Setting& setting, Millis now);

  Registry registry_;
  RuleEngine rules_;
  std::vector<ModeConfig> modes_;
  std::vector<TriggerTracker> trackers_;
  Store& store_;
  serial::ByteStream& serial_;
  HomeConfig config_;
  std::function<void(const Notification&)> listener_;

  wire::SerialDecoder decoder_;
  std::uint32_t next_seq_ = 1;
  std::deque<std::uint32_t> awaiting_txid_;
  std::map<std::uint32_t, PendingCommand> pending_;
  std::map<std::pair<wire::NodeAddress, wire::TxId>, std::uint32_t> by_txid_;
  std::map<std::string, bool, std::less<>> stale_;
  std::optional<std::string> current_mode_;
  std::optional<wire::ApStatus> ap_status_;
  Millis boot_time_ = 0;
  HomeStats stats_;
};

}  // namespace whan::home
