#pragma once

// Wires the simulated radio side (rooms, end devices, channel, AP) to the
// home server over a serial byte stream and steps both on one clock.
//
// Per tick, in order:
//   1. rooms advance over the elapsed interval
//   2. the AP reads server commands from the serial stream
//   3. AP transmissions (acks, commands, retries) reach the end devices
//   4. end devices tick; their frames cross the channel to the AP, whose
//      serial output goes to the server
//   5. the server ingests, runs rules and queues commands

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>

#include "whan/access_point.hpp"
#include "whan/device_sim.hpp"
#include "whan/home/home_core.hpp"
#include "whan/radio.hpp"
#include "whan/scenario.hpp"
#include "whan/serial_link.hpp"

namespace whan {

class SimulatedNetwork {
 public:
  /// Takes the scenario's nodes and schedules its scripted events.
  SimulatedNetwork(scenario::Scenario scenario, serial::ByteStream& serial);

  /// Advances the radio side to `now` (one tick since the previous call).
  void step(Millis now);

  Millis now() const { return now_; }
  radio::Channel& channel() { return channel_; }
  ap::AccessPoint& access_point() { return ap_; }
  sim::EndDevice& end_device(wire::NodeAddress address);
  sim::RoomEnv& room(wire::NodeAddress address);
  std::vector<wire::NodeAddress> addresses() const;
  const wire::SerialDecoder& decoder() const { return decoder_; }

 private:
  struct Node {
    sim::EndDevice device;
    sim::RoomEnv env;
  };

  static radio::NodePlacement place(const scenario::Scenario& scenario);

  sim::EnvParams env_params_;
  radio::Channel channel_;
  ap::AccessPoint ap_;
  std::map<wire::NodeAddress, Node> nodes_;
  serial::ByteStream& serial_;
  wire::SerialDecoder decoder_;
  Millis now_;
};

struct SystemOptions {
  std::optional<std::filesystem::path> db_path;  // in-memory store when unset
  std::optional<std::uint64_t> seed;             // overrides the scenario's
  std::ostream* rssi_log = nullptr;
  /// Serial link to a remote simulator; when set no local network is built.
  std::unique_ptr<serial::ByteStream> remote_serial;
  home::HomeConfig home;
};

/// The whole home on one simulated clock. Single-threaded; the server
/// runtime serializes access.
class HomeSystem {
 public:
  explicit HomeSystem(scenario::Scenario scenario, SystemOptions options = {});
  ~HomeSystem();

  Millis now() const { return now_; }
  Millis start() const { return start_; }
  Millis tick_length() const { return tick_; }

  /// One tick of the clock.
  void step();
  /// Steps until now() >= t.
  void advance_to(Millis t);
  void advance_by(Millis d) { advance_to(now_ + d); }

  home::HomeCore& core() { return *core_; }
  const home::HomeCore& core() const { return *core_; }
  home::Store& store() { return *store_; }
  /// nullptr in split mode.
  SimulatedNetwork* network() { return network_.get(); }
  const scenario::Scenario& scenario() const { return scenario_; }

 private:
  scenario::Scenario scenario_;
  Millis start_;
  Millis tick_;
  Millis now_;
  std::unique_ptr<home::Store> store_;
  std::unique_ptr<serial::ByteStream> server_end_;
  std::unique_ptr<serial::ByteStream> network_end_;
  std::unique_ptr<SimulatedNetwork> network_;
  std::unique_ptr<home::HomeCore> core_;
};

}  // namespace whan
