#pragma once

// Line-oriented scenario files:
//
//   # comment
//   [sim]
//   start = 2013-07-01T12:00:00
//   [node]
//   address = 1
//   device = lamp1 lamp
//
// Repeatable sections: [node] [rule] [mode] [event] [user].
// Singletons: [sim] [env] [link] [ap].

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "whan/access_point.hpp"
#include "whan/device_sim.hpp"
#include "whan/home/device.hpp"
#include "whan/home/modes.hpp"
#include "whan/home/rules.hpp"
#include "whan/radio.hpp"

namespace whan::scenario {

class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

struct NodeSpec {
  wire::NodeAddress address = 0;
  radio::Position position;
  sim::RoomEnv env;
  Millis report_period = 5 * kSecond;
  std::vector<home::Device> devices;
  int line = 0;
};

enum class EventKind { HotAir, LightCover, BrightSource, WalkPast };

const char* to_string(EventKind kind);

struct EventSpec {
  EventKind kind = EventKind::HotAir;
  wire::NodeAddress node = 0;
  Millis at = 0;  // absolute simulated time
  Millis duration = 0;
  double amount = 0.0;  // degC/s, light factor, or light boost
  int line = 0;
};

struct UserSpec {
  std::string name;
  std::string password;
};

struct Scenario {
  Millis start = 1372680000LL * kSecond;  // 2013-07-01T12:00:00Z
  std::uint64_t seed = 1;
  Millis tick = 100;
  double injected_loss = 0.0;

  sim::EnvParams env;
  radio::LinkParams link;
  radio::Position ap_position;
  ap::ApConfig ap;

  std::vector<NodeSpec> nodes;
  std::vector<home::Rule> rules;
  std::vector<home::ModeConfig> modes;
  std::vector<EventSpec> events;
  std::vector<UserSpec> users;
};

/// Throws ScenarioError naming the offending line.
Scenario parse_scenario(std::string_view text);

/// Throws std::runtime_error if the file cannot be read, ScenarioError if it
/// does not parse.
Scenario load_scenario(const std::filesystem::path& path);

std::string_view demo_scenario_text();
Scenario demo_scenario();

home::Registry build_registry(const Scenario& scenario);
home::RuleEngine build_rules(const Scenario& scenario);

/// Moves the scripted events into each node's room environment.
void schedule_events(Scenario& scenario);

}  // namespace whan::scenario
