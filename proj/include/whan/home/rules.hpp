#pragma once

#include <optional>
#include <string>
#include <vector>

#include "whan/home/device.hpp"
#include "whan/sim_time.hpp"

namespace whan::home {

enum class RuleKind { LowThreshold, HighThreshold, Timer, Binding };
enum class Comparison { Less, LessEqual, Greater, GreaterEqual, Equal, NotEqual };

const char* to_string(RuleKind kind);
const char* to_string(Comparison cmp);
std::optional<Comparison> parse_comparison(std::string_view text);
bool compare(double value, Comparison cmp, double operand);

struct Rule {
  std::string id;
  RuleKind kind = RuleKind::LowThreshold;

  // Threshold and binding rules watch a sensor.
  std::string source;
  double threshold = 0.0;
  double hysteresis = 2.0;
  Comparison comparison = Comparison::Greater;  // binding predicate
  std::optional<Setting> action;          // threshold fire / binding becomes true
  std::optional<Setting> release_action;  // binding becomes false

  // Timer rules switch a device at fixed times of day.
  std::string target;
  std::optional<std::int64_t> on_time;
  std::optional<std::int64_t> off_time;

  bool armed = true;
  bool suspended = false;

  // Evaluation state.
  std::optional<bool> predicate;
  std::int64_t on_fired_day = INT64_MIN;
  std::int64_t off_fired_day = INT64_MIN;
};

/// Marks timer instants already passed on the day of `now` as fired, so a
/// timer edited at run time does not fire retroactively. Rules loaded at
/// boot skip this and catch up on their first tick.
void mark_timer_passed(Rule& rule, Millis now);

struct RuleOutput {
  std::vector<Setting> commands;
  std::vector<EventRecord> events;

  void append(RuleOutput other);
};

class RuleEngine {
 public:
  /// Throws std::invalid_argument for a duplicate id.
  void add(Rule rule);
  bool remove(std::string_view id);
  Rule* find(std::string_view id);

  std::vector<Rule>& rules() { return rules_; }
  const std::vector<Rule>& rules() const { return rules_; }

  /// Threshold alarms, bindings and intrusion detection for one new value.
  /// `previous` is the device value before this reading (if any).
  ///
  /// Threshold rules are edge-triggered: firing disarms the rule until the
  /// value comes back past threshold +/- hysteresis.
  RuleOutput evaluate(const Registry& registry, const Device& changed, std::optional<double> previous,
                      Millis now);

  /// Each timer instant fires once per day, the first time `now` reaches or
  /// passes it.
  RuleOutput run_timers(const Registry& registry, Millis now);

 private:
  bool target_ok(const Registry& registry, Rule& rule, const Setting& action, Millis now,
                 RuleOutput& out);

  std::vector<Rule> rules_;
};

struct ThermostatDecision {
  std::optional<bool> heater_on;  // command to issue, if any
  bool stale = false;
};

/// ON below set_point - band/2, OFF above set_point + band/2, nothing inside
/// the band or when the heater already matches. A reading older than
/// `max_age` yields no command and flags staleness.
ThermostatDecision thermostat_step(double set_point, double band, double temperature, DeviceState heater,
                                   Millis reading_age, Millis max_age = 30 * kSecond);

}  // namespace whan::home
