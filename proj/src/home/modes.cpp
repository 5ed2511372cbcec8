#include "whan/home/modes.hpp"

namespace whan::home {

bool in_window(const ModeTrigger& trigger, Millis now) {
  const auto sod = seconds_of_day(now);
  if (trigger.window_start <= trigger.window_end) {
    return sod >= trigger.window_start && sod < trigger.window_end;
  }
  return sod >= trigger.window_start || sod < trigger.window_end;
}

std::int64_t window_occurrence(const ModeTrigger& trigger, Millis now) {
  const auto day = day_index(now);
  const bool wraps = trigger.window_start > trigger.window_end;
  if (wraps && seconds_of_day(now) < trigger.window_end) return day - 1;
  return day;
}

bool TriggerTracker::step(const ModeTrigger& trigger, std::optional<double> light, Millis now) {
  if (!light || *light >= trigger.light_below) {
    below_since_ = INT64_MIN;
    return false;
  }
  if (below_since_ == INT64_MIN) below_since_ = now;
  if (!in_window(trigger, now) || now - below_since_ < trigger.sustain) return false;
  const auto occurrence = window_occurrence(trigger, now);
  if (occurrence == fired_occurrence_) return false;
  fired_occurrence_ = occurrence;
  return true;
}

ModeConfig default_night_mode(const Registry& registry, std::string light_device) {
  ModeConfig mode;
  mode.name = "Night Mode";
  for (const auto& d : registry.all()) {
    if (d.kind == DeviceKind::Heater || d.kind == DeviceKind::Lamp) mode.entries.push_back({d.name, "state", "on"});
  }
  ModeTrigger trigger;
  trigger.light_device = std::move(light_device);
  mode.trigger = trigger;
  return mode;
}

}  // namespace whan::home
