#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "whan/home/device.hpp"
#include "whan/sim_time.hpp"

namespace whan::home {

/// Time window (may wrap midnight) plus a sustained dark-room condition.
struct ModeTrigger {
  std::int64_t window_start = 21 * 3600;
  std::int64_t window_end = 6 * 3600;
  std::string light_device;
  double light_below = 20.0;
  Millis sustain = 60 * kSecond;
};

struct ModeConfig {
  std::string name;
  std::vector<Setting> entries;
  std::optional<ModeTrigger> trigger;
};

bool in_window(const ModeTrigger& trigger, Millis now);

/// Identifies one occurrence of the window: the day index on which it opened.
std::int64_t window_occurrence(const ModeTrigger& trigger, Millis now);

/// Per-mode trigger state; fires at most once per window occurrence.
class TriggerTracker {
 public:
  /// `light` is the latest light reading (nullopt if none yet).
  bool step(const ModeTrigger& trigger, std::optional<double> light, Millis now);

 private:
  Millis below_since_ = INT64_MIN;
  std::int64_t fired_occurrence_ = INT64_MIN;
};

/// The Night Mode shipped with the demo home: heating and lighting on.
ModeConfig default_night_mode(const Registry& registry, std::string light_device);

}  // namespace whan::home
