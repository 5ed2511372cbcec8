#include "whan/home/rules.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

namespace whan::home {

const char* to_string(RuleKind kind) {
  switch (kind) {
    case RuleKind::LowThreshold: return "low";
    case RuleKind::HighThreshold: return "high";
    case RuleKind::Timer: return "timer";
    case RuleKind::Binding: return "binding";
  }
  return "?";
}

const char* to_string(Comparison cmp) {
  switch (cmp) {
    case Comparison::Less: return "<";
    case Comparison::LessEqual: return "<=";
    case Comparison::Greater: return ">";
    case Comparison::GreaterEqual: return ">=";
    case Comparison::Equal: return "==";
    case Comparison::NotEqual: return "!=";
  }
  return "?";
}

std::optional<Comparison> parse_comparison(std::string_view text) {
  if (text == "<") return Comparison::Less;
  if (text == "<=") return Comparison::LessEqual;
  if (text == ">") return Comparison::Greater;
  if (text == ">=") return Comparison::GreaterEqual;
  if (text == "==" || text == "=") return Comparison::Equal;
  if (text == "!=") return Comparison::NotEqual;
  return std::nullopt;
}

bool compare(double value, Comparison cmp, double operand) {
  switch (cmp) {
    case Comparison::Less: return value < operand;
    case Comparison::LessEqual: return value <= operand;
    case Comparison::Greater: return value > operand;
    case Comparison::GreaterEqual: return value >= operand;
    case Comparison::Equal: return value == operand;
    case Comparison::NotEqual: return value != operand;
  }
  return false;
}

void mark_timer_passed(Rule& rule, Millis now) {
  const auto sod = seconds_of_day(now);
  const auto day = day_index(now);
  if (rule.on_time && *rule.on_time <= sod) rule.on_fired_day = day;
  if (rule.off_time && *rule.off_time <= sod) rule.off_fired_day = day;
}

void RuleOutput::append(RuleOutput other) {
  commands.insert(commands.end(), std::make_move_iterator(other.commands.begin()),
                  std::make_move_iterator(other.commands.end()));
  events.insert(events.end(), std::make_move_iterator(other.events.begin()),
                std::make_move_iterator(other.events.end()));
}

void RuleEngine::add(Rule rule) {
  if (find(rule.id)) throw std::invalid_argument(fmt::format("duplicate rule id '{}'", rule.id));
  rules_.push_back(std::move(rule));
}

bool RuleEngine::remove(std::string_view id) {
  auto it = std::find_if(rules_.begin(), rules_.end(), [&](const Rule& r) { return r.id == id; });
  if (it == rules_.end()) return false;
  rules_.erase(it);
  return true;
}

Rule* RuleEngine::find(std::string_view id) {
  auto it = std::find_if(rules_.begin(), rules_.end(), [&](const Rule& r) { return r.id == id; });
  return it == rules_.end() ? nullptr : &*it;
}

bool RuleEngine::target_ok(const Registry& registry, Rule& rule, const Setting& action, Millis now,
                           RuleOutput& out) {
  if (registry.find(action.device)) return true;
  rule.suspended = true;
  out.events.push_back({now, Severity::Alert, EventKind::RuleSuspended,
                        fmt::format("rule {}: target {} missing", rule.id, action.device)});
  return false;
}

RuleOutput RuleEngine::evaluate(const Registry& registry, const Device& changed, std::optional<double> previous,
                                Millis now) {
  RuleOutput out;
  const double value = changed.value;

  if (changed.kind == DeviceKind::MotionSensor && value >= 1.0 && previous.value_or(0.0) < 1.0 &&
      changed.armed) {
    out.events.push_back({now, Severity::Alert, EventKind::Intrusion, fmt::format("motion at {}", changed.name)});
  }

  for (auto& rule : rules_) {
    if (rule.suspended || rule.source != changed.name) continue;
    switch (rule.kind) {
      case RuleKind::LowThreshold:
      case RuleKind::HighThreshold: {
        const bool low = rule.kind == RuleKind::LowThreshold;
        if (rule.armed) {
          const bool crossed = low ? value < rule.threshold : value > rule.threshold;
          if (!crossed) break;
          rule.armed = false;
          out.events.push_back({now, Severity::Alert, low ? EventKind::ThresholdLow : EventKind::ThresholdHigh,
                                fmt::format("{} {} {} {:g}", changed.name, format_value(changed), low ? "<" : ">",
                                            rule.threshold)});
          if (rule.action && target_ok(registry, rule, *rule.action, now, out)) {
            out.commands.push_back(*rule.action);
          }
        } else {
          const bool rearm = low ? value >= rule.threshold + rule.hysteresis
                                 : value <= rule.threshold - rule.hysteresis;
          if (rearm) rule.armed = true;
        }
        break;
      }
      case RuleKind::Binding: {
        const bool now_true = compare(value, rule.comparison, rule.threshold);
        const bool changed_state = rule.predicate != now_true;
        const bool first = !rule.predicate.has_value();
        rule.predicate = now_true;
        if (!changed_state) break;
        const auto& action = now_true ? rule.action : rule.release_action;
        if (first && !now_true) break;
        if (action && target_ok(registry, rule, *action, now, out)) out.commands.push_back(*action);
        break;
      }
      case RuleKind::Timer: break;
    }
  }
  return out;
}

RuleOutput RuleEngine::run_timers(const Registry& registry, Millis now) {
  RuleOutput out;
  const auto sod = seconds_of_day(now);
  const auto day = day_index(now);
  for (auto& rule : rules_) {
    if (rule.kind != RuleKind::Timer || rule.suspended) continue;

    struct Instant {
      std::int64_t at;
      std::int64_t* fired_day;
      const char* state;
    };
    std::vector<Instant> due;
    if (rule.on_time && *rule.on_time <= sod && rule.on_fired_day != day) {
      due.push_back({*rule.on_time, &rule.on_fired_day, "on"});
    }
    if (rule.off_time && *rule.off_time <= sod && rule.off_fired_day != day) {
      due.push_back({*rule.off_time, &rule.off_fired_day, "off"});
    }
    std::sort(due.begin(), due.end(), [](const Instant& a, const Instant& b) { return a.at < b.at; });

    for (const auto& instant : due) {
      *instant.fired_day = day;
      Setting action{rule.target, "state", instant.state};
      if (!target_ok(registry, rule, action, now, out)) break;
      out.events.push_back({now, Severity::Info, EventKind::TimerFired,
                            fmt::format("{} {} at {}", rule.target, instant.state, format_time_of_day(instant.at))});
      out.commands.push_back(std::move(action));
    }
  }
  return out;
}

ThermostatDecision thermostat_step(double set_point, double band, double temperature, DeviceState heater,
                                   Millis reading_age, Millis max_age) {
  if (reading_age > max_age) return {std::nullopt, true};
  const double half = band / 2.0;
  if (temperature < set_point - half && heater != DeviceState::On) return {true, false};
  if (temperature > set_point + half && heater != DeviceState::Off) return {false, false};
  return {};
}

}  // namespace whan::home
