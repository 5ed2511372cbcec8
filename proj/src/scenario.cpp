#include "whan/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace whan::scenario {

namespace {

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    auto j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

struct Entry {
  std::string key;
  std::string value;
  int line = 0;
};

struct Section {
  std::string name;
  int line = 0;
  std::vector<Entry> entries;
};

class Reader {
 public:
  explicit Reader(const Section& s) : section_(s) {}

  [[noreturn]] void fail(const Entry& e, const std::string& msg) const { throw ScenarioError(e.line, msg); }
  [[noreturn]] void fail(const std::string& msg) const { throw ScenarioError(section_.line, msg); }

  double number(const Entry& e) const {
    double v = 0.0;
    auto text = std::string_view(e.value);
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || p != text.data() + text.size() || !std::isfinite(v)) {
      fail(e, fmt::format("{}: expected a number, got '{}'", e.key, e.value));
    }
    return v;
  }

  std::int64_t integer(const Entry& e) const {
    std::int64_t v = 0;
    auto text = std::string_view(e.value);
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || p != text.data() + text.size()) {
      fail(e, fmt::format("{}: expected an integer, got '{}'", e.key, e.value));
    }
    return v;
  }

  Millis seconds(const Entry& e) const {
    const double s = number(e);
    if (s < 0) fail(e, fmt::format("{}: must not be negative", e.key));
    return static_cast<Millis>(std::llround(s * 1000.0));
  }

  std::int64_t time_of_day(const Entry& e, std::string_view text) const {
    auto t = parse_time_of_day(text);
    if (!t) fail(e, fmt::format("{}: expected HH:MM[:SS], got '{}'", e.key, text));
    return *t;
  }

  bool flag(const Entry& e) const {
    if (e.value == "on" || e.value == "true" || e.value == "yes" || e.value == "1") return true;
    if (e.value == "off" || e.value == "false" || e.value == "no" || e.value == "0") return false;
    fail(e, fmt::format("{}: expected on/off, got '{}'", e.key, e.value));
  }

  radio::Position position(const Entry& e) const {
    auto parts = split_ws(e.value);
    if (parts.size() != 2) fail(e, "position: expected 'x y' in metres");
    Entry x{e.key, std::string(parts[0]), e.line};
    Entry y{e.key, std::string(parts[1]), e.line};
    return {number(x), number(y)};
  }

  home::Setting setting(const Entry& e) const {
    auto s = home::parse_setting(e.value);
    if (!s) fail(e, fmt::format("{}: expected 'device property value'", e.key));
    return *s;
  }

  [[noreturn]] void unknown(const Entry& e) const {
    fail(e, fmt::format("unknown key '{}' in [{}]", e.key, section_.name));
  }

 private:
  const Section& section_;
};

std::vector<Section> split_sections(std::string_view text) {
  std::vector<Section> sections;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto raw = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw ScenarioError(line_no, "malformed section header");
      sections.push_back({std::string(trim(line.substr(1, line.size() - 2))), line_no, {}});
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ScenarioError(line_no, "expected 'key = value'");
    if (sections.empty()) throw ScenarioError(line_no, "key outside of any section");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ScenarioError(line_no, "empty key");
    sections.back().entries.push_back({std::string(key), std::string(value), line_no});
  }
  return sections;
}

home::Device parse_device(const Reader& r, const Entry& e, wire::NodeAddress node) {
  auto parts = split_ws(e.value);
  if (parts.size() < 2) r.fail(e, "device: expected 'name kind [key=value...]'");
  auto kind = home::parse_device_kind(parts[1]);
  if (!kind) r.fail(e, fmt::format("device: unknown kind '{}'", parts[1]));
  home::Device d;
  d.name = std::string(parts[0]);
  d.kind = *kind;
  d.node = node;
  for (std::size_t i = 2; i < parts.size(); ++i) {
    auto eq = parts[i].find('=');
    if (eq == std::string_view::npos) r.fail(e, fmt::format("device: expected key=value, got '{}'", parts[i]));
    Entry opt{std::string(parts[i].substr(0, eq)), std::string(parts[i].substr(eq + 1)), e.line};
    if (opt.key == "sensor" && d.kind == home::DeviceKind::Heater) {
      d.thermostat_sensor = opt.value;
    } else if (opt.key == "setpoint" && d.kind == home::DeviceKind::Heater) {
      d.set_point = r.number(opt);
    } else if (opt.key == "band" && d.kind == home::DeviceKind::Heater) {
      d.band = r.number(opt);
      if (d.band <= 0) r.fail(e, "band must be positive");
    } else if (opt.key == "armed" && d.kind == home::DeviceKind::MotionSensor) {
      d.armed = r.flag(opt);
    } else {
      r.fail(e, fmt::format("device: option '{}' does not apply to {}", opt.key, parts[1]));
    }
  }
  return d;
}

std::vector<sim::LightPoint> parse_diurnal(const Reader& r, const Entry& e) {
  std::vector<sim::LightPoint> out;
  std::string_view rest = e.value;
  while (!rest.empty()) {
    auto comma = rest.find(',');
    auto item = trim(rest.substr(0, comma));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    auto parts = split_ws(item);
    if (parts.size() != 2) r.fail(e, "diurnal: expected 'HH:MM percent, ...'");
    Entry pct{e.key, std::string(parts[1]), e.line};
    out.push_back({r.time_of_day(e, parts[0]), r.number(pct)});
  }
  std::sort(out.begin(), out.end(), [](auto& a, auto& b) { return a.second_of_day < b.second_of_day; });
  return out;
}

void parse_node(Scenario& sc, const Section& s) {
  Reader r(s);
  NodeSpec node;
  node.line = s.line;
  bool have_address = false;
  std::vector<const Entry*> devices;
  for (const auto& e : s.entries) {
    if (e.key == "address") {
      auto a = r.integer(e);
      if (a <= 0 || a > 0xFFFF) r.fail(e, "address must be in 1..65535 (0 is the access point)");
      node.address = static_cast<wire::NodeAddress>(a);
      have_address = true;
    } else if (e.key == "position") {
      node.position = r.position(e);
    } else if (e.key == "temperature") {
      node.env.temperature_c = r.number(e);
    } else if (e.key == "light") {
      node.env.ambient_light = r.number(e);
    } else if (e.key == "diurnal") {
      node.env.diurnal = parse_diurnal(r, e);
    } else if (e.key == "report-period") {
      node.report_period = r.seconds(e);
      if (node.report_period <= 0) r.fail(e, "report-period must be positive");
    } else if (e.key == "device") {
      devices.push_back(&e);
    } else {
      r.unknown(e);
    }
  }
  if (!have_address) r.fail("[node] needs an address");
  for (const auto* e : devices) node.devices.push_back(parse_device(r, *e, node.address));
  sc.nodes.push_back(std::move(node));
}

void parse_rule(Scenario& sc, const Section& s) {
  Reader r(s);
  home::Rule rule;
  bool have_kind = false;
  bool have_threshold = false;
  for (const auto& e : s.entries) {
    if (e.key == "id") {
      rule.id = e.value;
    } else if (e.key == "kind") {
      have_kind = true;
      if (e.value == "low") {
        rule.kind = home::RuleKind::LowThreshold;
      } else if (e.value == "high") {
        rule.kind = home::RuleKind::HighThreshold;
      } else if (e.value == "timer") {
        rule.kind = home::RuleKind::Timer;
      } else if (e.value == "binding") {
        rule.kind = home::RuleKind::Binding;
      } else {
        r.fail(e, fmt::format("kind: expected low, high, timer or binding, got '{}'", e.value));
      }
    } else if (e.key == "source") {
      rule.source = e.value;
    } else if (e.key == "threshold" || e.key == "value") {
      rule.threshold = r.number(e);
      have_threshold = true;
    } else if (e.key == "hysteresis") {
      rule.hysteresis = r.number(e);
      if (rule.hysteresis < 0) r.fail(e, "hysteresis must not be negative");
    } else if (e.key == "compare") {
      auto c = home::parse_comparison(e.value);
      if (!c) r.fail(e, fmt::format("compare: unknown operator '{}'", e.value));
      rule.comparison = *c;
    } else if (e.key == "action") {
      rule.action = r.setting(e);
    } else if (e.key == "release") {
      rule.release_action = r.setting(e);
    } else if (e.key == "target") {
      rule.target = e.value;
    } else if (e.key == "on-time") {
      rule.on_time = r.time_of_day(e, e.value);
    } else if (e.key == "off-time") {
      rule.off_time = r.time_of_day(e, e.value);
    } else if (e.key == "armed") {
      rule.armed = r.flag(e);
    } else {
      r.unknown(e);
    }
  }
  if (rule.id.empty()) r.fail("[rule] needs an id");
  if (!have_kind) r.fail(fmt::format("rule {}: missing kind", rule.id));
  if (rule.kind == home::RuleKind::Timer) {
    if (rule.target.empty()) r.fail(fmt::format("rule {}: timer needs a target", rule.id));
    if (!rule.on_time && !rule.off_time) r.fail(fmt::format("rule {}: timer needs on-time or off-time", rule.id));
  } else {
    if (rule.source.empty()) r.fail(fmt::format("rule {}: missing source", rule.id));
    if (!have_threshold) r.fail(fmt::format("rule {}: missing threshold", rule.id));
    if (rule.kind == home::RuleKind::Binding && !rule.action && !rule.release_action) {
      r.fail(fmt::format("rule {}: binding needs an action", rule.id));
    }
  }
  if (std::any_of(sc.rules.begin(), sc.rules.end(), [&](const home::Rule& x) { return x.id == rule.id; })) {
    r.fail(fmt::format("duplicate rule id '{}'", rule.id));
  }
  sc.rules.push_back(std::move(rule));
}

void parse_mode(Scenario& sc, const Section& s) {
  Reader r(s);
  home::ModeConfig mode;
  home::ModeTrigger trigger;
  bool triggered = false;
  for (const auto& e : s.entries) {
    if (e.key == "name") {
      mode.name = e.value;
    } else if (e.key == "entry") {
      mode.entries.push_back(r.setting(e));
    } else if (e.key == "window") {
      auto dash = e.value.find('-');
      if (dash == std::string::npos) r.fail(e, "window: expected HH:MM-HH:MM");
      trigger.window_start = r.time_of_day(e, trim(std::string_view(e.value).substr(0, dash)));
      trigger.window_end = r.time_of_day(e, trim(std::string_view(e.value).substr(dash + 1)));
      triggered = true;
    } else if (e.key == "light-sensor") {
      trigger.light_device = e.value;
      triggered = true;
    } else if (e.key == "light-below") {
      trigger.light_below = r.number(e);
      triggered = true;
    } else if (e.key == "sustain") {
      trigger.sustain = r.seconds(e);
      triggered = true;
    } else {
      r.unknown(e);
    }
  }
  if (mode.name.empty()) r.fail("[mode] needs a name");
  if (triggered) {
    if (trigger.light_device.empty()) r.fail(fmt::format("mode {}: trigger needs light-sensor", mode.name));
    mode.trigger = trigger;
  }
  if (std::any_of(sc.modes.begin(), sc.modes.end(), [&](const home::ModeConfig& m) { return m.name == mode.name; })) {
    r.fail(fmt::format("duplicate mode '{}'", mode.name));
  }
  sc.modes.push_back(std::move(mode));
}

void parse_event(Scenario& sc, const Section& s) {
  Reader r(s);
  EventSpec ev;
  ev.line = s.line;
  std::optional<Entry> at;
  bool have_kind = false;
  bool have_amount = false;
  bool have_node = false;
  for (const auto& e : s.entries) {
    if (e.key == "kind") {
      have_kind = true;
      if (e.value == "hot-air") {
        ev.kind = EventKind::HotAir;
      } else if (e.value == "light-cover") {
        ev.kind = EventKind::LightCover;
      } else if (e.value == "bright-source") {
        ev.kind = EventKind::BrightSource;
      } else if (e.value == "walk-past") {
        ev.kind = EventKind::WalkPast;
      } else {
        r.fail(e, fmt::format("kind: unknown event '{}'", e.value));
      }
    } else if (e.key == "node") {
      auto a = r.integer(e);
      if (a <= 0 || a > 0xFFFF) r.fail(e, "node: not a node address");
      ev.node = static_cast<wire::NodeAddress>(a);
      have_node = true;
    } else if (e.key == "at") {
      at = e;
    } else if (e.key == "duration") {
      ev.duration = r.seconds(e);
    } else if (e.key == "rate" || e.key == "factor" || e.key == "boost") {
      ev.amount = r.number(e);
      have_amount = true;
    } else {
      r.unknown(e);
    }
  }
  if (!have_kind) r.fail("[event] needs a kind");
  if (!have_node) r.fail("[event] needs a node");
  if (!at) r.fail("[event] needs 'at'");
  if (!have_amount) {
    switch (ev.kind) {
      case EventKind::HotAir: r.fail("hot-air event needs a rate (degC/s)");
      case EventKind::LightCover: ev.amount = 0.09; break;
      case EventKind::BrightSource: ev.amount = 8.0; break;
      case EventKind::WalkPast: break;
    }
  }
  // "+N" is seconds after start; "HH:MM[:SS]" is the first such time at or after start.
  if (!at->value.empty() && at->value.front() == '+') {
    Entry offset{at->key, at->value.substr(1), at->line};
    ev.at = sc.start + r.seconds(offset);
  } else {
    const auto tod = r.time_of_day(*at, at->value);
    auto t = day_index(sc.start) * kDay + tod * kSecond;
    if (t < sc.start) t += kDay;
    ev.at = t;
  }
  sc.events.push_back(ev);
}

void parse_user(Scenario& sc, const Section& s) {
  Reader r(s);
  UserSpec u;
  for (const auto& e : s.entries) {
    if (e.key == "name") {
      u.name = e.value;
    } else if (e.key == "password") {
      u.password = e.value;
    } else {
      r.unknown(e);
    }
  }
  if (u.name.empty() || u.name.find_first_of(" \t") != std::string::npos) r.fail("[user] needs a name without spaces");
  if (u.password.empty()) r.fail(fmt::format("user {}: missing password", u.name));
  sc.users.push_back(std::move(u));
}

void parse_singleton(Scenario& sc, const Section& s) {
  Reader r(s);
  for (const auto& e : s.entries) {
    if (s.name == "sim") {
      if (e.key == "start") {
        auto t = parse_instant(e.value);
        if (!t) r.fail(e, "start: expected YYYY-MM-DDTHH:MM:SS or Unix seconds");
        sc.start = *t;
      } else if (e.key == "seed") {
        auto v = r.integer(e);
        sc.seed = static_cast<std::uint64_t>(v);
      } else if (e.key == "tick") {
        sc.tick = r.integer(e);
        if (sc.tick <= 0) r.fail(e, "tick must be positive (ms)");
      } else if (e.key == "loss") {
        sc.injected_loss = r.number(e);
        if (sc.injected_loss < 0 || sc.injected_loss > 1) r.fail(e, "loss must be in [0, 1]");
      } else {
        r.unknown(e);
      }
    } else if (s.name == "env") {
      if (e.key == "k-loss") {
        sc.env.k_loss = r.number(e);
      } else if (e.key == "k-heat") {
        sc.env.k_heat = r.number(e);
      } else if (e.key == "outside") {
        sc.env.outside_c = r.number(e);
      } else {
        r.unknown(e);
      }
    } else if (s.name == "link") {
      if (e.key == "sigma") {
        sc.link.sigma_db = r.number(e);
      } else if (e.key == "fade-probability") {
        sc.link.fade_probability = r.number(e);
      } else if (e.key == "fade-mean") {
        sc.link.fade_mean_db = r.number(e);
      } else if (e.key == "sensitivity") {
        sc.link.sensitivity_dbm = r.number(e);
      } else if (e.key == "near-field") {
        sc.link.near_field_m = r.number(e);
      } else {
        r.unknown(e);
      }
    } else if (s.name == "ap") {
      if (e.key == "position") {
        sc.ap_position = r.position(e);
      } else if (e.key == "retry-count") {
        sc.ap.retry_count = static_cast<int>(r.integer(e));
      } else if (e.key == "retry-spacing") {
        sc.ap.retry_spacing = r.integer(e);
      } else if (e.key == "status-period") {
        sc.ap.status_period = r.seconds(e);
      } else {
        r.unknown(e);
      }
    }
  }
}

void validate(const Scenario& sc, const std::map<std::string, int>& rule_lines,
              const std::map<std::string, int>& mode_lines) {
  std::set<wire::NodeAddress> addresses;
  std::map<std::string, home::DeviceKind> kinds;
  for (const auto& n : sc.nodes) {
    if (!addresses.insert(n.address).second) throw ScenarioError(n.line, fmt::format("duplicate address {}", n.address));
    for (const auto& d : n.devices) {
      if (!kinds.emplace(d.name, d.kind).second) throw ScenarioError(n.line, fmt::format("duplicate device '{}'", d.name));
    }
  }
  // The registry enforces the remaining device invariants.
  try {
    (void)build_registry(sc);
  } catch (const std::invalid_argument& ex) {
    throw ScenarioError(sc.nodes.empty() ? 0 : sc.nodes.back().line, ex.what());
  }
  for (const auto& n : sc.nodes) {
    for (const auto& d : n.devices) {
      if (d.thermostat_sensor.empty()) continue;
      auto it = kinds.find(d.thermostat_sensor);
      if (it == kinds.end() || it->second != home::DeviceKind::TemperatureSensor) {
        throw ScenarioError(n.line, fmt::format("{}: sensor '{}' is not a declared temperature sensor", d.name,
                                                d.thermostat_sensor));
      }
    }
  }

  auto need = [&](int line, const std::string& what, const std::string& name) {
    if (!kinds.count(name)) throw ScenarioError(line, fmt::format("{} references undeclared device '{}'", what, name));
  };
  for (const auto& rule : sc.rules) {
    const int line = rule_lines.at(rule.id);
    const auto what = fmt::format("rule {}", rule.id);
    if (rule.kind == home::RuleKind::Timer) {
      need(line, what, rule.target);
      continue;
    }
    need(line, what, rule.source);
    if (home::group_of(kinds.at(rule.source)) != home::DeviceGroup::Sensor) {
      throw ScenarioError(line, fmt::format("rule {}: source '{}' is not a sensor", rule.id, rule.source));
    }
    if (rule.action) need(line, what, rule.action->device);
    if (rule.release_action) need(line, what, rule.release_action->device);
  }
  for (const auto& mode : sc.modes) {
    const int line = mode_lines.at(mode.name);
    for (const auto& entry : mode.entries) need(line, fmt::format("mode {}", mode.name), entry.device);
    if (mode.trigger) need(line, fmt::format("mode {}", mode.name), mode.trigger->light_device);
  }
  for (const auto& ev : sc.events) {
    if (!addresses.count(ev.node)) throw ScenarioError(ev.line, fmt::format("event on unknown node {}", ev.node));
  }
}

}  // namespace

ScenarioError::ScenarioError(int line, const std::string& message)
    : std::runtime_error(fmt::format("line {}: {}", line, message)), line_(line) {}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::HotAir: return "hot-air";
    case EventKind::LightCover: return "light-cover";
    case EventKind::BrightSource: return "bright-source";
    case EventKind::WalkPast: return "walk-past";
  }
  return "?";
}

Scenario parse_scenario(std::string_view text) {
  Scenario sc;
  auto sections = split_sections(text);

  // [sim] goes first so event times resolve against the final start time.
  std::set<std::string> seen;
  for (const auto& s : sections) {
    if (s.name == "sim" || s.name == "env" || s.name == "link" || s.name == "ap") {
      if (!seen.insert(s.name).second) throw ScenarioError(s.line, fmt::format("[{}] given twice", s.name));
      parse_singleton(sc, s);
    }
  }
  std::map<std::string, int> rule_lines;
  std::map<std::string, int> mode_lines;
  for (const auto& s : sections) {
    if (s.name == "node") {
      parse_node(sc, s);
    } else if (s.name == "rule") {
      parse_rule(sc, s);
      rule_lines[sc.rules.back().id] = s.line;
    } else if (s.name == "mode") {
      parse_mode(sc, s);
      mode_lines[sc.modes.back().name] = s.line;
    } else if (s.name == "event") {
      parse_event(sc, s);
    } else if (s.name == "user") {
      parse_user(sc, s);
    } else if (!seen.count(s.name)) {
      throw ScenarioError(s.line, fmt::format("unknown section [{}]", s.name));
    }
  }
  try {
    radio::LinkModel check(sc.link);
  } catch (const std::invalid_argument& ex) {
    throw ScenarioError(0, ex.what());
  }
  validate(sc, rule_lines, mode_lines);
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot read scenario {}", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

Scenario demo_scenario() { return parse_scenario(demo_scenario_text()); }

home::Registry build_registry(const Scenario& scenario) {
  home::Registry registry;
  for (const auto& n : scenario.nodes) {
    for (const auto& d : n.devices) registry.add(d);
  }
  return registry;
}

home::RuleEngine build_rules(const Scenario& scenario) {
  home::RuleEngine engine;
  for (const auto& r : scenario.rules) engine.add(r);
  return engine;
}

void schedule_events(Scenario& scenario) {
  for (const auto& ev : scenario.events) {
    auto it = std::find_if(scenario.nodes.begin(), scenario.nodes.end(),
                           [&](const NodeSpec& n) { return n.address == ev.node; });
    if (it == scenario.nodes.end()) continue;
    const sim::TimedWindow window{ev.at, ev.duration};
    auto& env = it->env;
    switch (ev.kind) {
      case EventKind::HotAir: env.heat_events.push_back({window, ev.amount}); break;
      case EventKind::LightCover: env.light_modifiers.push_back({window, sim::LightEffect::Scale, ev.amount}); break;
      case EventKind::BrightSource: env.light_modifiers.push_back({window, sim::LightEffect::Boost, ev.amount}); break;
      case EventKind::WalkPast: env.occupancy.push_back({window}); break;
    }
  }
  scenario.events.clear();
}

}  // namespace whan::scenario
