#include <gtest/gtest.h>

#include "whan/home/home_core.hpp"

using namespace whan;
using namespace whan::home;

namespace {

Registry demo_registry() {
  Registry r;
  r.add({"living-temp", DeviceKind::TemperatureSensor, DeviceState::Unknown, 0, {}, 1});
  r.add({"living-light", DeviceKind::LightSensor, DeviceState::Unknown, 0, {}, 1});
  Device pir{"hall-pir", DeviceKind::MotionSensor, DeviceState::Unknown, 0, {}, 1};
  r.add(pir);
  r.add({"lamp1", DeviceKind::Lamp, DeviceState::Unknown, 0, {}, 1});
  Device heater{"heater1", DeviceKind::Heater, DeviceState::Unknown, 0, {}, 1};
  heater.thermostat_sensor = "living-temp";
  r.add(heater);
  r.add({"cam1", DeviceKind::CameraGimbal, DeviceState::Unknown, 0, {}, 1});
  return r;
}

Rule low_light_rule() {
  Rule rule;
  rule.id = "dark";
  rule.kind = RuleKind::LowThreshold;
  rule.source = "living-light";
  rule.threshold = 55;
  rule.hysteresis = 2;
  rule.action = Setting{"lamp1", "state", "on"};
  return rule;
}

Device with_value(const Registry& r, const std::string& name, double v) {
  Device d = *r.find(name);
  d.value = v;
  return d;
}

constexpr Millis kT0 = 1372680000LL * kSecond;  // 2013-07-01 12:00:00

/// HomeCore wired to a pipe whose far end plays the access point.
struct CoreHarness {
  CoreHarness(RuleEngine rules = {}, std::vector<ModeConfig> modes = {}) {
    auto [a, b] = serial::make_pipe();
    core_end = std::move(a);
    ap_end = std::move(b);
    core = std::make_unique<HomeCore>(demo_registry(), std::move(rules), std::move(modes), store, *core_end);
    core->set_listener([this](const Notification& n) { notes.push_back(n); });
    core->boot(kT0);
  }

  void reading(wire::NodeAddress src, wire::SensorId s, std::int16_t v, Millis now, std::int8_t rssi = -70) {
    ap_end->write(wire::encode_serial(wire::encode_uplink({src, {s, v}, rssi})));
    core->tick(now);
  }

  std::vector<wire::DownlinkCommand> commands() {
    std::vector<wire::DownlinkCommand> out;
    for (auto& f : decoder.push(ap_end->read_available())) {
      if (auto d = wire::decode_downlink(f)) out.push_back(*d);
    }
    return out;
  }

  void report(wire::NodeAddress dst, wire::TxId txid, wire::ReportStatus status, Millis now) {
    ap_end->write(wire::encode_serial(wire::encode_report({dst, txid, status})));
    core->tick(now);
  }

  std::vector<EventRecord> events(EventKind kind) const {
    std::vector<EventRecord> out;
    for (auto& e : store.events())
      if (e.kind == kind) out.push_back(e);
    return out;
  }

  Store store;
  std::unique_ptr<serial::ByteStream> core_end, ap_end;
  std::unique_ptr<HomeCore> core;
  wire::SerialDecoder decoder;
  std::vector<Notification> notes;
};

}  // namespace

TEST(Registry, RejectsDuplicatesAndWhitespace) {
  Registry r = demo_registry();
  EXPECT_THROW(r.add({"lamp1", DeviceKind::Lamp}), std::invalid_argument);
  EXPECT_THROW(r.add({"bad name", DeviceKind::Lamp}), std::invalid_argument);
  EXPECT_THROW(r.add({"temp2", DeviceKind::TemperatureSensor, DeviceState::Unknown, 0, {}, 1}),
               std::invalid_argument);
  EXPECT_EQ(r.find("living-temp")->group(), DeviceGroup::Sensor);
  EXPECT_EQ(r.find("lamp1")->group(), DeviceGroup::Actuator);
  EXPECT_EQ(r.find_sensor(1, wire::SensorId::Light)->name, "living-light");
  EXPECT_TRUE(r.remove("lamp1"));
  EXPECT_EQ(r.find("lamp1"), nullptr);
}

TEST(Setting, Parse) {
  auto s = parse_setting("lamp1 level 40");
  ASSERT_TRUE(s);
  EXPECT_EQ(*s, (Setting{"lamp1", "level", "40"}));
  EXPECT_FALSE(parse_setting("lamp1 level"));
}

TEST(FormatValue, PerKind) {
  Device t{"t", DeviceKind::TemperatureSensor};
  t.value = 23.0;
  EXPECT_EQ(format_value(t), "23.00");
  Device g{"g", DeviceKind::CameraGimbal};
  g.value = 10;
  g.tilt = -5;
  EXPECT_EQ(format_value(g), "10,-5");
}

TEST(Rules, LowThresholdFiresOnceUntilRearmed) {
  Registry reg = demo_registry();
  RuleEngine eng;
  eng.add(low_light_rule());
  auto fire = [&](double v) { return eng.evaluate(reg, with_value(reg, "living-light", v), std::nullopt, 0); };
  EXPECT_TRUE(fire(60).commands.empty());
  auto first = fire(54);
  ASSERT_EQ(first.commands.size(), 1u);
  EXPECT_EQ(first.commands[0], (Setting{"lamp1", "state", "on"}));
  ASSERT_EQ(first.events.size(), 1u);
  EXPECT_EQ(first.events[0].kind, EventKind::ThresholdLow);
  EXPECT_TRUE(fire(54).commands.empty());
  EXPECT_TRUE(fire(53).commands.empty());
  EXPECT_TRUE(fire(56).commands.empty());  // below threshold + hysteresis
  EXPECT_FALSE(eng.find("dark")->armed);
  fire(58);
  EXPECT_TRUE(eng.find("dark")->armed);
  EXPECT_EQ(fire(50).commands.size(), 1u);
}

TEST(Rules, MonotoneDecreasingSequenceFiresOnce) {
  Registry reg = demo_registry();
  RuleEngine eng;
  eng.add(low_light_rule());
  int fired = 0;
  for (int v = 100; v >= 0; --v) {
    fired += static_cast<int>(eng.evaluate(reg, with_value(reg, "living-light", v), std::nullopt, 0).commands.size());
  }
  EXPECT_EQ(fired, 1);
}

TEST(Rules, HighThresholdSymmetric) {
  Registry reg = demo_registry();
  RuleEngine eng;
  Rule r;
  r.id = "hot";
  r.kind = RuleKind::HighThreshold;
  r.source = "living-temp";
  r.threshold = 60;
  eng.add(r);
  auto ev = [&](double v) { return eng.evaluate(reg, with_value(reg, "living-temp", v), std::nullopt, 0).events; };
  EXPECT_EQ(ev(61).size(), 1u);
  EXPECT_TRUE(ev(59).empty());
  EXPECT_TRUE(ev(61).empty());
  ev(58);
  EXPECT_EQ(ev(61)[0].kind, EventKind::ThresholdHigh);
}

TEST(Rules, MissingTargetSuspends) {
  Registry reg = demo_registry();
  RuleEngine eng;
  auto rule = low_light_rule();
  rule.action = Setting{"ghost", "state", "on"};
  eng.add(rule);
  auto out = eng.evaluate(reg, with_value(reg, "living-light", 10), std::nullopt, 0);
  EXPECT_TRUE(out.commands.empty());
  ASSERT_EQ(out.events.size(), 2u);
  EXPECT_EQ(out.events[1].kind, EventKind::RuleSuspended);
  EXPECT_EQ(out.events[1].severity, Severity::Alert);
  EXPECT_TRUE(eng.find("dark")->suspended);
}

TEST(Rules, IntrusionOnArmedMotionEdge) {
  Registry reg = demo_registry();
  RuleEngine eng;
  auto pir = with_value(reg, "hall-pir", 1);
  auto out = eng.evaluate(reg, pir, 0.0, 0);
  ASSERT_EQ(out.events.size(), 1u);
  EXPECT_EQ(out.events[0].kind, EventKind::Intrusion);
  EXPECT_TRUE(eng.evaluate(reg, pir, 1.0, 0).events.empty());
  pir.armed = false;
  EXPECT_TRUE(eng.evaluate(reg, pir, 0.0, 0).events.empty());
}

TEST(Rules, BindingFollowsPredicate) {
  Registry reg = demo_registry();
  RuleEngine eng;
  Rule b;
  b.id = "presence";
  b.kind = RuleKind::Binding;
  b.source = "hall-pir";
  b.comparison = Comparison::GreaterEqual;
  b.threshold = 1;
  b.action = Setting{"lamp1", "state", "on"};
  b.release_action = Setting{"lamp1", "state", "off"};
  eng.add(b);
  auto cmds = [&](double v) {
    auto d = with_value(reg, "hall-pir", v);
    d.armed = false;
    return eng.evaluate(reg, d, std::nullopt, 0).commands;
  };
  EXPECT_TRUE(cmds(0).empty());
  EXPECT_EQ(cmds(1).at(0).value, "on");
  EXPECT_TRUE(cmds(1).empty());
  EXPECT_EQ(cmds(0).at(0).value, "off");
}

TEST(Timers, FireOncePerDay) {
  Registry reg = demo_registry();
  RuleEngine eng;
  Rule t;
  t.id = "evening";
  t.kind = RuleKind::Timer;
  t.target = "lamp1";
  t.on_time = 18 * 3600;
  t.off_time = 23 * 3600 + 30 * 60;
  eng.add(t);
  const Millis day = 1372636800LL * kSecond;  // 2013-07-01 00:00
  mark_timer_passed(*eng.find("evening"), day + 12 * kHour);
  EXPECT_TRUE(eng.run_timers(reg, day + 18 * kHour - kSecond).commands.empty());
  auto on = eng.run_timers(reg, day + 18 * kHour);
  ASSERT_EQ(on.commands.size(), 1u);
  EXPECT_EQ(on.commands[0], (Setting{"lamp1", "state", "on"}));
  EXPECT_EQ(on.events[0].kind, EventKind::TimerFired);
  EXPECT_TRUE(eng.run_timers(reg, day + 18 * kHour + 100).commands.empty());
  EXPECT_EQ(eng.run_timers(reg, day + 23 * kHour + 31 * kMinute).commands.at(0).value, "off");
  EXPECT_EQ(eng.run_timers(reg, day + kDay + 18 * kHour + 50).commands.size(), 1u);
}

TEST(Timers, CatchUpAfterRestart) {
  Registry reg = demo_registry();
  RuleEngine eng;
  Rule t;
  t.id = "evening";
  t.kind = RuleKind::Timer;
  t.target = "lamp1";
  t.on_time = 18 * 3600;
  eng.add(t);
  const Millis day = 1372636800LL * kSecond;
  EXPECT_EQ(eng.run_timers(reg, day + 18 * kHour + 30 * kMinute).commands.size(), 1u);
  EXPECT_TRUE(eng.run_timers(reg, day + 18 * kHour + 31 * kMinute).commands.empty());
}

TEST(Thermostat, Band) {
  EXPECT_EQ(thermostat_step(21.0, 1.0, 20.4, DeviceState::Off, 0).heater_on, true);
  EXPECT_EQ(thermostat_step(21.0, 1.0, 21.6, DeviceState::On, 0).heater_on, false);
  EXPECT_FALSE(thermostat_step(21.0, 1.0, 21.0, DeviceState::On, 0).heater_on);
  EXPECT_FALSE(thermostat_step(21.0, 1.0, 20.4, DeviceState::On, 0).heater_on);
  auto stale = thermostat_step(21.0, 1.0, 15.0, DeviceState::Off, 31 * kSecond);
  EXPECT_TRUE(stale.stale);
  EXPECT_FALSE(stale.heater_on);
}

TEST(Modes, WindowAndTrigger) {
  ModeTrigger trig;
  trig.light_device = "living-light";
  const Millis day = 1372636800LL * kSecond;
  EXPECT_TRUE(in_window(trig, day + 21 * kHour + 30 * kMinute));
  EXPECT_TRUE(in_window(trig, day + 3 * kHour));
  EXPECT_FALSE(in_window(trig, day + 12 * kHour));
  EXPECT_EQ(window_occurrence(trig, day + 23 * kHour), window_occurrence(trig, day + kDay + 2 * kHour));

  TriggerTracker tr;
  const Millis t0 = day + 21 * kHour + 30 * kMinute;
  int fired = 0;
  Millis fired_at = 0;
  for (Millis t = t0; t < t0 + 5 * kMinute; t += kSecond) {
    if (tr.step(trig, 10.0, t)) {
      ++fired;
      fired_at = t;
    }
  }
  EXPECT_EQ(fired, 1);
  EXPECT_EQ(fired_at, t0 + 60 * kSecond);

  TriggerTracker bright;
  for (Millis t = t0; t < t0 + 5 * kMinute; t += kSecond) EXPECT_FALSE(bright.step(trig, 40.0, t));
  TriggerTracker noon;
  for (Millis t = day + 12 * kHour; t < day + 12 * kHour + 5 * kMinute; t += kSecond) {
    EXPECT_FALSE(noon.step(trig, 5.0, t));
  }
}

TEST(Modes, DefaultNightMode) {
  auto m = default_night_mode(demo_registry(), "living-light");
  EXPECT_EQ(m.name, "Night Mode");
  EXPECT_NE(std::find(m.entries.begin(), m.entries.end(), Setting{"heater1", "state", "on"}), m.entries.end());
  EXPECT_NE(std::find(m.entries.begin(), m.entries.end(), Setting{"lamp1", "state", "on"}), m.entries.end());
  ASSERT_TRUE(m.trigger);
  EXPECT_DOUBLE_EQ(m.trigger->light_below, 20.0);
}

TEST(HomeCore, IngestScalesAndStores) {
  CoreHarness h;
  h.reading(1, wire::SensorId::Temperature, 2300, kT0 + 100);
  const auto* t = h.core->registry().find("living-temp");
  EXPECT_DOUBLE_EQ(t->value, 23.0);
  EXPECT_EQ(t->state, DeviceState::On);
  ASSERT_EQ(h.store.readings().size(), 1u);
  EXPECT_EQ(h.store.readings()[0], (SensorSample{"living-temp", kT0 + 100, 23.0, -70}));
  ASSERT_EQ(h.notes.size(), 1u);
  EXPECT_EQ(std::get<ReadingNote>(h.notes[0]).value, "23.00");
}

TEST(HomeCore, UnknownNodeLogsInfo) {
  CoreHarness h;
  h.reading(99, wire::SensorId::Light, 5, kT0 + 100);
  auto ev = h.events(EventKind::UnknownDevice);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].severity, Severity::Info);
  EXPECT_NE(ev[0].detail.find("unknown device"), std::string::npos);
  EXPECT_TRUE(h.store.readings().empty());
}

TEST(HomeCore, ArmedMotionRaisesIntrusion) {
  CoreHarness h;
  h.reading(1, wire::SensorId::Motion, 0, kT0 + 100);
  h.reading(1, wire::SensorId::Motion, 1, kT0 + 200);
  auto ev = h.events(EventKind::Intrusion);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].severity, Severity::Alert);
  EXPECT_EQ(h.core->registry().find("hall-pir")->state, DeviceState::On);
}

TEST(HomeCore, CommandLifecycleAcked) {
  CoreHarness h;
  auto r = h.core->submit({"lamp1", "level", "40"}, 7, kT0);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.txid, 1u);
  auto cmds = h.commands();
  ASSERT_EQ(cmds.size(), 1u);
  EXPECT_EQ(cmds[0], (wire::DownlinkCommand{1, {wire::ActuatorId::Lamp, wire::Action::SetLevel, 40}}));
  EXPECT_TRUE(h.core->in_flight("lamp1"));
  h.report(1, 33, wire::ReportStatus::Queued, kT0 + 100);
  h.report(1, 33, wire::ReportStatus::Acked, kT0 + 200);
  EXPECT_FALSE(h.core->in_flight("lamp1"));
  const auto* lamp = h.core->registry().find("lamp1");
  EXPECT_EQ(lamp->state, DeviceState::On);
  EXPECT_DOUBLE_EQ(lamp->value, 40.0);
  ASSERT_EQ(h.notes.size(), 1u);
  auto state = std::get<StateNote>(h.notes[0]);
  EXPECT_EQ(state.value, "40");
  EXPECT_EQ(state.origin, SessionId{7});
}

TEST(HomeCore, CommandLifecycleFailed) {
  CoreHarness h;
  auto r = h.core->submit({"heater1", "state", "on"}, std::nullopt, kT0);
  h.report(1, 5, wire::ReportStatus::Queued, kT0 + 100);
  h.report(1, 5, wire::ReportStatus::Failed, kT0 + 900);
  auto ev = h.events(EventKind::DeliveryFailed);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].detail, std::to_string(*r.txid));
  EXPECT_EQ(h.core->registry().find("heater1")->state, DeviceState::Unknown);
  EXPECT_EQ(h.core->stats().commands_failed, 1u);
}

TEST(HomeCore, TiltClampRaisesLimitReached) {
  CoreHarness h;
  h.core->submit({"cam1", "tilt", "150"}, std::nullopt, kT0);
  h.report(1, 1, wire::ReportStatus::Queued, kT0 + 100);
  h.report(1, 1, wire::ReportStatus::Acked, kT0 + 200);
  EXPECT_TRUE(h.events(EventKind::LimitReached).empty());
  h.core->submit({"cam1", "tilt", "10"}, std::nullopt, kT0 + 300);
  h.report(1, 2, wire::ReportStatus::Queued, kT0 + 400);
  h.report(1, 2, wire::ReportStatus::Acked, kT0 + 500);
  EXPECT_DOUBLE_EQ(h.core->registry().find("cam1")->tilt, 151.5);
  EXPECT_EQ(h.events(EventKind::LimitReached).size(), 1u);
}

TEST(HomeCore, SubmitValidation) {
  CoreHarness h;
  EXPECT_EQ(h.core->submit({"nope", "state", "on"}, {}, kT0).status, Status::UnknownDevice);
  EXPECT_EQ(h.core->submit({"lamp1", "colour", "red"}, {}, kT0).status, Status::Malformed);
  EXPECT_EQ(h.core->submit({"lamp1", "level", "abc"}, {}, kT0).status, Status::Malformed);
  EXPECT_EQ(h.core->submit({"lamp1", "level", "140"}, {}, kT0).status, Status::Rejected);
  EXPECT_EQ(h.core->submit({"living-temp", "state", "on"}, {}, kT0).status, Status::Rejected);
  EXPECT_EQ(h.core->submit({"heater1", "setpoint", "50"}, {}, kT0).status, Status::Rejected);
  EXPECT_EQ(h.core->submit({"cam1", "pan", "400"}, {}, kT0).status, Status::Rejected);
  EXPECT_TRUE(h.commands().empty());
}

TEST(HomeCore, LocalProperties) {
  RuleEngine eng;
  eng.add(low_light_rule());
  CoreHarness h(std::move(eng));
  EXPECT_TRUE(h.core->submit({"hall-pir", "armed", "off"}, {}, kT0).ok());
  EXPECT_FALSE(h.core->registry().find("hall-pir")->armed);
  EXPECT_TRUE(h.core->submit({"living-light", "low", "40"}, {}, kT0).ok());
  EXPECT_DOUBLE_EQ(h.core->rules().rules()[0].threshold, 40.0);
  EXPECT_EQ(h.core->submit({"living-light", "high", "40"}, {}, kT0).status, Status::Rejected);
  EXPECT_EQ(h.core->submit({"lamp1", "on-time", "18:00"}, {}, kT0).status, Status::Rejected);
}

TEST(HomeCore, ThermostatRegulatesOnIngest) {
  CoreHarness h;
  EXPECT_TRUE(h.core->submit({"heater1", "setpoint", "21"}, {}, kT0).ok());
  h.reading(1, wire::SensorId::Temperature, 2040, kT0 + 100);
  auto cmds = h.commands();
  ASSERT_EQ(cmds.size(), 1u);
  EXPECT_EQ(cmds[0].command, (wire::CommandPayload{wire::ActuatorId::Heater, wire::Action::On, 0}));
  // In flight: another cold reading must not queue a second command.
  h.reading(1, wire::SensorId::Temperature, 2030, kT0 + 200);
  EXPECT_TRUE(h.commands().empty());
}

TEST(HomeCore, StaleSensorAlertsOncePerEpisode) {
  CoreHarness h;
  h.core->submit({"heater1", "setpoint", "21"}, {}, kT0);
  for (Millis t = kT0; t <= kT0 + 60 * kSecond; t += 100) h.core->tick(t);
  EXPECT_EQ(h.events(EventKind::SensorStale).size(), 1u);
  h.reading(1, wire::SensorId::Temperature, 2100, kT0 + 61 * kSecond);
  for (Millis t = kT0 + 61 * kSecond; t <= kT0 + 100 * kSecond; t += 100) h.core->tick(t);
  EXPECT_EQ(h.events(EventKind::SensorStale).size(), 2u);
}

TEST(HomeCore, ApplyModeSkipsMissingDevice) {
  ModeConfig m{"Night Mode",
               {{"heater1", "state", "on"}, {"ghost", "state", "on"}, {"lamp1", "state", "on"}},
               std::nullopt};
  CoreHarness h({}, {m});
  EXPECT_TRUE(h.core->apply_mode("Night Mode", kT0).ok());
  EXPECT_EQ(h.commands().size(), 2u);
  auto skipped = h.events(EventKind::ModeEntrySkipped);
  ASSERT_EQ(skipped.size(), 1u);
  EXPECT_EQ(skipped[0].severity, Severity::Alert);
  EXPECT_EQ(h.events(EventKind::ModeChanged).size(), 1u);
  EXPECT_EQ(h.core->current_mode(), "Night Mode");
  EXPECT_EQ(h.core->apply_mode("Nope", kT0).status, Status::UnknownDevice);
  // Re-applying issues the same commands again.
  h.core->apply_mode("Night Mode", kT0 + 100);
  EXPECT_EQ(h.commands().size(), 2u);
}

TEST(HomeCore, QueryHistory) {
  CoreHarness h;
  EXPECT_EQ(h.core->query_history("living-temp", 0, kT0 * 2)->size(), 0u);
  for (int i = 1; i <= 5; ++i) h.reading(1, wire::SensorId::Temperature, 2000 + i, kT0 + i * kSecond);
  auto mid = h.core->query_history("living-temp", kT0 + 2 * kSecond, kT0 + 4 * kSecond);
  ASSERT_EQ(mid->size(), 3u);
  EXPECT_LT((*mid)[0].ts, (*mid)[1].ts);
  auto one = h.core->query_history("living-temp", kT0 + 3 * kSecond, kT0 + 3 * kSecond);
  ASSERT_EQ(one->size(), 1u);
  EXPECT_DOUBLE_EQ((*one)[0].value, 20.03);
  EXPECT_FALSE(h.core->query_history("nope", 0, 1));
}
