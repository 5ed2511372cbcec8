#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "whan/system.hpp"

using namespace whan;
namespace fs = std::filesystem;

namespace {

std::size_t count(const home::Store& store, home::EventKind kind) {
  std::size_t n = 0;
  for (const auto& e : store.events()) n += e.kind == kind ? 1 : 0;
  return n;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(System, ClockAdvancesByTick) {
  HomeSystem sys(scenario::demo_scenario());
  EXPECT_EQ(sys.now(), sys.start());
  sys.step();
  EXPECT_EQ(sys.now(), sys.start() + 100);
  sys.advance_by(kSecond);
  EXPECT_EQ(sys.now(), sys.start() + 1100);
  ASSERT_NE(sys.network(), nullptr);
  EXPECT_EQ(sys.network()->now(), sys.now());
}

TEST(System, FirstReadingsAfterOneReportPeriod) {
  HomeSystem sys(scenario::demo_scenario());
  sys.advance_by(4900);
  EXPECT_TRUE(sys.store().history("living-temp", 0, sys.now()).empty());
  sys.advance_by(500);
  auto temp = sys.store().history("living-temp", 0, sys.now());
  ASSERT_EQ(temp.size(), 1u);
  EXPECT_DOUBLE_EQ(temp[0].value, 28.0);
  EXPECT_LE(temp[0].rssi, -60);
  EXPECT_EQ(sys.core().registry().find("living-light")->value, 88.0);
}

TEST(System, CommandRoundTrip) {
  HomeSystem sys(scenario::demo_scenario());
  auto r = sys.core().submit({"lamp1", "level", "40"}, std::nullopt, sys.now());
  ASSERT_TRUE(r.ok());
  EXPECT_TRUE(sys.core().in_flight("lamp1"));
  sys.step();
  EXPECT_FALSE(sys.core().in_flight("lamp1"));
  const auto& ed = sys.network()->end_device(1).state();
  EXPECT_TRUE(ed.lamp_on);
  EXPECT_EQ(ed.lamp_level, 40);
  EXPECT_EQ(sys.core().registry().find("lamp1")->value, 40.0);
  EXPECT_EQ(sys.core().stats().commands_acked, 1u);
}

TEST(System, HeaterWarmsRoom) {
  HomeSystem sys(scenario::demo_scenario());
  sys.core().submit({"heater1", "state", "on"}, std::nullopt, sys.now());
  sys.advance_by(kMinute);
  EXPECT_TRUE(sys.network()->end_device(1).state().heater_on);
  EXPECT_GT(sys.network()->room(1).temperature_c, 28.5);
}

TEST(System, DemoScriptRaisesItsAlerts) {
  HomeSystem sys(scenario::demo_scenario());
  sys.advance_by(6 * kMinute);
  EXPECT_EQ(count(sys.store(), home::EventKind::ThresholdHigh), 1u);
  EXPECT_EQ(count(sys.store(), home::EventKind::ThresholdLow), 1u);
  EXPECT_EQ(count(sys.store(), home::EventKind::Intrusion), 1u);
  EXPECT_EQ(count(sys.store(), home::EventKind::DeliveryFailed), 0u);
}

TEST(System, SeedOverrideChangesRssiOnly) {
  auto run = [](std::uint64_t seed) {
    SystemOptions opt;
    opt.seed = seed;
    HomeSystem sys(scenario::demo_scenario(), std::move(opt));
    sys.advance_by(2 * kMinute);
    return sys.store().readings();
  };
  auto a = run(1), b = run(1), c = run(2);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), c.size());
  bool rssi_differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].value, c[i].value);
    rssi_differs = rssi_differs || a[i].rssi != c[i].rssi;
  }
  EXPECT_TRUE(rssi_differs);
}

TEST(System, PersistentRunsAreByteIdentical) {
  const auto base = fs::temp_directory_path() / "whan-system-det";
  fs::remove_all(base);
  for (const char* name : {"a", "b"}) {
    SystemOptions opt;
    opt.db_path = base / name;
    HomeSystem sys(scenario::demo_scenario(), std::move(opt));
    sys.advance_by(6 * kMinute);
  }
  for (const char* file : {"readings.log", "events.log"}) {
    auto a = slurp(base / "a" / file);
    EXPECT_FALSE(a.empty()) << file;
    EXPECT_EQ(a, slurp(base / "b" / file)) << file;
  }
  fs::remove_all(base);
}

TEST(System, RssiLogRecordsTransmissions) {
  std::ostringstream log;
  SystemOptions opt;
  opt.rssi_log = &log;
  HomeSystem sys(scenario::demo_scenario(), std::move(opt));
  sys.advance_by(6 * kSecond);
  std::istringstream in(log.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "distance_m,rssi_dbm,delivered");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_GE(rows, 3);  // readings plus their acks
}

TEST(System, SplitModeOverSerialLink) {
  auto [server_end, sim_end] = serial::make_pipe();
  auto sc = scenario::demo_scenario();
  SimulatedNetwork net(sc, *sim_end);
  SystemOptions opt;
  opt.remote_serial = std::move(server_end);
  HomeSystem sys(sc, std::move(opt));
  EXPECT_EQ(sys.network(), nullptr);

  sys.core().submit({"lamp1", "state", "on"}, std::nullopt, sys.now());
  for (int i = 0; i < 60; ++i) {
    net.step(sys.now() + sys.tick_length());
    sys.step();
  }
  EXPECT_TRUE(net.end_device(1).state().lamp_on);
  EXPECT_EQ(sys.core().registry().find("lamp1")->state, home::DeviceState::On);
  EXPECT_EQ(sys.store().history("living-temp", 0, sys.now()).size(), 1u);
}

TEST(System, CorruptStoreRecoversWithAlert) {
  const auto dir = fs::temp_directory_path() / "whan-system-recover";
  fs::remove_all(dir);
  {
    SystemOptions opt;
    opt.db_path = dir;
    HomeSystem sys(scenario::demo_scenario(), std::move(opt));
    sys.advance_by(10 * kSecond);
  }
  {
    std::ofstream out(dir / "readings.log", std::ios::binary | std::ios::app);
    out.write("\x00\x00\x01\x00\x02", 5);
  }
  SystemOptions opt;
  opt.db_path = dir;
  HomeSystem sys(scenario::demo_scenario(), std::move(opt));
  EXPECT_EQ(count(sys.store(), home::EventKind::StoreRecovered), 1u);
  EXPECT_FALSE(sys.store().readings().empty());
  fs::remove_all(dir);
}
