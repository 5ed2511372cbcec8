#include <gtest/gtest.h>

#include "whan/access_point.hpp"

using namespace whan;
using namespace whan::ap;
using namespace whan::wire;

namespace {

RadioFrame reading(NodeAddress src, TxId txid, SensorId sensor, std::int16_t value) {
  return {src, kApAddress, txid, FrameKind::Reading, encode_reading({sensor, value})};
}

SerialFrame lamp_command(NodeAddress dst, Action action, std::int16_t arg = 0) {
  return encode_downlink({dst, {ActuatorId::Lamp, action, arg}});
}

std::vector<CommandReport> reports(AccessPoint& ap) {
  std::vector<CommandReport> out;
  for (auto& f : ap.take_serial()) {
    if (auto r = decode_report(f)) out.push_back(*r);
  }
  return out;
}

}  // namespace

TEST(Uplink, ReadingBecomesSerialFrame) {
  AccessPoint ap;
  auto r = ap.uplink(reading(5, 1, SensorId::Temperature, 2300), -70.0);
  ASSERT_TRUE(r.serial);
  EXPECT_EQ(encode_serial(*r.serial), (Bytes{0x7E, 0x07, 0x01, 0x00, 0x05, 0x00, 0x08, 0xFC, 0xBA, 0x35}));
  ASSERT_TRUE(r.ack);
  EXPECT_EQ(r.ack->dst, 5);
  EXPECT_EQ(r.ack->payload, Bytes{1});
  EXPECT_DOUBLE_EQ(ap.rssi_last().at(5), -70.0);
}

TEST(Uplink, DuplicateReadingReackedButNotForwarded) {
  AccessPoint ap;
  ap.uplink(reading(5, 1, SensorId::Light, 40), -70.0);
  auto dup = ap.uplink(reading(5, 1, SensorId::Light, 40), -71.0);
  EXPECT_FALSE(dup.serial);
  EXPECT_TRUE(dup.ack);
  EXPECT_EQ(ap.counters().duplicates, 1u);
  EXPECT_EQ(ap.take_serial().size(), 1u);
  EXPECT_DOUBLE_EQ(ap.rssi_last().at(5), -71.0);
}

TEST(Uplink, MalformedDropped) {
  AccessPoint ap;
  RadioFrame bad{5, kApAddress, 1, FrameKind::Reading, {0x01}};
  EXPECT_FALSE(ap.uplink(bad, -60).serial);
  EXPECT_EQ(ap.counters().malformed, 1u);
}

TEST(Downlink, AddressesAndQueues) {
  AccessPoint ap;
  auto f = ap.downlink(lamp_command(5, Action::On));
  ASSERT_TRUE(f);
  EXPECT_EQ(f->dst, 5);
  EXPECT_EQ(f->src, kApAddress);
  EXPECT_EQ(f->kind, FrameKind::Command);
  auto rep = reports(ap);
  ASSERT_EQ(rep.size(), 1u);
  EXPECT_EQ(rep[0].status, ReportStatus::Queued);
  EXPECT_EQ(rep[0].txid, f->txid);
}

TEST(Downlink, ConsecutiveTxidsIncrease) {
  AccessPoint ap;
  auto a = ap.downlink(lamp_command(5, Action::On));
  auto b = ap.downlink(lamp_command(6, Action::Off));
  EXPECT_EQ(static_cast<TxId>(a->txid + 1), b->txid);
}

TEST(Downlink, RejectsUnknownKindAndInvalidCommand) {
  AccessPoint ap;
  EXPECT_FALSE(ap.downlink({0x09, {0, 5, 0, 1, 0, 0}}));
  EXPECT_FALSE(ap.downlink(lamp_command(5, Action::SetLevel, 200)));
  auto rep = reports(ap);
  ASSERT_EQ(rep.size(), 2u);
  EXPECT_EQ(rep[0].status, ReportStatus::Rejected);
  EXPECT_EQ(rep[1].status, ReportStatus::Rejected);
  EXPECT_EQ(ap.counters().unknown_serial, 2u);
}

TEST(Downlink, RetriesKeepTxidThenFail) {
  AccessPoint ap;
  auto f = ap.downlink(lamp_command(5, Action::On));
  reports(ap);
  std::vector<RadioFrame> sent;
  for (Millis t = 0; t <= 1000; t += 100) {
    for (auto& s : ap.tick(t)) sent.push_back(s);
  }
  ASSERT_EQ(sent.size(), 4u);  // initial + 3 retries
  for (auto& s : sent) EXPECT_EQ(s, *f);
  auto rep = reports(ap);
  ASSERT_EQ(rep.size(), 1u);
  EXPECT_EQ(rep[0].status, ReportStatus::Failed);
  EXPECT_EQ(rep[0].txid, f->txid);
  EXPECT_TRUE(ap.pending_acks().empty());
}

TEST(Downlink, AckClearsPending) {
  AccessPoint ap;
  auto f = ap.downlink(lamp_command(5, Action::On));
  reports(ap);
  ap.tick(0);
  ASSERT_EQ(ap.pending_acks().size(), 1u);
  auto r = ap.uplink(make_ack(5, kApAddress, 9, f->txid), -60);
  EXPECT_FALSE(r.serial);
  EXPECT_TRUE(ap.pending_acks().empty());
  auto rep = reports(ap);
  ASSERT_EQ(rep.size(), 1u);
  EXPECT_EQ(rep[0].status, ReportStatus::Acked);
  EXPECT_TRUE(ap.tick(500).empty());
}

TEST(Downlink, StopAndWaitPerDestination) {
  AccessPoint ap;
  auto a = ap.downlink(lamp_command(5, Action::On));
  auto b = ap.downlink(lamp_command(5, Action::Off));
  auto c = ap.downlink(lamp_command(6, Action::On));
  auto first = ap.tick(0);
  ASSERT_EQ(first.size(), 2u);
  EXPECT_EQ(first[0].txid, a->txid);
  EXPECT_EQ(first[1].txid, c->txid);
  ap.uplink(make_ack(5, kApAddress, 1, a->txid), -60);
  auto next = ap.tick(100);
  ASSERT_EQ(next.size(), 1u);
  EXPECT_EQ(next[0].txid, b->txid);
}

TEST(Status, Periodic) {
  ApConfig cfg;
  cfg.status_period = 1000;
  AccessPoint ap(cfg, 0);
  ap.tick(500);
  EXPECT_TRUE(ap.take_serial().empty());
  ap.tick(1000);
  auto s = ap.take_serial();
  ASSERT_EQ(s.size(), 1u);
  auto st = decode_status(s[0]);
  ASSERT_TRUE(st);
  EXPECT_EQ(st->uptime_s, 1u);
}
