#include <gtest/gtest.h>

#include <random>

#include "whan/wire.hpp"

using namespace whan::wire;

TEST(Checksum, KnownValues) {
  EXPECT_EQ(checksum(0x01, 0x00, {}), 0xFF);
  EXPECT_EQ(checksum(0x00, 0x00, {}), 0x00);
  const Bytes p{0x01, 0x02};
  EXPECT_EQ(checksum(0x03, 0x01, p), 0xF9);
}

TEST(Checksum, RejectsOversizedPayload) {
  Bytes big(kMaxPayload + 1, 0);
  EXPECT_THROW(checksum(0, 0, big), ProtocolError);
}

TEST(Serial, EncodesKnownFrame) {
  EXPECT_EQ(encode_serial({0x01, {0x2A}}), (Bytes{0x7E, 0x02, 0x01, 0x2A, 0xD3}));
}

TEST(Serial, EmptyPayloadRoundTrip) {
  SerialFrame f{0x03, {}};
  auto r = decode_serial(encode_serial(f));
  ASSERT_EQ(r.status, DecodeStatus::Ok);
  EXPECT_EQ(*r.frame, f);
  EXPECT_EQ(r.consumed, 4u);
}

TEST(Serial, FlippedChecksumIsBad) {
  Bytes b{0x7E, 0x02, 0x01, 0x2A, 0xD3 ^ 0x01};
  EXPECT_EQ(decode_serial(b).status, DecodeStatus::BadChecksum);
}

TEST(Serial, DecodeStatuses) {
  EXPECT_EQ(decode_serial(Bytes{0x7E, 0x02, 0x01}).status, DecodeStatus::Truncated);
  EXPECT_EQ(decode_serial(Bytes{0x00, 0x02, 0x01, 0x2A, 0xD3}).status, DecodeStatus::BadSync);
  EXPECT_EQ(decode_serial(Bytes{0x7E, 0x00, 0x00, 0x00}).status, DecodeStatus::BadLength);
  EXPECT_EQ(decode_serial(Bytes{0x7E, 0x02, 0x01, 0x2A, 0xD3, 0x00}).status, DecodeStatus::TrailingBytes);
}

TEST(SerialDecoder, ResyncsAfterBadChecksum) {
  auto good = encode_serial({0x01, {0x7E, 0x10}});
  Bytes stream{0x7E, 0x02, 0x01, 0x2A, 0x00};  // bad checksum
  stream.insert(stream.end(), good.begin(), good.end());
  SerialDecoder dec;
  auto frames = dec.push(stream);
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(frames[0], (SerialFrame{0x01, {0x7E, 0x10}}));
  EXPECT_EQ(dec.bad_checksum(), 1u);
}

TEST(SerialDecoder, HandlesSplitDelivery) {
  auto bytes = encode_serial({0x02, {1, 2, 3, 4, 5, 6}});
  SerialDecoder dec;
  std::vector<SerialFrame> got;
  for (auto b : bytes) {
    auto f = dec.push(std::span<const std::uint8_t>(&b, 1));
    got.insert(got.end(), f.begin(), f.end());
  }
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(dec.buffered(), 0u);
}

TEST(SerialDecoder, SkipsLeadingGarbage) {
  Bytes stream{0x11, 0x22};
  auto good = encode_serial({0x01, {0x05}});
  stream.insert(stream.end(), good.begin(), good.end());
  SerialDecoder dec;
  EXPECT_EQ(dec.push(stream).size(), 1u);
  EXPECT_EQ(dec.skipped_bytes(), 2u);
}

TEST(Uplink, PacksReadingWithRssi) {
  UplinkReading up{5, {SensorId::Temperature, 2300}, clamp_rssi(-70.0)};
  EXPECT_EQ(encode_serial(encode_uplink(up)),
            (Bytes{0x7E, 0x07, 0x01, 0x00, 0x05, 0x00, 0x08, 0xFC, 0xBA, 0x35}));
  EXPECT_EQ(decode_uplink(encode_uplink(up)), up);
}

TEST(Uplink, RssiClamps) {
  EXPECT_EQ(clamp_rssi(-200.0), -128);
  EXPECT_EQ(clamp_rssi(10.0), 10);
  EXPECT_EQ(clamp_rssi(-70.4), -70);
}

TEST(Downlink, RoundTrip) {
  DownlinkCommand d{5, {ActuatorId::Lamp, Action::SetLevel, 40}};
  auto f = encode_downlink(d);
  EXPECT_EQ(f.kind, serial_kind::kCommand);
  EXPECT_EQ(decode_downlink(f), d);
  DownlinkCommand g{7, {ActuatorId::Pan, Action::Step, -20}};
  EXPECT_EQ(encode_downlink(g).kind, serial_kind::kGimbal);
  EXPECT_EQ(decode_downlink(encode_downlink(g)), g);
}

TEST(Report, RoundTrip) {
  CommandReport r{3, 200, ReportStatus::Failed};
  EXPECT_EQ(decode_report(encode_report(r)), r);
  ApStatus s{61, 2, 3, 4};
  EXPECT_EQ(decode_status(encode_status(s)), s);
}

TEST(Radio, RoundTripAndValidation) {
  RadioFrame f{1, 0, 9, FrameKind::Reading, encode_reading({SensorId::Light, 88})};
  EXPECT_EQ(decode_radio(encode_radio(f)), f);
  RadioFrame ack = make_ack(0, 1, 3, 9);
  EXPECT_EQ(ack.payload, Bytes{9});
  RadioFrame bad_ack{0, 1, 3, FrameKind::Ack, {}};
  EXPECT_THROW(validate(bad_ack), ProtocolError);
  RadioFrame too_big{0, 1, 3, FrameKind::Reading, Bytes(65, 0)};
  EXPECT_THROW(validate(too_big), ProtocolError);
}

TEST(Payloads, Validity) {
  EXPECT_TRUE(is_valid(ReadingPayload{SensorId::Light, 100}));
  EXPECT_FALSE(is_valid(ReadingPayload{SensorId::Light, 101}));
  EXPECT_FALSE(is_valid(ReadingPayload{SensorId::Motion, 2}));
  EXPECT_TRUE(is_valid(CommandPayload{ActuatorId::Lamp, Action::SetLevel, 100}));
  EXPECT_FALSE(is_valid(CommandPayload{ActuatorId::Lamp, Action::SetLevel, -1}));
  EXPECT_FALSE(is_valid(CommandPayload{ActuatorId::Lamp, Action::SetLevel, 101}));
}

TEST(Txid, Wraps) {
  EXPECT_EQ(next_txid(0), 1);
  EXPECT_EQ(next_txid(255), 0);
  EXPECT_EQ(next_txid(41), 42);
}

TEST(Dedup, WalkThrough) {
  DedupState s;
  EXPECT_EQ(dedup_check(s, 5, 7), DedupVerdict::Fresh);
  EXPECT_EQ(dedup_check(s, 5, 7), DedupVerdict::Duplicate);
  EXPECT_EQ(dedup_check(s, 5, 8), DedupVerdict::Fresh);
  EXPECT_EQ(s.last_seen(5), 8);
  EXPECT_EQ(dedup_check(s, 6, 8), DedupVerdict::Fresh);
  EXPECT_EQ(s.size(), 2u);
}

TEST(Dedup, AcceptsEachDistinctConsecutiveTxidOnce) {
  std::mt19937 rng(3);
  DedupState s;
  std::map<NodeAddress, std::optional<TxId>> last;
  for (int i = 0; i < 5000; ++i) {
    NodeAddress src = rng() % 3;
    TxId tx = static_cast<TxId>(rng() % 4);
    bool expect_fresh = last[src] != tx;
    EXPECT_EQ(s.check(src, tx) == DedupVerdict::Fresh, expect_fresh);
    last[src] = tx;
  }
}

TEST(Serial, RandomRoundTrip) {
  std::mt19937 rng(11);
  for (int i = 0; i < 2000; ++i) {
    SerialFrame f;
    f.kind = static_cast<std::uint8_t>(rng());
    f.payload.resize(rng() % (kMaxPayload + 1));
    for (auto& b : f.payload) b = static_cast<std::uint8_t>(rng());
    auto r = decode_serial(encode_serial(f));
    ASSERT_EQ(r.status, DecodeStatus::Ok);
    ASSERT_EQ(*r.frame, f);
  }
}
