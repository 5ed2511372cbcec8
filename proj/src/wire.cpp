#include "whan/wire.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace whan::wire {

void validate(const RadioFrame& frame) {
  if (frame.payload.size() > kMaxPayload) {
    throw ProtocolError(fmt::format("radio payload of {} bytes exceeds {}", frame.payload.size(),
                                    kMaxPayload));
  }
  if (frame.kind == FrameKind::Ack && frame.payload.size() != 1) {
    throw ProtocolError("ack frame must carry exactly the acked txid");
  }
  if (static_cast<std::uint8_t>(frame.kind) > static_cast<std::uint8_t>(FrameKind::Ack)) {
    throw ProtocolError("unknown radio frame kind");
  }
}

Bytes encode_radio(const RadioFrame& frame) {
  validate(frame);
  return ByteWriter{}
      .u16(frame.src)
      .u16(frame.dst)
      .u8(frame.txid)
      .u8(static_cast<std::uint8_t>(frame.kind))
      .bytes(frame.payload)
      .take();
}

std::optional<RadioFrame> decode_radio(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  RadioFrame frame;
  frame.src = in.u16();
  frame.dst = in.u16();
  frame.txid = in.u8();
  auto kind = in.u8();
  if (!in.ok() || kind > static_cast<std::uint8_t>(FrameKind::Ack)) return std::nullopt;
  frame.kind = static_cast<FrameKind>(kind);
  auto body = in.rest();
  frame.payload.assign(body.begin(), body.end());
  if (frame.payload.size() > kMaxPayload) return std::nullopt;
  if (frame.kind == FrameKind::Ack && frame.payload.size() != 1) return std::nullopt;
  return frame;
}

RadioFrame make_ack(NodeAddress src, NodeAddress dst, TxId txid, TxId acked) {
  return RadioFrame{src, dst, txid, FrameKind::Ack, Bytes{acked}};
}

const char* to_string(SensorId id) {
  switch (id) {
    case SensorId::Temperature: return "temperature";
    case SensorId::Light: return "light";
    case SensorId::Motion: return "motion";
  }
  return "?";
}

const char* to_string(ActuatorId id) {
  switch (id) {
    case ActuatorId::Lamp: return "lamp";
    case ActuatorId::Heater: return "heater";
    case ActuatorId::Pan: return "pan";
    case ActuatorId::Tilt: return "tilt";
  }
  return "?";
}

const char* to_string(Action action) {
  switch (action) {
    case Action::Off: return "off";
    case Action::On: return "on";
    case Action::SetLevel: return "set-level";
    case Action::Step: return "step";
  }
  return "?";
}

bool is_valid(const ReadingPayload& reading) {
  switch (reading.sensor) {
    case SensorId::Temperature: return true;
    case SensorId::Light: return reading.value >= 0 && reading.value <= 100;
    case SensorId::Motion: return reading.value == 0 || reading.value == 1;
  }
  return false;
}

Bytes encode_reading(const ReadingPayload& reading) {
  return ByteWriter{}.u8(static_cast<std::uint8_t>(reading.sensor)).i16(reading.value).take();
}

std::optional<ReadingPayload> decode_reading(std::span<const std::uint8_t> body) {
  ByteReader in(body);
  auto sensor = in.u8();
  auto value = in.i16();
  if (!in.ok() || !in.at_end() || sensor > static_cast<std::uint8_t>(SensorId::Motion)) {
    return std::nullopt;
  }
  ReadingPayload reading{static_cast<SensorId>(sensor), value};
  if (!is_valid(reading)) return std::nullopt;
  return reading;
}

bool is_valid(const CommandPayload& command) {
  if (static_cast<std::uint8_t>(command.actuator) > static_cast<std::uint8_t>(ActuatorId::Tilt) ||
      static_cast<std::uint8_t>(command.action) > static_cast<std::uint8_t>(Action::Step)) {
    return false;
  }
  if (command.actuator == ActuatorId::Lamp && command.action == Action::SetLevel) {
    return command.argument >= 0 && command.argument <= 100;
  }
  return true;
}

Bytes encode_command(const CommandPayload& command) {
  return ByteWriter{}
      .u8(static_cast<std::uint8_t>(command.actuator))
      .u8(static_cast<std::uint8_t>(command.action))
      .i16(command.argument)
      .take();
}

std::optional<CommandPayload> decode_command(std::span<const std::uint8_t> body) {
  ByteReader in(body);
  auto actuator = in.u8();
  auto action = in.u8();
  auto arg = in.i16();
  if (!in.ok() || !in.at_end()) return std::nullopt;
  if (actuator > static_cast<std::uint8_t>(ActuatorId::Tilt) ||
      action > static_cast<std::uint8_t>(Action::Step)) {
    return std::nullopt;
  }
  return CommandPayload{static_cast<ActuatorId>(actuator), static_cast<Action>(action), arg};
}

std::uint8_t checksum(std::uint8_t len, std::uint8_t kind, std::span<const std::uint8_t> payload) {
  if (payload.size() > kMaxPayload) {
    throw ProtocolError(fmt::format("serial payload of {} bytes exceeds {}", payload.size(),
                                    kMaxPayload));
  }
  unsigned sum = len + kind;
  for (auto b : payload) sum += b;
  return static_cast<std::uint8_t>((256U - (sum & 0xFFU)) & 0xFFU);
}

Bytes encode_serial(const SerialFrame& frame) {
  auto len = static_cast<std::uint8_t>(frame.payload.size() + 1);
  auto sum = checksum(len, frame.kind, frame.payload);
  Bytes out;
  out.reserve(frame.payload.size() + kSerialOverhead);
  out.push_back(kSof);
  out.push_back(len);
  out.push_back(frame.kind);
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  out.push_back(sum);
  return out;
}

const char* to_string(DecodeStatus status) {
  switch (status) {
    case DecodeStatus::Ok: return "ok";
    case DecodeStatus::Truncated: return "truncated";
    case DecodeStatus::BadSync: return "bad-sync";
    case DecodeStatus::BadLength: return "bad-length";
    case DecodeStatus::BadChecksum: return "bad-checksum";
    case DecodeStatus::TrailingBytes: return "trailing-bytes";
  }
  return "?";
}

namespace {

// Parses one frame starting at bytes[0]; never reports TrailingBytes.
DecodeResult parse_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) return {DecodeStatus::Truncated, std::nullopt, 0};
  if (bytes[0] != kSof) return {DecodeStatus::BadSync, std::nullopt, 1};
  if (bytes.size() < 2) return {DecodeStatus::Truncated, std::nullopt, 0};
  const std::size_t len = bytes[1];
  if (len == 0 || len > kMaxPayload + 1) return {DecodeStatus::BadLength, std::nullopt, 1};
  const std::size_t total = len + 3;
  if (bytes.size() < total) return {DecodeStatus::Truncated, std::nullopt, 0};

  unsigned sum = 0;
  for (std::size_t i = 1; i < total; ++i) sum += bytes[i];
  if ((sum & 0xFFU) != 0) return {DecodeStatus::BadChecksum, std::nullopt, 1};

  SerialFrame frame;
  frame.kind = bytes[2];
  frame.payload.assign(bytes.begin() + 3, bytes.begin() + static_cast<std::ptrdiff_t>(total - 1));
  return {DecodeStatus::Ok, std::move(frame), total};
}

}  // namespace

DecodeResult decode_serial(std::span<const std::uint8_t> bytes) {
  auto result = parse_frame(bytes);
  if (result.status == DecodeStatus::Ok && result.consumed != bytes.size()) {
    return {DecodeStatus::TrailingBytes, std::nullopt, result.consumed};
  }
  return result;
}

std::vector<SerialFrame> SerialDecoder::push(std::span<const std::uint8_t> bytes) {
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
  std::vector<SerialFrame> frames;
  std::size_t pos = 0;
  while (pos < buffer_.size()) {
    if (buffer_[pos] != kSof) {
      auto next = std::find(buffer_.begin() + static_cast<std::ptrdiff_t>(pos), buffer_.end(), kSof);
      auto skip = static_cast<std::size_t>(next - buffer_.begin()) - pos;
      skipped_ += skip;
      pos += skip;
      continue;
    }
    auto result = parse_frame(std::span(buffer_).subspan(pos));
    if (result.status == DecodeStatus::Truncated) break;
    if (result.status == DecodeStatus::Ok) {
      frames.push_back(std::move(*result.frame));
      pos += result.consumed;
      continue;
    }
    if (result.status == DecodeStatus::BadChecksum) ++bad_checksum_;
    if (result.status == DecodeStatus::BadLength) ++bad_length_;
    // Resync: drop this SOF and hunt for the next one.
    ++skipped_;
    ++pos;
  }
  buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(pos));
  return frames;
}

std::int8_t clamp_rssi(double rssi_dbm) {
  auto r = std::lround(std::clamp(rssi_dbm, -128.0, 127.0));
  return static_cast<std::int8_t>(r);
}

SerialFrame encode_uplink(const UplinkReading& up) {
  return {serial_kind::kReading, ByteWriter{}
                                     .u16(up.src)
                                     .u8(static_cast<std::uint8_t>(up.reading.sensor))
                                     .i16(up.reading.value)
                                     .i8(up.rssi_dbm)
                                     .take()};
}

std::optional<UplinkReading> decode_uplink(const SerialFrame& frame) {
  if (frame.kind != serial_kind::kReading) return std::nullopt;
  ByteReader in(frame.payload);
  UplinkReading up;
  up.src = in.u16();
  auto sensor = in.u8();
  up.reading.value = in.i16();
  up.rssi_dbm = in.i8();
  if (!in.ok() || !in.at_end() || sensor > static_cast<std::uint8_t>(SensorId::Motion)) {
    return std::nullopt;
  }
  up.reading.sensor = static_cast<SensorId>(sensor);
  return up;
}

SerialFrame encode_downlink(const DownlinkCommand& down) {
  auto kind = (down.command.actuator == ActuatorId::Pan || down.command.actuator == ActuatorId::Tilt)
                  ? serial_kind::kGimbal
                  : serial_kind::kCommand;
  return {kind, ByteWriter{}.u16(down.dst).bytes(encode_command(down.command)).take()};
}

std::optional<DownlinkCommand> decode_downlink(const SerialFrame& frame) {
  if (frame.kind != serial_kind::kCommand && frame.kind != serial_kind::kGimbal) return std::nullopt;
  ByteReader in(frame.payload);
  DownlinkCommand down;
  down.dst = in.u16();
  auto body = in.rest();
  if (!in.ok()) return std::nullopt;
  auto command = decode_command(body);
  if (!command) return std::nullopt;
  down.command = *command;
  return down;
}

SerialFrame encode_report(const CommandReport& report) {
  return {serial_kind::kCommandReport, ByteWriter{}
                                           .u16(report.dst)
                                           .u8(report.txid)
                                           .u8(static_cast<std::uint8_t>(report.status))
                                           .take()};
}

std::optional<CommandReport> decode_report(const SerialFrame& frame) {
  if (frame.kind != serial_kind::kCommandReport) return std::nullopt;
  ByteReader in(frame.payload);
  CommandReport report;
  report.dst = in.u16();
  report.txid = in.u8();
  auto status = in.u8();
  if (!in.ok() || !in.at_end() || status > static_cast<std::uint8_t>(ReportStatus::Rejected)) {
    return std::nullopt;
  }
  report.status = static_cast<ReportStatus>(status);
  return report;
}

SerialFrame encode_status(const ApStatus& status) {
  return {serial_kind::kApStatus, ByteWriter{}
                                      .u32(status.uptime_s)
                                      .u32(status.bad_checksum)
                                      .u32(status.malformed)
                                      .u32(status.duplicates)
                                      .take()};
}

std::optional<ApStatus> decode_status(const SerialFrame& frame) {
  if (frame.kind != serial_kind::kApStatus) return std::nullopt;
  ByteReader in(frame.payload);
  ApStatus status;
  status.uptime_s = in.u32();
  status.bad_checksum = in.u32();
  status.malformed = in.u32();
  status.duplicates = in.u32();
  if (!in.ok() || !in.at_end()) return std::nullopt;
  return status;
}

DedupVerdict DedupState::check(NodeAddress src, TxId txid) {
  auto it = last_seen_.find(src);
  if (it != last_seen_.end() && it->second == txid) return DedupVerdict::Duplicate;
  last_seen_[src] = txid;
  return DedupVerdict::Fresh;
}

std::optional<TxId> DedupState::last_seen(NodeAddress src) const {
  auto it = last_seen_.find(src);
  if (it == last_seen_.end()) return std::nullopt;
  return it->second;
}

std::string hex(std::span<const std::uint8_t> bytes) {
  std::string out;
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (i) out += ' ';
    out += fmt::format("{:02X}", bytes[i]);
  }
  return out;
}

}  // namespace whan::wire
