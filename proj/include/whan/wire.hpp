#pragma once

// Frame formats shared by end devices, the access point and the home server.
//
// Serial frame (AP <-> server), all multi-byte integers big-endian:
//   [0x7E][len:u8][kind:u8][payload: len-1 bytes][checksum:u8]
// where (len + kind + sum(payload) + checksum) % 256 == 0.
//
// Radio frame (ED <-> AP):
//   [src:u16][dst:u16][txid:u8][kind:u8][body...]

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace whan::wire {

using Bytes = std::vector<std::uint8_t>;
using NodeAddress = std::uint16_t;
using TxId = std::uint8_t;

inline constexpr NodeAddress kApAddress = 0;
inline constexpr std::uint8_t kSof = 0x7E;
inline constexpr std::size_t kMaxPayload = 64;
inline constexpr std::size_t kSerialOverhead = 4;  // sof + len + kind + checksum

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Big-endian helpers
// ---------------------------------------------------------------------------

class ByteWriter {
 public:
  ByteWriter& u8(std::uint8_t v) {
    out_.push_back(v);
    return *this;
  }
  ByteWriter& u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v & 0xFF));
    return *this;
  }
  ByteWriter& i16(std::int16_t v) { return u16(static_cast<std::uint16_t>(v)); }
  ByteWriter& i8(std::int8_t v) { return u8(static_cast<std::uint8_t>(v)); }
  ByteWriter& u32(std::uint32_t v) {
    u16(static_cast<std::uint16_t>(v >> 16));
    return u16(static_cast<std::uint16_t>(v & 0xFFFF));
  }
  ByteWriter& bytes(std::span<const std::uint8_t> b) {
    out_.insert(out_.end(), b.begin(), b.end());
    return *this;
  }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

/// Bounds-checked reader; any read past the end flips ok() to false and
/// returns zero.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() {
    if (pos_ + 1 > in_.size()) return fail();
    return in_[pos_++];
  }
  std::uint16_t u16() {
    if (pos_ + 2 > in_.size()) return fail();
    auto v = static_cast<std::uint16_t>((in_[pos_] << 8) | in_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::int16_t i16() { return static_cast<std::int16_t>(u16()); }
  std::int8_t i8() { return static_cast<std::int8_t>(u8()); }
  std::uint32_t u32() {
    std::uint32_t hi = u16();
    std::uint32_t lo = u16();
    return (hi << 16) | lo;
  }
  std::span<const std::uint8_t> rest() {
    auto r = in_.subspan(pos_);
    pos_ = in_.size();
    return r;
  }

  bool ok() const { return ok_; }
  bool at_end() const { return pos_ == in_.size(); }

 private:
  std::uint8_t fail() {
    ok_ = false;
    pos_ = in_.size();
    return 0;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  bool ok_ = true;
};

// ---------------------------------------------------------------------------
// Radio frames
// ---------------------------------------------------------------------------

enum class FrameKind : std::uint8_t { Reading = 0, Command = 1, Ack = 2 };

struct RadioFrame {
  NodeAddress src = 0;
  NodeAddress dst = 0;
  TxId txid = 0;
  FrameKind kind = FrameKind::Reading;
  Bytes payload;

  bool operator==(const RadioFrame&) const = default;
};

/// Throws ProtocolError when the payload is oversized or an Ack does not
/// carry exactly one byte.
void validate(const RadioFrame& frame);

Bytes encode_radio(const RadioFrame& frame);
std::optional<RadioFrame> decode_radio(std::span<const std::uint8_t> bytes);

RadioFrame make_ack(NodeAddress src, NodeAddress dst, TxId txid, TxId acked);

enum class SensorId : std::uint8_t { Temperature = 0, Light = 1, Motion = 2 };
enum class ActuatorId : std::uint8_t { Lamp = 0, Heater = 1, Pan = 2, Tilt = 3 };
enum class Action : std::uint8_t { Off = 0, On = 1, SetLevel = 2, Step = 3 };

const char* to_string(SensorId id);
const char* to_string(ActuatorId id);
const char* to_string(Action action);

/// Temperature in centi-degrees C, light in percent, motion 0/1.
struct ReadingPayload {
  SensorId sensor = SensorId::Temperature;
  std::int16_t value = 0;

  bool operator==(const ReadingPayload&) const = default;
};

bool is_valid(const ReadingPayload& reading);
Bytes encode_reading(const ReadingPayload& reading);
std::optional<ReadingPayload> decode_reading(std::span<const std::uint8_t> body);

struct CommandPayload {
  ActuatorId actuator = ActuatorId::Lamp;
  Action action = Action::Off;
  std::int16_t argument = 0;  // lamp level % or signed gimbal degrees

  bool operator==(const CommandPayload&) const = default;
};

bool is_valid(const CommandPayload& command);
Bytes encode_command(const CommandPayload& command);
std::optional<CommandPayload> decode_command(std::span<const std::uint8_t> body);

// ---------------------------------------------------------------------------
// Serial frames
// ---------------------------------------------------------------------------

namespace serial_kind {
inline constexpr std::uint8_t kReading = 0x01;
inline constexpr std::uint8_t kCommand = 0x02;
inline constexpr std::uint8_t kApStatus = 0x03;
inline constexpr std::uint8_t kGimbal = 0x04;
inline constexpr std::uint8_t kCommandReport = 0x05;
}  // namespace serial_kind

struct SerialFrame {
  std::uint8_t kind = 0;
  Bytes payload;

  bool operator==(const SerialFrame&) const = default;
};

/// Additive mod-256 complement. Throws ProtocolError if the payload exceeds
/// kMaxPayload bytes.
std::uint8_t checksum(std::uint8_t len, std::uint8_t kind,
                      std::span<const std::uint8_t> payload);

Bytes encode_serial(const SerialFrame& frame);

enum class DecodeStatus {
  Ok,
  Truncated,     // need more bytes
  BadSync,       // first byte is not 0x7E
  BadLength,     // len is 0 or exceeds kMaxPayload + 1
  BadChecksum,
  TrailingBytes  // a valid frame followed by extra bytes (one-shot decode only)
};

const char* to_string(DecodeStatus status);

struct DecodeResult {
  DecodeStatus status = DecodeStatus::Truncated;
  std::optional<SerialFrame> frame;
  std::size_t consumed = 0;
};

/// Decodes a buffer holding exactly one serial frame.
DecodeResult decode_serial(std::span<const std::uint8_t> bytes);

/// Streaming decoder for a byte pipe. A frame that fails its checksum is
/// dropped and the decoder resynchronizes on the next 0x7E after its SOF.
class SerialDecoder {
 public:
  std::vector<SerialFrame> push(std::span<const std::uint8_t> bytes);

  std::uint64_t bad_checksum() const { return bad_checksum_; }
  std::uint64_t bad_length() const { return bad_length_; }
  std::uint64_t skipped_bytes() const { return skipped_; }
  std::size_t buffered() const { return buffer_.size(); }

 private:
  Bytes buffer_;
  std::uint64_t bad_checksum_ = 0;
  std::uint64_t bad_length_ = 0;
  std::uint64_t skipped_ = 0;
};

// ---------------------------------------------------------------------------
// Serial payloads
// ---------------------------------------------------------------------------

/// kind 0x01: [src:u16][sensor-id:u8][value:i16][rssi:i8]
struct UplinkReading {
  NodeAddress src = 0;
  ReadingPayload reading;
  std::int8_t rssi_dbm = 0;

  bool operator==(const UplinkReading&) const = default;
};

/// Clamps to the i8 range; values below -128 saturate.
std::int8_t clamp_rssi(double rssi_dbm);

SerialFrame encode_uplink(const UplinkReading& up);
std::optional<UplinkReading> decode_uplink(const SerialFrame& frame);

/// kind 0x02 / 0x04: [dst:u16][actuator-id:u8][action:u8][arg:i16]
struct DownlinkCommand {
  NodeAddress dst = 0;
  CommandPayload command;

  bool operator==(const DownlinkCommand&) const = default;
};

SerialFrame encode_downlink(const DownlinkCommand& down);
std::optional<DownlinkCommand> decode_downlink(const SerialFrame& frame);

enum class ReportStatus : std::uint8_t { Queued = 0, Acked = 1, Failed = 2, Rejected = 3 };

/// kind 0x05: [dst:u16][txid:u8][status:u8]
struct CommandReport {
  NodeAddress dst = 0;
  TxId txid = 0;
  ReportStatus status = ReportStatus::Queued;

  bool operator==(const CommandReport&) const = default;
};

SerialFrame encode_report(const CommandReport& report);
std::optional<CommandReport> decode_report(const SerialFrame& frame);

/// kind 0x03: [uptime_s:u32][bad_checksum:u32][malformed:u32][duplicates:u32]
struct ApStatus {
  std::uint32_t uptime_s = 0;
  std::uint32_t bad_checksum = 0;
  std::uint32_t malformed = 0;
  std::uint32_t duplicates = 0;

  bool operator==(const ApStatus&) const = default;
};

SerialFrame encode_status(const ApStatus& status);
std::optional<ApStatus> decode_status(const SerialFrame& frame);

// ---------------------------------------------------------------------------
// Transaction IDs and duplicate detection
// ---------------------------------------------------------------------------

constexpr TxId next_txid(TxId current) { return static_cast<TxId>(current + 1); }

enum class DedupVerdict { Fresh, Duplicate };

/// Last accepted txid per sender (window of one).
class DedupState {
 public:
  DedupVerdict check(NodeAddress src, TxId txid);

  std::optional<TxId> last_seen(NodeAddress src) const;
  std::size_t size() const { return last_seen_.size(); }

 private:
  std::map<NodeAddress, TxId> last_seen_;
};

inline DedupVerdict dedup_check(DedupState& state, NodeAddress src, TxId txid) {
  return state.check(src, txid);
}

std::string hex(std::span<const std::uint8_t> bytes);

}  // namespace whan::wire
