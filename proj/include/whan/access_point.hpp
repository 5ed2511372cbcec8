#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "whan/sim_time.hpp"
#include "whan/wire.hpp"

namespace whan::ap {

struct ApConfig {
  int retry_count = 3;
  Millis retry_spacing = 200;
  Millis status_period = 60 * kSecond;
};

struct ApCounters {
  std::uint32_t malformed = 0;
  std::uint32_t duplicates = 0;
  std::uint32_t unknown_serial = 0;
  std::uint32_t radio_sent = 0;
  std::uint32_t retransmissions = 0;
  std::uint32_t delivery_failures = 0;
};

/// What uplink() hands to the server side (if anything) and to the air.
struct UplinkResult {
  std::optional<wire::SerialFrame> serial;
  std::optional<wire::RadioFrame> ack;  // auto-ack back to the sender
};

/// Bridges the radio network and the server's serial link.
///
/// Downlink commands are stop-and-wait per destination: one outstanding
/// command per node, retried with the same txid until acked or the retry
/// budget runs out. This keeps the receivers' single-entry dedup exact.
class AccessPoint {
 public:
  struct PendingAck {
    wire::RadioFrame frame;
    int retries_left = 0;
    Millis next_retry = 0;
  };

  explicit AccessPoint(ApConfig config = {}, Millis start = 0);

  /// A frame the radio channel delivered to the AP.
  UplinkResult uplink(const wire::RadioFrame& frame, double rssi_dbm);

  /// A serial frame from the server. Valid commands get a fresh txid and are
  /// queued (a Queued report is emitted); anything else yields a Rejected
  /// report. Returns the addressed radio frame when accepted.
  std::optional<wire::RadioFrame> downlink(const wire::SerialFrame& serial);

  /// Transmissions due at `now`: queued acks, new commands, retries.
  std::vector<wire::RadioFrame> tick(Millis now);

  /// Serial frames for the server produced since the last call.
  std::vector<wire::SerialFrame> take_serial();

  wire::ApStatus status(Millis now) const;

  const std::map<wire::TxId, PendingAck>& pending_acks() const { return pending_; }
  const std::map<wire::NodeAddress, double>& rssi_last() const { return rssi_last_; }
  const ApCounters& counters() const { return counters_; }
  void note_bad_checksum(std::uint64_t total) { bad_checksum_ = static_cast<std::uint32_t>(total); }

 private:
  wire::TxId fresh_txid();

  ApConfig config_;
  Millis start_;
  Millis next_status_;
  wire::TxId txid_counter_ = 0;
  wire::DedupState dedup_;
  std::map<wire::TxId, PendingAck> pending_;
  std::map<wire::NodeAddress, std::deque<wire::RadioFrame>> queued_;
  std::vector<wire::RadioFrame> outbox_;
  std::vector<wire::SerialFrame> serial_out_;
  std::map<wire::NodeAddress, double> rssi_last_;
  ApCounters counters_;
  std::uint32_t bad_checksum_ = 0;
};

}  // namespace whan::ap
