#include "whan/access_point.hpp"

#include <algorithm>

namespace whan::ap {

AccessPoint::AccessPoint(ApConfig config, Millis start)
    : config_(config), start_(start), next_status_(start + config.status_period) {}

wire::TxId AccessPoint::fresh_txid() {
  txid_counter_ = wire::next_txid(txid_counter_);
  return txid_counter_;
}

UplinkResult AccessPoint::uplink(const wire::RadioFrame& frame, double rssi_dbm) {
  UplinkResult result;
  if (frame.dst != wire::kApAddress) return result;
  rssi_last_[frame.src] = rssi_dbm;

  switch (frame.kind) {
    case wire::FrameKind::Ack: {
      if (frame.payload.size() != 1) {
        ++counters_.malformed;
        return result;
      }
      auto it = pending_.find(frame.payload[0]);
      if (it != pending_.end() && it->second.frame.dst == frame.src) {
        const auto txid = it->first;
        pending_.erase(it);
        serial_out_.push_back(wire::encode_report({frame.src, txid, wire::ReportStatus::Acked}));
      }
      return result;
    }
    case wire::FrameKind::Reading: {
      auto reading = wire::decode_reading(frame.payload);
      if (!reading) {
        ++counters_.malformed;
        return result;
      }
      result.ack = wire::make_ack(wire::kApAddress, frame.src, fresh_txid(), frame.txid);
      outbox_.push_back(*result.ack);
      if (wire::dedup_check(dedup_, frame.src, frame.txid) == wire::DedupVerdict::Duplicate) {
        ++counters_.duplicates;
        return result;
      }
      result.serial = wire::encode_uplink({frame.src, *reading, wire::clamp_rssi(rssi_dbm)});
      serial_out_.push_back(*result.serial);
      return result;
    }
    case wire::FrameKind::Command:
      ++counters_.malformed;
      return result;
  }
  return result;
}

std::optional<wire::RadioFrame> AccessPoint::downlink(const wire::SerialFrame& serial) {
  auto down = wire::decode_downlink(serial);
  if (!down || down->dst == wire::kApAddress || !wire::is_valid(down->command)) {
    ++counters_.unknown_serial;
    serial_out_.push_back(wire::encode_report({down ? down->dst : wire::NodeAddress{0}, 0,
                                               wire::ReportStatus::Rejected}));
    return std::nullopt;
  }
  wire::RadioFrame frame{wire::kApAddress, down->dst, fresh_txid(), wire::FrameKind::Command,
                         wire::encode_command(down->command)};
  queued_[down->dst].push_back(frame);
  serial_out_.push_back(wire::encode_report({down->dst, frame.txid, wire::ReportStatus::Queued}));
  return frame;
}

std::vector<wire::RadioFrame> AccessPoint::tick(Millis now) {
  std::vector<wire::RadioFrame> out = std::move(outbox_);
  outbox_.clear();

  for (auto it = pending_.begin(); it != pending_.end();) {
    auto& p = it->second;
    if (p.next_retry > now) {
      ++it;
      continue;
    }
    if (p.retries_left > 0) {
      --p.retries_left;
      p.next_retry = now + config_.retry_spacing;
      out.push_back(p.frame);
      ++counters_.retransmissions;
      ++it;
    } else {
      serial_out_.push_back(wire::encode_report({p.frame.dst, it->first, wire::ReportStatus::Failed}));
      ++counters_.delivery_failures;
      it = pending_.erase(it);
    }
  }

  // Release the next queued command for every idle destination.
  for (auto& [dst, queue] : queued_) {
    if (queue.empty()) continue;
    const bool busy = std::any_of(pending_.begin(), pending_.end(),
                                  [dst = dst](const auto& kv) { return kv.second.frame.dst == dst; });
    if (busy) continue;
    auto frame = std::move(queue.front());
    queue.pop_front();
    pending_[frame.txid] = PendingAck{frame, config_.retry_count, now + config_.retry_spacing};
    out.push_back(std::move(frame));
  }

  if (now >= next_status_) {
    serial_out_.push_back(wire::encode_status(status(now)));
    while (next_status_ <= now) next_status_ += config_.status_period;
  }

  counters_.radio_sent += static_cast<std::uint32_t>(out.size());
  return out;
}

std::vector<wire::SerialFrame> AccessPoint::take_serial() {
  auto out = std::move(serial_out_);
  serial_out_.clear();
  return out;
}

wire::ApStatus AccessPoint::status(Millis now) const {
  return {static_cast<std::uint32_t>((now - start_) / kSecond), bad_checksum_, counters_.malformed,
          counters_.duplicates};
}

}  // namespace whan::ap
