#include "whan/radio.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace whan::radio {

double LinkRng::gaussian(double sigma) {
  if (sigma <= 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, sigma)(engine_);
}

double LinkRng::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

double LinkRng::exponential(double mean) {
  if (mean <= 0.0) return 0.0;
  return std::exponential_distribution<double>(1.0 / mean)(engine_);
}

std::uint64_t stream_seed(std::uint64_t seed, wire::NodeAddress src, wire::NodeAddress dst) {
  std::uint64_t z = seed ^ (static_cast<std::uint64_t>(src) << 32) ^ (static_cast<std::uint64_t>(dst) << 16);
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

LinkModel::LinkModel(LinkParams params) : params_(std::move(params)) {
  if (params_.anchors.empty()) throw std::invalid_argument("link model needs at least one anchor");
  if (params_.near_field_m <= 0.0) throw std::invalid_argument("near-field distance must be positive");
  if (params_.sigma_db < 0.0 || params_.fade_mean_db < 0.0) {
    throw std::invalid_argument("noise parameters must be non-negative");
  }
  if (params_.fade_probability < 0.0 || params_.fade_probability > 1.0) {
    throw std::invalid_argument("fade probability must lie in [0, 1]");
  }
  for (std::size_t i = 0; i < params_.anchors.size(); ++i) {
    const auto& a = params_.anchors[i];
    if (a.distance_m < 0.0) throw std::invalid_argument("anchor distance must be non-negative");
    xs_.push_back(std::log10(std::max(a.distance_m, params_.near_field_m)));
    if (i > 0) {
      if (!(xs_[i] > xs_[i - 1])) {
        throw std::invalid_argument(
            fmt::format("anchor {} m is not beyond the previous anchor", a.distance_m));
      }
      if (a.rssi_dbm > params_.anchors[i - 1].rssi_dbm) {
        throw std::invalid_argument(fmt::format("anchor {} m raises the mean RSSI", a.distance_m));
      }
    }
  }
}

double LinkModel::rssi_mean(double distance_m) const {
  const auto& anchors = params_.anchors;
  const double x = std::log10(std::max(distance_m, params_.near_field_m));
  if (anchors.size() == 1 || x <= xs_.front()) return anchors.front().rssi_dbm;

  auto upper = std::upper_bound(xs_.begin(), xs_.end(), x);
  std::size_t hi = upper == xs_.end() ? xs_.size() - 1 : static_cast<std::size_t>(upper - xs_.begin());
  if (hi == 0) hi = 1;
  const std::size_t lo = hi - 1;
  const double slope = (anchors[hi].rssi_dbm - anchors[lo].rssi_dbm) / (xs_[hi] - xs_[lo]);
  return anchors[lo].rssi_dbm + slope * (x - xs_[lo]);
}

double LinkModel::sample_rssi(double distance_m, LinkRng& rng) const {
  const double noise = rng.gaussian(params_.sigma_db);
  double fade = 0.0;
  if (params_.fade_probability > 0.0 && rng.uniform() < params_.fade_probability) {
    fade = rng.exponential(params_.fade_mean_db);
  }
  return rssi_with(distance_m, noise, fade);
}

Position NodePlacement::position(wire::NodeAddress node) const {
  auto it = positions_.find(node);
  if (it == positions_.end()) throw std::out_of_range(fmt::format("node {} has no position", node));
  return it->second;
}

double NodePlacement::distance(wire::NodeAddress a, wire::NodeAddress b) const {
  auto pa = position(a);
  auto pb = position(b);
  return std::hypot(pa.x - pb.x, pa.y - pb.y);
}

Channel::Channel(LinkModel model, NodePlacement placement, std::uint64_t seed)
    : model_(std::move(model)),
      placement_(std::move(placement)),
      seed_(seed),
      loss_rng_(stream_seed(seed, 0xFFFF, 0xFFFF)) {}

void Channel::set_injected_loss(double probability) {
  injected_loss_ = std::clamp(probability, 0.0, 1.0);
}

void Channel::set_log(std::ostream* out) {
  log_ = out;
  if (log_) *log_ << "distance_m,rssi_dbm,delivered\n";
}

LinkRng& Channel::stream(wire::NodeAddress src, wire::NodeAddress dst) {
  auto key = std::make_pair(src, dst);
  auto it = streams_.find(key);
  if (it == streams_.end()) it = streams_.emplace(key, LinkRng(stream_seed(seed_, src, dst))).first;
  return it->second;
}

Delivery Channel::transmit(const wire::RadioFrame& frame) {
  const double d = placement_.distance(frame.src, frame.dst);
  auto result = model_.deliver(d, stream(frame.src, frame.dst));
  if (result.delivered && injected_loss_ > 0.0 && loss_rng_.uniform() < injected_loss_) {
    result.delivered = false;
  }
  ++transmitted_;
  if (!result.delivered) ++dropped_;
  if (log_) *log_ << fmt::format("{:.3f},{:.2f},{}\n", d, result.rssi_dbm, result.delivered ? 1 : 0);
  return result;
}

}  // namespace whan::radio
