#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <random>
#include <utility>
#include <vector>

#include "whan/wire.hpp"

namespace whan::radio {

/// One calibration point of the mean RSSI curve.
struct Anchor {
  double distance_m = 0.0;
  double rssi_dbm = 0.0;
};

struct LinkParams {
  // Corridor averages at 0/5/10/15 m plus the measured range edge, where the
  // mean reaches receiver sensitivity.
  std::vector<Anchor> anchors{{0.0, -60.45}, {5.0, -92.23}, {10.0, -94.61},
                              {15.0, -95.29}, {38.1, -104.0}};
  double near_field_m = 0.5;
  double sigma_db = 2.0;
  double fade_probability = 0.1;
  double fade_mean_db = 4.0;
  double sensitivity_dbm = -104.0;
};

/// Seeded random source for one directed link.
class LinkRng {
 public:
  explicit LinkRng(std::uint64_t seed) : engine_(seed) {}

  double gaussian(double sigma);
  double uniform();
  double exponential(double mean);

 private:
  std::mt19937_64 engine_;
};

/// splitmix64-derived seed so each directed link gets an independent stream.
std::uint64_t stream_seed(std::uint64_t seed, wire::NodeAddress src, wire::NodeAddress dst);

struct Delivery {
  bool delivered = false;
  double rssi_dbm = 0.0;
};

/// Table-driven mean RSSI with Gaussian noise and exponential deep fades.
///
/// The mean is piecewise linear in (log10(max(d, near_field)), dBm) through
/// the anchors: clamped before the first anchor, extrapolated with the last
/// segment's slope beyond the final one.
class LinkModel {
 public:
  LinkModel() : LinkModel(LinkParams{}) {}
  /// Throws std::invalid_argument on an unusable anchor table or parameters.
  explicit LinkModel(LinkParams params);

  double rssi_mean(double distance_m) const;

  /// Mean plus explicit draws: noise is added, fade loss is subtracted.
  double rssi_with(double distance_m, double noise_db, double fade_db) const {
    return rssi_mean(distance_m) + noise_db - fade_db;
  }

  double sample_rssi(double distance_m, LinkRng& rng) const;

  /// Boundary inclusive: exactly at sensitivity is still delivered.
  Delivery decide(double rssi_dbm) const { return {rssi_dbm >= params_.sensitivity_dbm, rssi_dbm}; }

  Delivery deliver(double distance_m, LinkRng& rng) const { return decide(sample_rssi(distance_m, rng)); }

  const LinkParams& params() const { return params_; }

 private:
  LinkParams params_;
  std::vector<double> xs_;  // log10 distance of each anchor
};

struct Position {
  double x = 0.0;
  double y = 0.0;
};

class NodePlacement {
 public:
  void place(wire::NodeAddress node, Position pos) { positions_[node] = pos; }
  bool contains(wire::NodeAddress node) const { return positions_.count(node) != 0; }
  Position position(wire::NodeAddress node) const;
  /// Throws std::out_of_range for unplaced nodes.
  double distance(wire::NodeAddress a, wire::NodeAddress b) const;

 private:
  std::map<wire::NodeAddress, Position> positions_;
};

/// The shared air between the AP and its end devices: per-link RNG streams,
/// optional injected loss for fault testing, and an optional CSV log.
class Channel {
 public:
  Channel(LinkModel model, NodePlacement placement, std::uint64_t seed);

  Delivery transmit(const wire::RadioFrame& frame);

  /// Extra uniform drop probability applied after the RSSI decision.
  void set_injected_loss(double probability);
  /// Writes "distance_m,rssi_dbm,delivered" rows; the header is written here.
  void set_log(std::ostream* out);

  const LinkModel& model() const { return model_; }
  const NodePlacement& placement() const { return placement_; }
  std::uint64_t transmitted() const { return transmitted_; }
  std::uint64_t dropped() const { return dropped_; }

 private:
  LinkRng& stream(wire::NodeAddress src, wire::NodeAddress dst);

  LinkModel model_;
  NodePlacement placement_;
  std::uint64_t seed_;
  std::map<std::pair<wire::NodeAddress, wire::NodeAddress>, LinkRng> streams_;
  double injected_loss_ = 0.0;
  LinkRng loss_rng_;
  std::ostream* log_ = nullptr;
  std::uint64_t transmitted_ = 0;
  std::uint64_t dropped_ = 0;
};

}  // namespace whan::radio
