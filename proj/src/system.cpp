#include "whan/system.hpp"

#include <stdexcept>

#include <fmt/format.h>

namespace whan {

radio::NodePlacement SimulatedNetwork::place(const scenario::Scenario& scenario) {
  radio::NodePlacement placement;
  placement.place(wire::kApAddress, scenario.ap_position);
  for (const auto& n : scenario.nodes) placement.place(n.address, n.position);
  return placement;
}

SimulatedNetwork::SimulatedNetwork(scenario::Scenario scenario, serial::ByteStream& serial)
    : env_params_(scenario.env),
      channel_(radio::LinkModel(scenario.link), place(scenario), scenario.seed),
      ap_(scenario.ap, scenario.start),
      serial_(serial),
      now_(scenario.start) {
  channel_.set_injected_loss(scenario.injected_loss);
  scenario::schedule_events(scenario);
  for (auto& n : scenario.nodes) {
    sim::EdConfig config;
    config.address = n.address;
    config.report_period = n.report_period;
    for (const auto& d : n.devices) {
      if (auto sensor = home::sensor_of(d.kind)) config.sensors.insert(*sensor);
    }
    nodes_.emplace(n.address, Node{sim::EndDevice(config, scenario.start), std::move(n.env)});
  }
}

sim::EndDevice& SimulatedNetwork::end_device(wire::NodeAddress address) {
  auto it = nodes_.find(address);
  if (it == nodes_.end()) throw std::out_of_range(fmt::format("no end device {}", address));
  return it->second.device;
}

sim::RoomEnv& SimulatedNetwork::room(wire::NodeAddress address) {
  auto it = nodes_.find(address);
  if (it == nodes_.end()) throw std::out_of_range(fmt::format("no end device {}", address));
  return it->second.env;
}

std::vector<wire::NodeAddress> SimulatedNetwork::addresses() const {
  std::vector<wire::NodeAddress> out;
  for (const auto& [a, _] : nodes_) out.push_back(a);
  return out;
}

void SimulatedNetwork::step(Millis now) {
  if (now <= now_) return;
  const double dt_s = static_cast<double>(now - now_) / kSecond;
  for (auto& [_, node] : nodes_) {
    node.env = sim::step_env(std::move(node.env), node.device.state().heater_on, now_, dt_s, env_params_);
  }

  auto bytes = serial_.read_available();
  if (!bytes.empty()) {
    for (const auto& frame : decoder_.push(bytes)) ap_.downlink(frame);
    ap_.note_bad_checksum(decoder_.bad_checksum());
  }

  std::map<wire::NodeAddress, std::vector<wire::RadioFrame>> inbound;
  for (auto& frame : ap_.tick(now)) {
    if (!nodes_.count(frame.dst)) continue;
    if (channel_.transmit(frame).delivered) inbound[frame.dst].push_back(std::move(frame));
  }

  for (auto& [address, node] : nodes_) {
    auto heard = inbound[address];
    for (const auto& frame : node.device.tick(node.env, now, heard)) {
      auto d = channel_.transmit(frame);
      if (d.delivered) ap_.uplink(frame, d.rssi_dbm);
    }
  }

  for (const auto& frame : ap_.take_serial()) serial_.write(wire::encode_serial(frame));
  now_ = now;
}

HomeSystem::HomeSystem(scenario::Scenario scenario, SystemOptions options)
    : scenario_(std::move(scenario)),
      start_(scenario_.start),
      tick_(scenario_.tick),
      now_(scenario_.start) {
  if (options.seed) scenario_.seed = *options.seed;
  store_ = options.db_path ? std::make_unique<home::Store>(*options.db_path) : std::make_unique<home::Store>();

  serial::ByteStream* server_serial = nullptr;
  if (options.remote_serial) {
    server_end_ = std::move(options.remote_serial);
    server_serial = server_end_.get();
  } else {
    auto [a, b] = serial::make_pipe();
    server_end_ = std::move(a);
    network_end_ = std::move(b);
    server_serial = server_end_.get();
    network_ = std::make_unique<SimulatedNetwork>(scenario_, *network_end_);
    if (options.rssi_log) network_->channel().set_log(options.rssi_log);
  }

  core_ = std::make_unique<home::HomeCore>(scenario::build_registry(scenario_), scenario::build_rules(scenario_),
                                           scenario_.modes, *store_, *server_serial, options.home);
  core_->boot(start_);
}

HomeSystem::~HomeSystem() {
  if (store_) store_->flush();
}

void HomeSystem::step() {
  now_ += tick_;
  if (network_) network_->step(now_);
  core_->tick(now_);
}

void HomeSystem::advance_to(Millis t) {
  while (now_ < t) step();
}

}  // namespace whan
