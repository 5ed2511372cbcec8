#include "whan/api/hub.hpp"

#include "whan/api/protocol.hpp"

namespace whan::api {

bool Outbox::push(std::string line) {
  {
    std::lock_guard lock(mu_);
    if (closed_ || overflowed_) return false;
    if (lines_.size() >= capacity_) {
      overflowed_ = true;
    } else {
      lines_.push_back(std::move(line));
    }
  }
  cv_.notify_all();
  return !overflowed();
}

std::optional<std::string> Outbox::pop(std::chrono::milliseconds wait) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, wait, [&] { return !lines_.empty() || closed_ || overflowed_; });
  if (lines_.empty()) return std::nullopt;
  auto line = std::move(lines_.front());
  lines_.pop_front();
  return line;
}

std::deque<std::string> Outbox::drain() {
  std::lock_guard lock(mu_);
  return std::exchange(lines_, {});
}

void Outbox::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool Outbox::overflowed() const {
  std::lock_guard lock(mu_);
  return overflowed_;
}

bool Outbox::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::size_t Outbox::size() const {
  std::lock_guard lock(mu_);
  return lines_.size();
}

std::shared_ptr<Outbox> Hub::attach(home::SessionId id, std::size_t capacity) {
  auto outbox = std::make_shared<Outbox>(capacity);
  std::lock_guard lock(mu_);
  clients_[id] = Client{outbox, {}};
  return outbox;
}

void Hub::detach(home::SessionId id) {
  std::shared_ptr<Outbox> outbox;
  {
    std::lock_guard lock(mu_);
    auto it = clients_.find(id);
    if (it == clients_.end()) return;
    outbox = it->second.outbox;
    clients_.erase(it);
  }
  outbox->close();
}

void Hub::subscribe(home::SessionId id, const std::string& device) {
  std::lock_guard lock(mu_);
  auto it = clients_.find(id);
  if (it != clients_.end()) it->second.devices.insert(device);
}

void Hub::unsubscribe(home::SessionId id, const std::string& device) {
  std::lock_guard lock(mu_);
  auto it = clients_.find(id);
  if (it == clients_.end()) return;
  if (device == "*") {
    it->second.devices.clear();
  } else {
    it->second.devices.erase(device);
  }
}

void Hub::publish(const home::Notification& note) {
  const auto line = format_notification(note);
  std::optional<home::SessionId> origin;
  std::string_view device;
  bool is_event = false;
  if (auto* r = std::get_if<home::ReadingNote>(&note)) {
    device = r->device;
  } else if (auto* s = std::get_if<home::StateNote>(&note)) {
    device = s->device;
    origin = s->origin;
  } else {
    is_event = true;
    origin = std::get<home::EventNote>(note).origin;
  }

  std::lock_guard lock(mu_);
  for (auto& [id, client] : clients_) {
    bool wanted = origin == id;
    if (!wanted) {
      if (is_event) {
        wanted = !client.devices.empty();
      } else {
        wanted = client.devices.count("*") != 0 || client.devices.find(device) != client.devices.end();
      }
    }
    if (wanted) client.outbox->push(line);
  }
}

std::size_t Hub::size() const {
  std::lock_guard lock(mu_);
  return clients_.size();
}

}  // namespace whan::api
