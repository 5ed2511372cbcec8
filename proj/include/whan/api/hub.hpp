#pragma once

// Fan-out of home notifications to connected clients. Every client gets a
// bounded outbox; a client that falls 256 messages behind is cut off.

#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>

#include "whan/home/home_core.hpp"

namespace whan::api {

inline constexpr std::size_t kOutboxCapacity = 256;

class Outbox {
 public:
  explicit Outbox(std::size_t capacity = kOutboxCapacity) : capacity_(capacity) {}

  /// False once the outbox has overflowed or been closed.
  bool push(std::string line);
  std::optional<std::string> pop(std::chrono::milliseconds wait);
  std::deque<std::string> drain();

  void close();
  bool overflowed() const;
  bool closed() const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> lines_;
  std::size_t capacity_;
  bool overflowed_ = false;
  bool closed_ = false;
};

class Hub {
 public:
  std::shared_ptr<Outbox> attach(home::SessionId id, std::size_t capacity = kOutboxCapacity);
  void detach(home::SessionId id);

  /// "*" subscribes to every device.
  void subscribe(home::SessionId id, const std::string& device);
  void unsubscribe(home::SessionId id, const std::string& device);

  /// Readings go to subscribers of the device. States do too, and always to
  /// the session that caused them. Events go to every session with any
  /// subscription, and always to their origin.
  void publish(const home::Notification& note);

  std::size_t size() const;

 private:
  struct Client {
    std::shared_ptr<Outbox> outbox;
    std::set<std::string, std::less<>> devices;
  };

  mutable std::mutex mu_;
  std::map<home::SessionId, Client> clients_;
};

}  // namespace whan::api
