#pragma once

#include <atomic>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "whan/api/runtime.hpp"

namespace whan::api {

/// Newline-delimited client protocol, one thread per connection.
class TcpServer {
 public:
  /// Port 0 picks a free port.
  TcpServer(Runtime& runtime, std::uint16_t port, std::string bind_address = "0.0.0.0");
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  /// Binds and starts accepting. Throws std::runtime_error (e.g. port in use).
  void start();
  void stop();
  std::uint16_t port() const { return port_; }

 private:
  struct Connection {
    std::thread thread;
    int fd = -1;
    std::atomic<bool> done{false};
  };

  void accept_loop();
  void serve(Connection& conn);
  void reap();

  Runtime& runtime_;
  std::uint16_t port_;
  std::string bind_address_;
  int listener_ = -1;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex conns_mu_;
  std::list<std::unique_ptr<Connection>> conns_;
};

}  // namespace whan::api
