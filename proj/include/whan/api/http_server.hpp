#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "whan/api/runtime.hpp"

namespace whan::api {

inline constexpr const char* kSessionCookie = "whan_session";

/// JSON API, live push stream and camera feed for the dashboard.
///
///   GET  /                       web UI assets (or a placeholder page)
///   POST /api/login              {"user","password"} -> session cookie
///   POST /api/logout
///   GET  /api/devices            Device list
///   GET  /api/history?device=&from=&to=     Unix seconds, inclusive
///   GET  /api/events?since=
///   GET  /api/modes, /api/rules
///   POST /api/command            {"device","property","value"}
///   POST /api/mode               {"name"}
///   GET  /api/stream             server-sent events, one protocol line each
///   GET  /camera/stream          multipart PPM frames, boundary "frame"
///   GET  /camera/frame.ppm
///
/// Everything but "/" and /api/login needs the session cookie.
class HttpServer {
 public:
  HttpServer(Runtime& runtime, std::uint16_t port, std::string web_root = {},
             std::string bind_address = "0.0.0.0");
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Throws std::runtime_error if the port cannot be bound.
  void start();
  void stop();
  std::uint16_t port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::uint16_t port_;
};

}  // namespace whan::api
