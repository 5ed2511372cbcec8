#include "whan/api/http_server.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "whan/api/camera.hpp"
#include "whan/api/protocol.hpp"

namespace whan::api {

using nlohmann::json;

namespace {

constexpr const char* kPlaceholder = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>WHAN home server</title></head>
<body>
<h1>WHAN home server</h1>
<p>No web UI assets are installed. Start the server with <code>--web-root</code> to serve them.</p>
<p>JSON endpoints live under <code>/api/</code>; the camera feed is at <code>/camera/stream</code>.</p>
</body></html>
)";

double to_seconds(Millis t) { return static_cast<double>(t) / 1000.0; }

std::optional<Millis> seconds_param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return parse_seconds(req.get_param_value(name));
}

json device_json(const home::Device& d) {
  json j{{"name", d.name},
         {"kind", home::to_string(d.kind)},
         {"group", home::to_string(d.group())},
         {"state", home::to_string(d.state)},
         {"value", d.value},
         {"text", home::format_value(d)},
         {"node", d.node},
         {"set_point", d.set_point ? json(*d.set_point) : json(nullptr)},
         {"updated_at", d.updated_at == home::Device::kNeverSeen ? json(nullptr) : json(to_seconds(d.updated_at))}};
  switch (d.kind) {
    case home::DeviceKind::Heater:
      j["band"] = d.band;
      j["thermostat_sensor"] = d.thermostat_sensor;
      break;
    case home::DeviceKind::MotionSensor: j["armed"] = d.armed; break;
    case home::DeviceKind::CameraGimbal:
      j["pan"] = d.value;
      j["tilt"] = d.tilt;
      break;
    default: break;
  }
  return j;
}

json event_json(const home::EventRecord& e) {
  return {{"ts", to_seconds(e.ts)},
          {"severity", home::to_string(e.severity)},
          {"kind", home::to_string(e.kind)},
          {"detail", e.detail}};
}

json setting_json(const home::Setting& s) { return {{"device", s.device}, {"property", s.property}, {"value", s.value}}; }

json rule_json(const home::Rule& r) {
  json j{{"id", r.id}, {"kind", home::to_string(r.kind)}, {"armed", r.armed}, {"suspended", r.suspended}};
  if (r.kind == home::RuleKind::Timer) {
    j["target"] = r.target;
    j["on_time"] = r.on_time ? json(format_time_of_day(*r.on_time)) : json(nullptr);
    j["off_time"] = r.off_time ? json(format_time_of_day(*r.off_time)) : json(nullptr);
  } else {
    j["source"] = r.source;
    j["threshold"] = r.threshold;
    if (r.kind == home::RuleKind::Binding) {
      j["compare"] = home::to_string(r.comparison);
    } else {
      j["hysteresis"] = r.hysteresis;
    }
    j["action"] = r.action ? setting_json(*r.action) : json(nullptr);
    if (r.release_action) j["release"] = setting_json(*r.release_action);
  }
  return j;
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, {{"error", status}, {"message", message}}, status);
}

std::optional<std::string> cookie_token(const httplib::Request& req) {
  auto header = req.get_header_value("Cookie");
  const std::string key = std::string(kSessionCookie) + "=";
  std::size_t pos = 0;
  while (pos < header.size()) {
    auto end = header.find(';', pos);
    if (end == std::string::npos) end = header.size();
    auto item = header.substr(pos, end - pos);
    auto b = item.find_first_not_of(' ');
    if (b != std::string::npos && item.compare(b, key.size(), key) == 0) return item.substr(b + key.size());
    pos = end + 1;
  }
  return std::nullopt;
}

/// JSON strings pass through; numbers and booleans take their textual form.
std::optional<std::string> value_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "on" : "off";
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number()) return fmt::format("{}", v.get<double>());
  return std::nullopt;
}

}  // namespace

struct HttpServer::Impl {
  Runtime& runtime;
  std::string web_root;
  std::string bind_address;
  httplib::Server server;
  std::thread thread;
  std::atomic<bool> stopping{false};

  Impl(Runtime& rt, std::string root, std::string bind)
      : runtime(rt), web_root(std::move(root)), bind_address(std::move(bind)) {}

  bool authorized(const httplib::Request& req) {
    auto token = cookie_token(req);
    return token && runtime.web_session_user(*token).has_value();
  }

  void routes();
  void camera_stream(httplib::Response& res);
  void event_stream(httplib::Response& res);
};

void HttpServer::Impl::routes() {
  if (!web_root.empty()) {
    if (!std::filesystem::is_directory(web_root) || !server.set_mount_point("/", web_root)) {
      throw std::runtime_error(fmt::format("web root {} is not a directory", web_root));
    }
  } else {
    server.Get("/", [](const httplib::Request&, httplib::Response& res) { res.set_content(kPlaceholder, "text/html"); });
  }

  // Gate everything except the page itself and login.
  server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    const bool guarded = (req.path.rfind("/api/", 0) == 0 && req.path != "/api/login") || req.path.rfind("/camera/", 0) == 0;
    if (guarded && !authorized(req)) {
      send_error(res, 401, "login required");
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  server.Post("/api/login", [this](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("user") || !body.contains("password") ||
        !body["user"].is_string() || !body["password"].is_string()) {
      return send_error(res, 400, "expected {\"user\", \"password\"}");
    }
    const auto user = body["user"].get<std::string>();
    if (!runtime.authenticate(user, body["password"].get<std::string>(), std::nullopt)) {
      return send_error(res, 401, "invalid credentials");
    }
    auto token = runtime.open_web_session(user);
    res.set_header("Set-Cookie", fmt::format("{}={}; Path=/; HttpOnly; SameSite=Strict", kSessionCookie, token));
    send_json(res, {{"ok", true}, {"user", user}});
  });

  server.Post("/api/logout", [this](const httplib::Request& req, httplib::Response& res) {
    if (auto token = cookie_token(req)) runtime.close_web_session(*token);
    res.set_header("Set-Cookie", fmt::format("{}=; Path=/; Max-Age=0", kSessionCookie));
    send_json(res, {{"ok", true}});
  });

  server.Get("/api/devices", [this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    runtime.locked([&](HomeSystem& sys) {
      for (const auto& d : sys.core().registry().all()) out.push_back(device_json(d));
    });
    send_json(res, out);
  });

  server.Get("/api/history", [this](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("device")) return send_error(res, 400, "missing device");
    const auto device = req.get_param_value("device");
    auto from = req.has_param("from") ? seconds_param(req, "from") : std::optional<Millis>(0);
    auto to = req.has_param("to") ? seconds_param(req, "to") : std::optional<Millis>(INT64_MAX);
    if (!from || !to || *from > *to) return send_error(res, 400, "bad time range");
    json samples = json::array();
    std::string kind;
    bool found = runtime.locked([&](HomeSystem& sys) {
      const auto* d = sys.core().registry().find(device);
      if (!d) return false;
      kind = home::to_string(d->kind);
      for (const auto& s : *sys.core().query_history(device, *from, *to)) {
        samples.push_back({{"ts", to_seconds(s.ts)}, {"value", s.value}, {"rssi", s.rssi}});
      }
      return true;
    });
    if (!found) return send_error(res, 404, "unknown device");
    send_json(res, {{"device", device}, {"kind", kind}, {"samples", std::move(samples)}});
  });

  server.Get("/api/events", [this](const httplib::Request& req, httplib::Response& res) {
    auto since = req.has_param("since") ? seconds_param(req, "since") : std::optional<Millis>(INT64_MIN);
    if (!since) return send_error(res, 400, "bad since");
    json out = json::array();
    runtime.locked([&](HomeSystem& sys) {
      for (const auto& e : sys.store().events_since(*since)) out.push_back(event_json(e));
    });
    send_json(res, out);
  });

  server.Get("/api/modes", [this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    runtime.locked([&](HomeSystem& sys) {
      const auto& current = sys.core().current_mode();
      for (const auto& m : sys.core().modes()) {
        json entries = json::array();
        for (const auto& e : m.entries) entries.push_back(setting_json(e));
        json j{{"name", m.name}, {"entries", std::move(entries)}, {"active", current && *current == m.name}};
        if (m.trigger) {
          j["trigger"] = {{"window", fmt::format("{}-{}", format_time_of_day(m.trigger->window_start),
                                                 format_time_of_day(m.trigger->window_end))},
                          {"light_sensor", m.trigger->light_device},
                          {"light_below", m.trigger->light_below},
                          {"sustain_s", to_seconds(m.trigger->sustain)}};
        }
        out.push_back(std::move(j));
      }
    });
    send_json(res, out);
  });

  server.Get("/api/rules", [this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    runtime.locked([&](HomeSystem& sys) {
      for (const auto& r : sys.core().rules().rules()) out.push_back(rule_json(r));
    });
    send_json(res, out);
  });

  server.Post("/api/command", [this](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) return send_error(res, 400, "expected a JSON object");
    auto field = [&](const char* key) -> std::optional<std::string> {
      return body.contains(key) ? value_text(body[key]) : std::nullopt;
    };
    auto device = field("device");
    auto property = field("property");
    auto value = field("value");
    if (!device || !property || !value) return send_error(res, 400, "expected {device, property, value}");
    home::Setting setting{*device, *property, *value};
    auto r = runtime.locked([&](HomeSystem& sys) { return sys.core().submit(setting, std::nullopt, sys.now()); });
    if (!r.ok()) return send_error(res, static_cast<int>(r.status), r.message);
    send_json(res, {{"ok", true}, {"txid", r.txid ? json(*r.txid) : json(nullptr)}});
  });

  server.Post("/api/mode", [this](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("name") || !body["name"].is_string()) {
      return send_error(res, 400, "expected {\"name\"}");
    }
    const auto name = body["name"].get<std::string>();
    auto r = runtime.locked([&](HomeSystem& sys) { return sys.core().apply_mode(name, sys.now()); });
    if (!r.ok()) return send_error(res, static_cast<int>(r.status), r.message);
    send_json(res, {{"ok", true}});
  });

  server.Get("/api/stream", [this](const httplib::Request&, httplib::Response& res) { event_stream(res); });

  server.Get("/camera/frame.ppm", [this](const httplib::Request& req, httplib::Response& res) {
    auto device = req.has_param("device") ? req.get_param_value("device") : std::string{};
    std::optional<CameraFrame> frame;
    runtime.locked([&](HomeSystem& sys) {
      for (const auto& d : sys.core().registry().all()) {
        if (d.kind != home::DeviceKind::CameraGimbal || (!device.empty() && d.name != device)) continue;
        frame = render_camera_frame(d.value, d.tilt, frame_counter(sys.now() - sys.start()));
        break;
      }
    });
    if (!frame) return send_error(res, 404, "no camera");
    res.set_header("X-Frame-Counter", std::to_string(frame->counter));
    res.set_content(to_ppm(*frame), "image/x-portable-pixmap");
  });

  server.Get("/camera/stream", [this](const httplib::Request&, httplib::Response& res) { camera_stream(res); });
}

void HttpServer::Impl::camera_stream(httplib::Response& res) {
  auto last = std::make_shared<std::optional<std::uint64_t>>();
  res.set_chunked_content_provider(
      "multipart/x-mixed-replace; boundary=frame", [this, last](std::size_t, httplib::DataSink& sink) {
        for (;;) {
          if (stopping || !sink.is_writable()) return false;
          std::optional<CameraFrame> frame;
          runtime.locked([&](HomeSystem& sys) {
            const auto counter = frame_counter(sys.now() - sys.start());
            if (*last == counter) return;
            for (const auto& d : sys.core().registry().all()) {
              if (d.kind != home::DeviceKind::CameraGimbal) continue;
              frame = render_camera_frame(d.value, d.tilt, counter);
              break;
            }
          });
          if (!frame) {
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
            continue;
          }
          *last = frame->counter;
          const auto ppm = to_ppm(*frame);
          const auto head = fmt::format(
              "--frame\r\nContent-Type: image/x-portable-pixmap\r\nContent-Length: {}\r\nX-Frame-Counter: {}\r\n\r\n",
              ppm.size(), frame->counter);
          return sink.write(head.data(), head.size()) && sink.write(ppm.data(), ppm.size()) &&
                 sink.write("\r\n", 2);
        }
      });
}

void HttpServer::Impl::event_stream(httplib::Response& res) {
  const auto id = runtime.new_session_id();
  auto outbox = runtime.hub().attach(id);
  runtime.hub().subscribe(id, "*");
  auto greeted = std::make_shared<bool>(false);
  res.set_header("Cache-Control", "no-cache");
  res.set_chunked_content_provider(
      "text/event-stream",
      [this, outbox, greeted](std::size_t, httplib::DataSink& sink) {
        if (stopping || !sink.is_writable() || outbox->overflowed() || outbox->closed()) return false;
        std::string chunk;
        if (!*greeted) {
          *greeted = true;
          runtime.locked([&](HomeSystem& sys) {
            for (const auto& d : sys.core().registry().all()) chunk += "data: " + format_state(d) + "\n\n";
          });
        }
        if (auto line = outbox->pop(std::chrono::milliseconds(500))) {
          chunk += "data: " + *line + "\n\n";
          for (auto& more : outbox->drain()) chunk += "data: " + more + "\n\n";
        }
        if (chunk.empty()) chunk = ": keep-alive\n\n";
        return sink.write(chunk.data(), chunk.size());
      },
      [this, id](bool) { runtime.hub().detach(id); });
}

HttpServer::HttpServer(Runtime& runtime, std::uint16_t port, std::string web_root, std::string bind_address)
    : impl_(std::make_unique<Impl>(runtime, std::move(web_root), std::move(bind_address))), port_(port) {}

HttpServer::~HttpServer() { stop(); }

void HttpServer::start() {
  impl_->routes();
  if (port_ == 0) {
    const int p = impl_->server.bind_to_any_port(impl_->bind_address);
    if (p <= 0) throw std::runtime_error("http: cannot bind");
    port_ = static_cast<std::uint16_t>(p);
  } else if (!impl_->server.bind_to_port(impl_->bind_address, port_)) {
    throw std::runtime_error(fmt::format("http port {}: cannot bind (in use?)", port_));
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->stopping = true;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace whan::api
