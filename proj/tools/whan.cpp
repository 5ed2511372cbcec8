// whan: run the home server (with its simulated radio network), run the
// simulator alone, or talk to a running server.

#include <arpa/inet.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "whan/api/auth.hpp"
#include "whan/api/http_server.hpp"
#include "whan/api/protocol.hpp"
#include "whan/api/runtime.hpp"
#include "whan/api/tcp_server.hpp"
#include "whan/scenario.hpp"
#include "whan/system.hpp"

namespace {

using namespace whan;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNoScenario = 2;
constexpr int kExitConnect = 3;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

void install_signal_handlers() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
}

// ---------------------------------------------------------------------------
// serve / sim
// ---------------------------------------------------------------------------

struct ServeOptions {
  std::string scenario;
  std::string db_path;
  std::uint16_t tcp_port = 4840;
  std::uint16_t http_port = 8080;
  std::string bind = "0.0.0.0";
  double speed = 1.0;
  std::optional<std::uint64_t> seed;
  std::string rssi_log;
  bool step = false;
  double run_for = 0.0;
  std::string web_root;
  std::uint16_t serial_listen = 0;
  std::string admin_password;
};

struct SimOptions {
  std::string scenario;
  std::string connect = "127.0.0.1:4841";
  double speed = 1.0;
  std::optional<std::uint64_t> seed;
  std::string rssi_log;
  double run_for = 0.0;
};

/// Exit code on failure, scenario on success.
std::variant<int, scenario::Scenario> load(const std::string& path) {
  if (path.empty()) return scenario::demo_scenario();
  if (!std::filesystem::exists(path)) {
    std::cerr << fmt::format("whan: scenario file {} not found\n", path);
    return kExitNoScenario;
  }
  try {
    return scenario::load_scenario(path);
  } catch (const scenario::ScenarioError& ex) {
    std::cerr << fmt::format("whan: {}: {}\n", path, ex.what());
  } catch (const std::exception& ex) {
    std::cerr << fmt::format("whan: {}\n", ex.what());
  }
  return kExitError;
}

void print_summary(HomeSystem& sys) {
  const auto& stats = sys.core().stats();
  std::cout << fmt::format("simulated {} to {}\n", format_instant(sys.start()), format_instant(sys.now()));
  std::cout << fmt::format("readings {}  commands sent {} acked {} failed {}  events {}\n", stats.readings,
                           stats.commands_sent, stats.commands_acked, stats.commands_failed,
                           sys.store().events().size());
  for (const auto& d : sys.core().registry().all()) {
    std::cout << fmt::format("  {:<14} {:<18} {:<7} {}\n", d.name, home::to_string(d.kind), home::to_string(d.state),
                             home::format_value(d));
  }
}

int run_serve(const ServeOptions& opt) {
  auto loaded = load(opt.scenario);
  if (auto* code = std::get_if<int>(&loaded)) return *code;
  auto sc = std::get<scenario::Scenario>(std::move(loaded));
  const auto users = sc.users;

  std::ofstream rssi_log;
  SystemOptions sys_opt;
  sys_opt.seed = opt.seed;
  if (!opt.db_path.empty()) sys_opt.db_path = opt.db_path;
  if (!opt.rssi_log.empty()) {
    rssi_log.open(opt.rssi_log);
    if (!rssi_log) {
      std::cerr << fmt::format("whan: cannot write {}\n", opt.rssi_log);
      return kExitError;
    }
    sys_opt.rssi_log = &rssi_log;
  }

  std::unique_ptr<HomeSystem> system;
  try {
    if (opt.serial_listen != 0) {
      std::cerr << fmt::format("waiting for the simulator on serial port {}\n", opt.serial_listen);
      sys_opt.remote_serial = serial::accept_serial(opt.serial_listen);
    }
    system = std::make_unique<HomeSystem>(std::move(sc), std::move(sys_opt));
  } catch (const std::exception& ex) {
    std::cerr << fmt::format("whan: {}\n", ex.what());
    return kExitError;
  }
  auto* sys = system.get();
  api::Runtime runtime(std::move(system), {opt.speed, opt.step});

  for (const auto& u : users) runtime.ensure_user(u.name, u.password);
  if (!opt.admin_password.empty()) runtime.ensure_user("admin", opt.admin_password);
  const bool no_users = runtime.locked([](HomeSystem& s) { return s.store().user_count() == 0; });
  if (no_users) {
    auto password = api::random_token().substr(0, 12);
    runtime.ensure_user("admin", password);
    std::cerr << fmt::format("created user admin with password {}\n", password);
  }

  const Millis end = runtime.start_time() + static_cast<Millis>(opt.run_for * 1000.0);
  if (opt.step) {
    // Manual clock: run the span as fast as possible, deterministically.
    runtime.run_until(end);
    runtime.locked([](HomeSystem& s) { print_summary(s); });
    runtime.stop();
    return kExitOk;
  }

  api::TcpServer tcp(runtime, opt.tcp_port, opt.bind);
  api::HttpServer http(runtime, opt.http_port, opt.web_root, opt.bind);
  try {
    tcp.start();
    http.start();
  } catch (const std::exception& ex) {
    std::cerr << fmt::format("whan: {}\n", ex.what());
    return kExitError;
  }
  std::cerr << fmt::format("whan: tcp {} http {} speed x{} start {}\n", tcp.port(), http.port(), opt.speed,
                           format_instant(runtime.start_time()));
  install_signal_handlers();
  runtime.start();
  while (!g_interrupted && (opt.run_for <= 0 || runtime.now() < end)) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  runtime.stop();
  http.stop();
  tcp.stop();
  runtime.locked([&](HomeSystem&) { print_summary(*sys); });
  return kExitOk;
}

int run_sim(const SimOptions& opt) {
  auto loaded = load(opt.scenario);
  if (auto* code = std::get_if<int>(&loaded)) return *code;
  auto sc = std::get<scenario::Scenario>(std::move(loaded));
  if (opt.seed) sc.seed = *opt.seed;

  auto colon = opt.connect.rfind(':');
  if (colon == std::string::npos) {
    std::cerr << "whan: --connect expects host:port\n";
    return kExitError;
  }
  std::unique_ptr<serial::ByteStream> link;
  try {
    link = serial::connect_serial(opt.connect.substr(0, colon),
                                  static_cast<std::uint16_t>(std::stoi(opt.connect.substr(colon + 1))));
  } catch (const std::exception& ex) {
    std::cerr << fmt::format("whan: {}\n", ex.what());
    return kExitConnect;
  }
  std::ofstream rssi_log;
  const Millis tick = sc.tick;
  const Millis start = sc.start;
  SimulatedNetwork net(std::move(sc), *link);
  if (!opt.rssi_log.empty()) {
    rssi_log.open(opt.rssi_log);
    net.channel().set_log(&rssi_log);
  }

  install_signal_handlers();
  const auto wall0 = std::chrono::steady_clock::now();
  const Millis end = start + static_cast<Millis>(opt.run_for * 1000.0);
  while (!g_interrupted && link->connected() && (opt.run_for <= 0 || net.now() < end)) {
    const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - wall0).count();
    const Millis target = start + static_cast<Millis>(elapsed * opt.speed);
    while (net.now() + tick <= target) net.step(net.now() + tick);
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  std::cerr << fmt::format("simulator stopped at {}: {} frames sent, {} dropped\n", format_instant(net.now()),
                           net.channel().transmitted(), net.channel().dropped());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ctl
// ---------------------------------------------------------------------------

class LineClient {
 public:
  ~LineClient() {
    if (fd_ >= 0) ::close(fd_);
  }

  void connect(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
      throw std::runtime_error(fmt::format("cannot resolve {}", host));
    }
    for (auto* ai = res; ai; ai = ai->ai_next) {
      fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd_ >= 0 && ::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
      if (fd_ >= 0) ::close(fd_);
      fd_ = -1;
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) throw std::runtime_error(fmt::format("cannot connect to {}:{}: {}", host, port, std::strerror(errno)));
  }

  void send(const std::string& line) {
    auto data = line + "\n";
    std::size_t sent = 0;
    while (sent < data.size()) {
      auto n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
      if (n <= 0) throw std::runtime_error("connection lost");
      sent += static_cast<std::size_t>(n);
    }
  }

  /// nullopt on timeout (when one is given) or interruption.
  std::optional<std::string> read_line(std::optional<std::chrono::milliseconds> timeout = std::nullopt) {
    const auto deadline = std::chrono::steady_clock::now() + timeout.value_or(std::chrono::hours(24 * 365));
    for (;;) {
      auto nl = buf_.find('\n');
      if (nl != std::string::npos) {
        auto line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      if (g_interrupted || std::chrono::steady_clock::now() >= deadline) return std::nullopt;
      pollfd pfd{fd_, POLLIN, 0};
      if (::poll(&pfd, 1, 100) <= 0) continue;
      char tmp[4096];
      auto n = ::recv(fd_, tmp, sizeof tmp, 0);
      if (n <= 0) throw std::runtime_error("connection closed by server");
      buf_.append(tmp, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_ = -1;
  std::string buf_;
};

struct CtlOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 4840;
  std::string user = "admin";
  std::string password;
  std::vector<std::string> args;
  bool csv = false;
  double wait = 0.0;  // seconds to wait for the outcome of a set
};

bool is_err(const std::string& line) { return line.rfind("ERR", 0) == 0; }

int fail_with(const std::string& line) {
  std::cout << line << "\n";
  return kExitError;
}

std::string encode_args(const std::vector<std::string>& args, std::size_t from) {
  std::string out;
  for (std::size_t i = from; i < args.size(); ++i) {
    if (!out.empty()) out += ' ';
    out += api::percent_encode(args[i]);
  }
  return out;
}

std::optional<std::string> to_protocol_time(const std::string& text) {
  auto t = parse_instant(text);
  if (!t) return std::nullopt;
  return format_seconds(*t);
}

std::string decode(std::string_view field) { return api::percent_decode(field).value_or(std::string(field)); }

int run_ctl(const std::string& sub, const CtlOptions& opt) {
  LineClient client;
  try {
    client.connect(opt.host, opt.port);
  } catch (const std::exception& ex) {
    std::cerr << fmt::format("whan ctl: {}\n", ex.what());
    return kExitConnect;
  }
  install_signal_handlers();

  try {
    client.send(fmt::format("AUTH {} {}", api::percent_encode(opt.user), api::percent_encode(opt.password)));
    auto auth = client.read_line();
    if (!auth || is_err(*auth)) return fail_with(auth.value_or("ERR 401"));

    const auto& a = opt.args;
    auto need = [&](std::size_t n, const char* usage) {
      if (a.size() != n) throw CLI::ValidationError(fmt::format("usage: whan ctl {}", usage));
    };

    if (sub == "list" || sub == "read") {
      if (sub == "list") need(0, "list");
      if (sub == "read") need(1, "read <device>");
      client.send(fmt::format("GET {}", sub == "list" ? "*" : api::percent_encode(a[0])));
      for (;;) {
        auto line = client.read_line();
        if (!line) return kExitError;
        if (is_err(*line)) return fail_with(*line);
        if (*line == "OK") return kExitOk;
        auto f = api::split_fields(*line);
        if (f.size() == 4 && f[0] == "STATE") {
          std::cout << fmt::format("{:<14} {:<8} {}\n", decode(f[1]), f[2], decode(f[3]));
        } else {
          std::cout << *line << "\n";
        }
      }
    }
    if (sub == "set") {
      need(3, "set <device> <property> <value>");
      client.send("SET " + encode_args(a, 0));
      auto line = client.read_line();
      if (!line) return kExitError;
      std::cout << *line << "\n";
      if (is_err(*line)) return kExitError;
      if (opt.wait > 0 && line->size() > 3) {
        // Wait for the applied state or the delivery failure of this command.
        const auto txid = line->substr(3);
        const auto deadline = std::chrono::steady_clock::now() +
                              std::chrono::milliseconds(static_cast<std::int64_t>(opt.wait * 1000));
        while (std::chrono::steady_clock::now() < deadline) {
          auto push = client.read_line(std::chrono::milliseconds(100));
          if (!push) continue;
          if (push->rfind("STATE ", 0) == 0) {
            std::cout << *push << "\n";
            return kExitOk;
          }
          if (*push == "EVENT DeliveryFailed " + txid) {
            std::cout << *push << "\n";
            return kExitError;
          }
        }
        std::cerr << "whan ctl: no outcome before --wait expired\n";
        return kExitError;
      }
      return kExitOk;
    }
    if (sub == "mode") {
      need(1, "mode <name>");
      client.send("MODE " + api::percent_encode(a[0]));
      auto line = client.read_line();
      if (!line) return kExitError;
      std::cout << *line << "\n";
      return is_err(*line) ? kExitError : kExitOk;
    }
    if (sub == "modes") {
      need(0, "modes");
      client.send("MODES");
      auto line = client.read_line();
      if (!line) return kExitError;
      if (is_err(*line)) return fail_with(*line);
      auto f = api::split_fields(*line);
      for (std::size_t i = 1; i < f.size(); ++i) std::cout << decode(f[i]) << "\n";
      return kExitOk;
    }
    if (sub == "watch") {
      if (a.size() > 1) throw CLI::ValidationError("usage: whan ctl watch [device]");
      client.send("SUB " + (a.empty() ? std::string("*") : api::percent_encode(a[0])));
      auto line = client.read_line();
      if (!line || is_err(*line)) return fail_with(line.value_or("ERR 400"));
      while (!g_interrupted) {
        auto push = client.read_line(std::chrono::milliseconds(200));
        if (push) std::cout << *push << std::endl;
      }
      return kExitOk;
    }
    if (sub == "hist") {
      need(3, "hist <device> <from> <to> [--csv]");
      auto from = to_protocol_time(a[1]);
      auto to = to_protocol_time(a[2]);
      if (!from || !to) throw CLI::ValidationError("from/to: Unix seconds or YYYY-MM-DDTHH:MM:SS");
      client.send(fmt::format("HIST {} {} {}", api::percent_encode(a[0]), *from, *to));
      auto line = client.read_line();
      if (!line) return kExitError;
      if (is_err(*line)) return fail_with(*line);
      if (opt.csv) std::cout << "ts,value,rssi\n";
      for (;;) {
        auto row = client.read_line();
        if (!row) return kExitError;
        if (*row == "HIST-END") return kExitOk;
        if (!opt.csv) {
          std::cout << *row << "\n";
          continue;
        }
        auto f = api::split_fields(*row);
        if (f.size() == 3) std::cout << fmt::format("{},{},{}\n", f[0], f[1], f[2]);
      }
    }
  } catch (const CLI::ValidationError& ex) {
    std::cerr << ex.what() << "\n";
    return kExitError;
  } catch (const std::exception& ex) {
    std::cerr << fmt::format("whan ctl: {}\n", ex.what());
    return kExitConnect;
  }
  return kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wireless home automation network: server, simulator and client"};
  app.require_subcommand(1);

  ServeOptions serve;
  auto* s = app.add_subcommand("serve", "Run the home server with its simulated end devices");
  s->set_config("--config", "", "INI/TOML file with option defaults");
  s->add_option("--scenario", serve.scenario, "Scenario file (built-in demo home if omitted)")->envname("WHAN_SCENARIO");
  s->add_option("--db-path", serve.db_path, "Store directory (in-memory if omitted)")->envname("WHAN_DB_PATH");
  s->add_option("--tcp-port", serve.tcp_port, "Client protocol port")->envname("WHAN_TCP_PORT")->capture_default_str();
  s->add_option("--http-port", serve.http_port, "HTTP port")->envname("WHAN_HTTP_PORT")->capture_default_str();
  s->add_option("--bind", serve.bind, "Listen address")->envname("WHAN_BIND")->capture_default_str();
  s->add_option("--speed", serve.speed, "Simulated seconds per wall second")
      ->envname("WHAN_SPEED")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s->add_option("--seed", serve.seed, "Seed for every random stream")->envname("WHAN_SEED");
  s->add_option("--rssi-log", serve.rssi_log, "CSV of every radio transmission")->envname("WHAN_RSSI_LOG");
  auto* run_for = s->add_option("--run-for", serve.run_for, "Stop after this many simulated seconds")
                      ->envname("WHAN_RUN_FOR")
                      ->check(CLI::NonNegativeNumber);
  s->add_flag("--step", serve.step, "Manual clock: run --run-for seconds flat out, no listeners")
      ->envname("WHAN_STEP")
      ->needs(run_for);
  s->add_option("--web-root", serve.web_root, "Directory with the web UI build")->envname("WHAN_WEB_ROOT");
  s->add_option("--serial-listen", serve.serial_listen, "Wait for `whan sim` on this loopback port")
      ->envname("WHAN_SERIAL_LISTEN");
  s->add_option("--admin-password", serve.admin_password, "Create user admin with this password if missing")
      ->envname("WHAN_ADMIN_PASSWORD");

  SimOptions sim;
  auto* m = app.add_subcommand("sim", "Run only the simulated radio side, connected to `serve --serial-listen`");
  m->add_option("--scenario", sim.scenario, "Scenario file")->envname("WHAN_SCENARIO");
  m->add_option("--connect", sim.connect, "host:port of the server's serial listener")->capture_default_str();
  m->add_option("--speed", sim.speed, "Simulated seconds per wall second")->check(CLI::PositiveNumber);
  m->add_option("--seed", sim.seed, "Seed for every random stream")->envname("WHAN_SEED");
  m->add_option("--rssi-log", sim.rssi_log, "CSV of every radio transmission");
  m->add_option("--run-for", sim.run_for, "Stop after this many simulated seconds");

  CtlOptions ctl;
  auto* c = app.add_subcommand("ctl", "Talk to a running server");
  c->add_option("--host", ctl.host, "Server host")->envname("WHAN_HOST")->capture_default_str();
  c->add_option("--port", ctl.port, "Server port")->envname("WHAN_TCP_PORT")->capture_default_str();
  c->add_option("--user", ctl.user, "User name")->envname("WHAN_USER")->capture_default_str();
  c->add_option("--password", ctl.password, "Password")->envname("WHAN_PASSWORD");
  c->require_subcommand(1);
  std::string ctl_sub;
  auto add_ctl = [&](const char* name, const char* help) {
    auto* sub = c->add_subcommand(name, help);
    sub->add_option("args", ctl.args, "Arguments");
    sub->callback([&ctl_sub, name] { ctl_sub = name; });
    return sub;
  };
  add_ctl("list", "All devices and their state");
  add_ctl("read", "One device: read <device>");
  add_ctl("set", "Change a device: set <device> <property> <value>")
      ->add_option("--wait", ctl.wait, "Seconds to wait for the STATE or DeliveryFailed outcome");
  add_ctl("mode", "Apply a mode: mode <name>");
  add_ctl("modes", "List modes");
  add_ctl("watch", "Stream readings, states and events: watch [device]");
  add_ctl("hist", "History: hist <device> <from> <to> (Unix seconds or ISO time)")
      ->add_flag("--csv", ctl.csv, "CSV output with header ts,value,rssi");

  CLI11_PARSE(app, argc, argv);

  try {
    if (s->parsed()) return run_serve(serve);
    if (m->parsed()) return run_sim(sim);
    if (c->parsed()) return run_ctl(ctl_sub, ctl);
  } catch (const std::exception& ex) {
    std::cerr << fmt::format("whan: {}\n", ex.what());
    return kExitError;
  }
  return kExitError;
}
