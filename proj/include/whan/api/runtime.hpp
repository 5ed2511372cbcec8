#pragma once

// Owner of the running home: one mutex serializes every call into the
// HomeSystem (clock ticks, client commands, queries). The clock runs on its
// own thread unless the runtime is in manual mode.

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "whan/api/hub.hpp"
#include "whan/system.hpp"

namespace whan::api {

struct RuntimeOptions {
  double speed = 1.0;   // simulated seconds per wall second
  bool manual = false;  // the clock only moves through step()
};

class Runtime {
 public:
  explicit Runtime(std::unique_ptr<HomeSystem> system, RuntimeOptions options = {});
  ~Runtime();
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  /// Starts the clock thread (no-op in manual mode).
  void start();
  void stop();

  void step(std::size_t ticks = 1);
  void run_until(Millis t);

  template <class F>
  decltype(auto) locked(F&& f) {
    std::lock_guard lock(mu_);
    return f(*system_);
  }

  Millis now() const { return now_.load(); }
  Millis start_time() const { return start_; }
  Hub& hub() { return hub_; }
  home::SessionId new_session_id() { return ++last_session_; }

  /// Adds the user unless already stored.
  void ensure_user(const std::string& name, std::string_view password);

  /// Hashing happens outside the owner lock. A failure logs AuthFailure.
  bool authenticate(std::string_view user, std::string_view password, std::optional<home::SessionId> origin);

  std::string open_web_session(std::string user);
  std::optional<std::string> web_session_user(std::string_view token) const;
  void close_web_session(std::string_view token);

 private:
  void clock_loop();

  std::unique_ptr<HomeSystem> system_;
  RuntimeOptions options_;
  Millis start_;
  mutable std::mutex mu_;
  Hub hub_;
  std::atomic<Millis> now_;
  std::atomic<bool> stopping_{false};
  std::atomic<home::SessionId> last_session_{0};
  std::thread clock_;

  mutable std::mutex web_mu_;
  std::map<std::string, std::string, std::less<>> web_sessions_;
};

}  // namespace whan::api
