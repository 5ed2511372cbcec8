#include "whan/api/runtime.hpp"

#include <chrono>

#include <fmt/format.h>

#include "whan/api/auth.hpp"

namespace whan::api {

namespace {

constexpr int kMaxStepsPerLock = 50;

}  // namespace

Runtime::Runtime(std::unique_ptr<HomeSystem> system, RuntimeOptions options)
    : system_(std::move(system)), options_(options), start_(system_->start()), now_(system_->now()) {
  system_->core().set_listener([this](const home::Notification& note) { hub_.publish(note); });
}

Runtime::~Runtime() {
  stop();
  std::lock_guard lock(mu_);
  system_->core().set_listener(nullptr);
}

void Runtime::start() {
  if (options_.manual || clock_.joinable()) return;
  stopping_ = false;
  clock_ = std::thread([this] { clock_loop(); });
}

void Runtime::stop() {
  stopping_ = true;
  if (clock_.joinable()) clock_.join();
  std::lock_guard lock(mu_);
  system_->store().flush();
}

void Runtime::clock_loop() {
  using clock = std::chrono::steady_clock;
  const auto wall0 = clock::now();
  Millis sim0 = 0;
  Millis tick = 0;
  {
    std::lock_guard lock(mu_);
    sim0 = system_->now();
    tick = system_->tick_length();
  }
  const auto pause = std::chrono::microseconds(
      std::clamp<std::int64_t>(static_cast<std::int64_t>(tick * 1000 / options_.speed), 1000, 20000));

  while (!stopping_) {
    const auto wall_ms = std::chrono::duration<double, std::milli>(clock::now() - wall0).count();
    const auto target = sim0 + static_cast<Millis>(wall_ms * options_.speed);
    bool behind = false;
    {
      std::lock_guard lock(mu_);
      int n = 0;
      while (system_->now() + tick <= target && n < kMaxStepsPerLock) {
        system_->step();
        ++n;
      }
      behind = system_->now() + tick <= target;
      now_ = system_->now();
    }
    if (!behind) std::this_thread::sleep_for(pause);
  }
}

void Runtime::step(std::size_t ticks) {
  std::lock_guard lock(mu_);
  for (std::size_t i = 0; i < ticks; ++i) system_->step();
  now_ = system_->now();
}

void Runtime::run_until(Millis t) {
  while (now() < t) {
    std::lock_guard lock(mu_);
    for (int n = 0; n < kMaxStepsPerLock && system_->now() < t; ++n) system_->step();
    now_ = system_->now();
  }
}

void Runtime::ensure_user(const std::string& name, std::string_view password) {
  {
    std::lock_guard lock(mu_);
    if (system_->store().user(name)) return;
  }
  auto record = make_user(name, password);
  std::lock_guard lock(mu_);
  if (!system_->store().user(name)) system_->store().put_user(record);
}

bool Runtime::authenticate(std::string_view user, std::string_view password,
                           std::optional<home::SessionId> origin) {
  std::optional<home::UserRecord> record;
  {
    std::lock_guard lock(mu_);
    record = system_->store().user(user);
  }
  if (check_credentials(record, password)) return true;
  std::lock_guard lock(mu_);
  system_->core().log_event(
      {system_->now(), home::Severity::Alert, home::EventKind::AuthFailure, fmt::format("user {}", user)}, origin);
  return false;
}

std::string Runtime::open_web_session(std::string user) {
  auto token = random_token();
  std::lock_guard lock(web_mu_);
  web_sessions_[token] = std::move(user);
  return token;
}

std::optional<std::string> Runtime::web_session_user(std::string_view token) const {
  std::lock_guard lock(web_mu_);
  auto it = web_sessions_.find(token);
  if (it == web_sessions_.end()) return std::nullopt;
  return it->second;
}

void Runtime::close_web_session(std::string_view token) {
  std::lock_guard lock(web_mu_);
  auto it = web_sessions_.find(token);
  if (it != web_sessions_.end()) web_sessions_.erase(it);
}

}  // namespace whan::api
