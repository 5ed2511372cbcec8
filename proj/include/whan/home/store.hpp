#pragma once

// Single-writer embedded store: one append-only file per table under a
// directory. Every record is framed as
//   [len:u32 BE][table-id:u8][record bytes (len of them)]
// A record that runs past end-of-file or fails to decode ends the valid
// prefix; the file is truncated there on open and an alert is queued.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "whan/home/device.hpp"
#include "whan/sim_time.hpp"
#include "whan/wire.hpp"

namespace whan::home {

struct UserRecord {
  std::string name;
  wire::Bytes salt;
  wire::Bytes hash;
  std::string algo;  // e.g. "pbkdf2-sha256:10000"

  bool operator==(const UserRecord&) const = default;
};

struct SensorSample {
  std::string device;
  Millis ts = 0;
  double value = 0.0;
  int rssi = 0;

  bool operator==(const SensorSample&) const = default;
};

enum class Table : std::uint8_t { Users = 1, Readings = 2, Events = 3, Modes = 4 };

const char* table_file(Table table);

class Store {
 public:
  /// Purely in-memory store (tests, dry runs).
  Store();
  /// Opens or creates the store directory. Throws std::runtime_error on I/O failure.
  explicit Store(std::filesystem::path dir, std::size_t compact_every = 1000);
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  /// Alerts produced while recovering corrupt tails on open; drained once.
  std::vector<EventRecord> take_recovery_events();

  void put_user(const UserRecord& user);
  std::optional<UserRecord> user(std::string_view name) const;
  std::size_t user_count() const { return users_.size(); }

  /// Throws std::invalid_argument if ts precedes the device's latest sample.
  void append_reading(const SensorSample& sample);
  void append_event(const EventRecord& event);

  /// Replaces the stored entries of one mode.
  void put_mode(const std::string& name, const std::vector<Setting>& entries);
  const std::map<std::string, std::vector<Setting>>& modes() const { return modes_; }

  /// Inclusive bounds, ascending by timestamp.
  std::vector<SensorSample> history(std::string_view device, Millis from, Millis to) const;
  const std::vector<SensorSample>& readings() const { return readings_; }
  const std::vector<EventRecord>& events() const { return events_; }
  std::vector<EventRecord> events_since(Millis since) const;

  /// Rewrites the users and modes tables keeping only the latest state.
  void compact();
  void flush();

  bool persistent() const { return !dir_.empty(); }
  std::filesystem::path path(Table table) const { return dir_ / table_file(table); }

 private:
  void load(Table table);
  void apply(Table table, std::span<const std::uint8_t> record);
  void write(Table table, const wire::Bytes& record);
  void maybe_compact();

  std::filesystem::path dir_;
  std::size_t compact_every_ = 1000;
  std::size_t appends_since_compact_ = 0;
  std::map<Table, std::ofstream> files_;

  std::map<std::string, UserRecord, std::less<>> users_;
  std::map<std::string, std::vector<Setting>> modes_;
  std::vector<SensorSample> readings_;
  std::map<std::string, std::vector<std::size_t>, std::less<>> by_device_;
  std::vector<EventRecord> events_;
  std::vector<EventRecord> recovery_;
};

/// Record encoders, exposed for tests.
wire::Bytes encode_user(const UserRecord& user);
wire::Bytes encode_sample(const SensorSample& sample);
wire::Bytes encode_event(const EventRecord& event);
wire::Bytes frame_record(Table table, const wire::Bytes& record);

}  // namespace whan::home
