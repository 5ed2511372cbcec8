#include "whan/home/store.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

#include <fmt/format.h>

namespace whan::home {

namespace fs = std::filesystem;

namespace {

struct BadRecord {};

void put_string(wire::ByteWriter& w, std::string_view s) {
  if (s.size() > 0xFFFF) throw std::invalid_argument("string too long for store record");
  w.u16(static_cast<std::uint16_t>(s.size()));
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

void put_i64(wire::ByteWriter& w, std::int64_t v) {
  auto u = static_cast<std::uint64_t>(v);
  w.u32(static_cast<std::uint32_t>(u >> 32));
  w.u32(static_cast<std::uint32_t>(u & 0xFFFFFFFFULL));
}

void put_f64(wire::ByteWriter& w, double v) { put_i64(w, std::bit_cast<std::int64_t>(v)); }

class RecordReader {
 public:
  explicit RecordReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::string str() {
    auto n = in_.u16();
    auto rest = take(n);
    return std::string(rest.begin(), rest.end());
  }
  wire::Bytes bytes() {
    auto n = in_.u16();
    auto rest = take(n);
    return wire::Bytes(rest.begin(), rest.end());
  }
  std::int64_t i64() {
    std::uint64_t hi = in_.u32();
    std::uint64_t lo = in_.u32();
    check();
    return static_cast<std::int64_t>((hi << 32) | lo);
  }
  double f64() { return std::bit_cast<double>(i64()); }
  std::uint8_t u8() {
    auto v = in_.u8();
    check();
    return v;
  }
  std::int16_t i16() {
    auto v = in_.i16();
    check();
    return v;
  }
  void done() {
    if (!in_.at_end()) throw BadRecord{};
  }

 private:
  void check() {
    if (!in_.ok()) throw BadRecord{};
  }
  std::vector<std::uint8_t> take(std::size_t n) {
    std::vector<std::uint8_t> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(in_.u8());
    check();
    return out;
  }

  wire::ByteReader in_;
};

wire::Bytes encode_mode_row(const std::string& mode, const Setting& s) {
  wire::ByteWriter w;
  put_string(w, mode);
  put_string(w, s.device);
  put_string(w, s.property);
  put_string(w, s.value);
  return w.take();
}

}  // namespace

const char* table_file(Table table) {
  switch (table) {
    case Table::Users: return "users.log";
    case Table::Readings: return "readings.log";
    case Table::Events: return "events.log";
    case Table::Modes: return "modes.log";
  }
  return "unknown.log";
}

wire::Bytes encode_user(const UserRecord& user) {
  wire::ByteWriter w;
  put_string(w, user.name);
  w.u16(static_cast<std::uint16_t>(user.salt.size())).bytes(user.salt);
  w.u16(static_cast<std::uint16_t>(user.hash.size())).bytes(user.hash);
  put_string(w, user.algo);
  return w.take();
}

wire::Bytes encode_sample(const SensorSample& sample) {
  wire::ByteWriter w;
  put_string(w, sample.device);
  put_i64(w, sample.ts);
  put_f64(w, sample.value);
  w.i16(static_cast<std::int16_t>(sample.rssi));
  return w.take();
}

wire::Bytes encode_event(const EventRecord& event) {
  wire::ByteWriter w;
  put_i64(w, event.ts);
  w.u8(static_cast<std::uint8_t>(event.severity));
  w.u8(static_cast<std::uint8_t>(event.kind));
  put_string(w, event.detail);
  return w.take();
}

wire::Bytes frame_record(Table table, const wire::Bytes& record) {
  return wire::ByteWriter{}
      .u32(static_cast<std::uint32_t>(record.size()))
      .u8(static_cast<std::uint8_t>(table))
      .bytes(record)
      .take();
}

Store::Store() = default;

Store::Store(fs::path dir, std::size_t compact_every) : dir_(std::move(dir)), compact_every_(compact_every) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw std::runtime_error(fmt::format("cannot create store directory {}: {}", dir_.string(), ec.message()));
  for (auto table : {Table::Users, Table::Readings, Table::Events, Table::Modes}) load(table);
  compact();
  for (auto table : {Table::Users, Table::Readings, Table::Events, Table::Modes}) {
    files_[table].open(path(table), std::ios::binary | std::ios::app);
    if (!files_[table]) throw std::runtime_error(fmt::format("cannot open {}", path(table).string()));
  }
}

Store::~Store() { flush(); }

std::vector<EventRecord> Store::take_recovery_events() {
  auto out = std::move(recovery_);
  recovery_.clear();
  return out;
}

void Store::load(Table table) {
  const auto file = path(table);
  if (!fs::exists(file)) return;
  std::ifstream in(file, std::ios::binary);
  wire::Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  std::size_t pos = 0;
  while (pos < data.size()) {
    if (data.size() - pos < 5) break;
    wire::ByteReader header(std::span<const std::uint8_t>(data).subspan(pos, 5));
    const std::size_t len = header.u32();
    const auto id = header.u8();
    if (id != static_cast<std::uint8_t>(table) || data.size() - pos - 5 < len) break;
    try {
      apply(table, std::span(data).subspan(pos + 5, len));
    } catch (const BadRecord&) {
      break;
    } catch (const std::invalid_argument&) {
      break;
    }
    pos += 5 + len;
  }
  if (pos < data.size()) {
    fs::resize_file(file, pos);
    recovery_.push_back({0, Severity::Alert, EventKind::StoreRecovered,
                         fmt::format("{}: truncated {} corrupt tail bytes", table_file(table), data.size() - pos)});
  }
}

void Store::apply(Table table, std::span<const std::uint8_t> record) {
  RecordReader r(record);
  switch (table) {
    case Table::Users: {
      UserRecord u;
      u.name = r.str();
      u.salt = r.bytes();
      u.hash = r.bytes();
      u.algo = r.str();
      r.done();
      users_[u.name] = std::move(u);
      break;
    }
    case Table::Readings: {
      SensorSample s;
      s.device = r.str();
      s.ts = r.i64();
      s.value = r.f64();
      s.rssi = r.i16();
      r.done();
      auto& index = by_device_[s.device];
      if (!index.empty() && readings_[index.back()].ts > s.ts) throw BadRecord{};
      index.push_back(readings_.size());
      readings_.push_back(std::move(s));
      break;
    }
    case Table::Events: {
      EventRecord e;
      e.ts = r.i64();
      auto severity = r.u8();
      auto kind = r.u8();
      e.detail = r.str();
      r.done();
      if (severity > 1 || kind >= kEventKindCount) throw BadRecord{};
      e.severity = static_cast<Severity>(severity);
      e.kind = static_cast<EventKind>(kind);
      events_.push_back(std::move(e));
      break;
    }
    case Table::Modes: {
      auto mode = r.str();
      Setting s;
      s.device = r.str();
      s.property = r.str();
      s.value = r.str();
      r.done();
      if (s.device.empty()) {
        modes_[mode].clear();  // reset marker
      } else {
        modes_[mode].push_back(std::move(s));
      }
      break;
    }
  }
}

void Store::write(Table table, const wire::Bytes& record) {
  if (!persistent()) return;
  auto framed = frame_record(table, record);
  auto& out = files_.at(table);
  out.write(reinterpret_cast<const char*>(framed.data()), static_cast<std::streamsize>(framed.size()));
  out.flush();
}

void Store::put_user(const UserRecord& user) {
  users_[user.name] = user;
  write(Table::Users, encode_user(user));
  maybe_compact();
}

std::optional<UserRecord> Store::user(std::string_view name) const {
  auto it = users_.find(name);
  if (it == users_.end()) return std::nullopt;
  return it->second;
}

void Store::append_reading(const SensorSample& sample) {
  auto& index = by_device_[sample.device];
  if (!index.empty() && readings_[index.back()].ts > sample.ts) {
    throw std::invalid_argument(fmt::format("reading for {} goes back in time", sample.device));
  }
  index.push_back(readings_.size());
  readings_.push_back(sample);
  write(Table::Readings, encode_sample(sample));
}

void Store::append_event(const EventRecord& event) {
  events_.push_back(event);
  write(Table::Events, encode_event(event));
}

void Store::put_mode(const std::string& name, const std::vector<Setting>& entries) {
  modes_[name] = entries;
  write(Table::Modes, encode_mode_row(name, Setting{}));
  for (const auto& e : entries) write(Table::Modes, encode_mode_row(name, e));
  maybe_compact();
}

std::vector<SensorSample> Store::history(std::string_view device, Millis from, Millis to) const {
  std::vector<SensorSample> out;
  auto it = by_device_.find(device);
  if (it == by_device_.end() || from > to) return out;
  const auto& index = it->second;
  auto lo = std::lower_bound(index.begin(), index.end(), from,
                             [&](std::size_t i, Millis t) { return readings_[i].ts < t; });
  for (; lo != index.end() && readings_[*lo].ts <= to; ++lo) out.push_back(readings_[*lo]);
  return out;
}

std::vector<EventRecord> Store::events_since(Millis since) const {
  std::vector<EventRecord> out;
  std::copy_if(events_.begin(), events_.end(), std::back_inserter(out),
               [&](const EventRecord& e) { return e.ts >= since; });
  return out;
}

void Store::maybe_compact() {
  if (++appends_since_compact_ >= compact_every_) compact();
}

void Store::compact() {
  appends_since_compact_ = 0;
  if (!persistent()) return;

  auto rewrite = [&](Table table, const std::vector<wire::Bytes>& records) {
    const auto target = path(table);
    const auto tmp = fs::path(target.string() + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      for (const auto& r : records) {
        auto framed = frame_record(table, r);
        out.write(reinterpret_cast<const char*>(framed.data()), static_cast<std::streamsize>(framed.size()));
      }
      if (!out) throw std::runtime_error(fmt::format("cannot write {}", tmp.string()));
    }
    auto it = files_.find(table);
    if (it != files_.end()) it->second.close();
    fs::rename(tmp, target);
    if (it != files_.end()) it->second.open(target, std::ios::binary | std::ios::app);
  };

  std::vector<wire::Bytes> users;
  for (const auto& [_, u] : users_) users.push_back(encode_user(u));
  rewrite(Table::Users, users);

  std::vector<wire::Bytes> modes;
  for (const auto& [name, entries] : modes_) {
    modes.push_back(encode_mode_row(name, Setting{}));
    for (const auto& e : entries) modes.push_back(encode_mode_row(name, e));
  }
  rewrite(Table::Modes, modes);
}

void Store::flush() {
  for (auto& [_, f] : files_) {
    if (f.is_open()) f.flush();
  }
}

}  // namespace whan::home
