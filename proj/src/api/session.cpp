#include "whan/api/session.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "whan/api/protocol.hpp"

namespace whan::api {

using home::Status;

std::string err(Status status) { return fmt::format("ERR {}", static_cast<int>(status)); }

namespace {

Session::Reply reply(std::string line) { return {{std::move(line)}, false}; }

std::string ok(const home::SubmitResult& r) { return r.txid ? fmt::format("OK {}", *r.txid) : "OK"; }

}  // namespace

Session::Session(Runtime& runtime, home::SessionId id) : runtime_(runtime), id_(id) {}

Session::Reply Session::handle(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.size() > kMaxLine || !valid_utf8(line)) return reply(err(Status::Malformed));

  std::vector<std::string> args;
  for (auto field : split_fields(line)) {
    auto decoded = percent_decode(field);
    if (!decoded) return reply(err(Status::Malformed));
    args.push_back(std::move(*decoded));
  }
  if (args.empty()) return reply(err(Status::Malformed));

  const std::string verb = args[0];
  const std::size_t n = args.size() - 1;

  if (verb == "QUIT") return {{"OK"}, true};
  if (verb == "AUTH") {
    if (n != 2) return reply(err(Status::Malformed));
    if (!runtime_.authenticate(args[1], args[2], id_)) {
      authenticated_ = false;
      user_.clear();
      return reply(err(Status::Unauthenticated));
    }
    authenticated_ = true;
    user_ = args[1];
    return reply("OK");
  }

  static const char* const kVerbs[] = {"SUB", "UNSUB", "GET", "SET", "MODE", "MODES", "HIST"};
  if (std::none_of(std::begin(kVerbs), std::end(kVerbs), [&](const char* v) { return verb == v; })) {
    return reply(err(Status::Malformed));
  }
  if (!authenticated_) return reply(err(Status::Unauthenticated));

  if (verb == "SUB" || verb == "UNSUB") {
    if (n != 1) return reply(err(Status::Malformed));
    const auto& device = args[1];
    if (device != "*") {
      bool known = runtime_.locked([&](HomeSystem& sys) { return sys.core().registry().find(device) != nullptr; });
      if (!known) return reply(err(Status::UnknownDevice));
    }
    if (verb == "SUB") {
      runtime_.hub().subscribe(id_, device);
    } else {
      runtime_.hub().unsubscribe(id_, device);
    }
    return reply("OK");
  }
  if (verb == "GET") {
    if (n != 1) return reply(err(Status::Malformed));
    return get(args[1]);
  }
  if (verb == "SET") {
    // The value may legitimately contain spaces once decoded; extra raw fields are not allowed.
    if (n != 3) return reply(err(Status::Malformed));
    home::Setting setting{args[1], args[2], args[3]};
    auto r = runtime_.locked([&](HomeSystem& sys) { return sys.core().submit(setting, id_, sys.now()); });
    return reply(r.ok() ? ok(r) : err(r.status));
  }
  if (verb == "MODE") {
    if (n != 1) return reply(err(Status::Malformed));
    auto r = runtime_.locked([&](HomeSystem& sys) { return sys.core().apply_mode(args[1], sys.now()); });
    return reply(r.ok() ? "OK" : err(r.status));
  }
  if (verb == "MODES") {
    if (n != 0) return reply(err(Status::Malformed));
    std::string line_out = "MODES";
    runtime_.locked([&](HomeSystem& sys) {
      for (const auto& m : sys.core().modes()) line_out += " " + percent_encode(m.name);
    });
    return reply(std::move(line_out));
  }
  // HIST
  if (n != 3) return reply(err(Status::Malformed));
  return hist(args[1], args[2], args[3]);
}

Session::Reply Session::get(const std::string& device) {
  Reply out;
  bool found = runtime_.locked([&](HomeSystem& sys) {
    const auto& registry = sys.core().registry();
    if (device == "*") {
      for (const auto& d : registry.all()) out.lines.push_back(format_state(d));
      return true;
    }
    const auto* d = registry.find(device);
    if (!d) return false;
    out.lines.push_back(format_state(*d));
    return true;
  });
  if (!found) return reply(err(Status::UnknownDevice));
  out.lines.push_back("OK");
  return out;
}

Session::Reply Session::hist(const std::string& device, std::string_view from_text, std::string_view to_text) {
  auto from = parse_seconds(from_text);
  auto to = parse_seconds(to_text);
  if (!from || !to || *from > *to) return reply(err(Status::Malformed));
  Reply out;
  bool found = runtime_.locked([&](HomeSystem& sys) {
    const auto* d = sys.core().registry().find(device);
    if (!d) return false;
    auto samples = sys.core().query_history(device, *from, *to);
    out.lines.reserve(samples->size() + 2);
    out.lines.push_back("HIST-BEGIN");
    for (const auto& s : *samples) out.lines.push_back(format_hist_row(s, d->kind));
    out.lines.push_back("HIST-END");
    return true;
  });
  if (!found) return reply(err(Status::UnknownDevice));
  return out;
}

}  // namespace whan::api
