#include "whan/api/protocol.hpp"

#include <cmath>

#include <fmt/format.h>

namespace whan::api {

std::string percent_encode(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (unsigned char c : text) {
    if (c <= 0x20 || c == '%' || c == 0x7F) {
      out += fmt::format("%{:02X}", c);
    } else {
      out += static_cast<char>(c);
    }
  }
  return out;
}

std::optional<std::string> percent_decode(std::string_view text) {
  auto hexval = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '%') {
      out += text[i];
      continue;
    }
    if (i + 2 >= text.size()) return std::nullopt;
    const int hi = hexval(text[i + 1]);
    const int lo = hexval(text[i + 2]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out += static_cast<char>(hi * 16 + lo);
    i += 2;
  }
  return out;
}

bool valid_utf8(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t n = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      n = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      n = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      n = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + n >= text.size()) return false;
    for (std::size_t k = 1; k <= n; ++k) {
      const auto cc = static_cast<unsigned char>(text[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    static constexpr std::uint32_t kMin[] = {0, 0x80, 0x800, 0x10000};
    if (cp < kMin[n] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += n + 1;
  }
  return true;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    auto j = line.find(' ', i);
    if (j == std::string_view::npos) j = line.size();
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string format_state(const home::Device& device) {
  return fmt::format("STATE {} {} {}", percent_encode(device.name), home::to_string(device.state),
                     percent_encode(home::format_value(device)));
}

std::string format_reading(const home::ReadingNote& note) {
  return fmt::format("READING {} {} {} {}", percent_encode(note.device), format_seconds(note.ts),
                     percent_encode(note.value), note.rssi);
}

std::string format_event(const home::EventRecord& event) {
  return fmt::format("EVENT {} {}", home::to_string(event.kind), percent_encode(event.detail));
}

std::string format_notification(const home::Notification& note) {
  if (auto* r = std::get_if<home::ReadingNote>(&note)) return format_reading(*r);
  if (auto* s = std::get_if<home::StateNote>(&note)) {
    return fmt::format("STATE {} {} {}", percent_encode(s->device), home::to_string(s->state),
                       percent_encode(s->value));
  }
  return format_event(std::get<home::EventNote>(note).event);
}

std::string format_sample_value(double value, home::DeviceKind kind) {
  if (kind == home::DeviceKind::TemperatureSensor) return fmt::format("{:.2f}", value);
  return fmt::format("{}", std::llround(value));
}

std::string format_hist_row(const home::SensorSample& sample, home::DeviceKind kind) {
  return fmt::format("{} {} {}", format_seconds(sample.ts), format_sample_value(sample.value, kind), sample.rssi);
}

}  // namespace whan::api
