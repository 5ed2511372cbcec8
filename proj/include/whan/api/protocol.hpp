#pragma once

// Text forms of the client line protocol. Fields are separated by single
// spaces; anything that could contain a space, '%' or a control character is
// percent-encoded.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "whan/home/home_core.hpp"

namespace whan::api {

inline constexpr std::size_t kMaxLine = 1024;

std::string percent_encode(std::string_view text);
/// nullopt on a malformed escape.
std::optional<std::string> percent_decode(std::string_view text);
bool valid_utf8(std::string_view text);

/// Splits on runs of spaces.
std::vector<std::string_view> split_fields(std::string_view line);

std::string format_state(const home::Device& device);
std::string format_reading(const home::ReadingNote& note);
std::string format_event(const home::EventRecord& event);
std::string format_notification(const home::Notification& note);
std::string format_hist_row(const home::SensorSample& sample, home::DeviceKind kind);

/// Sample values in the same units and precision as live readings.
std::string format_sample_value(double value, home::DeviceKind kind);

}  // namespace whan::api
