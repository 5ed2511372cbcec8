#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "whan/sim_time.hpp"

namespace whan::api {

inline constexpr int kFrameWidth = 160;
inline constexpr int kFrameHeight = 120;
inline constexpr Millis kFramePeriod = 100;

/// Synthetic camera picture: R = (x + round(pan)) mod 256,
/// G = (y + round(tilt) + 152) mod 256, B = counter mod 256.
struct CameraFrame {
  int width = kFrameWidth;
  int height = kFrameHeight;
  double pan = 0.0;
  double tilt = 0.0;
  std::uint64_t counter = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  std::uint8_t at(int x, int y, int channel) const { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + channel]; }
};

CameraFrame render_camera_frame(double pan, double tilt, std::uint64_t counter);

/// Binary PPM (P6).
std::string to_ppm(const CameraFrame& frame);

/// One new frame every 100 ms of simulated time.
inline std::uint64_t frame_counter(Millis since_start) {
  return since_start < 0 ? 0 : static_cast<std::uint64_t>(since_start / kFramePeriod);
}

}  // namespace whan::api
