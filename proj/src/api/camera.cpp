#include "whan/api/camera.hpp"

#include <cmath>

#include <fmt/format.h>

namespace whan::api {

namespace {

std::uint8_t mod256(long v) { return static_cast<std::uint8_t>(((v % 256) + 256) % 256); }

}  // namespace

CameraFrame render_camera_frame(double pan, double tilt, std::uint64_t counter) {
  CameraFrame f;
  f.pan = pan;
  f.tilt = tilt;
  f.counter = counter;
  f.rgb.resize(static_cast<std::size_t>(f.width) * f.height * 3);
  const long p = std::lround(pan);
  const long t = std::lround(tilt);
  const auto b = static_cast<std::uint8_t>(counter % 256);
  auto* px = f.rgb.data();
  for (int y = 0; y < f.height; ++y) {
    const auto g = mod256(y + t + 152);
    for (int x = 0; x < f.width; ++x) {
      *px++ = mod256(x + p);
      *px++ = g;
      *px++ = b;
    }
  }
  return f;
}

std::string to_ppm(const CameraFrame& frame) {
  auto out = fmt::format("P6\n{} {}\n255\n", frame.width, frame.height);
  out.append(reinterpret_cast<const char*>(frame.rgb.data()), frame.rgb.size());
  return out;
}

}  // namespace whan::api
