#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "peduncle/point_cloud.hpp"

namespace peduncle {

/// h in degrees [0, 360); s, v in [0, 1]. h is 0 when s is 0.
struct HsvColor {
  double h = 0.0;
  double s = 0.0;
  double v = 0.0;
};

/// Hexcone conversion.
inline HsvColor rgb_to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const double r = r8 / 255.0;
  const double g = g8 / 255.0;
  const double b = b8 / 255.0;
  const double max = std::max({r, g, b});
  const double min = std::min({r, g, b});
  const double delta = max - min;
  HsvColor out;
  out.v = max;
  out.s = max > 0.0 ? delta / max : 0.0;
  if (out.s == 0.0) return out;
  double h;
  if (max == r) h = 60.0 * std::fmod((g - b) / delta, 6.0);
  else if (max == g) h = 60.0 * ((b - r) / delta + 2.0);
  else h = 60.0 * ((r - g) / delta + 4.0);
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  out.h = h;
  return out;
}

inline HsvColor rgb_to_hsv(Rgb c) { return rgb_to_hsv(c.r, c.g, c.b); }

inline Rgb hsv_to_rgb(const HsvColor& hsv) {
  const double h = std::fmod(std::fmod(hsv.h, 360.0) + 360.0, 360.0);
  const double s = std::clamp(hsv.s, 0.0, 1.0);
  const double v = std::clamp(hsv.v, 0.0, 1.0);
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  auto to8 = [](double u) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(u * 255.0), 0L, 255L));
  };
  return {to8(r + m), to8(g + m), to8(b + m)};
}

}  // namespace peduncle
