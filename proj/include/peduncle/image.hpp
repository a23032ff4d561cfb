#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "peduncle/point_cloud.hpp"
#include "peduncle/text_io.hpp"

namespace peduncle {

/// Row-major raster, y grows downward.
template <typename T>
struct Raster {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<T> pixels;

  Raster() = default;
  Raster(std::size_t w, std::size_t h, T fill = T{}) : width(w), height(h), pixels(w * h, fill) {}

  T& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  const T& at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  bool contains(long x, long y) const {
    return x >= 0 && y >= 0 && x < static_cast<long>(width) && y < static_cast<long>(height);
  }
  friend bool operator==(const Raster&, const Raster&) = default;
};

using RgbImage = Raster<Rgb>;
using DepthImage = Raster<std::uint16_t>;  // stored units, 0 = invalid
using Mask = Raster<std::uint8_t>;         // 0 / 255

/// Pixel window [x_min, x_max) x [y_min, y_max).
struct Roi2 {
  long x_min = 0;
  long y_min = 0;
  long x_max = 0;
  long y_max = 0;

  long width() const noexcept { return x_max - x_min; }
  long height() const noexcept { return y_max - y_min; }
  long area() const noexcept { return width() * height(); }
  bool empty() const noexcept { return x_max <= x_min || y_max <= y_min; }
  bool contains(long x, long y) const noexcept { return x >= x_min && x < x_max && y >= y_min && y < y_max; }
  friend constexpr bool operator==(const Roi2&, const Roi2&) = default;
};

template <typename T>
Roi2 full_roi(const Raster<T>& img) {
  return {0, 0, static_cast<long>(img.width), static_cast<long>(img.height)};
}

namespace detail {

/// Parses a binary PNM header; returns the offset of the first sample byte.
inline std::size_t parse_pnm_header(std::string_view data, std::string_view magic, std::size_t& w, std::size_t& h,
                                    std::size_t& maxval) {
  std::size_t at = 0;
  auto next_token = [&]() {
    while (at < data.size()) {
      if (data[at] == '#') {
        while (at < data.size() && data[at] != '\n') ++at;
      } else if (data[at] == ' ' || data[at] == '\n' || data[at] == '\r' || data[at] == '\t') {
        ++at;
      } else {
        break;
      }
    }
    const std::size_t start = at;
    while (at < data.size() && data[at] != ' ' && data[at] != '\n' && data[at] != '\r' && data[at] != '\t') ++at;
    return data.substr(start, at - start);
  };
  if (next_token() != magic) throw Error(ErrorCode::ParseError, "expected " + std::string(magic) + " image");
  w = text::parse_int<std::size_t>(next_token());
  h = text::parse_int<std::size_t>(next_token());
  maxval = text::parse_int<std::size_t>(next_token());
  if (at >= data.size()) throw Error(ErrorCode::ParseError, "truncated image header");
  return at + 1;  // single whitespace byte before the raster
}

}  // namespace detail

inline std::string encode_ppm(const RgbImage& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.reserve(out.size() + 3 * img.pixels.size());
  for (const auto& p : img.pixels) {
    out.push_back(static_cast<char>(p.r));
    out.push_back(static_cast<char>(p.g));
    out.push_back(static_cast<char>(p.b));
  }
  return out;
}

inline RgbImage decode_ppm(std::string_view data) {
  std::size_t w, h, maxval;
  const std::size_t at = detail::parse_pnm_header(data, "P6", w, h, maxval);
  if (maxval != 255) throw Error(ErrorCode::ParseError, "only 8-bit PPM is supported");
  if (data.size() - at != 3 * w * h) throw Error(ErrorCode::ParseError, "PPM raster size mismatch");
  RgbImage img(w, h);
  for (std::size_t i = 0; i < w * h; ++i)
    img.pixels[i] = {static_cast<std::uint8_t>(data[at + 3 * i]), static_cast<std::uint8_t>(data[at + 3 * i + 1]),
                     static_cast<std::uint8_t>(data[at + 3 * i + 2])};
  return img;
}

/// 16-bit PGM, big-endian samples as the format requires.
inline std::string encode_pgm16(const DepthImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n65535\n";
  out.reserve(out.size() + 2 * img.pixels.size());
  for (std::uint16_t v : img.pixels) {
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xff));
  }
  return out;
}

inline DepthImage decode_pgm16(std::string_view data) {
  std::size_t w, h, maxval;
  const std::size_t at = detail::parse_pnm_header(data, "P5", w, h, maxval);
  if (maxval != 65535) throw Error(ErrorCode::ParseError, "depth PGM must have maxval 65535");
  if (data.size() - at != 2 * w * h) throw Error(ErrorCode::ParseError, "PGM raster size mismatch");
  DepthImage img(w, h);
  for (std::size_t i = 0; i < w * h; ++i)
    img.pixels[i] = static_cast<std::uint16_t>((static_cast<unsigned char>(data[at + 2 * i]) << 8) |
                                               static_cast<unsigned char>(data[at + 2 * i + 1]));
  return img;
}

inline std::string encode_pgm8(const Mask& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  return out;
}

inline Mask decode_pgm8(std::string_view data) {
  std::size_t w, h, maxval;
  const std::size_t at = detail::parse_pnm_header(data, "P5", w, h, maxval);
  if (maxval != 255) throw Error(ErrorCode::ParseError, "mask PGM must have maxval 255");
  if (data.size() - at != w * h) throw Error(ErrorCode::ParseError, "PGM raster size mismatch");
  Mask img(w, h);
  for (std::size_t i = 0; i < w * h; ++i) img.pixels[i] = static_cast<std::uint8_t>(data[at + i]);
  return img;
}

}  // namespace peduncle
