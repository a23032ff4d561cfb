#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "peduncle/error.hpp"
#include "peduncle/geometry.hpp"
#include "peduncle/text_io.hpp"

namespace peduncle {

enum class Label : std::uint8_t { Unlabeled = 0, Peduncle = 1, Pepper = 2, Background = 3 };

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend constexpr bool operator==(const Rgb&, const Rgb&) = default;
};

using Index = std::uint32_t;
using IndexList = std::vector<Index>;

/// XYZ + RGB points with optional per-point labels. Parallel arrays.
class PointCloud {
 public:
  std::vector<Point3> points;
  std::vector<Rgb> colors;
  std::vector<Label> labels;  // empty when the cloud carries no ground truth

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  bool has_labels() const noexcept { return !labels.empty(); }

  void push_back(const Point3& p, Rgb c) {
    points.push_back(p);
    colors.push_back(c);
  }
  void push_back(const Point3& p, Rgb c, Label l) {
    points.push_back(p);
    colors.push_back(c);
    labels.push_back(l);
  }

  void reserve(std::size_t n) {
    points.reserve(n);
    colors.reserve(n);
  }

  /// Throws InvalidInput when the parallel arrays disagree or a coordinate is not finite.
  void validate() const {
    if (colors.size() != points.size())
      throw Error(ErrorCode::InvalidInput, "color count differs from point count");
    if (!labels.empty() && labels.size() != points.size())
      throw Error(ErrorCode::InvalidInput, "label count differs from point count");
    for (const auto& p : points)
      if (!is_finite(p)) throw Error(ErrorCode::InvalidInput, "non-finite coordinate");
  }

  /// Copy of the listed points, in list order.
  PointCloud select(std::span<const Index> subset) const {
    PointCloud out;
    out.points.reserve(subset.size());
    out.colors.reserve(subset.size());
    if (has_labels()) out.labels.reserve(subset.size());
    for (Index i : subset) {
      out.points.push_back(points.at(i));
      out.colors.push_back(colors.at(i));
      if (has_labels()) out.labels.push_back(labels[i]);
    }
    return out;
  }
};

inline IndexList all_indices(std::size_t n) {
  IndexList out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<Index>(i);
  return out;
}

struct BoundingBox3 {
  Point3 min;
  Point3 max;

  Vec3 extent() const { return max - min; }
  Point3 center() const { return (min + max) * 0.5; }
  bool contains(const Point3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
           p.z <= max.z;
  }
  friend constexpr bool operator==(const BoundingBox3&, const BoundingBox3&) = default;
};

inline BoundingBox3 compute_bbox(const PointCloud& cloud, std::span<const Index> subset) {
  if (subset.empty()) throw Error(ErrorCode::EmptyInput, "bounding box of empty subset");
  BoundingBox3 box{cloud.points.at(subset[0]), cloud.points.at(subset[0])};
  for (Index i : subset) {
    const Point3& p = cloud.points.at(i);
    for (int a = 0; a < 3; ++a) {
      box.min[a] = std::min(box.min[a], p[a]);
      box.max[a] = std::max(box.max[a], p[a]);
    }
  }
  return box;
}

inline Point3 centroid(const PointCloud& cloud, std::span<const Index> subset) {
  if (subset.empty()) throw Error(ErrorCode::EmptyInput, "centroid of empty subset");
  Vec3 sum;
  for (Index i : subset) sum += cloud.points.at(i);
  return sum * (1.0 / static_cast<double>(subset.size()));
}

// ---------------------------------------------------------------------------
// `pcloud v1 <count> <has_labels>` followed by `x y z r g b [label]` lines.

inline std::string format_point_cloud(const PointCloud& cloud) {
  cloud.validate();
  std::string out = "pcloud v1 " + std::to_string(cloud.size()) + " " +
                    (cloud.has_labels() ? "1" : "0") + "\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    const auto& c = cloud.colors[i];
    out += text::format_double(p.x);
    out += ' ';
    out += text::format_double(p.y);
    out += ' ';
    out += text::format_double(p.z);
    out += ' ' + std::to_string(c.r) + ' ' + std::to_string(c.g) + ' ' + std::to_string(c.b);
    if (cloud.has_labels()) out += ' ' + std::to_string(static_cast<int>(cloud.labels[i]));
    out += '\n';
  }
  return out;
}

inline PointCloud parse_point_cloud(std::string_view data) {
  const auto rows = text::lines(data);
  if (rows.empty()) throw Error(ErrorCode::ParseError, "empty point cloud file");
  const auto header = text::split(rows[0]);
  if (header.size() != 4 || header[0] != "pcloud" || header[1] != "v1")
    throw Error(ErrorCode::ParseError, "bad pcloud header");
  const auto count = text::parse_int<std::size_t>(header[2]);
  const auto has_labels = text::parse_int<int>(header[3]);
  if (has_labels != 0 && has_labels != 1) throw Error(ErrorCode::ParseError, "bad label flag");
  if (rows.size() != count + 1) throw Error(ErrorCode::ParseError, "point count mismatch");

  PointCloud cloud;
  cloud.reserve(count);
  const std::size_t fields = has_labels ? 7 : 6;
  for (std::size_t i = 1; i <= count; ++i) {
    const auto tok = text::split(rows[i]);
    if (tok.size() != fields) throw Error(ErrorCode::ParseError, "bad point line " + std::to_string(i));
    const Point3 p{text::parse_double(tok[0]), text::parse_double(tok[1]), text::parse_double(tok[2])};
    std::array<int, 3> rgb{};
    for (int c = 0; c < 3; ++c) {
      rgb[c] = text::parse_int<int>(tok[3 + c]);
      if (rgb[c] < 0 || rgb[c] > 255) throw Error(ErrorCode::ParseError, "channel out of range");
    }
    const Rgb color{static_cast<std::uint8_t>(rgb[0]), static_cast<std::uint8_t>(rgb[1]),
                    static_cast<std::uint8_t>(rgb[2])};
    if (has_labels) {
      const int l = text::parse_int<int>(tok[6]);
      if (l < 0 || l > 3) throw Error(ErrorCode::ParseError, "label out of range");
      cloud.push_back(p, color, static_cast<Label>(l));
    } else {
      cloud.push_back(p, color);
    }
  }
  cloud.validate();
  return cloud;
}

inline void save_point_cloud(const std::string& path, const PointCloud& cloud) {
  text::write_file(path, format_point_cloud(cloud));
}

inline PointCloud load_point_cloud(const std::string& path) {
  return parse_point_cloud(text::read_file(path));
}

}  // namespace peduncle
