#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

#include "peduncle/error.hpp"
#include "peduncle/geometry.hpp"

namespace peduncle {

/// Pinhole intrinsics. Camera frame: x right, y down, z forward.
struct CameraIntrinsics {
  double fx = 525.0;
  double fy = 525.0;
  double cx = 319.5;
  double cy = 239.5;
  double depth_scale = 0.0001;  // meters per stored depth unit

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !(depth_scale > 0.0))
      throw Error(ErrorCode::InvalidInput, "intrinsics need fx, fy, depth_scale > 0");
  }

  Point3 back_project(double u, double v, double z) const {
    return {(u - cx) * z / fx, (v - cy) * z / fy, z};
  }

  Point3 back_project_raw(double u, double v, std::uint16_t stored) const {
    return back_project(u, v, stored * depth_scale);
  }

  /// (u, v) pixel coordinates of a point with z > 0.
  std::pair<double, double> project(const Point3& p) const {
    return {fx * p.x / p.z + cx, fy * p.y / p.z + cy};
  }
};

}  // namespace peduncle
