#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "peduncle/kdtree.hpp"
#include "peduncle/point_cloud.hpp"

namespace peduncle {

/// Per-point unit normal; empty when the neighbourhood is degenerate (rank < 2).
using NormalField = std::vector<std::optional<Vec3>>;

/// Smallest-eigenvalue direction of a neighbourhood covariance, or nullopt if
/// the points are (numerically) collinear or coincident.
inline std::optional<Vec3> fit_normal(const PointCloud& cloud, std::span<const Index> neighbours) {
  if (neighbours.size() < 3) return std::nullopt;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (Index i : neighbours) {
    const auto& p = cloud.points[i];
    mean += Eigen::Vector3d(p.x, p.y, p.z);
  }
  mean /= static_cast<double>(neighbours.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (Index i : neighbours) {
    const auto& p = cloud.points[i];
    const Eigen::Vector3d d = Eigen::Vector3d(p.x, p.y, p.z) - mean;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(neighbours.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  if (solver.info() != Eigen::Success) return std::nullopt;
  const Eigen::Vector3d ev = solver.eigenvalues();  // ascending
  if (!(ev(2) > 0.0) || ev(1) <= 1e-12 * ev(2)) return std::nullopt;
  const Eigen::Vector3d n = solver.eigenvectors().col(0).normalized();
  return Vec3{n(0), n(1), n(2)};
}

/// Normals from the k-nearest neighbourhood (the point itself included),
/// flipped so that dot(n, viewpoint - p) >= 0.
inline NormalField estimate_normals(const PointCloud& cloud, const SpatialIndex& index, std::size_t k,
                                    const Point3& viewpoint = {}) {
  if (k < 3) throw Error(ErrorCode::InvalidInput, "normal estimation needs k >= 3");
  if (cloud.size() < k)
    throw Error(ErrorCode::InsufficientPoints, "cloud smaller than normal neighbourhood");
  NormalField normals(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nbrs = index.knn(cloud.points[i], k);
    auto n = fit_normal(cloud, nbrs);
    if (!n) continue;
    if (dot(*n, viewpoint - cloud.points[i]) < 0.0) *n = -*n;
    normals[i] = *n;
  }
  return normals;
}

inline NormalField estimate_normals(const PointCloud& cloud, std::size_t k, const Point3& viewpoint = {}) {
  const SpatialIndex index(cloud);
  return estimate_normals(cloud, index, k, viewpoint);
}

}  // namespace peduncle
