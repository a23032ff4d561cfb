#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "peduncle/kdtree.hpp"
#include "peduncle/normals.hpp"
#include "peduncle/point_cloud.hpp"

namespace peduncle {

/// Angular features of an oriented point pair in the Darboux frame
/// u = n_s, v = (p_t - p_s) x u / |.|, w = u x v.
struct DarbouxAngles {
  double alpha = 0.0;  // v . n_t, in [-1, 1]
  double phi = 0.0;    // u . (p_t - p_s) / |p_t - p_s|, in [-1, 1]
  double theta = 0.0;  // atan2(w . n_t, u . n_t), in (-pi, pi]
};

inline constexpr std::size_t kBinsPerFeature = 11;
inline constexpr std::size_t kFpfhSize = 3 * kBinsPerFeature;

/// Layout: [alpha bins 0..10, phi bins 11..21, theta bins 22..32].
using Fpfh33 = std::array<double, kFpfhSize>;

/// Angles with the given source/target roles; nullopt when the separation is
/// parallel to n_s (or zero), which leaves v undefined.
inline std::optional<DarbouxAngles> darboux_angles(const Point3& ps, const Vec3& ns, const Point3& pt,
                                                   const Vec3& nt) {
  const Vec3 d = pt - ps;
  const double len = norm(d);
  if (len == 0.0) return std::nullopt;
  const Vec3& u = ns;
  const Vec3 vr = cross(d, u);
  const double vlen = norm(vr);
  if (vlen < 1e-9 * len) return std::nullopt;
  const Vec3 v = vr * (1.0 / vlen);
  const Vec3 w = cross(u, v);
  DarbouxAngles out;
  out.alpha = dot(v, nt);
  out.phi = dot(u, d) / len;
  out.theta = std::atan2(dot(w, nt), dot(u, nt));
  return out;
}

/// Darboux angles for an unordered pair: the point whose normal makes the
/// smaller angle with the separation line becomes the source. Near-ties
/// (parallel normals) keep (pi, ni) as source so that the choice does not
/// depend on rounding and survives rigid motions.
inline std::optional<DarbouxAngles> pair_features(const Point3& pi, const Vec3& ni, const Point3& pj,
                                                  const Vec3& nj) {
  const Vec3 d = pj - pi;
  const double ci = std::fabs(dot(ni, d));
  const double cj = std::fabs(dot(nj, d));
  if (ci < cj - 1e-9 * norm(d)) return darboux_angles(pj, nj, pi, ni);
  return darboux_angles(pi, ni, pj, nj);
}

/// Equal-width bin over [lo, hi]; half-open bins, the last one closed.
inline std::size_t feature_bin(double value, double lo, double hi) {
  const double t = (value - lo) / (hi - lo) * static_cast<double>(kBinsPerFeature);
  if (!(t > 0.0)) return 0;
  const auto b = static_cast<std::size_t>(std::floor(t));
  return b >= kBinsPerFeature ? kBinsPerFeature - 1 : b;
}

inline std::array<std::size_t, 3> angle_bins(const DarbouxAngles& a) {
  constexpr double pi = std::numbers::pi;
  return {feature_bin(a.alpha, -1.0, 1.0), kBinsPerFeature + feature_bin(a.phi, -1.0, 1.0),
          2 * kBinsPerFeature + feature_bin(a.theta, -pi, pi)};
}

namespace detail {

inline std::optional<Fpfh33> spfh_impl(const PointCloud& cloud, const NormalField& normals, Index i,
                                       std::span<const Index> neighbours) {
  if (!normals.at(i)) return std::nullopt;
  Fpfh33 hist{};
  std::size_t valid = 0;
  for (Index j : neighbours) {
    if (j == i || !normals.at(j)) continue;
    const auto a = pair_features(cloud.points[i], *normals[i], cloud.points[j], *normals[j]);
    if (!a) continue;
    for (std::size_t b : angle_bins(*a)) hist[b] += 1.0;
    ++valid;
  }
  if (valid == 0) return std::nullopt;
  const double scale = 100.0 / static_cast<double>(valid);
  for (double& h : hist) h *= scale;
  return hist;
}

}  // namespace detail

/// Simplified point feature histogram of point i over its neighbours. Each
/// 11-bin block sums to 100; degenerate pairs are not counted.
inline Fpfh33 spfh(const PointCloud& cloud, const NormalField& normals, Index i,
                   std::span<const Index> neighbours) {
  if (neighbours.empty()) throw Error(ErrorCode::EmptyInput, "SPFH needs neighbours");
  auto h = detail::spfh_impl(cloud, normals, i, neighbours);
  if (!h) throw Error(ErrorCode::EmptyHistogram, "every pair was degenerate");
  return *h;
}

/// FPFH(p) = SPFH(p) + (1/k) * sum_i SPFH(p_i) / |p - p_i| over the k-nearest
/// neighbourhood (which contains p itself; zero-distance entries are skipped).
/// Points with an invalid normal or empty SPFH get nullopt.
inline std::vector<std::optional<Fpfh33>> fpfh(const PointCloud& cloud, const NormalField& normals,
                                               const SpatialIndex& index, std::size_t k) {
  if (k < 2) throw Error(ErrorCode::InvalidInput, "FPFH needs k >= 2");
  if (normals.size() != cloud.size()) throw Error(ErrorCode::InvalidInput, "normal count mismatch");
  const std::size_t n = cloud.size();
  std::vector<IndexList> nbrs(n);
  std::vector<std::optional<Fpfh33>> simple(n);
  for (std::size_t i = 0; i < n; ++i) {
    nbrs[i] = index.knn(cloud.points[i], k);
    simple[i] = detail::spfh_impl(cloud, normals, static_cast<Index>(i), nbrs[i]);
  }
  std::vector<std::optional<Fpfh33>> out(n);
  const double inv_k = 1.0 / static_cast<double>(k);
  for (std::size_t i = 0; i < n; ++i) {
    if (!simple[i]) continue;
    Fpfh33 acc = *simple[i];
    for (Index j : nbrs[i]) {
      if (j == i || !simple[j]) continue;
      const double omega = distance(cloud.points[i], cloud.points[j]);
      if (omega == 0.0) continue;
      const double weight = inv_k / omega;
      for (std::size_t b = 0; b < kFpfhSize; ++b) acc[b] += weight * (*simple[j])[b];
    }
    out[i] = acc;
  }
  return out;
}

inline std::vector<std::optional<Fpfh33>> fpfh(const PointCloud& cloud, const NormalField& normals,
                                               std::size_t k) {
  const SpatialIndex index(cloud);
  return fpfh(cloud, normals, index, k);
}

}  // namespace peduncle
