#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "peduncle/kdtree.hpp"
#include "peduncle/point_cloud.hpp"

namespace peduncle {

/// Point indices into a PointCloud, ascending.
struct Cluster {
  IndexList indices;
  std::size_t size() const noexcept { return indices.size(); }
  friend bool operator==(const Cluster&, const Cluster&) = default;
};

struct ClusterParams {
  double tolerance = 0.003;  // meters
  std::size_t min_size = 5;
  std::size_t max_size = 25000;
};

/// Connected components of the subset under the `distance <= tolerance`
/// adjacency, size-filtered to [min_size, max_size] and sorted by size
/// (descending) then by smallest member index.
inline std::vector<Cluster> euclidean_cluster(const PointCloud& cloud, std::span<const Index> subset,
                                              const ClusterParams& params) {
  if (!(params.tolerance > 0.0)) throw Error(ErrorCode::InvalidInput, "cluster tolerance must be positive");
  if (params.min_size < 1 || params.min_size > params.max_size)
    throw Error(ErrorCode::InvalidInput, "cluster size limits must satisfy 1 <= min <= max");
  std::vector<Cluster> clusters;
  if (subset.empty()) return clusters;

  std::vector<Point3> local;
  local.reserve(subset.size());
  for (Index i : subset) local.push_back(cloud.points.at(i));
  const SpatialIndex index(local);

  std::vector<char> visited(subset.size(), 0);
  IndexList frontier;
  for (Index seed = 0; seed < subset.size(); ++seed) {
    if (visited[seed]) continue;
    visited[seed] = 1;
    frontier.assign(1, seed);
    for (std::size_t head = 0; head < frontier.size(); ++head) {
      for (Index nb : index.radius_search(local[frontier[head]], params.tolerance)) {
        if (!visited[nb]) {
          visited[nb] = 1;
          frontier.push_back(nb);
        }
      }
    }
    if (frontier.size() < params.min_size || frontier.size() > params.max_size) continue;
    Cluster c;
    c.indices.reserve(frontier.size());
    for (Index local_id : frontier) c.indices.push_back(subset[local_id]);
    std::sort(c.indices.begin(), c.indices.end());
    clusters.push_back(std::move(c));
  }
  std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.indices.front() < b.indices.front();
  });
  return clusters;
}

}  // namespace peduncle
