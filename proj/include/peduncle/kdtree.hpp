#pragma once

#include <algorithm>
#include <cstdint>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "peduncle/error.hpp"
#include "peduncle/point_cloud.hpp"

namespace peduncle {

/// Exact kd-tree over an immutable snapshot of points.
///
/// Query results are bit-identical to a brute-force scan that compares
/// `squared_distance` values: pruning uses a box distance computed with the
/// same summation order, which never exceeds the distance to any point inside
/// the box. Ties are broken by ascending point index.
class SpatialIndex {
 public:
  explicit SpatialIndex(std::span<const Point3> points, std::size_t leaf_size = 8)
      : points_(points.begin(), points.end()), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
    if (points_.empty()) throw Error(ErrorCode::EmptyInput, "cannot index an empty cloud");
    order_ = all_indices(points_.size());
    nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
    build(0, static_cast<Index>(order_.size()));
  }

  explicit SpatialIndex(const PointCloud& cloud, std::size_t leaf_size = 8)
      : SpatialIndex(std::span<const Point3>(cloud.points), leaf_size) {}

  std::size_t size() const noexcept { return points_.size(); }
  const Point3& point(Index i) const { return points_[i]; }

  /// k nearest indices ordered by (distance, index).
  IndexList knn(const Point3& q, std::size_t k) const {
    if (k == 0) throw Error(ErrorCode::InvalidInput, "k must be at least 1");
    if (k > points_.size())
      throw Error(ErrorCode::InsufficientPoints,
                  "k=" + std::to_string(k) + " exceeds cloud size " + std::to_string(points_.size()));
    Heap heap;
    knn_recurse(0, q, k, heap);
    std::vector<Entry> sorted;
    sorted.reserve(k);
    while (!heap.empty()) {
      sorted.push_back(heap.top());
      heap.pop();
    }
    std::reverse(sorted.begin(), sorted.end());
    IndexList out;
    out.reserve(k);
    for (const auto& e : sorted) out.push_back(e.second);
    return out;
  }

  /// All indices with distance <= r, ascending index order.
  IndexList radius_search(const Point3& q, double r) const {
    if (!(r > 0.0)) throw Error(ErrorCode::InvalidInput, "radius must be positive");
    IndexList out;
    radius_recurse(0, q, r * r, out);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  using Entry = std::pair<double, Index>;  // (squared distance, index)
  using Heap = std::priority_queue<Entry>;  // max-heap, worst candidate on top

  struct Node {
    BoundingBox3 box;
    Index begin = 0;
    Index end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
  };

  std::int32_t build(Index begin, Index end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({});
    BoundingBox3 box{points_[order_[begin]], points_[order_[begin]]};
    for (Index i = begin; i < end; ++i) {
      const auto& p = points_[order_[i]];
      for (int a = 0; a < 3; ++a) {
        box.min[a] = std::min(box.min[a], p[a]);
        box.max[a] = std::max(box.max[a], p[a]);
      }
    }
    nodes_[id].box = box;
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    if (end - begin <= leaf_size_) return id;

    const Vec3 ext = box.extent();
    int axis = 0;
    if (ext.y > ext[axis]) axis = 1;
    if (ext.z > ext[axis]) axis = 2;
    if (ext[axis] <= 0.0) return id;  // all coincident

    const Index mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](Index a, Index b) {
                       const double pa = points_[a][axis];
                       const double pb = points_[b][axis];
                       return pa < pb || (pa == pb && a < b);
                     });
    const auto left = build(begin, mid);
    const auto right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  static double box_squared_distance(const BoundingBox3& box, const Point3& q) {
    double d[3];
    for (int a = 0; a < 3; ++a) {
      if (q[a] < box.min[a]) d[a] = box.min[a] - q[a];
      else if (q[a] > box.max[a]) d[a] = q[a] - box.max[a];
      else d[a] = 0.0;
    }
    return d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
  }

  void knn_recurse(std::int32_t id, const Point3& q, std::size_t k, Heap& heap) const {
    const Node& node = nodes_[id];
    if (heap.size() == k && box_squared_distance(node.box, q) > heap.top().first) return;
    if (node.left < 0) {
      for (Index i = node.begin; i < node.end; ++i) {
        const Index idx = order_[i];
        const Entry e{squared_distance(points_[idx], q), idx};
        if (heap.size() < k) {
          heap.push(e);
        } else if (e < heap.top()) {
          heap.pop();
          heap.push(e);
        }
      }
      return;
    }
    const double dl = box_squared_distance(nodes_[node.left].box, q);
    const double dr = box_squared_distance(nodes_[node.right].box, q);
    if (dl <= dr) {
      knn_recurse(node.left, q, k, heap);
      knn_recurse(node.right, q, k, heap);
    } else {
      knn_recurse(node.right, q, k, heap);
      knn_recurse(node.left, q, k, heap);
    }
  }

  void radius_recurse(std::int32_t id, const Point3& q, double r2, IndexList& out) const {
    const Node& node = nodes_[id];
    if (box_squared_distance(node.box, q) > r2) return;
    if (node.left < 0) {
      for (Index i = node.begin; i < node.end; ++i) {
        const Index idx = order_[i];
        if (squared_distance(points_[idx], q) <= r2) out.push_back(idx);
      }
      return;
    }
    radius_recurse(node.left, q, r2, out);
    radius_recurse(node.right, q, r2, out);
  }

  std::vector<Point3> points_;
  std::size_t leaf_size_;
  IndexList order_;
  std::vector<Node> nodes_;
};

inline SpatialIndex build_index(const PointCloud& cloud) { return SpatialIndex(cloud); }

}  // namespace peduncle
