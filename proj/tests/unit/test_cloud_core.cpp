#include <gtest/gtest.h>

#include <random>

#include "oracles/oracles.hpp"
#include "peduncle/clustering.hpp"
#include "peduncle/kdtree.hpp"
#include "peduncle/normals.hpp"
#include "peduncle/point_cloud.hpp"

using namespace peduncle;

namespace {

PointCloud line_cloud(std::initializer_list<double> xs) {
  PointCloud c;
  for (double x : xs) c.push_back({x, 0.0, 0.0}, {10, 20, 30});
  return c;
}

}  // namespace

TEST(Geometry, VectorOps) {
  const Vec3 a{1, 0, 0}, b{0, 1, 0};
  EXPECT_EQ(cross(a, b), (Vec3{0, 0, 1}));
  EXPECT_DOUBLE_EQ(dot(a + b, a - b), 0.0);
  EXPECT_DOUBLE_EQ(norm(Vec3{3, 4, 0}), 5.0);
  EXPECT_DOUBLE_EQ(distance(a, b), std::sqrt(2.0));
}

TEST(PointCloud, SelectKeepsAttributes) {
  PointCloud c;
  c.push_back({0, 0, 0}, {1, 2, 3}, Label::Pepper);
  c.push_back({1, 0, 0}, {4, 5, 6}, Label::Peduncle);
  const IndexList pick = {1};
  const auto s = c.select(pick);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.points[0], (Point3{1, 0, 0}));
  EXPECT_EQ(s.colors[0].g, 5);
  EXPECT_EQ(s.labels[0], Label::Peduncle);
}

TEST(PointCloud, BoundingBoxAndCentroid) {
  const auto c = line_cloud({-1.0, 2.0, 0.5});
  const auto all = all_indices(c.size());
  const auto box = compute_bbox(c, all);
  EXPECT_DOUBLE_EQ(box.min.x, -1.0);
  EXPECT_DOUBLE_EQ(box.max.x, 2.0);
  EXPECT_DOUBLE_EQ(box.extent().x, 3.0);
  EXPECT_TRUE(box.contains({0, 0, 0}));
  EXPECT_FALSE(box.contains({3, 0, 0}));
  EXPECT_DOUBLE_EQ(centroid(c, all).x, 0.5);
  EXPECT_THROW(compute_bbox(c, IndexList{}), Error);
}

TEST(PointCloud, TextRoundTrip) {
  PointCloud c;
  c.push_back({0.1, -0.2, 0.3000000000000001}, {1, 2, 3}, Label::Background);
  c.push_back({1e-9, 5, -7}, {255, 0, 128}, Label::Peduncle);
  const auto back = parse_point_cloud(format_point_cloud(c));
  EXPECT_EQ(back.points, c.points);
  EXPECT_EQ(back.labels, c.labels);
  EXPECT_EQ(back.colors[1].r, 255);
  EXPECT_THROW(parse_point_cloud("garbage"), Error);
}

TEST(SpatialIndex, KnnOrdersByDistanceThenIndex) {
  const auto c = line_cloud({0.0, 1.0, -1.0, 2.0, 1.0});
  const SpatialIndex idx(c);
  EXPECT_EQ(idx.knn({0, 0, 0}, 3), (IndexList{0, 1, 2}));
  EXPECT_EQ(idx.knn({1, 0, 0}, 2), (IndexList{1, 4}));  // duplicate points tie on index
  EXPECT_EQ(idx.radius_search({0.5, 0, 0}, 0.5), (IndexList{0, 1, 4}));
}

TEST(SpatialIndex, EdgeCases) {
  const auto c = line_cloud({0.0, 1.0});
  const SpatialIndex idx(c);
  EXPECT_THROW(idx.radius_search({0, 0, 0}, 0.0), Error);
  EXPECT_THROW(SpatialIndex(PointCloud{}), Error);
  EXPECT_EQ(idx.knn({0, 0, 0}, 2).size(), 2u);
}

TEST(SpatialIndex, MatchesBruteForceOnRandomClouds) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    const auto c = oracle::random_cloud(rng, 300 + 50 * static_cast<std::size_t>(t), 1.0);
    const SpatialIndex idx(c);
    for (int q = 0; q < 20; ++q) {
      const Point3 p = c.points[rng() % c.size()];
      EXPECT_EQ(idx.knn(p, 7), oracle::knn(c.points, p, 7));
      EXPECT_EQ(idx.radius_search(p, 0.1), oracle::radius(c.points, p, 0.1));
    }
  }
}

TEST(Normals, PlaneNormalFacesViewpoint) {
  PointCloud c;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) c.push_back({0.01 * i, 0.01 * j, 1.0}, {});
  const auto n = estimate_normals(c, 8, {0.05, 0.05, 0.0});
  for (const auto& v : n) {
    ASSERT_TRUE(v.has_value());
    EXPECT_NEAR(v->z, -1.0, 1e-9);
  }
  const auto up = estimate_normals(c, 8, {0.05, 0.05, 2.0});
  EXPECT_NEAR(up[0]->z, 1.0, 1e-9);
}

TEST(Normals, DegenerateNeighbourhoodHasNoNormal) {
  const auto c = line_cloud({0.0, 1.0, 2.0, 3.0, 4.0});
  const auto n = estimate_normals(c, 3, {});
  for (const auto& v : n) EXPECT_FALSE(v.has_value());
}

TEST(Clustering, SplitsByToleranceAndSize) {
  const auto c = line_cloud({0.0, 0.002, 0.004, 0.006, 0.008, 0.1, 0.102, 0.5});
  const auto all = all_indices(c.size());
  const auto clusters = euclidean_cluster(c, all, {0.003, 2, 100});
  ASSERT_EQ(clusters.size(), 2u);
  EXPECT_EQ(clusters[0].indices, (IndexList{0, 1, 2, 3, 4}));
  EXPECT_EQ(clusters[1].indices, (IndexList{5, 6}));
  EXPECT_TRUE(euclidean_cluster(c, all, {0.003, 6, 100}).empty());
  EXPECT_EQ(euclidean_cluster(c, all, {0.003, 1, 2}).size(), 2u);  // singleton + pair; the 5-run is too big
}

TEST(Clustering, RespectsSubset) {
  const auto c = line_cloud({0.0, 0.002, 0.004, 0.006});
  const IndexList subset = {0, 1, 3};
  const auto clusters = euclidean_cluster(c, subset, {0.003, 1, 10});
  ASSERT_EQ(clusters.size(), 2u);
  EXPECT_EQ(clusters[0].indices, (IndexList{0, 1}));
  EXPECT_EQ(clusters[1].indices, (IndexList{3}));
}

TEST(Clustering, MatchesUnionFind) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 8; ++t) {
    const auto c = oracle::random_cloud(rng, 400, 0.05);
    const auto all = all_indices(c.size());
    const auto got = euclidean_cluster(c, all, {0.004, 3, 200});
    const auto want = oracle::components(c, all, 0.004, 3, 200);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].indices, want[i]);
  }
}
