#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "oracles/oracles.hpp"
#include "peduncle/features.hpp"
#include "peduncle/naive_bayes.hpp"

using namespace peduncle;

TEST(Hsv, PrimaryColours) {
  const auto red = rgb_to_hsv(255, 0, 0), green = rgb_to_hsv(0, 255, 0), blue = rgb_to_hsv(0, 0, 255);
  EXPECT_DOUBLE_EQ(red.h, 0.0);
  EXPECT_DOUBLE_EQ(green.h, 120.0);
  EXPECT_DOUBLE_EQ(blue.h, 240.0);
  EXPECT_DOUBLE_EQ(red.s, 1.0);
  EXPECT_DOUBLE_EQ(red.v, 1.0);
  const auto grey = rgb_to_hsv(128, 128, 128);
  EXPECT_DOUBLE_EQ(grey.s, 0.0);
  EXPECT_DOUBLE_EQ(grey.h, 0.0);
  EXPECT_DOUBLE_EQ(rgb_to_hsv(0, 0, 0).v, 0.0);
  EXPECT_NEAR(rgb_to_hsv(255, 0, 1).h, 359.76, 0.01);  // wraps into [0, 360)
}

TEST(Hsv, RoundTripsEveryCube) {
  for (int r = 0; r < 256; r += 15)
    for (int g = 0; g < 256; g += 17)
      for (int b = 0; b < 256; b += 51) {
        const Rgb c{static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
        EXPECT_EQ(hsv_to_rgb(rgb_to_hsv(c)), c);
      }
}

TEST(Fpfh, BinEdges) {
  EXPECT_EQ(feature_bin(-1.0, -1.0, 1.0), 0u);
  EXPECT_EQ(feature_bin(1.0, -1.0, 1.0), 10u);    // last bin closed
  EXPECT_EQ(feature_bin(0.0, -1.0, 1.0), 5u);     // centre bin
  EXPECT_EQ(feature_bin(-1.0 + 2.0 / 11.0, -1.0, 1.0), 1u);  // half-open lower edge
  EXPECT_EQ(feature_bin(std::numbers::pi, -std::numbers::pi, std::numbers::pi), 10u);
  EXPECT_EQ(feature_bin(-2.0, -1.0, 1.0), 0u);
}

TEST(Fpfh, DarbouxKnownPair) {
  // source normal +z, target displaced along x with normal tilted toward x
  const Vec3 nt = normalized(Vec3{1, 0, 1});
  const auto a = darboux_angles({0, 0, 0}, {0, 0, 1}, {1, 0, 0}, nt);
  ASSERT_TRUE(a);
  // u = z, v = d x u = x cross z = -y, w = u x v = z cross -y = x
  EXPECT_NEAR(a->alpha, 0.0, 1e-12);
  EXPECT_NEAR(a->phi, 0.0, 1e-12);
  EXPECT_NEAR(a->theta, std::numbers::pi / 4, 1e-12);
  EXPECT_FALSE(darboux_angles({0, 0, 0}, {0, 0, 1}, {0, 0, 1}, nt));  // d parallel to n
  EXPECT_FALSE(darboux_angles({0, 0, 0}, {0, 0, 1}, {0, 0, 0}, nt));  // coincident
}

TEST(Fpfh, SourceSelectionIsSymmetric) {
  const Point3 p{0, 0, 0}, q{0.01, 0.002, 0.001};
  const Vec3 np = normalized(Vec3{0.1, 0.2, 1}), nq = normalized(Vec3{-0.3, 0.1, 1});
  const auto a = pair_features(p, np, q, nq), b = pair_features(q, nq, p, np);
  ASSERT_TRUE(a && b);
  EXPECT_DOUBLE_EQ(a->alpha, b->alpha);
  EXPECT_DOUBLE_EQ(a->phi, b->phi);
  EXPECT_DOUBLE_EQ(a->theta, b->theta);
}

TEST(Fpfh, SpfhBlocksSumTo100) {
  std::mt19937_64 rng(3);
  const auto cloud = oracle::random_cloud(rng, 60, 0.02);
  const auto normals = estimate_normals(cloud, 10, {0, 0, -1});
  const SpatialIndex idx(cloud);
  const auto nb = idx.knn(cloud.points[0], 12);
  const auto h = spfh(cloud, normals, 0, nb);
  for (int block = 0; block < 3; ++block) {
    double s = 0.0;
    for (int b = 0; b < 11; ++b) s += h[static_cast<std::size_t>(11 * block + b)];
    EXPECT_NEAR(s, 100.0, 1e-9);
  }
  EXPECT_THROW(spfh(cloud, normals, 0, IndexList{}), Error);
}

TEST(Fpfh, MatchesDirectFormula) {
  std::mt19937_64 rng(8);
  const auto cloud = oracle::random_cloud(rng, 150, 0.03);
  const auto normals = estimate_normals(cloud, 10, {});
  const auto fast = fpfh(cloud, normals, 12);
  const auto slow = oracle::fpfh(cloud, normals, 12);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    ASSERT_EQ(fast[i].has_value(), slow[i].has_value());
    if (!fast[i]) continue;
    for (std::size_t b = 0; b < kFpfhSize; ++b) EXPECT_NEAR((*fast[i])[b], (*slow[i])[b], 1e-9);
  }
}

TEST(Fpfh, RejectsBadArguments) {
  PointCloud c;
  c.push_back({0, 0, 0}, {});
  c.push_back({1, 0, 0}, {});
  EXPECT_THROW(fpfh(c, NormalField(2), 1), Error);
  EXPECT_THROW(fpfh(c, NormalField(1), 2), Error);
}

TEST(Features, AssembleLayout) {
  Fpfh33 h{};
  h[0] = 7;
  h[32] = 9;
  const auto f = assemble_feature({180.0, 0.5, 0.25}, h);
  EXPECT_DOUBLE_EQ(f[0], 0.5);
  EXPECT_DOUBLE_EQ(f[1], 0.5);
  EXPECT_DOUBLE_EQ(f[2], 0.25);
  EXPECT_DOUBLE_EQ(f[3], 7);
  EXPECT_DOUBLE_EQ(f[35], 9);
  EXPECT_THROW(assemble_feature({}, std::nullopt), Error);
}

TEST(Features, ComputeOnSmallCloud) {
  std::mt19937_64 rng(2);
  auto cloud = oracle::random_cloud(rng, 80, 0.02);
  for (auto& c : cloud.colors) c = {40, 160, 60};
  const auto f = compute_features(cloud, {10, 10, {}});
  ASSERT_EQ(f.size(), cloud.size());
  std::size_t valid = 0;
  for (const auto& v : f)
    if (v) {
      ++valid;
      EXPECT_NEAR((*v)[0], rgb_to_hsv(Rgb{40, 160, 60}).h / 360.0, 1e-12);
    }
  EXPECT_GT(valid, 70u);
  EXPECT_THROW(compute_features(PointCloud{}, {}), Error);
}

TEST(Features, TextRoundTrip) {
  std::vector<LabeledFeature> rows(3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t d = 0; d < kFeatureSize; ++d) rows[i].values[d] = 0.1 * static_cast<double>(i * d) + 1e-17;
    rows[i].label = i % 2 ? 1 : -1;
  }
  const auto back = parse_features(format_features(rows));
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].values, rows[i].values);
    EXPECT_EQ(back[i].label, rows[i].label);
  }
  EXPECT_THROW(parse_features("features v1 2 36\n"), Error);
  EXPECT_THROW(parse_features("feats v1 0 36\n"), Error);
}

TEST(NaiveBayes, SeparatesRedFromGreen) {
  std::vector<HsvColor> red, green;
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> j(-15, 15);
  for (int i = 0; i < 300; ++i) {
    red.push_back(rgb_to_hsv(static_cast<std::uint8_t>(200 + j(rng)), static_cast<std::uint8_t>(30 + j(rng)), 30));
    green.push_back(rgb_to_hsv(60, static_cast<std::uint8_t>(150 + j(rng)), static_cast<std::uint8_t>(60 + j(rng))));
  }
  const auto nb = nb_fit(red, green);
  EXPECT_GT(nb_posterior(nb, Rgb{210, 25, 35}), 0.99);
  EXPECT_LT(nb_posterior(nb, Rgb{55, 150, 60}), 0.01);
  EXPECT_DOUBLE_EQ(nb.pepper.prior, 0.5);

  const auto back = parse_naive_bayes(format_naive_bayes(nb));
  EXPECT_EQ(back.pepper.mean, nb.pepper.mean);
  EXPECT_EQ(back.other.variance, nb.other.variance);
  EXPECT_THROW(nb_fit(red, std::vector<HsvColor>{}), Error);
}

TEST(NaiveBayes, HueIsCircular) {
  // reds straddling 0/360 must be one tight cluster
  std::vector<HsvColor> pepper = {{355, 0.9, 0.8}, {5, 0.9, 0.8}, {358, 0.85, 0.75}, {2, 0.95, 0.85}};
  std::vector<HsvColor> other = {{120, 0.7, 0.6}, {110, 0.6, 0.5}, {130, 0.8, 0.7}, {125, 0.65, 0.55}};
  const auto nb = nb_fit(pepper, other);
  EXPECT_GT(nb_posterior(nb, HsvColor{0.0, 0.9, 0.8}), 0.99);
}
