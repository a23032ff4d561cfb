#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "peduncle/scenegen.hpp"

using namespace peduncle;
namespace fs = std::filesystem;

namespace {

const LabeledScene& default_scene() {
  static const LabeledScene s = generate(SceneParams{});
  return s;
}

std::size_t count_set(const Mask& m) {
  std::size_t n = 0;
  for (auto v : m.pixels) n += v != 0;
  return n;
}

}  // namespace

TEST(Rng, UniformRangeAndNormalMoments) {
  Rng r(42);
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double g = r.normal();
    sum += g;
    sq += g * g;
  }
  EXPECT_NEAR(sum / 20000, 0.0, 0.03);
  EXPECT_NEAR(sq / 20000, 1.0, 0.05);
  Rng a(7), b(7);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.bits(), b.bits());
  for (int i = 0; i < 1000; ++i) EXPECT_LT(a.below(3), 3u);
}

TEST(Rng, SceneSeedsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::size_t i = 0; i < 1000; ++i) seen.insert(scene_seed(1, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_NE(scene_seed(1, 0), scene_seed(2, 0));
  EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafULL);
}

TEST(SceneGen, RastersAreRegistered) {
  const auto& s = default_scene();
  EXPECT_EQ(s.rgb.width, 640u);
  EXPECT_EQ(s.depth.height, 480u);
  EXPECT_EQ(s.labels.pixels.size(), s.rgb.pixels.size());
  EXPECT_EQ(s.cloud.size(), s.pixels.size());
  for (std::size_t i = 0; i < s.pixels.size(); i += 97) {
    EXPECT_NE(s.depth.pixels[s.pixels[i]], 0);
    EXPECT_EQ(static_cast<std::uint8_t>(s.cloud.labels[i]), s.labels.pixels[s.pixels[i]]);
  }
}

TEST(SceneGen, ContainsPepperPeduncleAndBackground) {
  const auto& s = default_scene();
  std::size_t pepper = 0, peduncle = 0, background = 0;
  for (auto l : s.labels.pixels) {
    pepper += l == static_cast<std::uint8_t>(Label::Pepper);
    peduncle += l == static_cast<std::uint8_t>(Label::Peduncle);
    background += l == static_cast<std::uint8_t>(Label::Background);
  }
  EXPECT_GT(pepper, 5000u);
  EXPECT_GT(peduncle, 200u);
  EXPECT_GT(background, 10000u);
  EXPECT_EQ(count_set(s.positive), peduncle);
}

TEST(SceneGen, PeduncleSitsAbovePepper) {
  const auto& s = default_scene();
  double ped_y = 0.0, pep_y = 0.0;
  std::size_t np = 0, nq = 0;
  for (std::size_t i = 0; i < s.cloud.size(); ++i) {
    if (s.cloud.labels[i] == Label::Peduncle) ped_y += s.cloud.points[i].y, ++np;
    if (s.cloud.labels[i] == Label::Pepper) pep_y += s.cloud.points[i].y, ++nq;
  }
  EXPECT_LT(ped_y / static_cast<double>(np), pep_y / static_cast<double>(nq));  // camera y points down
}

TEST(SceneGen, NegativeMaskKeepsItsDistance) {
  const auto& s = default_scene();
  for (std::size_t y = 0; y < s.positive.height; ++y)
    for (std::size_t x = 0; x < s.positive.width; ++x) {
      if (!s.negative.at(x, y)) continue;
      ASSERT_FALSE(s.positive.at(x, y));
      for (long dy = -detail::kNegativeBand; dy <= detail::kNegativeBand; ++dy)
        for (long dx = -detail::kNegativeBand; dx <= detail::kNegativeBand; ++dx) {
          const long xx = static_cast<long>(x) + dx, yy = static_cast<long>(y) + dy;
          if (s.positive.contains(xx, yy)) ASSERT_FALSE(s.positive.at(xx, yy));
        }
    }
  const std::size_t band = s.positive.pixels.size() - count_set(s.negative) - count_set(s.positive);
  EXPECT_GT(band, 0u);
}

TEST(SceneGen, DeterministicAndSeedSensitive) {
  const Settings st;
  const auto a = generate(sample_scene_params(11, st)), b = generate(sample_scene_params(11, st));
  EXPECT_EQ(a.rgb, b.rgb);
  EXPECT_EQ(a.depth, b.depth);
  EXPECT_EQ(a.labels, b.labels);
  const auto c = generate(sample_scene_params(12, st));
  EXPECT_NE(a.rgb, c.rgb);
}

TEST(SceneGen, StemFlagKeepsRandomStreamAligned) {
  SceneParams p;
  p.seed = 5;
  const auto with = generate(p);
  p.stem = false;
  const auto without = generate(p);
  // peduncle and fruit are unchanged by removing the stem
  std::size_t same = 0, total = 0;
  for (std::size_t i = 0; i < with.labels.pixels.size(); ++i)
    if (with.labels.pixels[i] == static_cast<std::uint8_t>(Label::Pepper)) {
      ++total;
      same += without.labels.pixels[i] == with.labels.pixels[i];
    }
  EXPECT_GT(static_cast<double>(same), 0.95 * static_cast<double>(total));
}

TEST(SceneGen, ColourOverrideAndValidation) {
  SceneParams p;
  p.color = PepperColor::Green;
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(parse_pepper_color("mixed"), PepperColor::Mixed);
  EXPECT_EQ(to_string(PepperColor::Red), "red");
  EXPECT_THROW(parse_pepper_color("blue"), Error);
  p.pepper_axes.x = 0.0;
  EXPECT_THROW(generate(p), Error);
}

TEST(SceneGen, NoiseFreeDepthMatchesGeometry) {
  SceneParams p;
  p.noise_sigma = 0.0;
  p.leaf_count = 0;
  const auto s = generate(p);
  // the pepper's nearest point is its front pole at z = centre.z - axes.z
  double zmin = 1e9;
  for (std::size_t i = 0; i < s.cloud.size(); ++i)
    if (s.cloud.labels[i] == Label::Pepper) zmin = std::min(zmin, s.cloud.points[i].z);
  EXPECT_NEAR(zmin, p.pepper_center.z - p.pepper_axes.z, 0.002);
}

TEST(SceneGen, SampledParamsStayInRange) {
  const Settings st;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto p = sample_scene_params(seed, st);
    EXPECT_NO_THROW(p.validate());
    EXPECT_GE(p.pepper_center.z, 0.27);
    EXPECT_LE(p.pepper_center.z, 0.31);
    EXPECT_NE(p.color, PepperColor::Green);
  }
}

TEST(SceneIo, SaveLoadAndManifest) {
  const fs::path dir = fs::temp_directory_path() / "peduncle_unit_scenes";
  fs::remove_all(dir);
  const auto entries = make_benchmark(2, 3, dir);
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[1].id, "scene_0001");
  EXPECT_TRUE(verify_benchmark(dir, entries));
  const auto parsed = parse_manifest(text::read_file((dir / "manifest.txt").string()));
  ASSERT_EQ(parsed.size(), 2u);
  EXPECT_EQ(parsed[0].seed, entries[0].seed);
  EXPECT_EQ(parsed[0].files, entries[0].files);

  const auto loaded = load_scene(dir, parsed[0], Settings{});
  const auto fresh = generate(sample_scene_params(entries[0].seed, Settings{}));
  EXPECT_EQ(loaded.rgb, fresh.rgb);
  EXPECT_EQ(loaded.negative, fresh.negative);
  EXPECT_EQ(loaded.cloud.points, fresh.cloud.points);

  text::write_file((dir / entries[1].files[0]).string(), "P6\n1 1\n255\nabc");
  EXPECT_FALSE(verify_benchmark(dir, entries));
  fs::remove_all(dir);
  EXPECT_THROW(parse_manifest("onlyid\n"), Error);
}
