#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "peduncle/camera.hpp"
#include "peduncle/config.hpp"
#include "peduncle/hsv.hpp"
#include "peduncle/image.hpp"
#include "peduncle/pipeline.hpp"

namespace peduncle {

/// Seeded stream with portable uniform/normal draws (the std distributions
/// are implementation-defined, the engine is not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }
  double normal() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }
  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t scene_seed(std::uint64_t master_seed, std::size_t i) {
  return splitmix64(master_seed * 0x100000001b3ull + i);
}

enum class PepperColor { Red, Green, Mixed };

inline std::string_view to_string(PepperColor c) {
  switch (c) {
    case PepperColor::Red: return "red";
    case PepperColor::Green: return "green";
    case PepperColor::Mixed: return "mixed";
  }
  return "red";
}

inline PepperColor parse_pepper_color(std::string_view s) {
  if (s == "red") return PepperColor::Red;
  if (s == "green") return PepperColor::Green;
  if (s == "mixed") return PepperColor::Mixed;
  throw Error(ErrorCode::InvalidInput, "pepper color must be red, green or mixed");
}

/// Scene geometry in the camera frame (x right, y down, z forward). The seed
/// also drives hue jitter, leaf placement, stem offset and depth noise.
struct SceneParams {
  std::uint64_t seed = 1;
  Vec3 pepper_center{0.0, 0.015, 0.30};
  Vec3 pepper_axes{0.037, 0.044, 0.037};
  PepperColor color = PepperColor::Red;
  double peduncle_length = 0.05;
  double peduncle_arc_radius = 0.05;
  double peduncle_thickness = 0.0045;  // tube radius
  double peduncle_flatness = 0.0;      // 0 leaves the top upright, 0.6 lays it sideways
  double peduncle_heading = 0.0;       // radians, horizontal direction the arc bends to
  std::size_t leaf_count = 3;
  bool stem = true;
  double noise_sigma = 0.0005;
  CameraIntrinsics intrinsics{};
  std::size_t width = 640;
  std::size_t height = 480;

  void validate() const {
    intrinsics.validate();
    for (int a = 0; a < 3; ++a)
      if (!(pepper_axes[a] > 0.0)) throw Error(ErrorCode::InvalidInput, "pepper axes must be positive");
    if (!(pepper_center.z > 0.0)) throw Error(ErrorCode::InvalidInput, "pepper must be in front of the camera");
    if (!(peduncle_length > 0.0) || !(peduncle_arc_radius > 0.0) || !(peduncle_thickness > 0.0))
      throw Error(ErrorCode::InvalidInput, "peduncle dimensions must be positive");
    if (peduncle_flatness < 0.0 || peduncle_flatness > 0.9)
      throw Error(ErrorCode::InvalidInput, "peduncle flatness must be in [0, 0.9]");
    if (noise_sigma < 0.0) throw Error(ErrorCode::InvalidInput, "noise sigma must be non-negative");
    if (width == 0 || height == 0) throw Error(ErrorCode::InvalidInput, "image size must be positive");
  }
};

struct LabeledScene {
  SceneParams params;
  RgbImage rgb;
  DepthImage depth;
  Raster<std::uint8_t> labels;  // Label per pixel, Unlabeled where nothing was hit
  Mask positive;                // peduncle pixels
  Mask negative;                // pixels at least 3 px away from any peduncle pixel
  PointCloud cloud;             // labeled, back-projected from depth
  std::vector<std::uint32_t> pixels;

  /// Frees the cloud when only the rasters are needed.
  void drop_cloud() {
    cloud = {};
    pixels = {};
  }
};

namespace detail {

struct Ray {
  Vec3 d;  // unit, from the camera origin
};

inline double first_positive(double t0, double t1) {
  if (t0 > 1e-9) return t0;
  if (t1 > 1e-9) return t1;
  return -1.0;
}

inline double hit_sphere(const Ray& r, const Point3& c, double radius) {
  const double b = dot(r.d, c);
  const double cc = dot(c, c) - radius * radius;
  const double h = b * b - cc;
  if (h < 0.0) return -1.0;
  const double s = std::sqrt(h);
  return first_positive(b - s, b + s);
}

struct Primitive {
  enum Kind { Ellipsoid, Capsule, Disc, Wall } kind;
  Label label;
  HsvColor color;
  Point3 a;     // centre, or first capsule end
  Point3 b;     // second capsule end
  Vec3 axes;    // ellipsoid semi-axes; disc: (a, b, unused)
  Vec3 n;       // disc normal
  Vec3 e1, e2;  // disc in-plane basis
  double radius = 0.0;

  /// Ray parameter of the nearest hit (negative when missed) and the normal there.
  double intersect(const Ray& r, Vec3& normal) const {
    switch (kind) {
      case Ellipsoid: {
        const Vec3 o{-a.x / axes.x, -a.y / axes.y, -a.z / axes.z};
        const Vec3 d{r.d.x / axes.x, r.d.y / axes.y, r.d.z / axes.z};
        const double qa = dot(d, d), qb = dot(o, d), qc = dot(o, o) - 1.0;
        const double h = qb * qb - qa * qc;
        if (h < 0.0) return -1.0;
        const double s = std::sqrt(h);
        const double t = first_positive((-qb - s) / qa, (-qb + s) / qa);
        if (t > 0.0) {
          const Vec3 p = r.d * t - a;
          normal = normalized(Vec3{p.x / (axes.x * axes.x), p.y / (axes.y * axes.y), p.z / (axes.z * axes.z)});
        }
        return t;
      }
      case Capsule: {
        double best = -1.0;
        const Vec3 ba = b - a;
        const double baba = dot(ba, ba);
        const double bard = dot(ba, r.d);
        const Vec3 oa = Vec3{} - a;
        const double baoa = dot(ba, oa);
        const double qa = baba - bard * bard;
        if (qa > 1e-14) {
          const double qb = baba * dot(r.d, oa) - baoa * bard;
          const double qc = baba * dot(oa, oa) - baoa * baoa - radius * radius * baba;
          const double h = qb * qb - qa * qc;
          if (h >= 0.0) {
            const double t = (-qb - std::sqrt(h)) / qa;
            const double y = baoa + t * bard;
            if (t > 1e-9 && y > 0.0 && y < baba) best = t;
          }
        }
        for (const Point3& end : {a, b}) {
          const double t = hit_sphere(r, end, radius);
          if (t > 0.0 && (best < 0.0 || t < best)) best = t;
        }
        if (best > 0.0) {
          const Point3 p = r.d * best;
          const double s = std::clamp(dot(p - a, ba) / baba, 0.0, 1.0);
          normal = normalized(p - (a + ba * s));
        }
        return best;
      }
      case Disc: {
        const double dn = dot(r.d, n);
        if (std::fabs(dn) < 1e-9) return -1.0;
        const double t = dot(a, n) / dn;
        if (t <= 1e-9) return -1.0;
        const Vec3 q = r.d * t - a;
        const double u = dot(q, e1) / axes.x, v = dot(q, e2) / axes.y;
        if (u * u + v * v > 1.0) return -1.0;
        normal = n;
        return t;
      }
      case Wall: {
        if (r.d.z <= 0.0) return -1.0;
        normal = {0.0, 0.0, -1.0};
        return a.z / r.d.z;
      }
    }
    return -1.0;
  }
};

inline HsvColor jitter_color(Rng& rng, double h_lo, double h_hi, double s_lo, double s_hi, double v_lo, double v_hi) {
  double h = rng.uniform(h_lo, h_hi);
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  return {h, rng.uniform(s_lo, s_hi), rng.uniform(v_lo, v_hi)};
}

inline std::vector<Primitive> build_primitives(const SceneParams& p, Rng& rng) {
  std::vector<Primitive> prims;
  const Point3 c = p.pepper_center;
  const Vec3 ax = p.pepper_axes;

  Primitive pepper{};
  pepper.kind = Primitive::Ellipsoid;
  pepper.label = Label::Pepper;
  pepper.a = c;
  pepper.axes = ax;
  switch (p.color) {
    case PepperColor::Red: pepper.color = jitter_color(rng, -10, 10, 0.75, 0.95, 0.6, 0.9); break;
    case PepperColor::Mixed: pepper.color = jitter_color(rng, 15, 40, 0.75, 0.95, 0.6, 0.9); break;
    case PepperColor::Green: pepper.color = jitter_color(rng, 90, 110, 0.6, 0.85, 0.4, 0.7); break;
  }
  prims.push_back(pepper);

  // Peduncle: circular arc leaving the top of the fruit, as a capsule chain.
  const HsvColor ped_color = jitter_color(rng, 75, 115, 0.45, 0.75, 0.45, 0.75);
  const Vec3 up{0.0, -1.0, 0.0};
  const Vec3 heading{std::cos(p.peduncle_heading), 0.0, std::sin(p.peduncle_heading)};
  const Vec3 t0 = normalized(up * (1.0 - p.peduncle_flatness) + heading * p.peduncle_flatness);
  const Vec3 n0 = normalized(heading - t0 * dot(heading, t0));
  const Point3 start = c + up * (ax.y * 0.9);
  const int segments = 10;
  Point3 prev = start;
  for (int s = 1; s <= segments; ++s) {
    const double arc = p.peduncle_length * s / segments;
    const double ang = arc / p.peduncle_arc_radius;
    const Point3 next = start + t0 * (p.peduncle_arc_radius * std::sin(ang)) +
                        n0 * (p.peduncle_arc_radius * (1.0 - std::cos(ang)));
    Primitive seg{};
    seg.kind = Primitive::Capsule;
    seg.label = Label::Peduncle;
    seg.color = ped_color;
    seg.a = prev;
    seg.b = next;
    seg.radius = p.peduncle_thickness;
    prims.push_back(seg);
    prev = next;
  }

  // Drawn unconditionally so the stream position does not depend on `stem`.
  const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
  // Behind the fruit, so it can enter the image ROI while staying outside the 3D box.
  const double stem_dx = rng.uniform(0.02, 0.07);
  const double stem_dz = rng.uniform(0.045, 0.075);
  const double stem_r = rng.uniform(0.006, 0.009);
  const HsvColor stem_color = jitter_color(rng, 80, 120, 0.4, 0.7, 0.4, 0.7);
  if (p.stem) {
    Primitive stem{};
    stem.kind = Primitive::Capsule;
    stem.label = Label::Background;
    stem.color = stem_color;
    stem.a = {c.x + side * stem_dx, c.y - ax.y - 0.2, c.z + stem_dz};
    stem.b = {c.x + side * stem_dx, c.y + 0.12, c.z + stem_dz};
    stem.radius = stem_r;
    prims.push_back(stem);
  }

  for (std::size_t i = 0; i < p.leaf_count; ++i) {
    Primitive leaf{};
    leaf.kind = Primitive::Disc;
    leaf.label = Label::Background;
    leaf.color = jitter_color(rng, 85, 130, 0.45, 0.85, 0.35, 0.7);
    leaf.a = {c.x + rng.uniform(-0.1, 0.1), c.y - ax.y + rng.uniform(-0.07, 0.05), c.z + rng.uniform(0.035, 0.12)};
    leaf.n = normalized(Vec3{rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), -1.0});
    const double phi = rng.uniform(0.0, std::numbers::pi);
    const Vec3 helper{std::cos(phi), std::sin(phi), 0.0};
    leaf.e1 = normalized(helper - leaf.n * dot(helper, leaf.n));
    leaf.e2 = cross(leaf.n, leaf.e1);
    leaf.axes = {rng.uniform(0.025, 0.05), rng.uniform(0.012, 0.025), 0.0};
    prims.push_back(leaf);
  }

  Primitive wall{};
  wall.kind = Primitive::Wall;
  wall.label = Label::Background;
  wall.color = jitter_color(rng, 190, 230, 0.1, 0.25, 0.35, 0.55);
  wall.a = {0.0, 0.0, c.z + rng.uniform(0.2, 0.35)};
  prims.push_back(wall);
  return prims;
}

/// Square (Chebyshev) dilation of the non-zero pixels by `radius`.
inline Mask dilate(const Mask& m, long radius) {
  Mask out(m.width, m.height, 0);
  for (long y = 0; y < static_cast<long>(m.height); ++y)
    for (long x = 0; x < static_cast<long>(m.width); ++x) {
      if (!m.at(x, y)) continue;
      for (long dy = -radius; dy <= radius; ++dy)
        for (long dx = -radius; dx <= radius; ++dx)
          if (m.contains(x + dx, y + dy)) out.at(x + dx, y + dy) = 255;
    }
  return out;
}

inline constexpr long kNegativeBand = 2;

inline void build_annotations(LabeledScene& s) {
  s.positive = Mask(s.labels.width, s.labels.height, 0);
  for (std::size_t i = 0; i < s.labels.pixels.size(); ++i)
    if (s.labels.pixels[i] == static_cast<std::uint8_t>(Label::Peduncle)) s.positive.pixels[i] = 255;
  const Mask near = dilate(s.positive, kNegativeBand);
  s.negative = Mask(s.labels.width, s.labels.height, 0);
  for (std::size_t i = 0; i < near.pixels.size(); ++i) s.negative.pixels[i] = near.pixels[i] ? 0 : 255;
}

inline void build_cloud(LabeledScene& s) {
  auto fc = frame_cloud(s.rgb, s.depth, s.params.intrinsics);
  s.cloud = std::move(fc.cloud);
  s.pixels = std::move(fc.pixels);
  s.cloud.labels.resize(s.cloud.size());
  for (std::size_t i = 0; i < s.pixels.size(); ++i) s.cloud.labels[i] = static_cast<Label>(s.labels.pixels[s.pixels[i]]);
}

}  // namespace detail

/// Ray-cast render of the scene into registered RGB, depth, label rasters,
/// annotation masks and a labeled cloud.
inline LabeledScene generate(const SceneParams& params) {
  params.validate();
  Rng rng(params.seed);
  const auto prims = detail::build_primitives(params, rng);
  const auto& intr = params.intrinsics;

  LabeledScene s;
  s.params = params;
  s.rgb = RgbImage(params.width, params.height);
  s.depth = DepthImage(params.width, params.height, 0);
  s.labels = Raster<std::uint8_t>(params.width, params.height, 0);
  for (std::size_t v = 0; v < params.height; ++v)
    for (std::size_t u = 0; u < params.width; ++u) {
      const detail::Ray ray{normalized(Vec3{(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0})};
      double best = -1.0;
      Vec3 best_n;
      const detail::Primitive* hit = nullptr;
      for (const auto& prim : prims) {
        Vec3 n;
        const double t = prim.intersect(ray, n);
        if (t > 0.0 && (best < 0.0 || t < best)) {
          best = t;
          best_n = n;
          hit = &prim;
        }
      }
      const double noise = params.noise_sigma > 0.0 ? params.noise_sigma * rng.normal() : 0.0;
      if (!hit) continue;
      const double z = best * ray.d.z + noise;
      const double stored = std::round(z / intr.depth_scale);
      if (!(stored >= 1.0) || stored > 65535.0) continue;
      const double lambert = std::fabs(dot(best_n, ray.d));
      HsvColor c = hit->color;
      c.v *= 0.35 + 0.65 * lambert;
      s.rgb.at(u, v) = hsv_to_rgb(c);
      s.depth.at(u, v) = static_cast<std::uint16_t>(stored);
      s.labels.at(u, v) = static_cast<std::uint8_t>(hit->label);
    }
  detail::build_annotations(s);
  detail::build_cloud(s);
  return s;
}

/// Scene parameters drawn from the benchmark distribution.
inline SceneParams sample_scene_params(std::uint64_t seed, const Settings& settings) {
  Rng rng(splitmix64(seed ^ 0x5ce9e5ull));
  SceneParams p;
  p.seed = seed;
  p.pepper_center = {rng.uniform(-0.025, 0.025), rng.uniform(0.0, 0.03), rng.uniform(0.27, 0.31)};
  const double ax = rng.uniform(0.032, 0.042);
  p.pepper_axes = {ax, rng.uniform(0.038, 0.05), ax * rng.uniform(0.9, 1.1)};
  p.color = rng.uniform() < 0.7 ? PepperColor::Red : PepperColor::Mixed;
  p.peduncle_length = rng.uniform(0.035, 0.06);
  p.peduncle_arc_radius = rng.uniform(0.03, 0.09);
  p.peduncle_thickness = rng.uniform(0.0035, 0.0055);
  p.peduncle_flatness = rng.uniform() < 0.2 ? rng.uniform(0.5, 0.7) : rng.uniform(0.0, 0.4);
  p.peduncle_heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
  p.leaf_count = 1 + rng.below(5);
  p.stem = rng.uniform() < 0.75;
  p.noise_sigma = settings.noise_sigma;
  p.intrinsics = settings.intrinsics;
  p.width = settings.width;
  p.height = settings.height;
  return p;
}

// ---------------------------------------------------------------------------
// Files and manifests

inline const std::array<std::string, 5> kSceneFileSuffixes = {"_rgb.ppm", "_depth.pgm", "_labels.pgm", "_pos.pgm",
                                                              "_neg.pgm"};

struct ManifestEntry {
  std::string id;
  std::uint64_t seed = 0;
  std::vector<std::string> files;
};

inline std::string scene_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%04zu", i);
  return buf;
}

inline void save_scene(const std::filesystem::path& dir, const std::string& id, const LabeledScene& s) {
  std::filesystem::create_directories(dir);
  text::write_file((dir / (id + kSceneFileSuffixes[0])).string(), encode_ppm(s.rgb));
  text::write_file((dir / (id + kSceneFileSuffixes[1])).string(), encode_pgm16(s.depth));
  text::write_file((dir / (id + kSceneFileSuffixes[2])).string(), encode_pgm8(s.labels));
  text::write_file((dir / (id + kSceneFileSuffixes[3])).string(), encode_pgm8(s.positive));
  text::write_file((dir / (id + kSceneFileSuffixes[4])).string(), encode_pgm8(s.negative));
}

/// Rebuilds a scene from its rasters; the cloud is back-projected again.
inline LabeledScene load_scene(const std::filesystem::path& dir, const ManifestEntry& e, const Settings& settings) {
  if (e.files.size() != kSceneFileSuffixes.size())
    throw Error(ErrorCode::ParseError, "manifest entry " + e.id + " does not list 5 files");
  LabeledScene s;
  s.params = sample_scene_params(e.seed, settings);
  s.rgb = decode_ppm(text::read_file((dir / e.files[0]).string()));
  s.depth = decode_pgm16(text::read_file((dir / e.files[1]).string()));
  s.labels = decode_pgm8(text::read_file((dir / e.files[2]).string()));
  s.positive = decode_pgm8(text::read_file((dir / e.files[3]).string()));
  s.negative = decode_pgm8(text::read_file((dir / e.files[4]).string()));
  if (s.rgb.width != s.depth.width || s.rgb.height != s.depth.height || s.labels.width != s.rgb.width ||
      s.labels.height != s.rgb.height || s.positive.width != s.rgb.width || s.negative.width != s.rgb.width)
    throw Error(ErrorCode::ShapeError, "scene rasters of " + e.id + " are not registered");
  detail::build_cloud(s);
  return s;
}

inline std::string format_manifest(std::span<const ManifestEntry> entries) {
  std::string out;
  for (const auto& e : entries) {
    out += e.id + " " + std::to_string(e.seed);
    for (const auto& f : e.files) out += " " + f;
    out += "\n";
  }
  return out;
}

inline std::vector<ManifestEntry> parse_manifest(std::string_view data) {
  std::vector<ManifestEntry> out;
  for (auto line : text::lines(data)) {
    const auto tok = text::split(line);
    if (tok.empty() || tok[0].starts_with('#')) continue;
    if (tok.size() < 2) throw Error(ErrorCode::ParseError, "manifest line needs an id and a seed");
    ManifestEntry e{std::string(tok[0]), text::parse_int<std::uint64_t>(tok[1]), {}};
    for (std::size_t i = 2; i < tok.size(); ++i) e.files.emplace_back(tok[i]);
    out.push_back(std::move(e));
  }
  return out;
}

inline ManifestEntry manifest_entry(std::size_t i, std::uint64_t seed) {
  ManifestEntry e{scene_id(i), seed, {}};
  for (const auto& suffix : kSceneFileSuffixes) e.files.push_back(e.id + suffix);
  return e;
}

/// Benchmark manifest without touching the disk.
inline std::vector<ManifestEntry> benchmark_entries(std::size_t n_scenes, std::uint64_t master_seed) {
  if (n_scenes == 0) throw Error(ErrorCode::InvalidInput, "benchmark needs at least one scene");
  std::vector<ManifestEntry> out;
  for (std::size_t i = 0; i < n_scenes; ++i) out.push_back(manifest_entry(i, scene_seed(master_seed, i)));
  return out;
}

/// Writes n scenes and `manifest.txt` into dir; returns the entries.
inline std::vector<ManifestEntry> make_benchmark(std::size_t n_scenes, std::uint64_t master_seed,
                                                 const std::filesystem::path& dir, const Settings& settings = {}) {
  auto entries = benchmark_entries(n_scenes, master_seed);
  for (const auto& e : entries) save_scene(dir, e.id, generate(sample_scene_params(e.seed, settings)));
  text::write_file((dir / "manifest.txt").string(), format_manifest(entries));
  return entries;
}

/// Regenerates every manifest entry in memory and compares with the files on disk.
inline bool verify_benchmark(const std::filesystem::path& dir, std::span<const ManifestEntry> entries,
                             const Settings& settings = {}) {
  for (const auto& e : entries) {
    const auto s = generate(sample_scene_params(e.seed, settings));
    const std::array<std::string, 5> bytes = {encode_ppm(s.rgb), encode_pgm16(s.depth), encode_pgm8(s.labels),
                                              encode_pgm8(s.positive), encode_pgm8(s.negative)};
    for (std::size_t f = 0; f < bytes.size(); ++f)
      if (text::read_file((dir / e.files[f]).string()) != bytes[f]) return false;
  }
  return true;
}

}  // namespace peduncle
