#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "peduncle/camera.hpp"
#include "peduncle/clustering.hpp"
#include "peduncle/cnn/score_map.hpp"
#include "peduncle/config.hpp"
#include "peduncle/image.hpp"
#include "peduncle/naive_bayes.hpp"
#include "peduncle/point_cloud.hpp"

namespace peduncle {

/// World vertical expressed as a signed camera axis.
struct UpAxis {
  int axis = 1;
  double sign = -1.0;

  Vec3 vector() const {
    Vec3 v;
    v[axis] = sign;
    return v;
  }
  double height(const Point3& p) const { return sign * p[axis]; }
};

inline UpAxis parse_up_axis(std::string_view s) {
  if (s.size() != 2 || (s[0] != '+' && s[0] != '-') || s[1] < 'x' || s[1] > 'z')
    throw Error(ErrorCode::InvalidInput, "up axis must be one of +x -x +y -y +z -z");
  return {s[1] - 'x', s[0] == '+' ? 1.0 : -1.0};
}

struct PeduncleBoxParams {
  double h_offset = 0.05;
  UpAxis up{};
  bool symmetric = true;  // false: [max_h, max_h + h_offset]
};

struct FilterParams {
  double score_threshold = 0.5;
  double pepper_posterior_threshold = 0.5;
  double cluster_tol = 0.003;
  std::size_t min_cluster = 5;
  std::size_t max_cluster = 25000;

  ClusterParams cluster() const { return {cluster_tol, min_cluster, max_cluster}; }
};

struct CuttingPose {
  Point3 position;
  Vec3 approach_axis{0.0, 0.0, 1.0};
};

inline FilterParams filter_params(const Settings& s) {
  return {s.score_threshold, s.pepper_posterior_threshold, s.cluster_tol, s.min_cluster, s.max_cluster};
}

inline PeduncleBoxParams box_params(const Settings& s) {
  return {s.h_offset, parse_up_axis(s.up_axis), s.vertical_span == "symmetric"};
}

// ---------------------------------------------------------------------------
// RGB-D frame to cloud

/// Cloud back-projected from every valid depth pixel in row-major order;
/// pixels[i] = v * width + u for point i.
struct FrameCloud {
  PointCloud cloud;
  std::vector<std::uint32_t> pixels;
};

inline FrameCloud frame_cloud(const RgbImage& rgb, const DepthImage& depth, const CameraIntrinsics& intr) {
  if (rgb.width != depth.width || rgb.height != depth.height)
    throw Error(ErrorCode::ShapeError, "RGB and depth rasters differ in size");
  intr.validate();
  FrameCloud out;
  for (std::size_t v = 0; v < depth.height; ++v)
    for (std::size_t u = 0; u < depth.width; ++u) {
      const std::uint16_t d = depth.at(u, v);
      if (d == 0) continue;
      out.cloud.push_back(intr.back_project_raw(static_cast<double>(u), static_cast<double>(v), d), rgb.at(u, v));
      out.pixels.push_back(static_cast<std::uint32_t>(v * depth.width + u));
    }
  return out;
}

// ---------------------------------------------------------------------------
// Pepper detection and ROI

struct PepperDetection {
  IndexList indices;
  BoundingBox3 box;
};

/// Points whose pepper posterior reaches the threshold, reduced to the
/// largest Euclidean cluster.
inline PepperDetection detect_pepper(const PointCloud& cloud, const NaiveBayesHsv& nb, double posterior_threshold,
                                     const ClusterParams& params) {
  IndexList candidates;
  for (Index i = 0; i < cloud.size(); ++i)
    if (nb_posterior(nb, cloud.colors[i]) >= posterior_threshold) candidates.push_back(i);
  if (candidates.empty()) throw Error(ErrorCode::NoPepperFound, "no point reaches the pepper posterior threshold");
  auto clusters = euclidean_cluster(cloud, candidates, params);
  if (clusters.empty()) throw Error(ErrorCode::NoPepperFound, "no pepper cluster within the size limits");
  PepperDetection out;
  out.indices = std::move(clusters.front().indices);
  out.box = compute_bbox(cloud, out.indices);
  return out;
}

/// Tight half-open pixel box around the listed pixel ids.
inline Roi2 pixel_box(std::span<const std::uint32_t> pixel_ids, std::span<const Index> subset, std::size_t width) {
  if (subset.empty()) throw Error(ErrorCode::EmptyInput, "pixel box of empty subset");
  Roi2 box{std::numeric_limits<long>::max(), std::numeric_limits<long>::max(), std::numeric_limits<long>::min(),
           std::numeric_limits<long>::min()};
  for (Index i : subset) {
    const long x = static_cast<long>(pixel_ids[i] % width);
    const long y = static_cast<long>(pixel_ids[i] / width);
    box.x_min = std::min(box.x_min, x);
    box.y_min = std::min(box.y_min, y);
    box.x_max = std::max(box.x_max, x + 1);
    box.y_max = std::max(box.y_max, y + 1);
  }
  return box;
}

/// Same size as the pepper box, moved up (towards smaller y) by half its
/// height, then clipped to the image.
inline Roi2 compute_roi(const Roi2& pepper_box, std::size_t width, std::size_t height) {
  if (pepper_box.empty()) throw Error(ErrorCode::InvalidInput, "pepper box is empty");
  const long shift = pepper_box.height() / 2;
  Roi2 roi{pepper_box.x_min, pepper_box.y_min - shift, pepper_box.x_max, pepper_box.y_max - shift};
  roi.x_min = std::max(roi.x_min, 0L);
  roi.y_min = std::max(roi.y_min, 0L);
  roi.x_max = std::min(roi.x_max, static_cast<long>(width));
  roi.y_max = std::min(roi.y_max, static_cast<long>(height));
  if (roi.empty()) throw Error(ErrorCode::RoiOutOfImage, "region of interest lies outside the image");
  return roi;
}

// ---------------------------------------------------------------------------
// Projection

struct ScoredCloud {
  PointCloud cloud;
  std::vector<double> scores;
  std::vector<std::uint32_t> pixels;  // v * width + u
};

/// Scored pixels with valid depth, lifted to 3D in row-major pixel order.
inline ScoredCloud project_to_3d(const ScoreMap& map, const RgbImage& rgb, const DepthImage& depth,
                                 const CameraIntrinsics& intr) {
  if (map.width != depth.width || map.height != depth.height || rgb.width != depth.width ||
      rgb.height != depth.height)
    throw Error(ErrorCode::ShapeError, "score map, RGB and depth must be registered");
  intr.validate();
  ScoredCloud out;
  for (std::size_t v = 0; v < map.height; ++v)
    for (std::size_t u = 0; u < map.width; ++u) {
      if (!map.is_scored(u, v)) continue;
      const std::uint16_t d = depth.at(u, v);
      if (d == 0) continue;
      out.cloud.push_back(intr.back_project_raw(static_cast<double>(u), static_cast<double>(v), d), rgb.at(u, v));
      out.scores.push_back(map.at(u, v));
      out.pixels.push_back(static_cast<std::uint32_t>(v * map.width + u));
    }
  if (out.cloud.empty()) throw Error(ErrorCode::EmptyProjection, "no scored pixel has valid depth");
  return out;
}

// ---------------------------------------------------------------------------
// Peduncle box and cutting pose

inline BoundingBox3 peduncle_bbox3(const BoundingBox3& pepper, const PeduncleBoxParams& params) {
  if (!(params.h_offset > 0.0)) throw Error(ErrorCode::InvalidInput, "h_offset must be positive");
  const int up = params.up.axis;
  const int a = (up + 1) % 3;
  const int b = (up + 2) % 3;
  const Vec3 ext = pepper.extent();
  const Point3 c = pepper.center();
  const double side = std::max(ext[a], ext[b]);

  BoundingBox3 box;
  box.min[a] = c[a] - side / 2.0;
  box.max[a] = c[a] + side / 2.0;
  box.min[b] = c[b] - side / 2.0;
  box.max[b] = c[b] + side / 2.0;

  const double max_h = params.up.sign > 0 ? pepper.max[up] : -pepper.min[up];
  const double lo_h = params.symmetric ? max_h - params.h_offset : max_h;
  const double hi_h = max_h + params.h_offset;
  if (params.up.sign > 0) {
    box.min[up] = lo_h;
    box.max[up] = hi_h;
  } else {
    box.min[up] = -hi_h;
    box.max[up] = -lo_h;
  }
  return box;
}

/// Centroid of the cluster with an approach direction along the horizontal
/// part of the camera-to-centroid ray. Falls back to the camera forward axis
/// when that part vanishes (centroid straight above or below the camera).
inline CuttingPose cutting_pose(const PointCloud& cloud, std::span<const Index> cluster, const UpAxis& up = {}) {
  CuttingPose pose;
  pose.position = centroid(cloud, cluster);
  const Vec3 u = up.vector();
  const Vec3 horizontal = pose.position - u * dot(pose.position, u);
  const double scale = norm(pose.position);
  if (norm(horizontal) <= 1e-9 * scale || scale == 0.0) pose.approach_axis = {0.0, 0.0, 1.0};
  else pose.approach_axis = normalized(horizontal);
  return pose;
}

// ---------------------------------------------------------------------------
// Five-step filter

inline constexpr std::array<std::string_view, 6> kFilterStepNames = {
    "input", "score_threshold", "projection", "pepper_removal", "peduncle_box", "largest_cluster"};

/// survivors[0] is the input size, survivors[s] the count after step s.
struct FilterDiagnostics {
  std::array<std::size_t, 6> survivors{};
};

inline std::string format_diagnostics(const FilterDiagnostics& d) {
  std::string out = "step,name,survivors\n";
  for (std::size_t s = 0; s < d.survivors.size(); ++s)
    out += std::to_string(s) + "," + std::string(kFilterStepNames[s]) + "," + std::to_string(d.survivors[s]) + "\n";
  return out;
}

/// Result of a filter run; cluster is absent when nothing survives step 5.
struct FilterOutcome {
  std::optional<Cluster> cluster;
  FilterDiagnostics diagnostics;
};

/// Per-point quantities that do not depend on the score threshold, so a
/// threshold sweep can reuse them.
struct FilterContext {
  const ScoredCloud* scored = nullptr;
  BoundingBox3 box;
  std::vector<double> posterior;
  std::vector<char> in_box;
};

inline FilterContext make_filter_context(const ScoredCloud& scored, const BoundingBox3& pepper_box,
                                         const NaiveBayesHsv& nb, const PeduncleBoxParams& bp) {
  FilterContext ctx;
  ctx.scored = &scored;
  ctx.box = peduncle_bbox3(pepper_box, bp);
  ctx.posterior.resize(scored.cloud.size());
  ctx.in_box.resize(scored.cloud.size());
  for (std::size_t i = 0; i < scored.cloud.size(); ++i) {
    ctx.posterior[i] = nb_posterior(nb, scored.cloud.colors[i]);
    ctx.in_box[i] = ctx.box.contains(scored.cloud.points[i]) ? 1 : 0;
  }
  return ctx;
}

namespace detail {

/// Steps 3 to 5 on the points that passed steps 1 and 2.
inline void filter_tail(const FilterContext& ctx, IndexList kept, const FilterParams& fp, FilterOutcome& out) {
  std::erase_if(kept, [&](Index i) { return ctx.posterior[i] >= fp.pepper_posterior_threshold; });
  out.diagnostics.survivors[3] = kept.size();
  std::erase_if(kept, [&](Index i) { return !ctx.in_box[i]; });
  out.diagnostics.survivors[4] = kept.size();
  auto clusters = euclidean_cluster(ctx.scored->cloud, kept, fp.cluster());
  if (!clusters.empty()) {
    out.cluster = std::move(clusters.front());
    out.diagnostics.survivors[5] = out.cluster->size();
  }
}

}  // namespace detail

/// Steps 1 to 5 on an already projected cloud; step 2 passes everything.
inline FilterOutcome run_filter(const FilterContext& ctx, const FilterParams& fp) {
  const ScoredCloud& sc = *ctx.scored;
  FilterOutcome out;
  out.diagnostics.survivors[0] = sc.cloud.size();
  IndexList kept;
  for (Index i = 0; i < sc.cloud.size(); ++i)
    if (sc.scores[i] >= fp.score_threshold) kept.push_back(i);
  out.diagnostics.survivors[1] = kept.size();
  out.diagnostics.survivors[2] = kept.size();
  detail::filter_tail(ctx, std::move(kept), fp, out);
  return out;
}

/// Largest peduncle cluster of a scored cloud; NoPeduncleFound when none survives.
inline Cluster filter_detections(const ScoredCloud& scored, const BoundingBox3& pepper_box, const NaiveBayesHsv& nb,
                                 const FilterParams& fp, const PeduncleBoxParams& bp = {},
                                 FilterDiagnostics* diagnostics = nullptr) {
  if (scored.cloud.empty()) throw Error(ErrorCode::EmptyInput, "filtering an empty cloud");
  const auto ctx = make_filter_context(scored, pepper_box, nb, bp);
  auto out = run_filter(ctx, fp);
  if (diagnostics) *diagnostics = out.diagnostics;
  if (!out.cluster) throw Error(ErrorCode::NoPeduncleFound, "no peduncle cluster survives filtering");
  return std::move(*out.cluster);
}

inline Cluster filter_detections(const ScoredCloud& scored, const PointCloud& pepper_cloud, const NaiveBayesHsv& nb,
                                 const FilterParams& fp, const PeduncleBoxParams& bp = {},
                                 FilterDiagnostics* diagnostics = nullptr) {
  return filter_detections(scored, compute_bbox(pepper_cloud, all_indices(pepper_cloud.size())), nb, fp, bp,
                           diagnostics);
}

/// Full filter from a pixel score map: thresholding happens on pixels, so
/// step 2 (projection) drops thresholded pixels without valid depth.
/// The returned cloud holds the projected step-1 survivors.
struct FrameFilterResult {
  ScoredCloud projected;
  FilterOutcome outcome;
};

inline FrameFilterResult filter_frame(const ScoreMap& map, const RgbImage& rgb, const DepthImage& depth,
                                      const CameraIntrinsics& intr, const BoundingBox3& pepper_box,
                                      const NaiveBayesHsv& nb, const FilterParams& fp,
                                      const PeduncleBoxParams& bp = {}) {
  ScoreMap passed(map.width, map.height);
  std::size_t input = 0, step1 = 0;
  for (std::size_t i = 0; i < map.score.size(); ++i) {
    if (!map.scored[i]) continue;
    ++input;
    if (map.score[i] >= fp.score_threshold) {
      passed.score[i] = map.score[i];
      passed.scored[i] = 1;
      ++step1;
    }
  }
  FrameFilterResult res;
  res.outcome.diagnostics.survivors[0] = input;
  res.outcome.diagnostics.survivors[1] = step1;
  try {
    res.projected = project_to_3d(passed, rgb, depth, intr);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyProjection) throw;
    return res;
  }
  res.outcome.diagnostics.survivors[2] = res.projected.cloud.size();
  const auto ctx = make_filter_context(res.projected, pepper_box, nb, bp);
  detail::filter_tail(ctx, all_indices(res.projected.cloud.size()), fp, res.outcome);
  return res;
}

}  // namespace peduncle
