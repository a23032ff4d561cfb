#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <vector>

#include "peduncle/cnn/network.hpp"
#include "peduncle/image.hpp"

namespace peduncle {

/// Per-pixel scores registered to an image. Only pixels with scored != 0
/// carry a classifier output.
struct ScoreMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> score;
  std::vector<std::uint8_t> scored;

  ScoreMap() = default;
  ScoreMap(std::size_t w, std::size_t h) : width(w), height(h), score(w * h, 0.0), scored(w * h, 0) {}

  void set(std::size_t x, std::size_t y, double s) {
    score[y * width + x] = s;
    scored[y * width + x] = 1;
  }
  bool is_scored(std::size_t x, std::size_t y) const { return scored[y * width + x] != 0; }
  double at(std::size_t x, std::size_t y) const { return score[y * width + x]; }
  std::size_t scored_count() const {
    std::size_t n = 0;
    for (auto s : scored) n += s != 0;
    return n;
  }
  friend bool operator==(const ScoreMap&, const ScoreMap&) = default;
};

namespace cnn {

/// Writes the patch centred on (cx, cy) into sample n of batch, scaled to
/// [-0.5, 0.5]. The caller guarantees the patch lies inside the image.
inline void extract_patch(const RgbImage& img, long cx, long cy, const NetworkSpec& spec, Tensor4& batch,
                          std::size_t n) {
  const long x0 = cx - static_cast<long>(spec.patch_w / 2);
  const long y0 = cy - static_cast<long>(spec.patch_h / 2);
  const std::size_t plane = spec.patch_h * spec.patch_w;
  double* dst = batch.sample(n);
  for (std::size_t y = 0; y < spec.patch_h; ++y)
    for (std::size_t x = 0; x < spec.patch_w; ++x) {
      const Rgb& p = img.at(static_cast<std::size_t>(x0) + x, static_cast<std::size_t>(y0) + y);
      const std::size_t o = y * spec.patch_w + x;
      dst[o] = p.r / 255.0 - 0.5;
      dst[plane + o] = p.g / 255.0 - 0.5;
      dst[2 * plane + o] = p.b / 255.0 - 0.5;
    }
}

inline bool patch_fits(const RgbImage& img, long cx, long cy, const NetworkSpec& spec) {
  const long x0 = cx - static_cast<long>(spec.patch_w / 2);
  const long y0 = cy - static_cast<long>(spec.patch_h / 2);
  return x0 >= 0 && y0 >= 0 && x0 + static_cast<long>(spec.patch_w) <= static_cast<long>(img.width) &&
         y0 + static_cast<long>(spec.patch_h) <= static_cast<long>(img.height);
}

/// Centres of the stride cells covering the region: x_min + stride/2 + i*stride.
inline std::vector<std::pair<long, long>> patch_centers(const Roi2& region, std::size_t stride) {
  std::vector<std::pair<long, long>> out;
  const long s = static_cast<long>(stride);
  for (long y = region.y_min + s / 2; y < region.y_max; y += s)
    for (long x = region.x_min + s / 2; x < region.x_max; x += s) out.emplace_back(x, y);
  return out;
}

/// Positive-class probability for a batch of patch centres (all must fit).
inline std::vector<double> score_patches(const RgbImage& img, std::span<const std::pair<long, long>> centers,
                                         const NetworkSpec& spec, const WeightStore& weights,
                                         std::size_t batch_size = 32) {
  if (spec.in_channels != 3) throw Error(ErrorCode::ShapeError, "patch scoring expects an RGB network");
  std::vector<double> out;
  out.reserve(centers.size());
  for (std::size_t start = 0; start < centers.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, centers.size() - start);
    Tensor4 batch(spec.input_shape(n));
    for (std::size_t i = 0; i < n; ++i)
      extract_patch(img, centers[start + i].first, centers[start + i].second, spec, batch, i);
    const auto prob = softmax(forward(spec, weights, batch));
    const std::size_t k = prob.size() / n;
    for (std::size_t i = 0; i < n; ++i) out.push_back(prob[i * k + 1]);
  }
  return out;
}

/// Strided per-pixel scoring inside `region` (the whole image by default).
/// Centres whose patch would leave the image are scored 0.
inline ScoreMap score_map(const RgbImage& img, const NetworkSpec& spec, const WeightStore& weights, std::size_t stride,
                          std::optional<Roi2> region = std::nullopt) {
  if (stride == 0) throw Error(ErrorCode::InvalidInput, "stride must be at least 1");
  if (img.width < spec.patch_w || img.height < spec.patch_h)
    throw Error(ErrorCode::InputTooSmall, "image smaller than the network patch");
  const Roi2 roi = region.value_or(full_roi(img));
  ScoreMap map(img.width, img.height);
  std::vector<std::pair<long, long>> valid;
  for (const auto& [x, y] : patch_centers(roi, stride)) {
    if (!img.contains(x, y)) continue;
    if (patch_fits(img, x, y, spec)) valid.emplace_back(x, y);
    else map.set(static_cast<std::size_t>(x), static_cast<std::size_t>(y), 0.0);
  }
  const auto scores = score_patches(img, valid, spec, weights);
  for (std::size_t i = 0; i < valid.size(); ++i)
    map.set(static_cast<std::size_t>(valid[i].first), static_cast<std::size_t>(valid[i].second), scores[i]);
  return map;
}

}  // namespace cnn
}  // namespace peduncle
