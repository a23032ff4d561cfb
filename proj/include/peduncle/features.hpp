#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "peduncle/fpfh.hpp"
#include "peduncle/hsv.hpp"
#include "peduncle/normals.hpp"

namespace peduncle {

inline constexpr std::size_t kFeatureSize = 3 + kFpfhSize;

/// [h/360, s, v, fpfh_0 .. fpfh_32]
using FeatureVector36 = std::array<double, kFeatureSize>;

inline FeatureVector36 assemble_feature(const HsvColor& hsv, const std::optional<Fpfh33>& fpfh) {
  if (!fpfh) throw Error(ErrorCode::InvalidDescriptor, "point has no valid FPFH");
  FeatureVector36 f{};
  f[0] = hsv.h / 360.0;
  f[1] = hsv.s;
  f[2] = hsv.v;
  std::copy(fpfh->begin(), fpfh->end(), f.begin() + 3);
  return f;
}

struct FeatureParams {
  std::size_t normal_k = 30;
  std::size_t fpfh_k = 30;
  Point3 viewpoint{};
};

/// Colour + geometry descriptor for every point; nullopt where the normal or
/// histogram is degenerate.
inline std::vector<std::optional<FeatureVector36>> compute_features(const PointCloud& cloud,
                                                                    const FeatureParams& params) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyInput, "feature extraction on empty cloud");
  const SpatialIndex index(cloud);
  const auto normals = estimate_normals(cloud, index, params.normal_k, params.viewpoint);
  const auto hist = fpfh(cloud, normals, index, params.fpfh_k);
  std::vector<std::optional<FeatureVector36>> out(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (hist[i]) out[i] = assemble_feature(rgb_to_hsv(cloud.colors[i]), hist[i]);
  return out;
}

// `features v1 <count> 36` then 36 values and an integer label per line.

struct LabeledFeature {
  FeatureVector36 values{};
  int label = 0;
};

inline std::string format_features(std::span<const LabeledFeature> rows) {
  std::string out = "features v1 " + std::to_string(rows.size()) + " 36\n";
  for (const auto& row : rows) {
    for (double v : row.values) {
      out += text::format_double(v);
      out += ' ';
    }
    out += std::to_string(row.label);
    out += '\n';
  }
  return out;
}

inline std::vector<LabeledFeature> parse_features(std::string_view data) {
  const auto rows = text::lines(data);
  if (rows.empty()) throw Error(ErrorCode::ParseError, "empty feature file");
  const auto header = text::split(rows[0]);
  if (header.size() != 4 || header[0] != "features" || header[1] != "v1" || header[3] != "36")
    throw Error(ErrorCode::ParseError, "bad features header");
  const auto count = text::parse_int<std::size_t>(header[2]);
  if (rows.size() != count + 1) throw Error(ErrorCode::ParseError, "feature count mismatch");
  std::vector<LabeledFeature> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto tok = text::split(rows[i + 1]);
    if (tok.size() != kFeatureSize + 1) throw Error(ErrorCode::ParseError, "bad feature line");
    for (std::size_t d = 0; d < kFeatureSize; ++d) out[i].values[d] = text::parse_double(tok[d]);
    out[i].label = text::parse_int<int>(tok[kFeatureSize]);
  }
  return out;
}

}  // namespace peduncle
