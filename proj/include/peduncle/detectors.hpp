#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "peduncle/cnn/network.hpp"
#include "peduncle/cnn/score_map.hpp"
#include "peduncle/config.hpp"
#include "peduncle/features.hpp"
#include "peduncle/naive_bayes.hpp"
#include "peduncle/pipeline.hpp"
#include "peduncle/scenegen.hpp"
#include "peduncle/svm.hpp"

namespace peduncle {

enum class DetectorKind { PfhSvm, Cnn };

inline std::string_view to_string(DetectorKind k) { return k == DetectorKind::PfhSvm ? "pfh-svm" : "cnn"; }

inline DetectorKind parse_detector(std::string_view s) {
  if (s == "pfh-svm") return DetectorKind::PfhSvm;
  if (s == "cnn") return DetectorKind::Cnn;
  throw Error(ErrorCode::InvalidInput, "detector must be pfh-svm or cnn");
}

struct CnnModel {
  cnn::NetworkSpec spec;
  cnn::WeightStore weights;
};

struct Models {
  NaiveBayesHsv nb;
  std::optional<SvmModel> svm;
  std::optional<CnnModel> cnn;
};

inline void save_models(const std::filesystem::path& dir, const Models& m) {
  std::filesystem::create_directories(dir);
  text::write_file((dir / "nb.model").string(), format_naive_bayes(m.nb));
  if (m.svm) text::write_file((dir / "svm.model").string(), format_svm(*m.svm));
  if (m.cnn) {
    text::write_file((dir / "cnn.net").string(), cnn::format_network_spec(m.cnn->spec));
    text::write_file((dir / "cnn.weights").string(), cnn::serialize_weights(m.cnn->spec, m.cnn->weights));
  }
}

/// Loads whatever models the directory holds; nb.model is required.
inline Models load_models(const std::filesystem::path& dir) {
  Models m;
  m.nb = parse_naive_bayes(text::read_file((dir / "nb.model").string()));
  if (std::filesystem::exists(dir / "svm.model")) m.svm = parse_svm(text::read_file((dir / "svm.model").string()));
  if (std::filesystem::exists(dir / "cnn.net")) {
    CnnModel c;
    c.spec = cnn::parse_network_spec(text::read_file((dir / "cnn.net").string()));
    c.weights = cnn::deserialize_weights(c.spec, text::read_file((dir / "cnn.weights").string()));
    m.cnn = std::move(c);
  }
  return m;
}

inline FeatureParams feature_params(const Settings& s) { return {s.normal_k, s.fpfh_k, {}}; }

inline double squash_margin(double margin) { return 1.0 / (1.0 + std::exp(-margin)); }

// ---------------------------------------------------------------------------
// PFH-SVM candidates

/// Strided ROI pixels with valid depth, as a small cloud for descriptor work.
inline FrameCloud roi_grid_cloud(const RgbImage& rgb, const DepthImage& depth, const CameraIntrinsics& intr,
                                 const Roi2& roi, std::size_t stride) {
  FrameCloud out;
  for (const auto& [x, y] : cnn::patch_centers(roi, stride)) {
    if (!depth.contains(x, y)) continue;
    const auto u = static_cast<std::size_t>(x), v = static_cast<std::size_t>(y);
    const std::uint16_t d = depth.at(u, v);
    if (d == 0) continue;
    out.cloud.push_back(intr.back_project_raw(static_cast<double>(u), static_cast<double>(v), d), rgb.at(u, v));
    out.pixels.push_back(static_cast<std::uint32_t>(v * depth.width + u));
  }
  return out;
}

/// SVM margin squashed to [0, 1] on every strided ROI pixel with depth;
/// pixels whose descriptor is degenerate score 0.
inline ScoreMap score_pfh_svm(const RgbImage& rgb, const DepthImage& depth, const CameraIntrinsics& intr,
                              const Roi2& roi, const SvmModel& svm, const FeatureParams& fp, std::size_t stride) {
  ScoreMap map(rgb.width, rgb.height);
  const auto grid = roi_grid_cloud(rgb, depth, intr, roi, stride);
  if (grid.cloud.empty()) return map;
  const auto feats = compute_features(grid.cloud, fp);
  std::vector<FeatureVector36> valid;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    if (feats[i]) {
      valid.push_back(*feats[i]);
      where.push_back(i);
    } else {
      map.score[grid.pixels[i]] = 0.0;
      map.scored[grid.pixels[i]] = 1;
    }
  }
  const auto margins = svm_score(svm, valid);
  for (std::size_t j = 0; j < where.size(); ++j) {
    map.score[grid.pixels[where[j]]] = squash_margin(margins[j]);
    map.scored[grid.pixels[where[j]]] = 1;
  }
  return map;
}

// ---------------------------------------------------------------------------
// Frame analysis: pepper, ROI, scores, projection

struct FrameAnalysis {
  PepperDetection pepper;  // indices into the frame cloud
  Roi2 pepper_box;
  Roi2 roi;
  ScoreMap scores;
  ScoredCloud scored;
};

inline ClusterParams pepper_cluster_params(const Settings& s) {
  return {s.pepper_cluster_tol, s.pepper_min_cluster, s.pepper_max_cluster};
}

inline ScoreMap score_roi(const RgbImage& rgb, const DepthImage& depth, const Roi2& roi, const Models& models,
                          DetectorKind kind, const Settings& s) {
  if (kind == DetectorKind::PfhSvm) {
    if (!models.svm) throw Error(ErrorCode::InvalidInput, "no SVM model loaded");
    return score_pfh_svm(rgb, depth, s.intrinsics, roi, *models.svm, feature_params(s), s.pfh_stride);
  }
  if (!models.cnn) throw Error(ErrorCode::InvalidInput, "no CNN model loaded");
  return cnn::score_map(rgb, models.cnn->spec, models.cnn->weights, s.cnn_stride, roi);
}

/// Everything up to and including projection. Throws NoPepperFound,
/// RoiOutOfImage or EmptyProjection.
inline FrameAnalysis analyze_frame(const RgbImage& rgb, const DepthImage& depth, const Models& models,
                                   DetectorKind kind, const Settings& s) {
  const auto fc = frame_cloud(rgb, depth, s.intrinsics);
  FrameAnalysis a;
  a.pepper = detect_pepper(fc.cloud, models.nb, s.pepper_posterior_threshold, pepper_cluster_params(s));
  a.pepper_box = pixel_box(fc.pixels, a.pepper.indices, rgb.width);
  a.roi = compute_roi(a.pepper_box, rgb.width, rgb.height);
  a.scores = score_roi(rgb, depth, a.roi, models, kind, s);
  a.scored = project_to_3d(a.scores, rgb, depth, s.intrinsics);
  return a;
}

// ---------------------------------------------------------------------------
// Training data

/// ROI derived from the ground-truth pepper pixels rather than the detector,
/// so training data does not depend on a colour model.
inline Roi2 ground_truth_roi(const LabeledScene& scene) {
  std::vector<std::uint32_t> pepper;
  for (std::size_t i = 0; i < scene.labels.pixels.size(); ++i)
    if (scene.labels.pixels[i] == static_cast<std::uint8_t>(Label::Pepper)) pepper.push_back(static_cast<std::uint32_t>(i));
  if (pepper.empty()) throw Error(ErrorCode::NoPepperFound, "scene has no pepper pixels");
  return compute_roi(pixel_box(pepper, all_indices(pepper.size()), scene.rgb.width), scene.rgb.width,
                     scene.rgb.height);
}

/// Up to `quota` items drawn without replacement, in ascending index order.
template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> items, std::size_t quota, Rng& rng) {
  if (items.size() <= quota) return items;
  for (std::size_t i = 0; i < quota; ++i) std::swap(items[i], items[i + rng.below(items.size() - i)]);
  items.resize(quota);
  std::sort(items.begin(), items.end());
  return items;
}

inline std::size_t per_scene_quota(std::size_t total, std::size_t scenes) {
  return scenes == 0 ? 0 : (total + scenes - 1) / scenes;
}

/// Pepper versus everything else, balanced per scene.
inline NaiveBayesHsv train_naive_bayes(std::span<const LabeledScene> scenes, std::size_t samples_per_class,
                                       std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t quota = per_scene_quota(samples_per_class, scenes.size());
  std::vector<HsvColor> pepper, other;
  for (const auto& s : scenes) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < s.labels.pixels.size(); ++i) {
      if (s.depth.pixels[i] == 0) continue;
      (s.labels.pixels[i] == static_cast<std::uint8_t>(Label::Pepper) ? pos : neg).push_back(i);
    }
    for (auto i : sample_without_replacement(pos, quota, rng)) pepper.push_back(rgb_to_hsv(s.rgb.pixels[i]));
    for (auto i : sample_without_replacement(neg, quota, rng)) other.push_back(rgb_to_hsv(s.rgb.pixels[i]));
  }
  return nb_fit(pepper, other);
}

inline bool is_greenish(Rgb c) {
  const HsvColor h = rgb_to_hsv(c);
  return h.s > 0.25 && h.h >= 60.0 && h.h <= 180.0;
}

/// Labeled descriptors of strided ROI pixels: positives from the peduncle
/// mask, negatives from the negative mask (half of them green when possible).
inline std::vector<LabeledFeature> extract_training_features(std::span<const LabeledScene> scenes,
                                                             const Settings& s, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t quota = per_scene_quota(s.svm_samples_per_class, scenes.size());
  std::vector<LabeledFeature> out;
  for (const auto& scene : scenes) {
    const Roi2 roi = ground_truth_roi(scene);
    const auto grid = roi_grid_cloud(scene.rgb, scene.depth, s.intrinsics, roi, s.pfh_stride);
    if (grid.cloud.size() < std::max(s.normal_k, s.fpfh_k)) continue;
    const auto feats = compute_features(grid.cloud, feature_params(s));
    std::vector<std::size_t> pos, neg_green, neg_other;
    for (std::size_t i = 0; i < feats.size(); ++i) {
      if (!feats[i]) continue;
      if (scene.positive.pixels[grid.pixels[i]]) pos.push_back(i);
      else if (scene.negative.pixels[grid.pixels[i]]) (is_greenish(grid.cloud.colors[i]) ? neg_green : neg_other).push_back(i);
    }
    auto green = sample_without_replacement(neg_green, quota / 2, rng);
    auto rest = sample_without_replacement(neg_other, quota - green.size(), rng);
    for (std::size_t i : sample_without_replacement(pos, quota, rng)) out.push_back({*feats[i], 1});
    for (std::size_t i : green) out.push_back({*feats[i], -1});
    for (std::size_t i : rest) out.push_back({*feats[i], -1});
  }
  return out;
}

inline SvmParams svm_params(const Settings& s, std::uint64_t seed) {
  SvmParams p;
  p.kernel = parse_kernel(s.svm_kernel);
  p.c = s.svm_c;
  p.gamma = s.svm_gamma;
  p.tol = s.svm_tol;
  p.seed = seed;
  return p;
}

inline SvmModel train_svm(std::span<const LabeledFeature> rows, const Settings& s, std::uint64_t seed) {
  std::vector<FeatureVector36> x;
  std::vector<int> y;
  for (const auto& r : rows) {
    x.push_back(r.values);
    y.push_back(r.label > 0 ? 1 : -1);
  }
  return svm_train(x, y, svm_params(s, seed)).model;
}

/// Patch centre with its class (1 peduncle, 0 other) in one scene.
struct PatchSample {
  std::size_t scene = 0;
  long x = 0, y = 0;
  int label = 0;
  friend auto operator<=>(const PatchSample&, const PatchSample&) = default;
};

inline std::vector<PatchSample> sample_patches(std::span<const LabeledScene> scenes, const cnn::NetworkSpec& spec,
                                               std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PatchSample> out;
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const auto& scene = scenes[si];
    const Roi2 roi = ground_truth_roi(scene);
    std::vector<PatchSample> pos, neg_green, neg_other;
    for (long y = roi.y_min; y < roi.y_max; ++y)
      for (long x = roi.x_min; x < roi.x_max; ++x) {
        if (!cnn::patch_fits(scene.rgb, x, y, spec)) continue;
        const auto u = static_cast<std::size_t>(x), v = static_cast<std::size_t>(y);
        if (scene.positive.at(u, v)) pos.push_back({si, x, y, 1});
        else if (scene.negative.at(u, v)) (is_greenish(scene.rgb.at(u, v)) ? neg_green : neg_other).push_back({si, x, y, 0});
      }
    auto green = sample_without_replacement(neg_green, per_class / 2, rng);
    auto rest = sample_without_replacement(neg_other, per_class - green.size(), rng);
    for (auto& p : sample_without_replacement(pos, per_class, rng)) out.push_back(p);
    out.insert(out.end(), green.begin(), green.end());
    out.insert(out.end(), rest.begin(), rest.end());
  }
  return out;
}

struct CnnTrainReport {
  std::vector<double> epoch_loss;
};

/// Minibatch SGD with momentum over patches cut from the scenes.
inline CnnModel train_cnn(std::span<const LabeledScene> scenes, const cnn::NetworkSpec& spec, const Settings& s,
                          std::uint64_t seed, CnnTrainReport* report = nullptr) {
  cnn::validate_chain(spec);
  CnnModel model{spec, cnn::WeightStore::initialize(spec, seed)};
  auto samples = sample_patches(scenes, spec, s.cnn_patches_per_class, splitmix64(seed));
  if (samples.empty()) throw Error(ErrorCode::DegenerateTraining, "no training patches");
  Rng rng(splitmix64(seed + 1));
  cnn::SgdState sgd{s.cnn_momentum, {}};
  for (std::size_t epoch = 0; epoch < s.cnn_epochs; ++epoch) {
    for (std::size_t i = samples.size(); i > 1; --i) std::swap(samples[i - 1], samples[rng.below(i)]);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < samples.size(); start += s.cnn_batch) {
      const std::size_t n = std::min(s.cnn_batch, samples.size() - start);
      cnn::Tensor4 batch(spec.input_shape(n));
      std::vector<int> labels(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& p = samples[start + i];
        cnn::extract_patch(scenes[p.scene].rgb, p.x, p.y, spec, batch, i);
        labels[i] = p.label;
      }
      loss_sum += cnn::backward_and_step(spec, model.weights, batch, labels, s.cnn_lr, &sgd);
      ++batches;
    }
    if (report) report->epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  return model;
}

}  // namespace peduncle
