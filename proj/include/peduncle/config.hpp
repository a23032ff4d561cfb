#pragma once

#include <functional>
#include <map>
#include <string>
#include <string_view>

#include "peduncle/camera.hpp"
#include "peduncle/error.hpp"
#include "peduncle/text_io.hpp"

namespace peduncle {

/// Every tunable number of the library and CLI. Parsed from a flat
/// `key = value` file; unspecified keys keep these defaults.
struct Settings {
  // camera
  CameraIntrinsics intrinsics{};
  std::size_t width = 640;
  std::size_t height = 480;
  std::string up_axis = "-y";

  // pepper detection and filtering
  double pepper_posterior_threshold = 0.5;
  double pepper_cluster_tol = 0.003;
  std::size_t pepper_min_cluster = 50;
  std::size_t pepper_max_cluster = 1000000;
  double score_threshold = 0.5;
  double cluster_tol = 0.003;
  std::size_t min_cluster = 5;
  std::size_t max_cluster = 25000;
  double h_offset = 0.05;
  std::string vertical_span = "symmetric";

  // detectors
  std::size_t normal_k = 30;
  std::size_t fpfh_k = 30;
  std::size_t pfh_stride = 2;
  std::size_t cnn_stride = 4;
  std::string svm_kernel = "rbf";
  double svm_c = 1.0;
  double svm_gamma = 1.0 / 36.0;
  double svm_tol = 1e-3;
  std::size_t svm_samples_per_class = 1000;
  std::size_t nb_samples_per_class = 4000;
  std::size_t cnn_patches_per_class = 40;  // per scene
  std::size_t cnn_epochs = 8;
  std::size_t cnn_batch = 32;
  double cnn_lr = 0.01;
  double cnn_momentum = 0.9;

  // evaluation and scenes
  std::size_t eval_thresholds = 101;
  std::size_t throughput_runs = 5;
  double noise_sigma = 0.0005;
};

namespace detail {

template <typename F>
void visit_settings(Settings& s, F&& f) {
  f("fx", s.intrinsics.fx);
  f("fy", s.intrinsics.fy);
  f("cx", s.intrinsics.cx);
  f("cy", s.intrinsics.cy);
  f("depth_scale", s.intrinsics.depth_scale);
  f("width", s.width);
  f("height", s.height);
  f("up_axis", s.up_axis);
  f("pepper_posterior_threshold", s.pepper_posterior_threshold);
  f("pepper_cluster_tol", s.pepper_cluster_tol);
  f("pepper_min_cluster", s.pepper_min_cluster);
  f("pepper_max_cluster", s.pepper_max_cluster);
  f("score_threshold", s.score_threshold);
  f("cluster_tol", s.cluster_tol);
  f("min_cluster", s.min_cluster);
  f("max_cluster", s.max_cluster);
  f("h_offset", s.h_offset);
  f("vertical_span", s.vertical_span);
  f("normal_k", s.normal_k);
  f("fpfh_k", s.fpfh_k);
  f("pfh_stride", s.pfh_stride);
  f("cnn_stride", s.cnn_stride);
  f("svm_kernel", s.svm_kernel);
  f("svm_c", s.svm_c);
  f("svm_gamma", s.svm_gamma);
  f("svm_tol", s.svm_tol);
  f("svm_samples_per_class", s.svm_samples_per_class);
  f("nb_samples_per_class", s.nb_samples_per_class);
  f("cnn_patches_per_class", s.cnn_patches_per_class);
  f("cnn_epochs", s.cnn_epochs);
  f("cnn_batch", s.cnn_batch);
  f("cnn_lr", s.cnn_lr);
  f("cnn_momentum", s.cnn_momentum);
  f("eval_thresholds", s.eval_thresholds);
  f("throughput_runs", s.throughput_runs);
  f("noise_sigma", s.noise_sigma);
}

inline void assign(double& dst, std::string_view v) { dst = text::parse_double(v); }
inline void assign(std::size_t& dst, std::string_view v) { dst = text::parse_int<std::size_t>(v); }
inline void assign(std::string& dst, std::string_view v) { dst = std::string(v); }
inline std::string render(double v) { return text::format_double(v); }
inline std::string render(std::size_t v) { return std::to_string(v); }
inline std::string render(const std::string& v) { return v; }

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline void validate(const Settings& s) {
  s.intrinsics.validate();
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (s.width == 0 || s.height == 0) throw Error(ErrorCode::InvalidInput, "image size must be positive");
  if (!in01(s.pepper_posterior_threshold) || !in01(s.score_threshold))
    throw Error(ErrorCode::InvalidInput, "thresholds must lie in [0, 1]");
  if (!(s.cluster_tol > 0.0) || !(s.pepper_cluster_tol > 0.0))
    throw Error(ErrorCode::InvalidInput, "cluster tolerances must be positive");
  if (s.min_cluster < 1 || s.min_cluster > s.max_cluster || s.pepper_min_cluster < 1 ||
      s.pepper_min_cluster > s.pepper_max_cluster)
    throw Error(ErrorCode::InvalidInput, "cluster size limits must satisfy 1 <= min <= max");
  if (!(s.h_offset > 0.0)) throw Error(ErrorCode::InvalidInput, "h_offset must be positive");
  if (s.vertical_span != "symmetric" && s.vertical_span != "one-sided")
    throw Error(ErrorCode::InvalidInput, "vertical_span must be symmetric or one-sided");
  if (s.up_axis.size() != 2 || (s.up_axis[0] != '+' && s.up_axis[0] != '-') ||
      (s.up_axis[1] != 'x' && s.up_axis[1] != 'y' && s.up_axis[1] != 'z'))
    throw Error(ErrorCode::InvalidInput, "up_axis must be one of +x -x +y -y +z -z");
  if (s.pfh_stride == 0 || s.cnn_stride == 0) throw Error(ErrorCode::InvalidInput, "strides must be positive");
  if (s.normal_k < 3 || s.fpfh_k < 1) throw Error(ErrorCode::InvalidInput, "neighbourhood sizes too small");
  if (s.svm_kernel != "rbf" && s.svm_kernel != "linear")
    throw Error(ErrorCode::InvalidInput, "svm_kernel must be rbf or linear");
  if (!(s.svm_c > 0.0) || !(s.svm_gamma > 0.0) || !(s.svm_tol > 0.0))
    throw Error(ErrorCode::InvalidInput, "svm_c, svm_gamma, svm_tol must be positive");
  if (s.cnn_batch == 0 || !(s.cnn_lr > 0.0) || s.cnn_momentum < 0.0 || s.cnn_momentum >= 1.0)
    throw Error(ErrorCode::InvalidInput, "invalid CNN training settings");
  if (s.eval_thresholds < 2) throw Error(ErrorCode::InvalidInput, "eval_thresholds must be at least 2");
  if (s.throughput_runs == 0) throw Error(ErrorCode::InvalidInput, "throughput_runs must be positive");
  if (s.noise_sigma < 0.0) throw Error(ErrorCode::InvalidInput, "noise_sigma must be non-negative");
}

/// Applies `key = value` lines on top of the defaults. `#` starts a comment.
/// Unknown keys and malformed lines are ParseErrors.
inline Settings parse_settings(std::string_view data) {
  std::map<std::string, std::string, std::less<>> kv;
  for (auto raw : text::lines(data)) {
    std::string_view line = raw.substr(0, raw.find('#'));
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::ParseError, "expected key = value: " + std::string(line));
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw Error(ErrorCode::ParseError, "empty key or value: " + std::string(line));
    kv[std::string(key)] = std::string(value);
  }
  Settings s;
  detail::visit_settings(s, [&](std::string_view name, auto& field) {
    if (auto it = kv.find(name); it != kv.end()) {
      detail::assign(field, it->second);
      kv.erase(it);
    }
  });
  if (!kv.empty()) throw Error(ErrorCode::ParseError, "unknown config key: " + kv.begin()->first);
  validate(s);
  return s;
}

inline std::string format_settings(const Settings& settings) {
  Settings s = settings;
  std::string out;
  detail::visit_settings(s, [&](std::string_view name, auto& field) {
    out += std::string(name) + " = " + detail::render(field) + "\n";
  });
  return out;
}

inline Settings load_settings(const std::string& path) { return parse_settings(text::read_file(path)); }

}  // namespace peduncle
