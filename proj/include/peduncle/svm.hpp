#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <list>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "peduncle/features.hpp"

namespace peduncle {

enum class KernelType { Linear, Rbf };

inline std::string_view to_string(KernelType k) { return k == KernelType::Linear ? "linear" : "rbf"; }

inline KernelType parse_kernel(std::string_view name) {
  if (name == "linear") return KernelType::Linear;
  if (name == "rbf") return KernelType::Rbf;
  throw Error(ErrorCode::ParseError, "unknown kernel '" + std::string(name) + "'");
}

struct SvmParams {
  KernelType kernel = KernelType::Rbf;
  double c = 1.0;
  double gamma = 1.0 / 36.0;
  double tol = 1e-3;
  std::size_t max_passes = 1000;  // iteration cap = max_passes * n
  std::uint64_t seed = 0;         // drives the fallback pair choice only
};

/// Binary kernel SVM over standardized 36-D features. Support vectors are
/// stored already standardized.
struct SvmModel {
  KernelType kernel = KernelType::Rbf;
  double gamma = 1.0 / 36.0;
  double c = 1.0;
  double bias = 0.0;
  std::vector<FeatureVector36> support_vectors;
  std::vector<double> dual_coefs;  // alpha_i * y_i
  FeatureVector36 feature_means{};
  FeatureVector36 feature_scales{};

  FeatureVector36 standardize(const FeatureVector36& f) const {
    FeatureVector36 z;
    for (std::size_t d = 0; d < kFeatureSize; ++d) z[d] = (f[d] - feature_means[d]) / feature_scales[d];
    return z;
  }
};

inline double kernel_value(KernelType kernel, double gamma, const FeatureVector36& a, const FeatureVector36& b) {
  if (kernel == KernelType::Linear) {
    double s = 0.0;
    for (std::size_t d = 0; d < kFeatureSize; ++d) s += a[d] * b[d];
    return s;
  }
  double s = 0.0;
  for (std::size_t d = 0; d < kFeatureSize; ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return std::exp(-gamma * s);
}

/// Signed margin; positive means peduncle.
inline double svm_score(const SvmModel& model, const FeatureVector36& f) {
  for (double v : f)
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidInput, "non-finite feature");
  const auto z = model.standardize(f);
  double s = model.bias;
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i)
    s += model.dual_coefs[i] * kernel_value(model.kernel, model.gamma, model.support_vectors[i], z);
  return s;
}

inline std::vector<double> svm_score(const SvmModel& model, std::span<const FeatureVector36> batch) {
  std::vector<double> out;
  out.reserve(batch.size());
  for (const auto& f : batch) out.push_back(svm_score(model, f));
  return out;
}

struct SvmTrainResult {
  SvmModel model;
  std::vector<double> alpha;  // one per training sample
  std::size_t iterations = 0;
  double final_gap = 0.0;  // max violating pair gap at exit
  bool converged = false;
};

namespace detail {

/// Kernel rows on demand with LRU eviction.
class KernelRowCache {
 public:
  KernelRowCache(const std::vector<FeatureVector36>& x, KernelType kernel, double gamma, std::size_t max_rows)
      : x_(x), kernel_(kernel), gamma_(gamma), max_rows_(std::max<std::size_t>(max_rows, 2)) {}

  const std::vector<double>& row(std::size_t i) {
    if (auto it = map_.find(i); it != map_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second.second);
      return it->second.first;
    }
    if (map_.size() >= max_rows_) {
      map_.erase(lru_.back());
      lru_.pop_back();
    }
    std::vector<double> r(x_.size());
    for (std::size_t t = 0; t < x_.size(); ++t) r[t] = kernel_value(kernel_, gamma_, x_[i], x_[t]);
    lru_.push_front(i);
    auto [it, ok] = map_.emplace(i, std::make_pair(std::move(r), lru_.begin()));
    return it->second.first;
  }

 private:
  const std::vector<FeatureVector36>& x_;
  KernelType kernel_;
  double gamma_;
  std::size_t max_rows_;
  std::list<std::size_t> lru_;
  std::unordered_map<std::size_t, std::pair<std::vector<double>, std::list<std::size_t>::iterator>> map_;
};

}  // namespace detail

/// Sequential minimal optimization of the C-SVC dual with max-violating-pair
/// working set selection. Labels must be +1 or -1.
inline SvmTrainResult svm_train(std::span<const FeatureVector36> features, std::span<const int> labels,
                                const SvmParams& params) {
  const std::size_t n = features.size();
  if (n != labels.size()) throw Error(ErrorCode::InvalidInput, "feature/label count mismatch");
  if (!(params.c > 0.0) || !(params.tol > 0.0)) throw Error(ErrorCode::InvalidInput, "C and tol must be positive");
  if (params.kernel == KernelType::Rbf && !(params.gamma > 0.0))
    throw Error(ErrorCode::InvalidInput, "gamma must be positive");
  std::size_t pos = 0, neg = 0;
  for (int y : labels) {
    if (y == 1) ++pos;
    else if (y == -1) ++neg;
    else throw Error(ErrorCode::InvalidInput, "labels must be +1 or -1");
  }
  if (pos == 0 || neg == 0) throw Error(ErrorCode::DegenerateTraining, "both classes are required");
  for (const auto& f : features)
    for (double v : f)
      if (!std::isfinite(v)) throw Error(ErrorCode::InvalidInput, "non-finite feature");

  SvmTrainResult result;
  SvmModel& model = result.model;
  model.kernel = params.kernel;
  model.gamma = params.gamma;
  model.c = params.c;
  for (std::size_t d = 0; d < kFeatureSize; ++d) {
    double mean = 0.0;
    for (const auto& f : features) mean += f[d];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& f : features) var += (f[d] - mean) * (f[d] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    model.feature_means[d] = mean;
    model.feature_scales[d] = sd > 1e-12 ? sd : 1.0;
  }
  std::vector<FeatureVector36> x;
  x.reserve(n);
  for (const auto& f : features) x.push_back(model.standardize(f));

  const std::size_t budget_rows = std::max<std::size_t>(2, (256u << 20) / (8 * n + 1));
  detail::KernelRowCache cache(x, params.kernel, params.gamma, budget_rows);
  std::vector<double> diag(n);
  for (std::size_t t = 0; t < n; ++t) diag[t] = kernel_value(params.kernel, params.gamma, x[t], x[t]);

  const double c = params.c;
  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);
  std::vector<double> y(n);
  for (std::size_t t = 0; t < n; ++t) y[t] = labels[t];
  auto in_up = [&](std::size_t t) { return (y[t] > 0 && alpha[t] < c) || (y[t] < 0 && alpha[t] > 0); };
  auto in_low = [&](std::size_t t) { return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < c); };

  std::mt19937_64 rng(params.seed);
  const std::size_t max_iter = std::max<std::size_t>(params.max_passes, 1) * std::max<std::size_t>(n, 100);
  std::size_t iter = 0;
  double gap = 0.0;
  constexpr double kTau = 1e-12;
  std::vector<std::size_t> low_candidates;

  while (true) {
    double m = -std::numeric_limits<double>::infinity();
    double big_m = std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > m) { m = v; i = t; }
      if (in_low(t) && v < big_m) { big_m = v; j = t; }
    }
    gap = m - big_m;
    if (i == n || j == n || gap < params.tol) {
      result.converged = true;
      break;
    }
    if (iter >= max_iter) break;
    ++iter;

    auto update_pair = [&](std::size_t a, std::size_t b) {
      const std::vector<double> qa = cache.row(a);  // copied: fetching row b may evict it
      const auto& qb = cache.row(b);
      const double old_a = alpha[a], old_b = alpha[b];
      const double kab = qa[b];
      double quad = diag[a] + diag[b] - 2.0 * kab;
      if (quad <= 0.0) quad = kTau;
      if (y[a] != y[b]) {
        const double delta = (-grad[a] - grad[b]) / quad;
        const double diff = alpha[a] - alpha[b];
        alpha[a] += delta;
        alpha[b] += delta;
        if (diff > 0) {
          if (alpha[b] < 0) { alpha[b] = 0; alpha[a] = diff; }
        } else {
          if (alpha[a] < 0) { alpha[a] = 0; alpha[b] = -diff; }
        }
        if (diff > 0) {
          if (alpha[a] > c) { alpha[a] = c; alpha[b] = c - diff; }
        } else {
          if (alpha[b] > c) { alpha[b] = c; alpha[a] = c + diff; }
        }
      } else {
        const double delta = (grad[a] - grad[b]) / quad;
        const double sum = alpha[a] + alpha[b];
        alpha[a] -= delta;
        alpha[b] += delta;
        if (sum > c) {
          if (alpha[a] > c) { alpha[a] = c; alpha[b] = sum - c; }
        } else {
          if (alpha[b] < 0) { alpha[b] = 0; alpha[a] = sum; }
        }
        if (sum > c) {
          if (alpha[b] > c) { alpha[b] = c; alpha[a] = sum - c; }
        } else {
          if (alpha[a] < 0) { alpha[a] = 0; alpha[b] = sum; }
        }
      }
      const double da = alpha[a] - old_a;
      const double db = alpha[b] - old_b;
      if (da == 0.0 && db == 0.0) return false;
      for (std::size_t t = 0; t < n; ++t)
        grad[t] += y[t] * (y[a] * qa[t] * da + y[b] * qb[t] * db);
      return true;
    };

    if (!update_pair(i, j)) {
      // Stalled on the extreme pair: retry with a random violating partner.
      low_candidates.clear();
      for (std::size_t t = 0; t < n; ++t)
        if (t != i && in_low(t) && -y[t] * grad[t] < m - params.tol) low_candidates.push_back(t);
      if (low_candidates.empty()) break;
      std::uniform_int_distribution<std::size_t> pick(0, low_candidates.size() - 1);
      if (!update_pair(i, low_candidates[pick(rng)])) break;
    }
  }

  // Bias from free vectors, falling back to the midpoint of the feasible range.
  double free_sum = 0.0;
  std::size_t free_count = 0;
  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] > 0.0 && alpha[t] < c) {
      free_sum += yg;
      ++free_count;
    } else if ((alpha[t] >= c && y[t] < 0) || (alpha[t] <= 0.0 && y[t] > 0)) {
      ub = std::min(ub, yg);
    } else {
      lb = std::max(lb, yg);
    }
  }
  const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : 0.5 * (ub + lb);
  model.bias = -rho;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) {
      model.support_vectors.push_back(x[t]);
      model.dual_coefs.push_back(alpha[t] * y[t]);
    }
  }
  result.alpha = std::move(alpha);
  result.iterations = iter;
  result.final_gap = gap;
  return result;
}

/// Largest KKT violation over the training set measured on decision values:
/// y f >= 1 at alpha = 0, y f = 1 for free alpha, y f <= 1 at alpha = C.
inline double max_kkt_violation(const SvmTrainResult& trained, std::span<const FeatureVector36> features,
                                std::span<const int> labels) {
  const double c = trained.model.c;
  double worst = 0.0;
  for (std::size_t t = 0; t < features.size(); ++t) {
    const double yf = labels[t] * svm_score(trained.model, features[t]);
    const double a = trained.alpha[t];
    double v = 0.0;
    if (a <= 0.0) v = std::max(0.0, 1.0 - yf);
    else if (a >= c) v = std::max(0.0, yf - 1.0);
    else v = std::fabs(yf - 1.0);
    worst = std::max(worst, v);
  }
  return worst;
}

/// Dual objective W(alpha) = sum alpha - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij, recomputed from scratch.
inline double dual_objective(const SvmTrainResult& trained, std::span<const FeatureVector36> features,
                             std::span<const int> labels) {
  const auto& m = trained.model;
  std::vector<FeatureVector36> z;
  for (const auto& f : features) z.push_back(m.standardize(f));
  double lin = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    lin += trained.alpha[i];
    if (trained.alpha[i] == 0.0) continue;
    for (std::size_t j = 0; j < z.size(); ++j)
      quad += trained.alpha[i] * trained.alpha[j] * labels[i] * labels[j] * kernel_value(m.kernel, m.gamma, z[i], z[j]);
  }
  return lin - 0.5 * quad;
}

// `svm v1 <kernel> <gamma> <C> <bias> <n_sv>`, means line, scales line, then
// one line per support vector: dual coefficient and 36 standardized values.

inline std::string format_svm(const SvmModel& m) {
  std::string out = "svm v1 " + std::string(to_string(m.kernel)) + " " + text::format_double(m.gamma) + " " +
                    text::format_double(m.c) + " " + text::format_double(m.bias) + " " +
                    std::to_string(m.support_vectors.size()) + "\n";
  auto row = [&](const FeatureVector36& v) {
    for (std::size_t d = 0; d < kFeatureSize; ++d) {
      if (d) out += ' ';
      out += text::format_double(v[d]);
    }
    out += '\n';
  };
  row(m.feature_means);
  row(m.feature_scales);
  for (std::size_t i = 0; i < m.support_vectors.size(); ++i) {
    out += text::format_double(m.dual_coefs[i]);
    out += ' ';
    row(m.support_vectors[i]);
  }
  return out;
}

inline SvmModel parse_svm(std::string_view data) {
  const auto rows = text::lines(data);
  if (rows.size() < 3) throw Error(ErrorCode::ParseError, "truncated svm model");
  const auto h = text::split(rows[0]);
  if (h.size() != 7 || h[0] != "svm" || h[1] != "v1") throw Error(ErrorCode::ParseError, "bad svm header");
  SvmModel m;
  m.kernel = parse_kernel(h[2]);
  m.gamma = text::parse_double(h[3]);
  m.c = text::parse_double(h[4]);
  m.bias = text::parse_double(h[5]);
  const auto n_sv = text::parse_int<std::size_t>(h[6]);
  if (rows.size() != 3 + n_sv) throw Error(ErrorCode::ParseError, "support vector count mismatch");
  auto parse_row = [](std::string_view line, std::size_t offset, FeatureVector36& dst) {
    const auto tok = text::split(line);
    if (tok.size() != kFeatureSize + offset) throw Error(ErrorCode::ParseError, "bad svm row");
    for (std::size_t d = 0; d < kFeatureSize; ++d) dst[d] = text::parse_double(tok[d + offset]);
    return tok;
  };
  parse_row(rows[1], 0, m.feature_means);
  parse_row(rows[2], 0, m.feature_scales);
  for (double s : m.feature_scales)
    if (!(s > 0.0)) throw Error(ErrorCode::ParseError, "feature scales must be positive");
  for (std::size_t i = 0; i < n_sv; ++i) {
    FeatureVector36 sv;
    const auto tok = parse_row(rows[3 + i], 1, sv);
    m.dual_coefs.push_back(text::parse_double(tok[0]));
    m.support_vectors.push_back(sv);
  }
  return m;
}

}  // namespace peduncle
