#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>

#include "peduncle/hsv.hpp"
#include "peduncle/text_io.hpp"

namespace peduncle {

/// Gaussian naive Bayes over (cos h, sin h, s, v). Class 0 is pepper, class 1
/// everything else.
struct NaiveBayesHsv {
  static constexpr double kVarianceFloor = 1e-6;

  struct ClassModel {
    double prior = 0.5;
    std::array<double, 4> mean{};
    std::array<double, 4> variance{1, 1, 1, 1};
  };

  ClassModel pepper;
  ClassModel other;
};

inline std::array<double, 4> hsv_encoding(const HsvColor& c) {
  const double rad = c.h * std::numbers::pi / 180.0;
  return {std::cos(rad), std::sin(rad), c.s, c.v};
}

inline NaiveBayesHsv::ClassModel fit_class(std::span<const HsvColor> samples, double prior) {
  NaiveBayesHsv::ClassModel m;
  m.prior = prior;
  const double n = static_cast<double>(samples.size());
  for (const auto& s : samples) {
    const auto e = hsv_encoding(s);
    for (int d = 0; d < 4; ++d) m.mean[d] += e[d];
  }
  for (double& v : m.mean) v /= n;
  std::array<double, 4> var{};
  for (const auto& s : samples) {
    const auto e = hsv_encoding(s);
    for (int d = 0; d < 4; ++d) var[d] += (e[d] - m.mean[d]) * (e[d] - m.mean[d]);
  }
  for (int d = 0; d < 4; ++d) m.variance[d] = std::max(var[d] / n, NaiveBayesHsv::kVarianceFloor);
  return m;
}

/// Maximum-likelihood Gaussians per class; priors from class counts.
inline NaiveBayesHsv nb_fit(std::span<const HsvColor> pepper, std::span<const HsvColor> other) {
  if (pepper.size() < 2 || other.size() < 2)
    throw Error(ErrorCode::DegenerateTraining, "naive Bayes needs at least two samples per class");
  const double total = static_cast<double>(pepper.size() + other.size());
  NaiveBayesHsv model;
  model.pepper = fit_class(pepper, static_cast<double>(pepper.size()) / total);
  model.other = fit_class(other, static_cast<double>(other.size()) / total);
  return model;
}

inline double class_log_likelihood(const NaiveBayesHsv::ClassModel& m, const std::array<double, 4>& e) {
  double ll = std::log(m.prior);
  for (int d = 0; d < 4; ++d) {
    const double diff = e[d] - m.mean[d];
    ll -= 0.5 * (std::log(2.0 * std::numbers::pi * m.variance[d]) + diff * diff / m.variance[d]);
  }
  return ll;
}

/// Posterior probability of the pepper class.
inline double nb_posterior(const NaiveBayesHsv& model, const HsvColor& hsv) {
  const auto e = hsv_encoding(hsv);
  const double lp = class_log_likelihood(model.pepper, e);
  const double lo = class_log_likelihood(model.other, e);
  // logistic of the log-odds, stable for large magnitudes
  const double odds = lp - lo;
  if (odds >= 0) return 1.0 / (1.0 + std::exp(-odds));
  const double t = std::exp(odds);
  return t / (1.0 + t);
}

inline double nb_posterior(const NaiveBayesHsv& model, Rgb c) { return nb_posterior(model, rgb_to_hsv(c)); }

// `nbhsv v1`, then per class (pepper first): prior, 4 means, 4 variances.

inline std::string format_naive_bayes(const NaiveBayesHsv& m) {
  std::string out = "nbhsv v1\n";
  for (const auto* c : {&m.pepper, &m.other}) {
    out += text::format_double(c->prior);
    for (double v : c->mean) out += ' ' + text::format_double(v);
    for (double v : c->variance) out += ' ' + text::format_double(v);
    out += '\n';
  }
  return out;
}

inline NaiveBayesHsv parse_naive_bayes(std::string_view data) {
  const auto rows = text::lines(data);
  if (rows.size() != 3 || text::split(rows[0]).size() != 2 || text::split(rows[0])[0] != "nbhsv" ||
      text::split(rows[0])[1] != "v1")
    throw Error(ErrorCode::ParseError, "bad nbhsv file");
  NaiveBayesHsv m;
  NaiveBayesHsv::ClassModel* classes[2] = {&m.pepper, &m.other};
  for (int k = 0; k < 2; ++k) {
    const auto tok = text::split(rows[1 + k]);
    if (tok.size() != 9) throw Error(ErrorCode::ParseError, "bad nbhsv class block");
    classes[k]->prior = text::parse_double(tok[0]);
    for (int d = 0; d < 4; ++d) {
      classes[k]->mean[d] = text::parse_double(tok[1 + d]);
      classes[k]->variance[d] = text::parse_double(tok[5 + d]);
      if (!(classes[k]->variance[d] > 0.0)) throw Error(ErrorCode::ParseError, "variance must be positive");
    }
  }
  return m;
}

}  // namespace peduncle
