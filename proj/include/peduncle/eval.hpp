#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "peduncle/detectors.hpp"
#include "peduncle/pipeline.hpp"
#include "peduncle/scenegen.hpp"

namespace peduncle {

enum class EvalLabel : std::uint8_t { Negative = 0, Positive = 1, Ignored = 2 };

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

/// Counts over non-ignored items with prediction = score >= threshold.
inline Confusion confusion(std::span<const double> scores, std::span<const EvalLabel> labels, double threshold) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::InvalidInput, "score/label count mismatch");
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == EvalLabel::Ignored) continue;
    const bool pred = scores[i] >= threshold;
    if (labels[i] == EvalLabel::Positive) (pred ? c.tp : c.fn)++;
    else (pred ? c.fp : c.tn)++;
  }
  if (c.total() == 0) throw Error(ErrorCode::EmptyEvaluation, "no labeled items");
  return c;
}

enum class CurveMode { Raw, Filtered };

inline std::string_view to_string(CurveMode m) { return m == CurveMode::Raw ? "raw" : "filtered"; }

/// Precision is 0 when nothing is predicted positive.
struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Confusion counts;
};

inline PrPoint make_pr_point(double threshold, const Confusion& c) {
  PrPoint p{threshold, 0.0, 0.0, 0.0, c};
  if (c.tp + c.fp > 0) p.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) p.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (p.precision + p.recall > 0.0) p.f1 = 2.0 * p.precision * p.recall / (p.precision + p.recall);
  return p;
}

struct PrCurve {
  CurveMode mode = CurveMode::Raw;
  std::vector<PrPoint> points;
  std::size_t best = 0;  // highest f1, lowest threshold on ties

  const PrPoint& best_point() const { return points.at(best); }
};

/// n evenly spaced thresholds i / (n - 1) covering [0, 1].
inline std::vector<double> threshold_grid(std::size_t n = 101) {
  if (n < 2) throw Error(ErrorCode::InvalidInput, "threshold grid needs at least 2 points");
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  return t;
}

inline PrCurve curve_from_counts(std::span<const double> thresholds, std::span<const Confusion> counts, CurveMode mode) {
  if (thresholds.size() != counts.size() || thresholds.empty())
    throw Error(ErrorCode::InvalidInput, "one confusion per threshold required");
  PrCurve curve;
  curve.mode = mode;
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (i > 0 && !(thresholds[i] > thresholds[i - 1]))
      throw Error(ErrorCode::InvalidInput, "thresholds must be strictly increasing");
    curve.points.push_back(make_pr_point(thresholds[i], counts[i]));
    if (curve.points.back().f1 > curve.points[curve.best].f1) curve.best = i;
  }
  return curve;
}

inline PrCurve pr_curve(std::span<const double> scores, std::span<const EvalLabel> labels,
                        std::span<const double> thresholds, CurveMode mode = CurveMode::Raw) {
  const bool has_pos = std::find(labels.begin(), labels.end(), EvalLabel::Positive) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), EvalLabel::Negative) != labels.end();
  if (!has_pos || !has_neg) throw Error(ErrorCode::EmptyEvaluation, "need at least one positive and one negative");
  std::vector<Confusion> counts;
  for (double t : thresholds) counts.push_back(confusion(scores, labels, t));
  return curve_from_counts(thresholds, counts, mode);
}

inline std::string format_pr_csv(std::span<const PrCurve> curves) {
  std::string out = "mode,threshold,tp,fp,fn,precision,recall,f1\n";
  for (const auto& c : curves)
    for (const auto& p : c.points)
      out += std::string(to_string(c.mode)) + "," + text::format_double(p.threshold) + "," +
             std::to_string(p.counts.tp) + "," + std::to_string(p.counts.fp) + "," + std::to_string(p.counts.fn) +
             "," + text::format_double(p.precision) + "," + text::format_double(p.recall) + "," +
             text::format_double(p.f1) + "\n";
  return out;
}

inline std::string format_summary(const PrCurve& c) {
  return "best_f1 " + text::format_double(c.best_point().f1) + " at " + text::format_double(c.best_point().threshold) +
         "\n";
}

// ---------------------------------------------------------------------------
// Scene-level evaluation

/// Projected, scored candidates of one scene with their annotation labels.
struct SceneCandidates {
  std::string id;
  std::optional<ErrorCode> error;  // set when the scene produced no candidates
  BoundingBox3 pepper_box;
  ScoredCloud scored;
  std::vector<EvalLabel> labels;
};

inline std::vector<EvalLabel> annotation_labels(const LabeledScene& scene, std::span<const std::uint32_t> pixels) {
  std::vector<EvalLabel> out;
  out.reserve(pixels.size());
  for (auto px : pixels) {
    if (scene.positive.pixels[px]) out.push_back(EvalLabel::Positive);
    else if (scene.negative.pixels[px]) out.push_back(EvalLabel::Negative);
    else out.push_back(EvalLabel::Ignored);
  }
  return out;
}

/// Runs detection up to projection; pipeline errors are recorded, not raised.
inline SceneCandidates prepare_scene(const LabeledScene& scene, const Models& models, DetectorKind kind,
                                     const Settings& s, std::string id = {}) {
  SceneCandidates out;
  out.id = std::move(id);
  try {
    auto a = analyze_frame(scene.rgb, scene.depth, models, kind, s);
    out.pepper_box = a.pepper.box;
    out.labels = annotation_labels(scene, a.scored.pixels);
    out.scored = std::move(a.scored);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoPepperFound && e.code() != ErrorCode::RoiOutOfImage &&
        e.code() != ErrorCode::EmptyProjection)
      throw;
    out.error = e.code();
  }
  return out;
}

/// Pooled raw-score curve over every scene that produced candidates.
inline PrCurve eval_raw(std::span<const SceneCandidates> scenes, std::span<const double> thresholds) {
  std::vector<double> scores;
  std::vector<EvalLabel> labels;
  for (const auto& sc : scenes) {
    if (sc.error) continue;
    scores.insert(scores.end(), sc.scored.scores.begin(), sc.scored.scores.end());
    labels.insert(labels.end(), sc.labels.begin(), sc.labels.end());
  }
  return pr_curve(scores, labels, thresholds, CurveMode::Raw);
}

/// Confusion of one filter outcome: predictions are the returned cluster.
inline Confusion cluster_confusion(std::span<const EvalLabel> labels, const std::optional<Cluster>& cluster) {
  std::vector<char> predicted(labels.size(), 0);
  if (cluster)
    for (Index i : cluster->indices) predicted[i] = 1;
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == EvalLabel::Ignored) continue;
    if (labels[i] == EvalLabel::Positive) (predicted[i] ? c.tp : c.fn)++;
    else (predicted[i] ? c.fp : c.tn)++;
  }
  return c;
}

struct FilteredEvaluation {
  PrCurve curve;
  std::vector<std::size_t> no_peduncle;  // per threshold, scenes that returned nothing
};

/// Filter sweep with counts pooled over scenes; NoPeduncleFound turns every
/// positive of that scene into a false negative.
inline FilteredEvaluation eval_filtered(std::span<const SceneCandidates> scenes, const NaiveBayesHsv& nb,
                                        std::span<const double> thresholds, FilterParams fp,
                                        const PeduncleBoxParams& bp = {}) {
  std::vector<Confusion> counts(thresholds.size());
  FilteredEvaluation out;
  out.no_peduncle.assign(thresholds.size(), 0);
  bool any = false;
  for (const auto& sc : scenes) {
    if (sc.error) continue;
    any = true;
    const auto ctx = make_filter_context(sc.scored, sc.pepper_box, nb, bp);
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      fp.score_threshold = thresholds[t];
      const auto outcome = run_filter(ctx, fp);
      if (!outcome.cluster) ++out.no_peduncle[t];
      counts[t] += cluster_confusion(sc.labels, outcome.cluster);
    }
  }
  if (!any || counts.front().total() == 0) throw Error(ErrorCode::EmptyEvaluation, "no scene produced candidates");
  out.curve = curve_from_counts(thresholds, counts, CurveMode::Filtered);
  return out;
}

// ---------------------------------------------------------------------------
// Throughput

/// Units per second of `work` (which returns the units it processed),
/// as the median over `runs` timed runs.
inline double measure_rate(const std::function<std::size_t()>& work, std::size_t runs = 5) {
  if (runs == 0) throw Error(ErrorCode::InvalidInput, "need at least one run");
  std::vector<double> rates;
  for (std::size_t r = 0; r < runs; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t units = work();
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    rates.push_back(static_cast<double>(units) / std::max(dt.count(), 1e-9));
  }
  std::sort(rates.begin(), rates.end());
  return rates.size() % 2 ? rates[rates.size() / 2] : 0.5 * (rates[rates.size() / 2 - 1] + rates[rates.size() / 2]);
}

/// Scored points per second of a detector over the ROIs of the given scenes.
inline double detector_throughput(std::span<const LabeledScene> scenes, const Models& models, DetectorKind kind,
                                  const Settings& s, std::size_t runs) {
  std::vector<Roi2> rois;
  for (const auto& scene : scenes) rois.push_back(ground_truth_roi(scene));
  return measure_rate(
      [&] {
        std::size_t units = 0;
        for (std::size_t i = 0; i < scenes.size(); ++i)
          units += score_roi(scenes[i].rgb, scenes[i].depth, rois[i], models, kind, s).scored_count();
        return units;
      },
      runs);
}

}  // namespace peduncle
