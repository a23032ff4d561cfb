#include <gtest/gtest.h>

#include "peduncle.hpp"

using namespace peduncle;

namespace {

constexpr auto P = EvalLabel::Positive;
constexpr auto N = EvalLabel::Negative;
constexpr auto I = EvalLabel::Ignored;

}  // namespace

TEST(Confusion, CountsAndIgnores) {
  const std::vector<double> s = {0.9, 0.6, 0.4, 0.2, 0.95};
  const std::vector<EvalLabel> l = {P, N, P, N, I};
  EXPECT_EQ(confusion(s, l, 0.5), (Confusion{1, 1, 1, 1}));
  EXPECT_EQ(confusion(s, l, 0.6), (Confusion{1, 1, 1, 1}));  // inclusive threshold
  EXPECT_EQ(confusion(s, l, 0.0), (Confusion{2, 2, 0, 0}));
  EXPECT_THROW(confusion(s, std::vector<EvalLabel>{P}, 0.5), Error);
  try {
    confusion(std::vector<double>{0.1}, std::vector<EvalLabel>{I}, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyEvaluation);
  }
}

TEST(PrCurve, HandExample) {
  const std::vector<double> s = {0.9, 0.8, 0.7, 0.3, 0.1};
  const std::vector<EvalLabel> l = {P, N, P, P, N};
  const std::vector<double> t = {0.0, 0.5, 0.85, 1.0};
  const auto c = pr_curve(s, l, t);
  ASSERT_EQ(c.points.size(), 4u);
  // t=0: tp 3 fp 2 -> p 0.6 r 1 f1 0.75
  EXPECT_DOUBLE_EQ(c.points[0].precision, 0.6);
  EXPECT_DOUBLE_EQ(c.points[0].f1, 0.75);
  // t=0.5: tp 2 fp 1 fn 1 -> p = r = 2/3
  EXPECT_DOUBLE_EQ(c.points[1].recall, 2.0 / 3.0);
  EXPECT_NEAR(c.points[1].f1, 2.0 / 3.0, 1e-15);
  // t=0.85: tp 1 -> p 1 r 1/3 f1 0.5
  EXPECT_DOUBLE_EQ(c.points[2].f1, 0.5);
  // t=1: nothing predicted -> precision 0 by convention
  EXPECT_EQ(c.points[3].counts.tp + c.points[3].counts.fp, 0u);
  EXPECT_DOUBLE_EQ(c.points[3].precision, 0.0);
  EXPECT_DOUBLE_EQ(c.points[3].f1, 0.0);
  EXPECT_EQ(c.best, 0u);
}

TEST(PrCurve, TieGoesToLowestThreshold) {
  const std::vector<double> s = {0.9, 0.1};
  const std::vector<EvalLabel> l = {P, N};
  const auto grid = threshold_grid(11);
  const auto c = pr_curve(s, l, grid);
  // every threshold in (0.1, 0.9] gives f1 = 1
  EXPECT_DOUBLE_EQ(c.best_point().f1, 1.0);
  EXPECT_DOUBLE_EQ(c.best_point().threshold, 0.2);
}

TEST(PrCurve, NeedsBothClasses) {
  const std::vector<double> s = {0.9, 0.1};
  EXPECT_THROW(pr_curve(s, std::vector<EvalLabel>{P, P}, threshold_grid()), Error);
  EXPECT_THROW(pr_curve(s, std::vector<EvalLabel>{N, I}, threshold_grid()), Error);
}

TEST(PrCurve, ThresholdGrid) {
  const auto g = threshold_grid();
  ASSERT_EQ(g.size(), 101u);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_EQ(g.back(), 1.0);
  EXPECT_DOUBLE_EQ(g[37], 0.37);
  EXPECT_THROW(threshold_grid(1), Error);
  const std::vector<double> bad = {0.5, 0.5};
  const std::vector<Confusion> counts(2, Confusion{1, 0, 0, 1});
  EXPECT_THROW(curve_from_counts(bad, counts, CurveMode::Raw), Error);
}

TEST(PrCurve, CsvAndSummary) {
  const std::vector<double> s = {0.9, 0.1};
  const std::vector<EvalLabel> l = {P, N};
  const std::vector<double> t = {0.0, 0.5};
  std::vector<PrCurve> curves = {pr_curve(s, l, t), pr_curve(s, l, t, CurveMode::Filtered)};
  const auto csv = format_pr_csv(curves);
  const auto rows = text::lines(csv);
  EXPECT_EQ(rows[0], "mode,threshold,tp,fp,fn,precision,recall,f1");
  EXPECT_EQ(rows[1], "raw,0,1,1,0,0.5,1,0.6666666666666666");
  EXPECT_EQ(rows[4], "filtered,0.5,1,0,0,1,1,1");
  EXPECT_EQ(format_summary(curves[0]), "best_f1 1 at 0.5\n");
}

TEST(ClusterConfusion, PredictionsAreClusterMembers) {
  const std::vector<EvalLabel> l = {P, P, N, N, I};
  Cluster c;
  c.indices = {0, 2, 4};
  EXPECT_EQ(cluster_confusion(l, c), (Confusion{1, 1, 1, 1}));
  EXPECT_EQ(cluster_confusion(l, std::nullopt), (Confusion{0, 0, 2, 2}));
}

TEST(EvalFiltered, SkipsFailedScenesAndCountsMisses) {
  SceneCandidates failed;
  failed.error = ErrorCode::NoPepperFound;
  std::vector<SceneCandidates> only_failed = {failed};
  EXPECT_THROW(eval_raw(only_failed, threshold_grid()), Error);
  EXPECT_THROW(eval_filtered(only_failed, NaiveBayesHsv{}, threshold_grid(), FilterParams{}), Error);
}
