#include <algorithm>
#include <sstream>

#include <gtest/gtest.h>

#include "placerec/error.hpp"
#include "placerec/evaluation.hpp"
#include "test_support.hpp"

namespace placerec {
namespace {

struct HandQuery {
  double difference;
  bool correct;
  bool matchable = true;
};

// Each query q has two references: 2q (ground-truth true when matchable) and
// 2q + 1 (always false). A correct query is matched to 2q, a wrong one to 2q + 1.
struct HandCase {
  MatchResult matches;
  GroundTruthRelation gt;
};

HandCase make_case(const std::vector<HandQuery>& queries) {
  HandCase c;
  const std::size_t n = queries.size();
  for (std::size_t q = 0; q < n; ++q) {
    c.gt.query_ids.push_back(static_cast<std::int64_t>(q));
    c.gt.reference_ids.push_back(static_cast<std::int64_t>(2 * q));
    c.gt.reference_ids.push_back(static_cast<std::int64_t>(2 * q + 1));
  }
  c.gt.values.assign(n * 2 * n, 0);
  c.gt.threshold = 10.0;
  for (std::size_t q = 0; q < n; ++q) {
    if (queries[q].matchable) c.gt.values[q * 2 * n + 2 * q] = 1;
    QueryMatch m;
    m.query_id = static_cast<std::int64_t>(q);
    m.reference_index = queries[q].correct ? 2 * q : 2 * q + 1;
    m.reference_id = static_cast<std::int64_t>(m.reference_index);
    m.difference = queries[q].difference;
    c.matches.queries.push_back(m);
  }
  return c;
}

void expect_point(const PrPoint& p, double threshold, double precision, double recall) {
  EXPECT_EQ(p.threshold, threshold);
  EXPECT_NEAR(p.precision, precision, 1e-15);
  EXPECT_NEAR(p.recall, recall, 1e-15);
}

TEST(GroundTruth, StrictThreshold) {
  const std::vector<std::int64_t> q{0}, r{1, 2, 3};
  const std::vector<std::optional<Eigen::Vector3d>> qp{Eigen::Vector3d(0, 0, 0)};
  const std::vector<std::optional<Eigen::Vector3d>> rp{Eigen::Vector3d(9.99, 0, 0), Eigen::Vector3d(10.0, 0, 0),
                                                       Eigen::Vector3d(0, 0, 10.01)};
  const GroundTruthRelation gt = build_ground_truth(q, qp, r, rp, 10.0);
  EXPECT_TRUE(gt.at(0, 0));
  EXPECT_FALSE(gt.at(0, 1));
  EXPECT_FALSE(gt.at(0, 2));
  EXPECT_TRUE(gt.matchable(0));
}

TEST(GroundTruth, MatchesPairwiseDistanceOracle) {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-30, 30);
  std::vector<std::int64_t> qi, ri;
  std::vector<std::optional<Eigen::Vector3d>> qp, rp;
  for (int i = 0; i < 40; ++i) {
    qi.push_back(i);
    qp.push_back(Eigen::Vector3d(u(rng), u(rng), 0));
  }
  for (int i = 0; i < 60; ++i) {
    ri.push_back(100 + i);
    rp.push_back(Eigen::Vector3d(u(rng), u(rng), 0));
  }
  const GroundTruthRelation gt = build_ground_truth(qi, qp, ri, rp, 10.0);
  for (std::size_t q = 0; q < qi.size(); ++q) {
    for (std::size_t r = 0; r < ri.size(); ++r) {
      const double dx = qp[q]->x() - rp[r]->x(), dy = qp[q]->y() - rp[r]->y();
      EXPECT_EQ(gt.at(q, r), dx * dx + dy * dy < 100.0);
    }
  }
}

TEST(GroundTruth, MaskedPairsAreFalse) {
  const std::vector<std::int64_t> ids{0, 1, 2};
  const std::vector<std::optional<Eigen::Vector3d>> pos(3, Eigen::Vector3d::Zero());
  const GroundTruthRelation gt =
      build_ground_truth(ids, pos, ids, pos, 10.0, CandidateMask::exclusion_window(ids, ids, 2));
  EXPECT_FALSE(gt.at(0, 0));
  EXPECT_FALSE(gt.at(0, 1));
  EXPECT_TRUE(gt.at(0, 2));
  EXPECT_FALSE(gt.matchable(1));
  EXPECT_EQ(gt.matchable_queries(), 2u);
}

TEST(GroundTruth, Errors) {
  const std::vector<std::int64_t> ids{0};
  const std::vector<std::optional<Eigen::Vector3d>> missing{std::nullopt};
  const std::vector<std::optional<Eigen::Vector3d>> present{Eigen::Vector3d::Zero()};
  EXPECT_THROW(build_ground_truth(ids, missing, ids, present, 10.0), DataError);
  EXPECT_THROW(build_ground_truth(ids, present, ids, missing, 10.0), DataError);
  EXPECT_THROW(build_ground_truth(ids, present, ids, present, 0.0), ConfigError);
  EXPECT_THROW(build_ground_truth(ids, present, {}, present, 1.0), DataError);
}

TEST(PrCurve, PerfectMatcher) {
  const HandCase c = make_case({{0.3, true}, {0.1, true}, {0.2, true}});
  const PrCurve curve = pr_curve(c.matches, c.gt);
  EXPECT_EQ(curve.auc, 1.0);
  EXPECT_EQ(curve.max_recall_at_full_precision, 1.0);
  EXPECT_EQ(curve.full_precision_threshold, 0.3);
  ASSERT_EQ(curve.points.size(), 3u);
  expect_point(curve.points[0], 0.1, 1.0, 1.0 / 3.0);
}

TEST(PrCurve, InterleavedErrors) {
  // Sweep: (0.1: 1/1, R .25) (0.2: 1/2, R .25) (0.3: 2/3, R .5) (0.4: 3/4, R .75).
  const HandCase c = make_case({{0.1, true}, {0.2, false}, {0.3, true}, {0.4, true}});
  const PrCurve curve = pr_curve(c.matches, c.gt);
  ASSERT_EQ(curve.points.size(), 4u);
  expect_point(curve.points[0], 0.1, 1.0, 0.25);
  expect_point(curve.points[1], 0.2, 0.5, 0.25);
  expect_point(curve.points[2], 0.3, 2.0 / 3.0, 0.5);
  expect_point(curve.points[3], 0.4, 0.75, 0.75);
  EXPECT_NEAR(curve.auc, 55.0 / 96.0, 1e-15);
  EXPECT_EQ(curve.max_recall_at_full_precision, 0.25);
  EXPECT_EQ(curve.full_precision_threshold, 0.1);
  EXPECT_EQ(curve.matchable_queries, 4u);
}

TEST(PrCurve, FirstAcceptedMatchFalse) {
  // The unmatchable query counts against precision only.
  const HandCase c =
      make_case({{0.1, true}, {0.2, true}, {0.3, false}, {0.4, true}, {0.05, false, false}});
  const PrCurve curve = pr_curve(c.matches, c.gt);
  ASSERT_EQ(curve.points.size(), 5u);
  expect_point(curve.points[0], 0.05, 0.0, 0.0);
  expect_point(curve.points[4], 0.4, 0.6, 0.75);
  EXPECT_NEAR(curve.auc, 83.0 / 240.0, 1e-15);
  EXPECT_EQ(curve.max_recall_at_full_precision, 0.0);
  EXPECT_FALSE(curve.full_precision_threshold.has_value());
}

TEST(PrCurve, TiedDifferencesShareOnePoint) {
  const HandCase c = make_case({{0.5, true}, {0.5, false}, {0.9, true}, {0.2, true}});
  const PrCurve curve = pr_curve(c.matches, c.gt);
  ASSERT_EQ(curve.points.size(), 3u);
  expect_point(curve.points[1], 0.5, 2.0 / 3.0, 0.5);
  EXPECT_EQ(curve.points[1].accepted, 3u);
  EXPECT_NEAR(curve.auc, 61.0 / 96.0, 1e-15);
  EXPECT_EQ(curve.max_recall_at_full_precision, 0.25);
}

TEST(PrCurve, QueriesWithoutCandidatesAreNeverAccepted) {
  HandCase c = make_case({{0.1, true}, {0.2, true}});
  c.matches.queries[1].reference_id.reset();
  const PrCurve curve = pr_curve(c.matches, c.gt);
  ASSERT_EQ(curve.points.size(), 1u);
  EXPECT_EQ(curve.max_recall_at_full_precision, 0.5);
}

TEST(PrCurve, NoMatchableQueryIsAnError) {
  const HandCase c = make_case({{0.1, false, false}});
  EXPECT_THROW(pr_curve(c.matches, c.gt), DegenerateError);
}

TEST(PrCurve, IdMismatchIsAnError) {
  HandCase c = make_case({{0.1, true}});
  c.matches.queries[0].query_id = 7;
  EXPECT_THROW(pr_curve(c.matches, c.gt), DataError);
  c = make_case({{0.1, true}});
  c.matches.queries[0].reference_id = 99;
  EXPECT_THROW(pr_curve(c.matches, c.gt), DataError);
}

TEST(PrCurve, RandomSweepMatchesBruteForce) {
  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<HandQuery> qs;
    for (int i = 0; i < 30; ++i) qs.push_back({std::round(u(rng) * 20) / 20, u(rng) < 0.6, u(rng) < 0.9});
    if (std::none_of(qs.begin(), qs.end(), [](const HandQuery& q) { return q.matchable; })) continue;
    const HandCase c = make_case(qs);
    const PrCurve curve = pr_curve(c.matches, c.gt);
    const double matchable = static_cast<double>(std::count_if(qs.begin(), qs.end(), [](auto& q) { return q.matchable; }));
    for (const PrPoint& p : curve.points) {
      double acc = 0, tp = 0;
      for (const auto& q : qs) {
        if (q.difference <= p.threshold) {
          acc += 1;
          tp += q.correct && q.matchable ? 1 : 0;
        }
      }
      EXPECT_EQ(p.precision, tp / acc);
      EXPECT_EQ(p.recall, tp / matchable);
    }
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
      EXPECT_GE(curve.points[i].recall, curve.points[i - 1].recall);
      EXPECT_GT(curve.points[i].threshold, curve.points[i - 1].threshold);
    }
    if (curve.full_precision_threshold) {
      for (const auto& q : qs) {
        if (q.difference <= *curve.full_precision_threshold) EXPECT_TRUE(q.correct && q.matchable);
      }
    }
    EXPECT_GE(curve.auc, 0.0);
    EXPECT_LE(curve.auc, 1.0);
  }
}

TEST(PrCurve, AucDependsOnlyOnRanking) {
  std::mt19937_64 rng(103);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<HandQuery> qs;
  for (int i = 0; i < 50; ++i) qs.push_back({u(rng), u(rng) < 0.7});
  const PrCurve base = pr_curve(make_case(qs).matches, make_case(qs).gt);
  for (auto& q : qs) q.difference = std::exp(3 * q.difference) - 7;
  const PrCurve moved = pr_curve(make_case(qs).matches, make_case(qs).gt);
  EXPECT_EQ(base.auc, moved.auc);
  EXPECT_EQ(base.max_recall_at_full_precision, moved.max_recall_at_full_precision);
}

TEST(PrCurve, CorrectBelowWrongGivesCorrectFraction) {
  std::vector<HandQuery> qs;
  for (int i = 0; i < 12; ++i) qs.push_back({0.1 * i, i < 8});
  const HandCase c = make_case(qs);
  EXPECT_NEAR(pr_curve(c.matches, c.gt).max_recall_at_full_precision, 8.0 / 12.0, 1e-15);
}

TEST(RecognizedPlaces, FlagsAtThreshold) {
  const HandCase c = make_case({{0.1, true}, {0.2, false}, {0.3, true}});
  const std::vector<std::optional<Eigen::Vector3d>> pos{Eigen::Vector3d(1, 2, 3), std::nullopt,
                                                        Eigen::Vector3d(0, 0, 0)};
  const PrCurve curve = pr_curve(c.matches, c.gt);
  auto places = export_recognized_places(c.matches, c.gt, pos, curve.full_precision_threshold);
  ASSERT_EQ(places.size(), 3u);
  EXPECT_TRUE(places[0].recognized);
  EXPECT_FALSE(places[1].recognized);
  EXPECT_FALSE(places[2].recognized);

  places = export_recognized_places(c.matches, c.gt, pos, std::nullopt);
  for (const auto& p : places) EXPECT_FALSE(p.recognized);

  const HandCase perfect = make_case({{0.1, true}, {0.2, true}, {0.3, true}});
  places = export_recognized_places(perfect.matches, perfect.gt, pos,
                                    pr_curve(perfect.matches, perfect.gt).full_precision_threshold);
  for (const auto& p : places) EXPECT_TRUE(p.recognized);

  std::ostringstream out;
  write_recognized_csv(out, places, "abc");
  EXPECT_EQ(out.str(),
            "query_id,gt_x,gt_y,gt_z,reference_id,difference,recognized\n"
            "# fingerprint abc\n"
            "0,1,2,3,0,0.1,1\n"
            "1,,,,2,0.2,1\n"
            "2,0,0,0,4,0.3,1\n");
}

TEST(CsvExports, SummaryAndCurve) {
  const HandCase c = make_case({{0.1, true}, {0.2, false}, {0.3, true}, {0.4, true}});
  const PrCurve curve = pr_curve(c.matches, c.gt);
  std::ostringstream summary, points;
  write_summary_csv(summary, curve);
  write_pr_curve_csv(points, curve, "f00");
  EXPECT_EQ(summary.str(),
            "auc,max_recall_at_full_precision,full_precision_threshold,matchable_queries\n"
            "0.5729166666666666,0.25,0.1,4\n");
  EXPECT_EQ(points.str(),
            "threshold,precision,recall\n# fingerprint f00\n0.1,1,0.25\n0.2,0.5,0.25\n0.3,0.6666666666666666,0.5\n"
            "0.4,0.75,0.75\n");
}

}  // namespace
}  // namespace placerec
