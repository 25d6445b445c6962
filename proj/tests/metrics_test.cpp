// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include <random>

#include "detection_oracles.hpp"
#include "spdet/errors.hpp"
#include "spdet/metrics.hpp"

namespace spdet::metrics {
namespace {

TEST(Iou, HalfOverlapIsOneSeventh) {
  EXPECT_NEAR(iou({1, 1, 2, 2}, {2, 1, 2, 2}), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(iou({1, 1, 2, 2}, {2, 2, 2, 2}), 1.0 / 7.0, 1e-15);
  EXPECT_EQ(iou({0, 0, 1, 1}, {5, 5, 1, 1}), 0.0);
}

TEST(Match, HigherScoreClaimsSharedTruth) {
  MatchFlags m = match_detections({{{0.5, 0.5, 0.2, 0.2}, 0.6}, {{0.5, 0.5, 0.2, 0.2}, 0.9}}, {{0.5, 0.5, 0.2, 0.2}}, 0.5);
  EXPECT_EQ(m.true_positive, (std::vector<bool>{true, false}));
  EXPECT_EQ(m.scores, (std::vector<double>{0.9, 0.6}));
  EXPECT_EQ(m.matched_gt, (std::vector<int>{0, -1}));
}

TEST(Match, BelowThresholdIsFalsePositive) {
  MatchFlags m = match_detections({{{1, 1, 2, 2}, 0.9}}, {{2, 2, 2, 2}}, 0.4);
  EXPECT_EQ(m.true_positive, (std::vector<bool>{false}));
}

TEST(Match, PicksBestOverlap) {
  MatchFlags m =
      match_detections({{{0.5, 0.5, 0.2, 0.2}, 0.9}}, {{0.55, 0.5, 0.2, 0.2}, {0.5, 0.5, 0.21, 0.2}}, 0.5);
  EXPECT_EQ(m.matched_gt, (std::vector<int>{1}));
}

TEST(Ap, Examples) {
  EXPECT_FALSE(average_precision({}, {}, 0).has_value());
  EXPECT_DOUBLE_EQ(*average_precision({true}, {0.9}, 1), 1.0);
  EXPECT_DOUBLE_EQ(*average_precision({false}, {0.9}, 1), 0.0);
  EXPECT_DOUBLE_EQ(*average_precision({true}, {0.9}, 2), 51.0 / 101.0);
  // FP first, then TP: precision 0.5 at every recall level.
  EXPECT_DOUBLE_EQ(*average_precision({false, true}, {0.9, 0.5}, 1), 0.5);
}

TEST(Ap, MatchesExhaustiveOracleAndBounds) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::pair<BBox, double>> dets;
    std::vector<ScoredBox> boxes;
    std::vector<BBox> gts;
    const std::size_t nd = rng() % 7, ng = rng() % 5;
    for (std::size_t i = 0; i < nd; ++i) {
      BBox b = testing::oracle::random_small_box(rng);
      const double s = u(rng);
      dets.emplace_back(b, s);
      boxes.push_back({b, s});
    }
    for (std::size_t i = 0; i < ng; ++i) gts.push_back(testing::oracle::random_small_box(rng));
    for (double t : {0.3, 0.5}) {
      std::vector<double> sorted;
      auto flags = testing::oracle::match_exhaustive(dets, gts, t, sorted);
      MatchFlags m = match_detections(boxes, gts, t);
      ASSERT_EQ(m.true_positive, flags);
      auto got = average_precision(m.true_positive, m.scores, m.n_gt);
      auto want = testing::oracle::ap_exhaustive(flags, gts.size());
      ASSERT_EQ(got.has_value(), want.has_value());
      if (got) {
        EXPECT_NEAR(*got, *want, 1e-12);
        EXPECT_GE(*got, 0.0);
        EXPECT_LE(*got, 1.0);
      }
    }
  }
}

TEST(Ap, AddingFalsePositiveAtBottomNeverHelps) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<bool> flags;
    std::vector<double> scores;
    for (int i = 0; i < 6; ++i) {
      flags.push_back(rng() % 2 == 0);
      scores.push_back(1.0 - 0.1 * i);
    }
    const std::size_t n_gt = 6;
    const double before = *average_precision(flags, scores, n_gt);
    flags.push_back(false);
    scores.push_back(0.01);
    EXPECT_LE(*average_precision(flags, scores, n_gt), before + 1e-15);
  }
}

std::vector<ThresholdAp> uniform_table(double value) {
  std::vector<ThresholdAp> t;
  for (double th : coco_thresholds()) t.push_back({th, {value, value}});
  return t;
}

TEST(Map, Examples) {
  EXPECT_DOUBLE_EQ(map_40_95(uniform_table(1.0)), 1.0);
  auto half = uniform_table(1.0);
  for (std::size_t i = 6; i < 12; ++i) half[i].per_class = {0.0, 0.0};
  EXPECT_DOUBLE_EQ(map_40_95(half), 0.5);
  auto absent = uniform_table(0.8);
  for (auto& row : absent) row.per_class.push_back(std::nullopt);
  EXPECT_DOUBLE_EQ(map_40_95(absent), 0.8);
}

TEST(Map, WrongThresholdSetThrows) {
  auto t = uniform_table(1.0);
  t.pop_back();
  EXPECT_THROW(map_40_95(t), ProtocolError);
  auto shifted = uniform_table(1.0);
  shifted[3].threshold = 0.56;
  EXPECT_THROW(map_40_95(shifted), ProtocolError);
}

TEST(Evaluate, PerfectDetectionsScoreOne) {
  std::vector<ImageEval> images;
  std::mt19937_64 rng(23);
  for (int i = 0; i < 5; ++i) {
    ImageEval img;
    for (std::size_t k = 0; k < 2; ++k) {
      BBox b = testing::oracle::random_small_box(rng);
      img.ground_truth.push_back({b, k});
      img.detections.push_back({b, k, 0.9, k});
    }
    images.push_back(img);
  }
  EvalReport r = evaluate(images, {"a", "b", "c"});
  EXPECT_DOUBLE_EQ(r.map, 1.0);
  EXPECT_DOUBLE_EQ(r.precision, 1.0);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
  EXPECT_FALSE(r.table[0].per_class[2].has_value());
  auto j = r.to_json();
  EXPECT_EQ(j["summary"]["AP50"], 1.0);
  EXPECT_TRUE(j["per_class_ap"]["c"][0].is_null());
  EXPECT_NE(r.table_text().find("mAP40:95"), std::string::npos);
}

TEST(Evaluate, PrecisionRecallAtFixedOperatingPoint) {
  ImageEval img;
  img.ground_truth = {{{0.3, 0.3, 0.2, 0.2}, 0}, {{0.7, 0.7, 0.2, 0.2}, 0}};
  img.detections = {{{0.3, 0.3, 0.2, 0.2}, 0, 0.9, 0},
                    {{0.3, 0.3, 0.2, 0.2}, 0, 0.8, 1},
                    {{0.7, 0.7, 0.2, 0.2}, 0, 0.1, 2}};
  EvalReport r = evaluate({img}, {"a"});
  EXPECT_DOUBLE_EQ(r.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.recall, 0.5);
}

TEST(Evaluate, NoDetectionsGivesZero) {
  ImageEval img;
  img.ground_truth = {{{0.3, 0.3, 0.2, 0.2}, 0}};
  EvalReport r = evaluate({img}, {"a"});
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.recall, 0.0);
  EXPECT_EQ(r.map, 0.0);
}

}  // namespace
}  // namespace spdet::metrics
