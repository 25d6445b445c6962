// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "spdet/box.hpp"
#include "spdet/detect.hpp"

namespace spdet::metrics {

using spdet::iou;

inline constexpr double kPrecisionIou = 0.40;
inline constexpr double kPrecisionScore = 0.25;

/// {0.40, 0.45, …, 0.95}
const std::vector<double>& coco_thresholds();

struct ScoredBox {
  BBox box;
  double score = 0.0;
};

struct MatchFlags {
  std::vector<bool> true_positive;  // aligned with `scores`, score-descending
  std::vector<double> scores;
  std::vector<int> matched_gt;      // -1 for false positives
  std::size_t n_gt = 0;
};

/// Greedy one-to-one matching for one image and class: each detection (highest
/// score first) takes the unmatched ground truth of highest IoU ≥ `iou_threshold`.
MatchFlags match_detections(const std::vector<ScoredBox>& dets, const std::vector<BBox>& gts, double iou_threshold);

/// 101-point interpolated AP. nullopt when n_gt = 0.
std::optional<double> average_precision(const std::vector<bool>& true_positive, const std::vector<double>& scores,
                                        std::size_t n_gt);

struct ThresholdAp {
  double threshold = 0.0;
  std::vector<std::optional<double>> per_class;  // nullopt: class absent from ground truth
};

/// Mean over thresholds of the per-threshold mean over present classes.
/// Throws ProtocolError unless the thresholds are exactly coco_thresholds().
double map_40_95(const std::vector<ThresholdAp>& table);

struct ImageEval {
  std::vector<detect::Detection> detections;
  std::vector<detect::GroundTruth> ground_truth;
};

struct EvalReport {
  std::vector<std::string> class_names;
  std::vector<ThresholdAp> table;
  double precision = 0.0;
  double recall = 0.0;
  double map = 0.0;
  bool has_ground_truth = false;

  /// Class-mean AP at one of the table thresholds.
  double ap_at(double threshold) const;
  nlohmann::json to_json() const;
  /// Fixed-width summary: Precision, Recall, AP40, AP50, AP60, AP70, AP80, AP90, mAP40:95.
  std::string table_text() const;
};

EvalReport evaluate(const std::vector<ImageEval>& images, const std::vector<std::string>& class_names,
                    double precision_iou = kPrecisionIou, double precision_score = kPrecisionScore);

}  // namespace spdet::metrics
