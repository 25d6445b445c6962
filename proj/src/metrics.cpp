// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "spdet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "spdet/errors.hpp"

namespace spdet::metrics {

const std::vector<double>& coco_thresholds() {
  static const std::vector<double> values = [] {
    std::vector<double> v;
    for (int p = 40; p <= 95; p += 5) v.push_back(p / 100.0);
    return v;
  }();
  return values;
}

namespace {

std::vector<std::size_t> score_order(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

MatchFlags match_detections(const std::vector<ScoredBox>& dets, const std::vector<BBox>& gts, double iou_threshold) {
  std::vector<double> raw(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) raw[i] = dets[i].score;
  MatchFlags out;
  out.n_gt = gts.size();
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t i : score_order(raw)) {
    int best = -1;
    double best_iou = iou_threshold;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double v = iou(dets[i].box, gts[g]);
      if (v >= best_iou && (best < 0 || v > best_iou)) {
        best = static_cast<int>(g);
        best_iou = v;
      }
    }
    if (best >= 0) taken[static_cast<std::size_t>(best)] = true;
    out.true_positive.push_back(best >= 0);
    out.scores.push_back(dets[i].score);
    out.matched_gt.push_back(best);
  }
  return out;
}

std::optional<double> average_precision(const std::vector<bool>& true_positive, const std::vector<double>& scores,
                                        std::size_t n_gt) {
  if (n_gt == 0) return std::nullopt;
  if (true_positive.size() != scores.size()) throw DimensionError("average_precision: flags and scores differ");
  const std::vector<std::size_t> order = score_order(scores);
  std::vector<double> precision, recall;
  double tp = 0.0, fp = 0.0;
  for (std::size_t i : order) {
    (true_positive[i] ? tp : fp) += 1.0;
    precision.push_back(tp / (tp + fp));
    recall.push_back(tp / static_cast<double>(n_gt));
  }
  // Monotone precision envelope from the right.
  for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double total = 0.0;
  std::size_t cursor = 0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    while (cursor < recall.size() && recall[cursor] < r) ++cursor;
    if (cursor < recall.size()) total += precision[cursor];
  }
  return total / 101.0;
}

double map_40_95(const std::vector<ThresholdAp>& table) {
  const auto& expected = coco_thresholds();
  if (table.size() != expected.size()) {
    throw ProtocolError("mAP needs exactly " + std::to_string(expected.size()) + " IoU thresholds, got " +
                        std::to_string(table.size()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (std::abs(table[i].threshold - expected[i]) > 1e-12) {
      throw ProtocolError("mAP threshold " + std::to_string(i) + " is " + std::to_string(table[i].threshold));
    }
    double sum = 0.0;
    std::size_t present = 0;
    for (const auto& ap : table[i].per_class) {
      if (!ap) continue;
      sum += *ap;
      ++present;
    }
    total += present ? sum / static_cast<double>(present) : 0.0;
  }
  return total / static_cast<double>(table.size());
}

double EvalReport::ap_at(double threshold) const {
  for (const ThresholdAp& row : table) {
    if (std::abs(row.threshold - threshold) > 1e-12) continue;
    double sum = 0.0;
    std::size_t present = 0;
    for (const auto& ap : row.per_class) {
      if (!ap) continue;
      sum += *ap;
      ++present;
    }
    return present ? sum / static_cast<double>(present) : 0.0;
  }
  throw ProtocolError("no AP row at IoU " + std::to_string(threshold));
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json per_class = nlohmann::json::object();
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    nlohmann::json row = nlohmann::json::array();
    for (const ThresholdAp& t : table) {
      if (t.per_class[c]) {
        row.push_back(*t.per_class[c]);
      } else {
        row.push_back(nullptr);
      }
    }
    per_class[class_names[c]] = row;
  }
  nlohmann::json summary = nlohmann::json::object();
  for (int p : {40, 50, 60, 70, 80, 90}) summary["AP" + std::to_string(p)] = ap_at(p / 100.0);
  return {{"precision", precision},
          {"recall", recall},
          {"thresholds", coco_thresholds()},
          {"per_class_ap", per_class},
          {"summary", summary},
          {"map_40_95", map},
          {"no_ground_truth", !has_ground_truth}};
}

std::string EvalReport::table_text() const {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s%-10s%-8s%-8s%-8s%-8s%-8s%-8s%-10s\n", "Precision", "Recall", "AP40", "AP50",
                "AP60", "AP70", "AP80", "AP90", "mAP40:95");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-10.1f%-10.1f%-8.1f%-8.1f%-8.1f%-8.1f%-8.1f%-8.1f%-10.1f\n", 100 * precision,
                100 * recall, 100 * ap_at(0.40), 100 * ap_at(0.50), 100 * ap_at(0.60), 100 * ap_at(0.70),
                100 * ap_at(0.80), 100 * ap_at(0.90), 100 * map);
  out += buf;
  return out;
}

EvalReport evaluate(const std::vector<ImageEval>& images, const std::vector<std::string>& class_names,
                    double precision_iou, double precision_score) {
  const std::size_t n_classes = class_names.size();
  EvalReport report;
  report.class_names = class_names;

  auto per_class = [&](const ImageEval& img, std::size_t c) {
    std::vector<ScoredBox> dets;
    std::vector<BBox> gts;
    for (const auto& d : img.detections)
      if (d.class_id == c) dets.push_back({d.box, d.score});
    for (const auto& g : img.ground_truth)
      if (g.label == c) gts.push_back(g.box);
    return std::pair{dets, gts};
  };

  for (double t : coco_thresholds()) {
    ThresholdAp row{t, {}};
    for (std::size_t c = 0; c < n_classes; ++c) {
      std::vector<bool> flags;
      std::vector<double> scores;
      std::size_t n_gt = 0;
      for (const ImageEval& img : images) {
        auto [dets, gts] = per_class(img, c);
        MatchFlags m = match_detections(dets, gts, t);
        flags.insert(flags.end(), m.true_positive.begin(), m.true_positive.end());
        scores.insert(scores.end(), m.scores.begin(), m.scores.end());
        n_gt += m.n_gt;
      }
      row.per_class.push_back(average_precision(flags, scores, n_gt));
    }
    report.table.push_back(std::move(row));
  }
  report.map = map_40_95(report.table);
  report.has_ground_truth = std::ranges::any_of(images, [](const ImageEval& img) { return !img.ground_truth.empty(); });

  double tp = 0.0, n_det = 0.0, n_gt = 0.0;
  for (const ImageEval& img : images) {
    for (std::size_t c = 0; c < n_classes; ++c) {
      auto [dets, gts] = per_class(img, c);
      std::erase_if(dets, [&](const ScoredBox& d) { return d.score < precision_score; });
      MatchFlags m = match_detections(dets, gts, precision_iou);
      tp += static_cast<double>(std::ranges::count(m.true_positive, true));
      n_det += static_cast<double>(dets.size());
      n_gt += static_cast<double>(gts.size());
    }
  }
  report.precision = n_det > 0 ? tp / n_det : 0.0;
  report.recall = n_gt > 0 ? tp / n_gt : 0.0;
  return report;
}

}  // namespace spdet::metrics
