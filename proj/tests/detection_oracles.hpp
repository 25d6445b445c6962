// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

// Exhaustive references for suppression, matching and AP on small inputs.

#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "spdet/box.hpp"
#include "spdet/detect.hpp"

namespace spdet::testing::oracle {

/// Rank order used by greedy NMS: score descending, then token index.
inline std::vector<std::size_t> nms_rank(const std::vector<detect::Detection>& d) {
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::ranges::stable_sort(idx, [&](std::size_t a, std::size_t b) {
    return d[a].score != d[b].score ? d[a].score > d[b].score : d[a].token_index < d[b].token_index;
  });
  return idx;
}

/// Searches every subset for the unique one that is self-consistent under the
/// greedy rule: a box is kept iff no kept, higher-ranked, same-class box overlaps it
/// by more than the threshold.
inline std::vector<detect::Detection> nms_exhaustive(const std::vector<detect::Detection>& all, double iou_t,
                                                     double score_t) {
  std::vector<detect::Detection> d;
  for (const auto& x : all)
    if (x.score >= score_t) d.push_back(x);
  const auto rank = nms_rank(d);
  const std::size_t n = d.size();
  std::vector<detect::Detection> answer;
  int solutions = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    bool consistent = true;
    for (std::size_t p = 0; p < n && consistent; ++p) {
      const std::size_t i = rank[p];
      bool blocked = false;
      for (std::size_t q = 0; q < p; ++q) {
        const std::size_t j = rank[q];
        if ((mask >> j & 1U) && d[j].class_id == d[i].class_id && iou(d[j].box, d[i].box) > iou_t) blocked = true;
      }
      consistent = ((mask >> i & 1U) != 0) == !blocked;
    }
    if (!consistent) continue;
    ++solutions;
    answer.clear();
    for (std::size_t p = 0; p < n; ++p)
      if (mask >> rank[p] & 1U) answer.push_back(d[rank[p]]);
  }
  if (solutions != 1) throw std::logic_error("nms oracle: expected a unique consistent subset");
  return answer;
}

/// Greedy matching restated per detection: the match of detection p is the
/// best-IoU ground truth (lowest index on ties) that clears the threshold and is
/// not the match of any higher-scored detection.
inline std::vector<bool> match_exhaustive(const std::vector<std::pair<BBox, double>>& dets,
                                          const std::vector<BBox>& gts, double t, std::vector<double>& sorted_scores) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return dets[a].second > dets[b].second; });
  std::vector<int> match(dets.size(), -1);
  std::vector<bool> flags;
  sorted_scores.clear();
  for (std::size_t p = 0; p < order.size(); ++p) {
    int best = -1;
    double best_v = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      bool used = false;
      for (std::size_t q = 0; q < p; ++q) used = used || match[q] == static_cast<int>(g);
      const double v = iou(dets[order[p]].first, gts[g]);
      if (!used && v >= t && v > best_v) {
        best = static_cast<int>(g);
        best_v = v;
      }
    }
    match[p] = best;
    flags.push_back(best >= 0);
    sorted_scores.push_back(dets[order[p]].second);
  }
  return flags;
}

/// 101-point AP straight from the definition: at each recall level take the
/// best precision over every cut-off that reaches it.
inline std::optional<double> ap_exhaustive(const std::vector<bool>& flags_sorted, std::size_t n_gt) {
  if (n_gt == 0) return std::nullopt;
  double total = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    double best = 0.0;
    for (std::size_t cut = 1; cut <= flags_sorted.size(); ++cut) {
      const double tp = static_cast<double>(std::count(flags_sorted.begin(), flags_sorted.begin() + cut, true));
      if (tp / n_gt >= r) best = std::max(best, tp / cut);
    }
    total += best;
  }
  return total / 101.0;
}

inline BBox random_small_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> c(0.2, 0.8), s(0.1, 0.4);
  return {c(rng), c(rng), s(rng), s(rng)};
}

}  // namespace spdet::testing::oracle
