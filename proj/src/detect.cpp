// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "spdet/detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spdet/errors.hpp"
#include "spdet/ops.hpp"

namespace spdet::detect {

HeadWeights HeadWeights::create(nn::ParamStore& store, const std::string& prefix, std::size_t in_channels,
                                std::size_t embed_dim, std::size_t max_bin, Rng& rng) {
  if (max_bin < 1) throw ConfigError("head: need at least two distribution bins");
  HeadWeights w;
  w.embed = nn::Linear::create(store, prefix + ".embed", in_channels, embed_dim, rng);
  w.dist = nn::Linear::create(store, prefix + ".dist", in_channels, kSides * (max_bin + 1), rng);
  w.max_bin = max_bin;
  return w;
}

HeadOutput head_forward(const Tensor& x_final, const Tensor& class_matrix, const HeadWeights& weights) {
  if (x_final.rank() != 3) throw DimensionError("head_forward: expected [H×W×C], got " + shape_str(x_final.shape()));
  const std::size_t h = x_final.dim(0), w = x_final.dim(1), c = x_final.dim(2);
  if (weights.embed.weight.rows() != c) {
    throw DimensionError("head_forward: feature width " + std::to_string(c) + " does not match head input " +
                         std::to_string(weights.embed.weight.rows()));
  }
  if (class_matrix.rank() != 2 || class_matrix.cols() != weights.embed.weight.cols()) {
    throw DimensionError("head_forward: class embeddings " + shape_str(class_matrix.shape()) +
                         " do not match region width " + std::to_string(weights.embed.weight.cols()));
  }
  const Tensor tokens = reshape(x_final, {h * w, c});
  HeadOutput out;
  out.grid_h = h;
  out.grid_w = w;
  out.embeddings = l2_normalize_rows(weights.embed.forward(tokens));
  out.dist_logits = reshape(weights.dist.forward(tokens), {h * w * kSides, weights.max_bin + 1});
  out.class_scores = matmul_nt(out.embeddings, class_matrix);
  return out;
}

namespace {

double expected_bin(std::span<const double> logits) {
  const double m = *std::ranges::max_element(logits);
  double z = 0.0, acc = 0.0;
  for (std::size_t r = 0; r < logits.size(); ++r) {
    const double e = std::exp(logits[r] - m);
    z += e;
    acc += static_cast<double>(r) * e;
  }
  return acc / z;
}

std::pair<double, double> clip_interval(double lo, double hi) {
  lo = std::max(lo, 0.0);
  hi = std::min(hi, 1.0);
  if (hi - lo < kMinExtent) {
    const double mid = std::clamp(0.5 * (lo + hi), 0.5 * kMinExtent, 1.0 - 0.5 * kMinExtent);
    lo = mid - 0.5 * kMinExtent;
    hi = mid + 0.5 * kMinExtent;
  }
  return {lo, hi};
}

}  // namespace

BBox decode_box(GridPos pos, std::span<const double> side_logits, double stride) {
  if (side_logits.size() % kSides != 0 || side_logits.size() < 2 * kSides) {
    throw DimensionError("decode_box: expected 4 sides of at least 2 bins");
  }
  if (!(stride > 0.0)) throw ConfigError("decode_box: stride must be positive");
  const std::size_t bins = side_logits.size() / kSides;
  double d[kSides];
  for (std::size_t s = 0; s < kSides; ++s) d[s] = stride * expected_bin(side_logits.subspan(s * bins, bins));
  const double cx = (static_cast<double>(pos.col) + 0.5) * stride;
  const double cy = (static_cast<double>(pos.row) + 0.5) * stride;
  const auto [x1, x2] = clip_interval(cx - d[0], cx + d[2]);
  const auto [y1, y2] = clip_interval(cy - d[1], cy + d[3]);
  return BBox::from_corners(x1, y1, x2, y2);
}

Tensor decode_corners(const HeadOutput& out, const std::vector<std::size_t>& tokens) {
  const std::size_t k = tokens.size();
  const std::size_t bins = out.dist_logits.cols();
  const double stride = 1.0 / static_cast<double>(out.grid_w);
  std::vector<std::size_t> rows;
  rows.reserve(k * kSides);
  std::vector<double> centres(k * kSides), signs(k * kSides);
  for (std::size_t i = 0; i < k; ++i) {
    const GridPos p = out.position(tokens[i]);
    const double cx = (static_cast<double>(p.col) + 0.5) * stride;
    const double cy = (static_cast<double>(p.row) + 0.5) * stride;
    const double c[kSides] = {cx, cy, cx, cy};
    const double s[kSides] = {-stride, -stride, stride, stride};
    for (std::size_t side = 0; side < kSides; ++side) {
      rows.push_back(tokens[i] * kSides + side);
      centres[i * kSides + side] = c[side];
      signs[i * kSides + side] = s[side];
    }
  }
  std::vector<double> bin_values(bins);
  for (std::size_t r = 0; r < bins; ++r) bin_values[r] = static_cast<double>(r);
  Tensor probs = softmax_rows(gather_rows(out.dist_logits, rows));
  Tensor expect = reshape(matmul(probs, Tensor::from({bins, 1}, std::move(bin_values))), {k, kSides});
  return add(Tensor::from({k, kSides}, std::move(centres)), mul(expect, Tensor::from({k, kSides}, std::move(signs))));
}

AssignedTargets assign_targets(const std::vector<GroundTruth>& gts, std::size_t grid_h, std::size_t grid_w,
                               std::size_t max_bin) {
  if (grid_h == 0 || grid_w == 0) throw ConfigError("assign_targets: empty grid");
  const std::size_t n_tokens = grid_h * grid_w;
  const double sx = 1.0 / static_cast<double>(grid_w), sy = 1.0 / static_cast<double>(grid_h);
  auto centre_of = [&](std::size_t t) {
    return std::pair{(static_cast<double>(t % grid_w) + 0.5) * sx, (static_cast<double>(t / grid_w) + 0.5) * sy};
  };
  auto inside = [&](std::size_t t, const BBox& b) {
    const auto [x, y] = centre_of(t);
    return x >= b.x1() && x <= b.x2() && y >= b.y1() && y <= b.y2();
  };
  auto better = [&](std::size_t a, std::size_t b) {
    // Does ground truth `a` take precedence over `b` on a shared token?
    const double aa = gts[a].box.area(), ab = gts[b].box.area();
    if (aa != ab) return aa < ab;
    if (gts[a].label != gts[b].label) return gts[a].label < gts[b].label;
    return a < b;
  };

  constexpr std::size_t kFree = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> owner(n_tokens, kFree);
  for (std::size_t g = 0; g < gts.size(); ++g) {
    const BBox& b = gts[g].box;
    if (!b.valid()) throw InputError("assign_targets: ground-truth box needs positive extent");
    const auto col = static_cast<std::ptrdiff_t>(std::clamp(std::floor(b.cx * grid_w), 0.0, grid_w - 1.0));
    const auto row = static_cast<std::ptrdiff_t>(std::clamp(std::floor(b.cy * grid_h), 0.0, grid_h - 1.0));
    const std::ptrdiff_t offsets[5][2] = {{0, 0}, {-1, 0}, {1, 0}, {0, -1}, {0, 1}};
    for (const auto& [dr, dc] : offsets) {
      const std::ptrdiff_t r = row + dr, c = col + dc;
      if (r < 0 || c < 0 || r >= static_cast<std::ptrdiff_t>(grid_h) || c >= static_cast<std::ptrdiff_t>(grid_w)) continue;
      const auto t = static_cast<std::size_t>(r) * grid_w + static_cast<std::size_t>(c);
      if ((dr != 0 || dc != 0) && !inside(t, b)) continue;
      if (owner[t] == kFree || better(g, owner[t])) owner[t] = g;
    }
  }
  // Every ground truth must keep at least one token.
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (std::ranges::find(owner, g) != owner.end()) continue;
    std::size_t best = kFree;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n_tokens; ++t) {
      if (owner[t] != kFree) continue;
      const auto [x, y] = centre_of(t);
      const double d = (x - gts[g].box.cx) * (x - gts[g].box.cx) + (y - gts[g].box.cy) * (y - gts[g].box.cy);
      if (d < best_d) {
        best_d = d;
        best = t;
      }
    }
    if (best != kFree) owner[best] = g;
  }

  AssignedTargets out;
  const double hi = static_cast<double>(max_bin);
  for (std::size_t t = 0; t < n_tokens; ++t) {
    if (owner[t] == kFree) continue;
    const GroundTruth& gt = gts[owner[t]];
    const auto [x, y] = centre_of(t);
    const double raw[kSides] = {(x - gt.box.x1()) / sx, (y - gt.box.y1()) / sy, (gt.box.x2() - x) / sx,
                                (gt.box.y2() - y) / sy};
    for (double d : raw) {
      if (d < 0.0 || d > hi) out.clamped = true;
      out.dfl_targets.push_back(std::clamp(d, 0.0, hi));
    }
    out.tokens.push_back(t);
    out.labels.push_back(gt.label);
    out.gt_index.push_back(owner[t]);
    out.boxes.push_back(gt.box);
  }
  return out;
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold, double score_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) throw ConfigError("nms: iou threshold must lie in (0, 1)");
  if (!(score_threshold > 0.0 && score_threshold < 1.0)) throw ConfigError("nms: score threshold must lie in (0, 1)");
  std::erase_if(dets, [&](const Detection& d) { return d.score < score_threshold; });
  std::ranges::stable_sort(dets, [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.token_index < b.token_index;
  });
  std::vector<Detection> kept;
  for (const Detection& d : dets) {
    const bool suppressed = std::ranges::any_of(kept, [&](const Detection& k) {
      return k.class_id == d.class_id && iou(k.box, d.box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

std::vector<Detection> detections_from_head(const HeadOutput& out, const DecodeOptions& options) {
  if (!(options.temperature > 0.0)) throw ConfigError("detection temperature must be positive");
  const std::size_t n_cols = out.class_scores.cols();
  const std::size_t bins = out.dist_logits.cols();
  const double stride = 1.0 / static_cast<double>(out.grid_w);
  const auto scores = out.class_scores.values();
  const auto logits = out.dist_logits.values();
  std::vector<Detection> candidates;
  for (std::size_t t = 0; t < out.tokens(); ++t) {
    const auto row = scores.subspan(t * n_cols, n_cols);
    if (options.background_column) {
      const std::size_t bg = *options.background_column;
      const auto best = static_cast<std::size_t>(std::ranges::max_element(row) - row.begin());
      if (best == bg) continue;
    }
    const BBox box = decode_box(out.position(t), logits.subspan(t * kSides * bins, kSides * bins), stride);
    for (std::size_t j = 0; j < n_cols; ++j) {
      if (options.background_column && j == *options.background_column) continue;
      const double score = 1.0 / (1.0 + std::exp(-row[j] / options.temperature));
      if (score >= options.score_threshold) candidates.push_back({box, j, score, t});
    }
  }
  std::vector<Detection> kept = nms(std::move(candidates), options.iou_threshold, options.score_threshold);
  if (kept.size() > options.max_detections) kept.resize(options.max_detections);
  return kept;
}

nlohmann::json detection_to_json(const std::string& image_id, const Detection& det,
                                 const std::vector<std::string>& class_names) {
  return {{"image_id", image_id},
          {"class", det.class_id < class_names.size() ? class_names[det.class_id] : std::to_string(det.class_id)},
          {"cx", det.box.cx},
          {"cy", det.box.cy},
          {"w", det.box.w},
          {"h", det.box.h},
          {"score", det.score}};
}

}  // namespace spdet::detect
