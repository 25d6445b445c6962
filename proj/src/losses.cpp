// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "spdet/losses.hpp"

#include <cmath>
#include <numbers>

#include "spdet/errors.hpp"
#include "spdet/ops.hpp"

namespace spdet::loss {

namespace {

constexpr double kAspectCoeff = 4.0 / (std::numbers::pi * std::numbers::pi);
constexpr double kAlphaFloor = 1e-15;
constexpr double kAreaEps = 1e-12;

}  // namespace

LossResult contrastive_loss(const Tensor& scores, const std::vector<std::size_t>& labels, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("contrastive temperature must be positive");
  if (labels.empty()) return {Tensor::scalar(0.0), LossStatus::kNoPositives};
  if (scores.rank() != 2 || scores.rows() != labels.size()) {
    throw DimensionError("contrastive_loss: " + std::to_string(labels.size()) + " labels for scores " +
                         shape_str(scores.shape()));
  }
  for (std::size_t y : labels) {
    if (y >= scores.cols()) throw InputError("contrastive_loss: label out of range");
  }
  Tensor log_p = log_softmax_rows(scale(scores, 1.0 / temperature));
  return {scale(mean(pick_cols(log_p, labels)), -1.0), LossStatus::kOk};
}

double ciou(const BBox& pred, const BBox& gt) {
  if (!pred.valid() || !gt.valid()) throw InputError("ciou: boxes need positive width and height");
  const double value = iou(pred, gt);
  const double cw = std::max(pred.x2(), gt.x2()) - std::min(pred.x1(), gt.x1());
  const double ch = std::max(pred.y2(), gt.y2()) - std::min(pred.y1(), gt.y1());
  const double c2 = cw * cw + ch * ch;
  const double rho2 = (pred.cx - gt.cx) * (pred.cx - gt.cx) + (pred.cy - gt.cy) * (pred.cy - gt.cy);
  const double dv = std::atan(gt.w / gt.h) - std::atan(pred.w / pred.h);
  const double v = kAspectCoeff * dv * dv;
  const double alpha = v / std::max((1.0 - value) + v, kAlphaFloor);
  return value - rho2 / c2 - alpha * v;
}

Tensor ciou(const Tensor& pred, const Tensor& gt) {
  if (pred.rank() != 2 || pred.cols() != 4 || pred.shape() != gt.shape()) {
    throw DimensionError("ciou: expected matching [K×4] boxes, got " + shape_str(pred.shape()) + " and " +
                         shape_str(gt.shape()));
  }
  auto col = [](const Tensor& t, std::size_t c) { return slice_cols(t, c, c + 1); };
  const Tensor px1 = col(pred, 0), py1 = col(pred, 1), px2 = col(pred, 2), py2 = col(pred, 3);
  const Tensor gx1 = col(gt, 0), gy1 = col(gt, 1), gx2 = col(gt, 2), gy2 = col(gt, 3);

  const Tensor pw = sub(px2, px1), ph = sub(py2, py1);
  const Tensor gw = sub(gx2, gx1), gh = sub(gy2, gy1);
  const Tensor iw = clamp_min(sub(minimum(px2, gx2), maximum(px1, gx1)), 0.0);
  const Tensor ih = clamp_min(sub(minimum(py2, gy2), maximum(py1, gy1)), 0.0);
  const Tensor inter = mul(iw, ih);
  const Tensor uni = add_scalar(sub(add(mul(pw, ph), mul(gw, gh)), inter), kAreaEps);
  const Tensor iou_t = div(inter, uni);

  const Tensor cw = sub(maximum(px2, gx2), minimum(px1, gx1));
  const Tensor ch = sub(maximum(py2, gy2), minimum(py1, gy1));
  const Tensor c2 = add_scalar(add(square(cw), square(ch)), kAreaEps);
  const Tensor dx = scale(sub(add(px1, px2), add(gx1, gx2)), 0.5);
  const Tensor dy = scale(sub(add(py1, py2), add(gy1, gy2)), 0.5);
  const Tensor rho2 = add(square(dx), square(dy));

  const Tensor dv = sub(atan(div(gw, gh)), atan(div(pw, ph)));
  const Tensor v = scale(square(dv), kAspectCoeff);
  const Tensor alpha = div(v, clamp_min(add(add_scalar(scale(iou_t, -1.0), 1.0), v), kAlphaFloor));
  return sub(sub(iou_t, div(rho2, c2)), mul(alpha, v));
}

DflTargets dfl_targets(const std::vector<double>& targets, std::size_t max_bin) {
  if (max_bin < 1) throw ConfigError("dfl: need at least two bins");
  DflTargets out;
  const double hi = static_cast<double>(max_bin);
  for (double t : targets) {
    if (!std::isfinite(t)) throw NumericError("dfl: non-finite target");
    if (t < 0.0 || t > hi) {
      out.status = LossStatus::kTargetClamped;
      t = std::clamp(t, 0.0, hi);
    }
    const std::size_t r = std::min(static_cast<std::size_t>(std::floor(t)), max_bin - 1);
    out.lower.push_back(r);
    out.weight_lower.push_back(static_cast<double>(r) + 1.0 - t);
  }
  return out;
}

Tensor dfl_sides(const Tensor& logits, const DflTargets& targets) {
  if (logits.rank() != 2 || logits.rows() != targets.lower.size()) {
    throw DimensionError("dfl: " + std::to_string(targets.lower.size()) + " targets for logits " +
                         shape_str(logits.shape()));
  }
  const std::size_t bins = logits.cols();
  std::vector<double> w(logits.rows() * bins, 0.0);
  for (std::size_t s = 0; s < logits.rows(); ++s) {
    const std::size_t r = targets.lower[s];
    if (r + 1 >= bins) throw DimensionError("dfl: target bin exceeds logits width");
    w[s * bins + r] = targets.weight_lower[s];
    w[s * bins + r + 1] = 1.0 - targets.weight_lower[s];
  }
  return scale(row_sum(mul(log_softmax_rows(logits), Tensor::from(logits.shape(), std::move(w)))), -1.0);
}

LossResult dfl(const Tensor& logits, const std::vector<double>& targets) {
  if (targets.size() != 4 || logits.rank() != 2 || logits.rows() != 4) {
    throw DimensionError("dfl: expected 4 sides");
  }
  DflTargets t = dfl_targets(targets, logits.cols() - 1);
  return {mean(dfl_sides(logits, t)), t.status};
}

LossResult bbox_loss(const Tensor& ciou_values, const Tensor& dfl_values, const Tensor& weights) {
  if (ciou_values.numel() == 0) return {Tensor::scalar(0.0), LossStatus::kNoPositives};
  if (ciou_values.shape() != dfl_values.shape() || ciou_values.shape() != weights.shape()) {
    throw DimensionError("bbox_loss: per-positive terms must share a shape");
  }
  double total_weight = 0.0;
  for (double s : weights.values()) total_weight += s;
  if (total_weight == 0.0) return {Tensor::scalar(0.0), LossStatus::kZeroWeight};
  Tensor per_box = add(add_scalar(scale(ciou_values, -1.0), 1.0), dfl_values);
  return {div(sum(mul(per_box, weights)), sum(weights)), LossStatus::kOk};
}

Tensor total_loss(const Tensor& contrast, const Tensor& bbox) { return add(contrast, bbox); }

}  // namespace spdet::loss
