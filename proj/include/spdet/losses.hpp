// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <vector>

#include "spdet/box.hpp"
#include "spdet/tensor.hpp"

namespace spdet::loss {

enum class LossStatus {
  kOk,
  kNoPositives,     // empty positive set, loss defined as 0
  kTargetClamped,   // a DFL target fell outside [0, R]
  kZeroWeight,      // objectness weights summed to 0
};

struct LossResult {
  Tensor value;  // one-element tensor
  LossStatus status = LossStatus::kOk;
};

inline constexpr double kDefaultTemperature = 0.1;

/// -(1/C) Σ_k log softmax(scores_k / τ)[label_k] over the C rows of `scores` [C×N].
LossResult contrastive_loss(const Tensor& scores, const std::vector<std::size_t>& labels,
                            double temperature = kDefaultTemperature);

/// Complete IoU of two boxes. Throws InputError on non-positive extents.
double ciou(const BBox& pred, const BBox& gt);

/// Row-wise CIoU of corner boxes. Both inputs are [K×4] laid out (x1, y1, x2, y2);
/// result is [K×1]. Differentiable w.r.t. `pred`.
Tensor ciou(const Tensor& pred, const Tensor& gt);

struct DflTargets {
  std::vector<std::size_t> lower;   // r per side
  std::vector<double> weight_lower; // r + 1 - t
  LossStatus status = LossStatus::kOk;
};

/// Splits continuous offsets into the two neighbouring bin indices and their
/// interpolation weights, clamping into [0, max_bin].
DflTargets dfl_targets(const std::vector<double>& targets, std::size_t max_bin);

/// Distribution focal loss for [S×(R+1)] logits and S continuous targets.
/// Returns the per-side losses as [S×1].
Tensor dfl_sides(const Tensor& logits, const DflTargets& targets);

/// Mean DFL over the 4 sides of one box: logits [4×(R+1)], 4 targets.
LossResult dfl(const Tensor& logits, const std::vector<double>& targets);

/// (1/Σ s) Σ_i [(1 − ciou_i) + dfl_i] · s_i, inputs all [K×1].
LossResult bbox_loss(const Tensor& ciou_values, const Tensor& dfl_values, const Tensor& weights);

Tensor total_loss(const Tensor& contrast, const Tensor& bbox);

}  // namespace spdet::loss
