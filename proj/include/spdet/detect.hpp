// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "spdet/box.hpp"
#include "spdet/losses.hpp"
#include "spdet/nn.hpp"
#include "spdet/tensor.hpp"

namespace spdet::detect {

inline constexpr std::size_t kDefaultMaxBin = 7;  // R; R + 1 distribution bins per side
inline constexpr std::size_t kSides = 4;          // left, top, right, bottom
inline constexpr double kMinExtent = 1e-6;
inline constexpr double kDefaultIouThreshold = 0.5;
inline constexpr double kDefaultScoreThreshold = 0.25;
inline constexpr std::size_t kDefaultMaxDetections = 100;

struct GridPos {
  std::size_t row = 0;
  std::size_t col = 0;
};

struct HeadWeights {
  nn::Linear embed;  // [C × D_e]
  nn::Linear dist;   // [C × 4(R+1)]
  std::size_t max_bin = kDefaultMaxBin;

  static HeadWeights create(nn::ParamStore& store, const std::string& prefix, std::size_t in_channels,
                            std::size_t embed_dim, std::size_t max_bin, Rng& rng);
};

/// Per-token outputs of the head over an [H×W×C] feature map.
struct HeadOutput {
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  Tensor embeddings;    // [T × D_e], unit rows
  Tensor dist_logits;   // [4T × (R+1)], row 4t + side
  Tensor class_scores;  // [T × N], cosine similarities

  std::size_t tokens() const { return grid_h * grid_w; }
  std::size_t max_bin() const { return dist_logits.cols() - 1; }
  GridPos position(std::size_t token) const { return {token / grid_w, token % grid_w}; }
};

/// `class_matrix` holds one unit row per class.
HeadOutput head_forward(const Tensor& x_final, const Tensor& class_matrix, const HeadWeights& weights);

/// Expected bin value of each side times `stride` gives the distance from the
/// token centre to that side; the box is clipped to the unit square keeping
/// extents of at least kMinExtent.
BBox decode_box(GridPos pos, std::span<const double> side_logits, double stride);

/// Differentiable, unclipped decoding of selected tokens as [K×4] corners (x1, y1, x2, y2).
Tensor decode_corners(const HeadOutput& out, const std::vector<std::size_t>& tokens);

struct GroundTruth {
  BBox box;
  std::size_t label = 0;
};

struct AssignedTargets {
  std::vector<std::size_t> tokens;   // positive token indices, ascending
  std::vector<std::size_t> labels;   // y_k per positive
  std::vector<std::size_t> gt_index; // which ground truth each positive regresses
  std::vector<BBox> boxes;           // b_i per positive
  std::vector<double> dfl_targets;   // 4 per positive, in stride units, clamped into [0, R]
  bool clamped = false;              // some target fell outside [0, R]

  std::size_t count() const { return tokens.size(); }
};

/// Centre cell plus in-box 4-neighbours; the smallest box wins shared tokens
/// (then the lower label). A box left without tokens takes its nearest free token.
AssignedTargets assign_targets(const std::vector<GroundTruth>& gts, std::size_t grid_h, std::size_t grid_w,
                               std::size_t max_bin = kDefaultMaxBin);

struct Detection {
  BBox box;
  std::size_t class_id = 0;
  double score = 0.0;
  std::size_t token_index = 0;
};

/// Class-wise greedy suppression. Throws ConfigError unless both thresholds lie in (0, 1).
std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold, double score_threshold);

struct DecodeOptions {
  double temperature = loss::kDefaultTemperature;
  double score_threshold = kDefaultScoreThreshold;
  double iou_threshold = kDefaultIouThreshold;
  std::size_t max_detections = kDefaultMaxDetections;
  /// Column of `class_scores` holding the background prompt, if any. Tokens whose
  /// best match is background emit nothing.
  std::optional<std::size_t> background_column;
};

/// Multi-label detections from every token: score = sigmoid(cosine / τ) per class.
std::vector<Detection> detections_from_head(const HeadOutput& out, const DecodeOptions& options);

nlohmann::json detection_to_json(const std::string& image_id, const Detection& det,
                                 const std::vector<std::string>& class_names);

}  // namespace spdet::detect
