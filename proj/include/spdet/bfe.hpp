// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "spdet/nn.hpp"
#include "spdet/tensor.hpp"

namespace spdet::bfe {

/// Two-level output of the image stub: x_high [H×W×D_h], x_low [2H×2W×D_l].
struct FeaturePyramid {
  Tensor x_high;
  Tensor x_low;

  std::size_t height() const { return x_high.dim(0); }
  std::size_t width() const { return x_high.dim(1); }
  void validate() const;
};

enum class Modality { kScp, kDbp };

/// Token-level (SCP) or phrase-level (DBP) text matrix [N_t × D_t].
struct TextEmbedding {
  Tensor embedding;
  Modality modality = Modality::kScp;
};

enum class FusionOrder { kScpFirst, kDbpFirst };

struct EnhancerConfig {
  std::size_t grid_h = 4;
  std::size_t grid_w = 4;
  std::size_t d_high = 32;
  std::size_t d_shared = 32;
  std::size_t d_text_scp = 32;
  std::size_t d_text_dbp = 32;
  std::size_t heads = 4;
  std::size_t depth = 2;
  FusionOrder order = FusionOrder::kScpFirst;
};

/// One text modality's cross-attention fusion: shared-space projections,
/// image->text then text->image attention, back-projection and the gated
/// residual followed by norm + FFN.
struct FusionBlock {
  nn::Linear w_v;  // [D_h × D_shared]
  nn::Linear w_t;  // [D_t × D_shared]
  nn::AttentionWeights image_to_text;
  nn::AttentionWeights text_to_image;
  nn::Linear w_p;  // [D_shared × D_h]
  Tensor gamma;    // one element, starts at 0
  nn::LayerNorm norm;
  nn::FeedForward ffn;
};

struct FusionLayer {
  FusionBlock scp;
  FusionBlock dbp;
};

struct SelfAttentionBlock {
  nn::AttentionWeights attention;
  nn::LayerNorm norm;
  nn::FeedForward ffn;
};

struct EnhancerWeights {
  EnhancerConfig config;
  Tensor pos_encoding;  // [L × D_h], L = grid_h · grid_w
  SelfAttentionBlock self;
  std::vector<FusionLayer> layers;

  static EnhancerWeights create(nn::ParamStore& store, const std::string& prefix, const EnhancerConfig& config,
                                Rng& rng);
  /// Every gate of the given modality, one per layer.
  std::vector<Tensor> gates(Modality modality) const;
};

struct FlattenedFeatures {
  Tensor flat;        // row index = h·W + w
  Tensor positioned;  // flat + PE
};

FlattenedFeatures flatten_with_pe(const Tensor& x_high, const Tensor& pe);

/// MHA(Q=K=x_pos, V=x_flat) + x_flat, then FFN(LayerNorm(·)) + residual.
Tensor self_attend(const Tensor& x_flat, const Tensor& x_pos, const SelfAttentionBlock& weights);

std::pair<Tensor, Tensor> project_shared(const Tensor& x_refined, const Tensor& text, const nn::Linear& w_v,
                                         const nn::Linear& w_t);

/// Image->text attention (queries from the image) followed by text->image
/// attention queried with the guided text. Returns one row per image token.
Tensor cross_attend_bidirectional(const Tensor& x_hat, const Tensor& t_hat, const nn::AttentionWeights& image_to_text,
                                  const nn::AttentionWeights& text_to_image);

/// FFN(LayerNorm(gamma · (x_cross · W_p) + x_refined))
Tensor fuse_residual(const Tensor& x_cross, const Tensor& x_refined, const nn::Linear& w_p, const Tensor& gamma,
                     const nn::LayerNorm& norm, const nn::FeedForward& ffn);

/// Full fusion of one modality against the current image tokens.
Tensor fusion_step(const Tensor& x_refined, const Tensor& text, const FusionBlock& block);

/// Runs the enhancer and returns Concat(X_l, upsample(X_spatial)) as [H_l×W_l×(D_l+D_h)].
Tensor enhance(const FeaturePyramid& pyramid, const TextEmbedding& scp, const TextEmbedding& dbp,
               const EnhancerWeights& weights);

}  // namespace spdet::bfe
