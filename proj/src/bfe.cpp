// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "spdet/bfe.hpp"

#include "spdet/errors.hpp"
#include "spdet/ops.hpp"

namespace spdet::bfe {

void FeaturePyramid::validate() const {
  if (x_high.rank() != 3 || x_low.rank() != 3) throw DimensionError("pyramid: maps must be [H×W×D]");
  if (x_low.dim(0) != 2 * x_high.dim(0) || x_low.dim(1) != 2 * x_high.dim(1)) {
    throw DimensionError("pyramid: low-level map " + shape_str(x_low.shape()) + " is not twice " +
                         shape_str(x_high.shape()));
  }
}

namespace {

FusionBlock make_block(nn::ParamStore& store, const std::string& name, const EnhancerConfig& c, std::size_t d_text,
                       Rng& rng) {
  FusionBlock b;
  b.w_v = nn::Linear::create(store, name + ".w_v", c.d_high, c.d_shared, rng, false);
  b.w_t = nn::Linear::create(store, name + ".w_t", d_text, c.d_shared, rng, false);
  b.image_to_text = nn::AttentionWeights::create(store, name + ".i2t", c.d_shared, c.heads, rng);
  b.text_to_image = nn::AttentionWeights::create(store, name + ".t2i", c.d_shared, c.heads, rng);
  b.w_p = nn::Linear::create(store, name + ".w_p", c.d_shared, c.d_high, rng, false);
  b.gamma = store.add(name + ".gamma", Tensor::scalar(0.0), false);
  b.norm = nn::LayerNorm::create(store, name + ".norm", c.d_high);
  b.ffn = nn::FeedForward::create(store, name + ".ffn", c.d_high, rng);
  return b;
}

}  // namespace

EnhancerWeights EnhancerWeights::create(nn::ParamStore& store, const std::string& prefix, const EnhancerConfig& config,
                                        Rng& rng) {
  if (config.depth == 0) throw ConfigError("enhancer depth must be >= 1");
  if (config.d_high % config.heads != 0 || config.d_shared % config.heads != 0) {
    throw ConfigError("enhancer widths must be divisible by the head count");
  }
  EnhancerWeights w;
  w.config = config;
  w.pos_encoding =
      store.add(prefix + ".pos_encoding", Tensor::randn({config.grid_h * config.grid_w, config.d_high}, rng, 0.02), false);
  w.self.attention = nn::AttentionWeights::create(store, prefix + ".self.attn", config.d_high, config.heads, rng);
  w.self.norm = nn::LayerNorm::create(store, prefix + ".self.norm", config.d_high);
  w.self.ffn = nn::FeedForward::create(store, prefix + ".self.ffn", config.d_high, rng);
  for (std::size_t i = 0; i < config.depth; ++i) {
    const std::string layer = prefix + ".layer" + std::to_string(i);
    FusionLayer fl;
    fl.scp = make_block(store, layer + ".scp", config, config.d_text_scp, rng);
    fl.dbp = make_block(store, layer + ".dbp", config, config.d_text_dbp, rng);
    w.layers.push_back(std::move(fl));
  }
  return w;
}

std::vector<Tensor> EnhancerWeights::gates(Modality modality) const {
  std::vector<Tensor> out;
  for (const FusionLayer& fl : layers) out.push_back(modality == Modality::kScp ? fl.scp.gamma : fl.dbp.gamma);
  return out;
}

FlattenedFeatures flatten_with_pe(const Tensor& x_high, const Tensor& pe) {
  if (x_high.rank() != 3) throw DimensionError("flatten_with_pe: expected [H×W×D], got " + shape_str(x_high.shape()));
  const std::size_t l = x_high.dim(0) * x_high.dim(1);
  const std::size_t d = x_high.dim(2);
  if (pe.rank() != 2 || pe.rows() != l || pe.cols() != d) {
    throw DimensionError("flatten_with_pe: positional encoding " + shape_str(pe.shape()) + " does not match " +
                         std::to_string(l) + " tokens of width " + std::to_string(d));
  }
  // HWC storage is already row-major over (h, w).
  Tensor flat = reshape(x_high, {l, d});
  return {flat, add(flat, pe)};
}

Tensor self_attend(const Tensor& x_flat, const Tensor& x_pos, const SelfAttentionBlock& weights) {
  if (x_flat.shape() != x_pos.shape()) throw DimensionError("self_attend: flat/positioned shapes differ");
  Tensor x_self = add(nn::multi_head_attention(x_pos, x_pos, x_flat, weights.attention), x_flat);
  return add(weights.ffn.forward(weights.norm.forward(x_self)), x_self);
}

std::pair<Tensor, Tensor> project_shared(const Tensor& x_refined, const Tensor& text, const nn::Linear& w_v,
                                         const nn::Linear& w_t) {
  return {w_v.forward(x_refined), w_t.forward(text)};
}

Tensor cross_attend_bidirectional(const Tensor& x_hat, const Tensor& t_hat, const nn::AttentionWeights& image_to_text,
                                  const nn::AttentionWeights& text_to_image) {
  if (x_hat.cols() != t_hat.cols()) throw DimensionError("cross_attend_bidirectional: shared widths differ");
  Tensor t_guided = nn::multi_head_attention(x_hat, t_hat, t_hat, image_to_text);
  return nn::multi_head_attention(t_guided, x_hat, x_hat, text_to_image);
}

Tensor fuse_residual(const Tensor& x_cross, const Tensor& x_refined, const nn::Linear& w_p, const Tensor& gamma,
                     const nn::LayerNorm& norm, const nn::FeedForward& ffn) {
  Tensor x_proj = w_p.forward(x_cross);
  return ffn.forward(norm.forward(add(mul_scalar(x_proj, gamma), x_refined)));
}

Tensor fusion_step(const Tensor& x_refined, const Tensor& text, const FusionBlock& block) {
  auto [x_hat, t_hat] = project_shared(x_refined, text, block.w_v, block.w_t);
  Tensor x_cross = cross_attend_bidirectional(x_hat, t_hat, block.image_to_text, block.text_to_image);
  return fuse_residual(x_cross, x_refined, block.w_p, block.gamma, block.norm, block.ffn);
}

Tensor enhance(const FeaturePyramid& pyramid, const TextEmbedding& scp, const TextEmbedding& dbp,
               const EnhancerWeights& weights) {
  pyramid.validate();
  if (!scp.embedding.defined() || !dbp.embedding.defined()) throw UsageError("enhance: both text embeddings required");
  const std::size_t h = pyramid.height(), w = pyramid.width();
  const std::size_t d_high = pyramid.x_high.dim(2);

  const FlattenedFeatures f = flatten_with_pe(pyramid.x_high, weights.pos_encoding);
  Tensor x = self_attend(f.flat, f.positioned, weights.self);
  const bool scp_first = weights.config.order == FusionOrder::kScpFirst;
  for (const FusionLayer& layer : weights.layers) {
    if (scp_first) {
      x = fusion_step(x, scp.embedding, layer.scp);
      x = fusion_step(x, dbp.embedding, layer.dbp);
    } else {
      x = fusion_step(x, dbp.embedding, layer.dbp);
      x = fusion_step(x, scp.embedding, layer.scp);
    }
  }
  Tensor spatial = upsample_nearest2x(reshape(x, {h, w, d_high}));
  const std::size_t hl = pyramid.x_low.dim(0), wl = pyramid.x_low.dim(1), dl = pyramid.x_low.dim(2);
  Tensor merged = concat_cols({reshape(pyramid.x_low, {hl * wl, dl}), reshape(spatial, {hl * wl, d_high})});
  return reshape(merged, {hl, wl, dl + d_high});
}

}  // namespace spdet::bfe
