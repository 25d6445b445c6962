// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "spdet/nn.hpp"

#include <cmath>

#include "spdet/errors.hpp"
#include "spdet/ops.hpp"

namespace spdet::nn {

Tensor ParamStore::add(const std::string& name, Tensor tensor, bool decay) {
  if (contains(name)) throw UsageError("parameter registered twice: " + name);
  tensor.set_requires_grad(true);
  entries_.push_back({name, tensor, decay});
  return tensor;
}

const Tensor& ParamStore::at(const std::string& name) const {
  for (const Entry& e : entries_)
    if (e.name == name) return e.tensor;
  throw UsageError("unknown parameter: " + name);
}

Tensor& ParamStore::at(const std::string& name) {
  for (Entry& e : entries_)
    if (e.name == name) return e.tensor;
  throw UsageError("unknown parameter: " + name);
}

bool ParamStore::contains(const std::string& name) const {
  for (const Entry& e : entries_)
    if (e.name == name) return true;
  return false;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const Entry& e : entries_) n += e.tensor.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (Entry& e : entries_) e.tensor.zero_grad();
}

Linear Linear::create(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                      bool with_bias) {
  Linear layer;
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  layer.weight = store.add(name + ".weight", Tensor::uniform({in, out}, rng, -bound, bound), true);
  if (with_bias) layer.bias = store.add(name + ".bias", Tensor::zeros({out}), false);
  return layer;
}

Tensor Linear::forward(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  return bias.defined() ? add_row(y, bias) : y;
}

LayerNorm LayerNorm::create(ParamStore& store, const std::string& name, std::size_t width) {
  LayerNorm ln;
  ln.gain = store.add(name + ".gain", Tensor::full({width}, 1.0), false);
  ln.bias = store.add(name + ".bias", Tensor::zeros({width}), false);
  return ln;
}

Tensor LayerNorm::forward(const Tensor& x) const { return layer_norm(x, gain, bias, eps); }

FeedForward FeedForward::create(ParamStore& store, const std::string& name, std::size_t width, Rng& rng) {
  FeedForward ffn;
  ffn.up = Linear::create(store, name + ".up", width, kExpansion * width, rng);
  ffn.down = Linear::create(store, name + ".down", kExpansion * width, width, rng);
  return ffn;
}

Tensor FeedForward::forward(const Tensor& x) const { return down.forward(gelu(up.forward(x))); }

Tensor feed_forward(const Tensor& x, const FeedForward& weights) { return weights.forward(x); }

AttentionWeights AttentionWeights::create(ParamStore& store, const std::string& name, std::size_t width,
                                          std::size_t heads, Rng& rng) {
  if (heads == 0 || width % heads != 0) {
    throw ConfigError("attention " + name + ": width " + std::to_string(width) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  AttentionWeights w;
  w.query = Linear::create(store, name + ".q", width, width, rng);
  w.key = Linear::create(store, name + ".k", width, width, rng);
  w.value = Linear::create(store, name + ".v", width, width, rng);
  w.output = Linear::create(store, name + ".o", width, width, rng);
  w.heads = heads;
  return w;
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionWeights& weights,
                            const std::vector<bool>& key_mask) {
  const std::size_t d = q.cols();
  const std::size_t heads = weights.heads;
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("multi_head_attention: width " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (k.cols() != d) throw DimensionError("multi_head_attention: query/key widths differ");
  if (k.rows() != v.rows()) throw DimensionError("multi_head_attention: key/value row counts differ");
  if (k.rows() == 0) throw DimensionError("multi_head_attention: no keys");
  const std::size_t dv = v.cols();
  if (dv % heads != 0) throw ConfigError("multi_head_attention: value width not divisible by heads");

  const Tensor qp = weights.query.forward(q);
  const Tensor kp = weights.key.forward(k);
  const Tensor vp = weights.value.forward(v);
  const std::size_t dh = d / heads;
  const std::size_t dvh = dv / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<Tensor> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = heads == 1 ? qp : slice_cols(qp, h * dh, (h + 1) * dh);
    Tensor kh = heads == 1 ? kp : slice_cols(kp, h * dh, (h + 1) * dh);
    Tensor vh = heads == 1 ? vp : slice_cols(vp, h * dvh, (h + 1) * dvh);
    Tensor attn = softmax_rows(scale(matmul_nt(qh, kh), inv_scale), key_mask);
    outputs.push_back(matmul(attn, vh));
  }
  Tensor merged = heads == 1 ? outputs.front() : concat_cols(outputs);
  return weights.output.forward(merged);
}

Conv2d Conv2d::create(ParamStore& store, const std::string& name, std::size_t in_channels, std::size_t out_channels,
                      std::size_t kernel, std::size_t stride, Rng& rng) {
  Conv2d conv;
  const std::size_t fan_in = kernel * kernel * in_channels;
  conv.weight = store.add(name + ".weight",
                          Tensor::randn({fan_in, out_channels}, rng, std::sqrt(2.0 / static_cast<double>(fan_in))),
                          true);
  conv.bias = store.add(name + ".bias", Tensor::zeros({out_channels}), false);
  conv.kernel = kernel;
  conv.stride = stride;
  conv.pad = kernel / 2;
  return conv;
}

Tensor Conv2d::forward(const Tensor& x) const {
  const std::size_t h = x.dim(0), w = x.dim(1);
  const std::size_t ho = (h + 2 * pad - kernel) / stride + 1;
  const std::size_t wo = (w + 2 * pad - kernel) / stride + 1;
  Tensor cols = im2col(x, kernel, stride, pad);
  Tensor y = add_row(matmul(cols, weight), bias);
  return reshape(y, {ho, wo, weight.cols()});
}

}  // namespace spdet::nn
