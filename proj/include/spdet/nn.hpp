// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "spdet/tensor.hpp"

namespace spdet::nn {

/// Named, ordered collection of trainable leaves.
///
/// Entries alias the tensors held by the module structs, so in-place updates
/// through the store are seen by every forward pass.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
    bool decay;  // subject to decoupled weight decay
  };

  Tensor add(const std::string& name, Tensor tensor, bool decay);
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  bool contains(const std::string& name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<Entry> entries_;
};

struct Linear {
  Tensor weight;  // [in × out]
  Tensor bias;    // [out], undefined when bias-free

  static Linear create(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                       bool with_bias = true);
  Tensor forward(const Tensor& x) const;
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;
  double eps = 1e-5;

  static LayerNorm create(ParamStore& store, const std::string& name, std::size_t width);
  Tensor forward(const Tensor& x) const;
};

/// Two affine layers with GELU between; hidden width = expansion · d.
struct FeedForward {
  static constexpr std::size_t kExpansion = 4;
  Linear up;
  Linear down;

  static FeedForward create(ParamStore& store, const std::string& name, std::size_t width, Rng& rng);
  Tensor forward(const Tensor& x) const;
};

/// Projection set of one multi-head attention block.
struct AttentionWeights {
  Linear query;   // [d × d]
  Linear key;     // [d × d]
  Linear value;   // [d_v × d_v]
  Linear output;  // [d_v × d_v]
  std::size_t heads = 1;

  static AttentionWeights create(ParamStore& store, const std::string& name, std::size_t width, std::size_t heads,
                                 Rng& rng);
};

/// Per head softmax(q kᵀ / sqrt(d/heads)) v, heads concatenated, then the output
/// projection. `key_mask` (one flag per key row) hides padded keys.
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionWeights& weights,
                            const std::vector<bool>& key_mask = {});

Tensor feed_forward(const Tensor& x, const FeedForward& weights);

/// 3×3-style convolution over an [H×W×C] map via im2col; weight is [k·k·C × C_out].
struct Conv2d {
  Tensor weight;
  Tensor bias;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 1;

  static Conv2d create(ParamStore& store, const std::string& name, std::size_t in_channels,
                       std::size_t out_channels, std::size_t kernel, std::size_t stride, Rng& rng);
  Tensor forward(const Tensor& x) const;
};

}  // namespace spdet::nn
