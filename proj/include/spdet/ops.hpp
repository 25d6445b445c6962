// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <vector>

#include "spdet/tensor.hpp"

namespace spdet {

// Linear algebra. All operands are rank-2.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a · bᵀ without materialising the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Elementwise binary ops over identically shaped operands.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
/// Ties route the gradient to `a`.
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);

/// x[n×d] + bias[d] broadcast over rows.
Tensor add_row(const Tensor& x, const Tensor& bias);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);
/// s · x for a one-element tensor s (learnable gates).
Tensor mul_scalar(const Tensor& x, const Tensor& s);

Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor atan(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor square(const Tensor& x);
/// Exact (erf) GELU.
Tensor gelu(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor clamp_min(const Tensor& x, double lo);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// [n×d] -> [n×1]
Tensor row_sum(const Tensor& x);
/// [n×d] -> [n×1]; gradient goes to the first maximal entry.
Tensor row_max(const Tensor& x);
/// [n×d] -> [1×d]
Tensor mean_rows(const Tensor& x);

/// Row-wise softmax stabilised by max subtraction. `key_mask`, when non-empty,
/// has one flag per column; false columns get an additive -inf logit.
Tensor softmax_rows(const Tensor& x, const std::vector<bool>& key_mask = {});
Tensor log_softmax_rows(const Tensor& x);

/// Normalises the last axis of a rank-2 tensor, then applies gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
Tensor l2_normalize_rows(const Tensor& x, double eps = 1e-12);

Tensor reshape(const Tensor& x, Shape shape);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
/// out[i] = x[index[i]]; repeated indices accumulate gradient.
Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& index);
/// out[i] = x[i, column[i]] as [n×1].
Tensor pick_cols(const Tensor& x, const std::vector<std::size_t>& column);

/// Patch extraction for convolution. x is [H×W×C]; result is
/// [Ho·Wo × k·k·C] with zero padding, patch layout (ky, kx, c).
Tensor im2col(const Tensor& x, std::size_t kernel, std::size_t stride, std::size_t pad);
/// [H×W×C] -> [2H×2W×C] nearest neighbour.
Tensor upsample_nearest2x(const Tensor& x);

}  // namespace spdet
