// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "spdet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "spdet/errors.hpp"

namespace spdet {

using detail::make_result;
using detail::Node;

namespace {

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 operand, got " + shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

// C[m×n] += A[m×k] · B[k×n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m×n] += A[m×k] · B[n×k]ᵀ
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
  }
}

// C[m×n] += A[k×m]ᵀ · B[k×n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t k, std::size_t m, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

Node& parent(const Node& self, std::size_t i) { return *self.parents[i]; }

template <typename F, typename DF>
Tensor unary(const Tensor& x, const char* op, F f, DF df) {
  auto xs = x.values();
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = f(xs[i]);
  return make_result(x.shape(), std::move(out), {x}, op, [df](const Node& self, std::span<const double> g) {
    Node& px = parent(self, 0);
    if (!px.requires_grad) return;
    auto& gx = px.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(px.value[i], self.value[i]);
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner extents differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  return make_result({m, n}, std::move(out), {a, b}, "matmul", [m, k, n](const Node& self, std::span<const double> g) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) gemm_nt(g.data(), pb.value.data(), pa.grad_buffer().data(), m, n, k);
    if (pb.requires_grad) gemm_tn(pa.value.data(), g.data(), pb.grad_buffer().data(), m, k, n);
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw DimensionError("matmul_nt: inner extents differ " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()) + "^T");
  }
  std::vector<double> out(m * n, 0.0);
  gemm_nt(a.values().data(), b.values().data(), out.data(), m, k, n);
  return make_result({m, n}, std::move(out), {a, b}, "matmul_nt",
                     [m, k, n](const Node& self, std::span<const double> g) {
                       Node& pa = parent(self, 0);
                       Node& pb = parent(self, 1);
                       // dA = G·B, dB = Gᵀ·A
                       if (pa.requires_grad) gemm_nn(g.data(), pb.value.data(), pa.grad_buffer().data(), m, n, k);
                       if (pb.requires_grad) gemm_tn(g.data(), pa.value.data(), pb.grad_buffer().data(), m, n, k);
                     });
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  auto av = a.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return make_result({n, m}, std::move(out), {a}, "transpose", [m, n](const Node& self, std::span<const double> g) {
    Node& pa = parent(self, 0);
    if (!pa.requires_grad) return;
    auto& ga = pa.grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, "add", [](const Node& self, std::span<const double> g) {
    for (std::size_t p = 0; p < 2; ++p) {
      Node& px = parent(self, p);
      if (!px.requires_grad) continue;
      auto& gx = px.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, "sub", [](const Node& self, std::span<const double> g) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      auto& ga = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (pb.requires_grad) {
      auto& gb = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, "mul", [](const Node& self, std::span<const double> g) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      auto& ga = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto& gb = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * pa.value[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "div");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] / bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, "div", [](const Node& self, std::span<const double> g) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      auto& ga = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / pb.value[i];
    }
    if (pb.requires_grad) {
      auto& gb = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * self.value[i] / pb.value[i];
    }
  });
}

namespace {

Tensor select_binary(const Tensor& a, const Tensor& b, bool take_max) {
  const char* op = take_max ? "maximum" : "minimum";
  require_same_shape(a, b, op);
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const bool pick_a = take_max ? av[i] >= bv[i] : av[i] <= bv[i];
    out[i] = pick_a ? av[i] : bv[i];
  }
  return make_result(a.shape(), std::move(out), {a, b}, op, [take_max](const Node& self, std::span<const double> g) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const bool pick_a = take_max ? pa.value[i] >= pb.value[i] : pa.value[i] <= pb.value[i];
      Node& target = pick_a ? pa : pb;
      if (target.requires_grad) target.grad_buffer()[i] += g[i];
    }
  });
}

}  // namespace

Tensor maximum(const Tensor& a, const Tensor& b) { return select_binary(a, b, true); }
Tensor minimum(const Tensor& a, const Tensor& b) { return select_binary(a, b, false); }

Tensor add_row(const Tensor& x, const Tensor& bias) {
  require_rank2(x, "add_row");
  const std::size_t n = x.rows(), d = x.cols();
  if (bias.numel() != d) {
    throw DimensionError("add_row: bias " + shape_str(bias.shape()) + " does not match width of " +
                         shape_str(x.shape()));
  }
  auto xv = x.values(), bv = bias.values();
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = xv[i * d + j] + bv[j];
  return make_result({n, d}, std::move(out), {x, bias}, "add_row", [n, d](const Node& self, std::span<const double> g) {
    Node& px = parent(self, 0);
    Node& pb = parent(self, 1);
    if (px.requires_grad) {
      auto& gx = px.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (pb.requires_grad) {
      auto& gb = pb.grad_buffer();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, "scale", [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double offset) {
  return unary(
      x, "add_scalar", [offset](double v) { return v + offset; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& x, const Tensor& s) {
  if (s.numel() != 1) throw DimensionError("mul_scalar: gate must hold one element, got " + shape_str(s.shape()));
  const double sv = s.item();
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sv * xv[i];
  return make_result(x.shape(), std::move(out), {x, s}, "mul_scalar", [](const Node& self, std::span<const double> g) {
    Node& px = parent(self, 0);
    Node& ps = parent(self, 1);
    if (px.requires_grad) {
      auto& gx = px.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * ps.value[0];
    }
    if (ps.requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * px.value[i];
      ps.grad_buffer()[0] += acc;
    }
  });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(
      x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor atan(const Tensor& x) {
  return unary(
      x, "atan", [](double v) { return std::atan(v); }, [](double v, double) { return 1.0 / (1.0 + v * v); });
}

Tensor sqrt(const Tensor& x) {
  return unary(
      x, "sqrt", [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Tensor square(const Tensor& x) {
  return unary(
      x, "square", [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor gelu(const Tensor& x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      x, "gelu", [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
      [inv_sqrt_2pi](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
        return cdf + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
      });
}

Tensor silu(const Tensor& x) {
  return unary(
      x, "silu", [](double v) { return v / (1.0 + std::exp(-v)); },
      [](double v, double) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 + v * (1.0 - s));
      });
}

Tensor clamp_min(const Tensor& x, double lo) {
  return unary(
      x, "clamp_min", [lo](double v) { return v < lo ? lo : v; }, [lo](double v, double) { return v < lo ? 0.0 : 1.0; });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  return make_result({1}, {acc}, {x}, "sum", [](const Node& self, std::span<const double> g) {
    Node& px = parent(self, 0);
    if (!px.requires_grad) return;
    auto& gx = px.grad_buffer();
    for (double& v : gx) v += g[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor row_sum(const Tensor& x) {
  require_rank2(x, "row_sum");
  const std::size_t n = x.rows(), d = x.cols();
  auto xv = x.values();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i] += xv[i * d + j];
  return make_result({n, 1}, std::move(out), {x}, "row_sum", [n, d](const Node& self, std::span<const double> g) {
    Node& px = parent(self, 0);
    if (!px.requires_grad) return;
    auto& gx = px.grad_buffer();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[i];
  });
}

Tensor row_max(const Tensor& x) {
  require_rank2(x, "row_max");
  const std::size_t n = x.rows(), d = x.cols();
  auto xv = x.values();
  std::vector<double> out(n);
  std::vector<std::size_t> arg(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 1; j < d; ++j)
      if (xv[i * d + j] > xv[i * d + arg[i]]) arg[i] = j;
    out[i] = xv[i * d + arg[i]];
  }
  return make_result({n, 1}, std::move(out), {x}, "row_max",
                     [d, arg = std::move(arg)](const Node& self, std::span<const double> g) {
                       Node& px = parent(self, 0);
                       if (!px.requires_grad) return;
                       auto& gx = px.grad_buffer();
                       for (std::size_t i = 0; i < arg.size(); ++i) gx[i * d + arg[i]] += g[i];
                     });
}

Tensor mean_rows(const Tensor& x) {
  require_rank2(x, "mean_rows");
  const std::size_t n = x.rows(), d = x.cols();
  auto xv = x.values();
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[j] += xv[i * d + j];
  for (double& v : out) v /= static_cast<double>(n);
  return make_result({1, d}, std::move(out), {x}, "mean_rows", [n, d](const Node& self, std::span<const double> g) {
    Node& px = parent(self, 0);
    if (!px.requires_grad) return;
    auto& gx = px.grad_buffer();
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[j] * inv;
  });
}

Tensor softmax_rows(const Tensor& x, const std::vector<bool>& key_mask) {
  require_rank2(x, "softmax_rows");
  const std::size_t n = x.rows(), d = x.cols();
  if (!key_mask.empty() && key_mask.size() != d) {
    throw DimensionError("softmax_rows: mask has " + std::to_string(key_mask.size()) + " entries for width " +
                         std::to_string(d));
  }
  auto keep = [&key_mask](std::size_t j) { return key_mask.empty() || key_mask[j]; };
  bool any_kept = false;
  for (std::size_t j = 0; j < d; ++j) any_kept = any_kept || keep(j);
  if (!any_kept) throw UsageError("softmax_rows: mask removes every column");
  auto xv = x.values();
  std::vector<double> out(n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = xv.data() + i * d;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < d; ++j)
      if (keep(j)) mx = std::max(mx, row[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (!keep(j)) continue;
      out[i * d + j] = std::exp(row[j] - mx);
      total += out[i * d + j];
    }
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] /= total;
  }
  return make_result({n, d}, std::move(out), {x}, "softmax_rows", [n, d](const Node& self, std::span<const double> g) {
    Node& px = parent(self, 0);
    if (!px.requires_grad) return;
    auto& gx = px.grad_buffer();
    for (std::size_t i = 0; i < n; ++i) {
      const double* y = self.value.data() + i * d;
      const double* gr = g.data() + i * d;
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += gr[j] * y[j];
      for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += y[j] * (gr[j] - dot);
    }
  });
}

Tensor log_softmax_rows(const Tensor& x) {
  require_rank2(x, "log_softmax_rows");
  const std::size_t n = x.rows(), d = x.cols();
  auto xv = x.values();
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = xv.data() + i * d;
    const double mx = *std::max_element(row, row + d);
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) total += std::exp(row[j] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = row[j] - lse;
  }
  return make_result({n, d}, std::move(out), {x}, "log_softmax_rows",
                     [n, d](const Node& self, std::span<const double> g) {
                       Node& px = parent(self, 0);
                       if (!px.requires_grad) return;
                       auto& gx = px.grad_buffer();
                       for (std::size_t i = 0; i < n; ++i) {
                         const double* y = self.value.data() + i * d;
                         const double* gr = g.data() + i * d;
                         double gsum = 0.0;
                         for (std::size_t j = 0; j < d; ++j) gsum += gr[j];
                         for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += gr[j] - std::exp(y[j]) * gsum;
                       }
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_rank2(x, "layer_norm");
  const std::size_t n = x.rows(), d = x.cols();
  if (gain.numel() != d || bias.numel() != d) {
    throw DimensionError("layer_norm: gain/bias width does not match " + shape_str(x.shape()));
  }
  if (!(eps > 0.0)) throw ConfigError("layer_norm: eps must be positive");
  auto xv = x.values(), gv = gain.values(), bv = bias.values();
  std::vector<double> xhat(n * d), inv_std(n), out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = xv.data() + i * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (row[j] - mu) * inv_std[i];
      out[i * d + j] = xhat[i * d + j] * gv[j] + bv[j];
    }
  }
  return make_result(
      {n, d}, std::move(out), {x, gain, bias}, "layer_norm",
      [n, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](const Node& self, std::span<const double> g) {
        Node& px = parent(self, 0);
        Node& pg = parent(self, 1);
        Node& pb = parent(self, 2);
        if (pg.requires_grad) {
          auto& gg = pg.grad_buffer();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) gg[j] += g[i * d + j] * xhat[i * d + j];
        }
        if (pb.requires_grad) {
          auto& gb = pb.grad_buffer();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
        }
        if (px.requires_grad) {
          auto& gx = px.grad_buffer();
          const double inv_d = 1.0 / static_cast<double>(d);
          for (std::size_t i = 0; i < n; ++i) {
            double sum_gy = 0.0, sum_gy_xhat = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double gy = g[i * d + j] * pg.value[j];
              sum_gy += gy;
              sum_gy_xhat += gy * xhat[i * d + j];
            }
            for (std::size_t j = 0; j < d; ++j) {
              const double gy = g[i * d + j] * pg.value[j];
              gx[i * d + j] += inv_std[i] * (gy - inv_d * sum_gy - xhat[i * d + j] * inv_d * sum_gy_xhat);
            }
          }
        }
      });
}

Tensor l2_normalize_rows(const Tensor& x, double eps) {
  require_rank2(x, "l2_normalize_rows");
  const std::size_t n = x.rows(), d = x.cols();
  auto xv = x.values();
  std::vector<double> norms(n), out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < d; ++j) ss += xv[i * d + j] * xv[i * d + j];
    norms[i] = std::max(std::sqrt(ss), eps);
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = xv[i * d + j] / norms[i];
  }
  return make_result({n, d}, std::move(out), {x}, "l2_normalize_rows",
                     [n, d, norms = std::move(norms)](const Node& self, std::span<const double> g) {
                       Node& px = parent(self, 0);
                       if (!px.requires_grad) return;
                       auto& gx = px.grad_buffer();
                       for (std::size_t i = 0; i < n; ++i) {
                         const double* y = self.value.data() + i * d;
                         double dot = 0.0;
                         for (std::size_t j = 0; j < d; ++j) dot += g[i * d + j] * y[j];
                         for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += (g[i * d + j] - y[j] * dot) / norms[i];
                       }
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return make_result(std::move(shape), std::move(out), {x}, "reshape", [](const Node& self, std::span<const double> g) {
    Node& px = parent(self, 0);
    if (!px.requires_grad) return;
    auto& gx = px.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank2(x, "slice_cols");
  const std::size_t n = x.rows(), d = x.cols();
  if (begin >= end || end > d) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + "," + std::to_string(end) + ") out of " +
                         shape_str(x.shape()));
  }
  const std::size_t w = end - begin;
  auto xv = x.values();
  std::vector<double> out(n * w);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = xv[i * d + begin + j];
  return make_result({n, w}, std::move(out), {x}, "slice_cols", [n, d, w, begin](const Node& self, std::span<const double> g) {
    Node& px = parent(self, 0);
    if (!px.requires_grad) return;
    auto& gx = px.grad_buffer();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j) gx[i * d + begin + j] += g[i * w + j];
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw UsageError("concat_cols: no operands");
  const std::size_t n = parts.front().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.rows() != n) throw DimensionError("concat_cols: row counts differ");
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(n * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto pv = parts[k].values();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out[i * total + offset + j] = pv[i * widths[k] + j];
    offset += widths[k];
  }
  return make_result({n, total}, std::move(out), parts, "concat_cols",
                     [n, total, widths = std::move(widths)](const Node& self, std::span<const double> g) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         Node& pk = parent(self, k);
                         if (pk.requires_grad) {
                           auto& gk = pk.grad_buffer();
                           for (std::size_t i = 0; i < n; ++i)
                             for (std::size_t j = 0; j < widths[k]; ++j) gk[i * widths[k] + j] += g[i * total + off + j];
                         }
                         off += widths[k];
                       }
                     });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw UsageError("concat_rows: no operands");
  const std::size_t d = parts.front().cols();
  std::vector<std::size_t> sizes;
  std::size_t rows = 0;
  std::vector<double> out;
  for (const Tensor& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.cols() != d) throw DimensionError("concat_rows: column counts differ");
    rows += p.rows();
    sizes.push_back(p.numel());
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  return make_result({rows, d}, std::move(out), parts, "concat_rows",
                     [sizes = std::move(sizes)](const Node& self, std::span<const double> g) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < sizes.size(); ++k) {
                         Node& pk = parent(self, k);
                         if (pk.requires_grad) {
                           auto& gk = pk.grad_buffer();
                           for (std::size_t i = 0; i < sizes[k]; ++i) gk[i] += g[off + i];
                         }
                         off += sizes[k];
                       }
                     });
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& index) {
  require_rank2(x, "gather_rows");
  if (index.empty()) throw UsageError("gather_rows: empty index");
  const std::size_t n = x.rows(), d = x.cols();
  auto xv = x.values();
  std::vector<double> out(index.size() * d);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= n) throw DimensionError("gather_rows: index " + std::to_string(index[i]) + " >= " + std::to_string(n));
    std::copy_n(xv.data() + index[i] * d, d, out.data() + i * d);
  }
  return make_result({index.size(), d}, std::move(out), {x}, "gather_rows",
                     [d, index](const Node& self, std::span<const double> g) {
                       Node& px = parent(self, 0);
                       if (!px.requires_grad) return;
                       auto& gx = px.grad_buffer();
                       for (std::size_t i = 0; i < index.size(); ++i)
                         for (std::size_t j = 0; j < d; ++j) gx[index[i] * d + j] += g[i * d + j];
                     });
}

Tensor pick_cols(const Tensor& x, const std::vector<std::size_t>& column) {
  require_rank2(x, "pick_cols");
  const std::size_t n = x.rows(), d = x.cols();
  if (column.size() != n) throw DimensionError("pick_cols: one column per row required");
  auto xv = x.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (column[i] >= d) throw DimensionError("pick_cols: column out of range");
    out[i] = xv[i * d + column[i]];
  }
  return make_result({n, 1}, std::move(out), {x}, "pick_cols", [d, column](const Node& self, std::span<const double> g) {
    Node& px = parent(self, 0);
    if (!px.requires_grad) return;
    auto& gx = px.grad_buffer();
    for (std::size_t i = 0; i < column.size(); ++i) gx[i * d + column[i]] += g[i];
  });
}

Tensor im2col(const Tensor& x, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (x.rank() != 3) throw DimensionError("im2col: expected [H×W×C], got " + shape_str(x.shape()));
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  if (h + 2 * pad < kernel || w + 2 * pad < kernel || stride == 0) throw DimensionError("im2col: kernel larger than input");
  const std::size_t ho = (h + 2 * pad - kernel) / stride + 1;
  const std::size_t wo = (w + 2 * pad - kernel) / stride + 1;
  const std::size_t patch = kernel * kernel * c;
  // src[i] is the flat input index feeding output slot i, or -1 for padding.
  std::vector<std::ptrdiff_t> src(ho * wo * patch, -1);
  for (std::size_t oy = 0; oy < ho; ++oy)
    for (std::size_t ox = 0; ox < wo; ++ox)
      for (std::size_t ky = 0; ky < kernel; ++ky)
        for (std::size_t kx = 0; kx < kernel; ++kx) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
          const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(h) || ix >= static_cast<std::ptrdiff_t>(w)) continue;
          const std::size_t base = ((oy * wo + ox) * kernel * kernel + ky * kernel + kx) * c;
          for (std::size_t ch = 0; ch < c; ++ch)
            src[base + ch] = (iy * static_cast<std::ptrdiff_t>(w) + ix) * static_cast<std::ptrdiff_t>(c) +
                             static_cast<std::ptrdiff_t>(ch);
        }
  auto xv = x.values();
  std::vector<double> out(src.size(), 0.0);
  for (std::size_t i = 0; i < src.size(); ++i)
    if (src[i] >= 0) out[i] = xv[static_cast<std::size_t>(src[i])];
  return make_result({ho * wo, patch}, std::move(out), {x}, "im2col",
                     [src = std::move(src)](const Node& self, std::span<const double> g) {
                       Node& px = parent(self, 0);
                       if (!px.requires_grad) return;
                       auto& gx = px.grad_buffer();
                       for (std::size_t i = 0; i < src.size(); ++i)
                         if (src[i] >= 0) gx[static_cast<std::size_t>(src[i])] += g[i];
                     });
}

Tensor upsample_nearest2x(const Tensor& x) {
  if (x.rank() != 3) throw DimensionError("upsample_nearest2x: expected [H×W×C], got " + shape_str(x.shape()));
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  auto xv = x.values();
  std::vector<double> out(4 * h * w * c);
  for (std::size_t y = 0; y < 2 * h; ++y)
    for (std::size_t xx = 0; xx < 2 * w; ++xx)
      std::copy_n(xv.data() + ((y / 2) * w + xx / 2) * c, c, out.data() + (y * 2 * w + xx) * c);
  return make_result({2 * h, 2 * w, c}, std::move(out), {x}, "upsample_nearest2x",
                     [h, w, c](const Node& self, std::span<const double> g) {
                       Node& px = parent(self, 0);
                       if (!px.requires_grad) return;
                       auto& gx = px.grad_buffer();
                       for (std::size_t y = 0; y < 2 * h; ++y)
                         for (std::size_t xx = 0; xx < 2 * w; ++xx)
                           for (std::size_t ch = 0; ch < c; ++ch)
                             gx[((y / 2) * w + xx / 2) * c + ch] += g[(y * 2 * w + xx) * c + ch];
                     });
}

}  // namespace spdet
