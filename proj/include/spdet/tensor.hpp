// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace spdet {

using Shape = std::vector<std::size_t>;
using Rng = std::mt19937_64;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node;
using BackwardFn = std::function<void(const Node& self, std::span<const double> grad_out)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something flows into it
  bool requires_grad = false;
  std::uint64_t seq = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;

  /// Zero-initialised gradient buffer, allocated on first use.
  std::vector<double>& grad_buffer();
};

}  // namespace detail

/// Dense row-major double tensor with optional reverse-mode gradient tracking.
///
/// A Tensor is a shared handle: copies alias the same storage and graph node.
/// Leaves created with requires_grad act as parameters; every op applied to them
/// while grad mode is enabled records a node that `backward` later replays in
/// reverse creation order.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false);
  static Tensor uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad = false);
  static Tensor eye(std::size_t n, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;
  /// Leading extent for rank-2 tensors.
  std::size_t rows() const { return dim(0); }
  std::size_t cols() const { return dim(1); }

  std::span<const double> values() const;
  /// Mutable view for in-place parameter updates. Only meaningful on leaves.
  std::span<double> data();
  double item() const;
  double at(std::size_t i) const { return values()[i]; }
  double at(std::size_t r, std::size_t c) const { return values()[r * cols() + c]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  bool has_grad() const;
  /// Accumulated gradient; zeros if nothing has flowed in yet.
  std::vector<double> grad() const;
  std::span<double> grad_data();
  void zero_grad();

  /// Fresh leaf sharing no graph history (values are copied).
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  const char* op_name() const;
  const std::shared_ptr<detail::Node>& node() const { return node_; }

  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Grad recording is thread-local and on by default.
bool grad_enabled();

/// Disables graph recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Ordered record of the operations reachable from a root, in execution order.
class ComputationTape {
 public:
  static ComputationTape record(const Tensor& root);

  const std::vector<std::shared_ptr<detail::Node>>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }

  /// Visits nodes in exact reverse execution order.
  void replay_backward() const;

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
};

/// Accumulates d(loss)/d(t) into every requires_grad tensor reachable from `loss`.
/// Throws UsageError unless loss holds exactly one element.
void backward(const Tensor& loss);

namespace detail {

/// Builds an op result. Parents are only retained (and `fn` only kept) when grad
/// mode is on and at least one parent requires grad. Throws NumericError when
/// any output value is not finite.
Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                   const char* op, BackwardFn fn);

}  // namespace detail

}  // namespace spdet
