// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "spdet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "spdet/errors.hpp"

namespace spdet {

namespace {

thread_local bool t_grad_enabled = true;
thread_local std::uint64_t t_next_seq = 1;

std::shared_ptr<detail::Node> new_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor: shape " + shape_str(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
  }
  for (std::size_t extent : shape) {
    if (extent == 0) throw DimensionError("tensor: zero extent in shape " + shape_str(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  node->seq = t_next_seq++;
  return node;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::vector<double>& detail::Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> values(shape_numel(shape), value);
  return Tensor(new_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("tensor: non-finite value in constructor");
  }
  return Tensor(new_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = dist(rng);
  return Tensor(new_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = dist(rng);
  return Tensor(new_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::eye(std::size_t n, bool requires_grad) {
  std::vector<double> values(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) values[i * n + i] = 1.0;
  return Tensor(new_leaf({n, n}, std::move(values), requires_grad));
}

const Shape& Tensor::shape() const {
  if (!node_) throw UsageError("tensor: use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("tensor: axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const double> Tensor::values() const {
  shape();
  return node_->value;
}

std::span<double> Tensor::data() {
  shape();
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) throw UsageError("tensor: item() on " + shape_str(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  shape();
  node_->requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::vector<double> Tensor::grad() const {
  shape();
  if (node_->grad.empty()) return std::vector<double>(node_->value.size(), 0.0);
  return node_->grad;
}

std::span<double> Tensor::grad_data() {
  shape();
  return node_->grad_buffer();
}

void Tensor::zero_grad() {
  if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  shape();
  return Tensor(new_leaf(node_->shape, node_->value, false));
}

const char* Tensor::op_name() const { return node_ ? node_->op : "undefined"; }

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

ComputationTape ComputationTape::record(const Tensor& root) {
  ComputationTape tape;
  if (!root.defined() || !root.requires_grad()) return tape;
  std::unordered_set<const detail::Node*> seen;
  std::vector<std::shared_ptr<detail::Node>> stack{root.node()};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto node = std::move(stack.back());
    stack.pop_back();
    for (const auto& parent : node->parents) {
      if (parent->requires_grad && seen.insert(parent.get()).second) stack.push_back(parent);
    }
    tape.nodes_.push_back(std::move(node));
  }
  // Creation sequence numbers are a topological order of the DAG.
  std::sort(tape.nodes_.begin(), tape.nodes_.end(),
            [](const auto& a, const auto& b) { return a->seq < b->seq; });
  return tape;
}

void ComputationTape::replay_backward() const {
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    detail::Node& node = **it;
    if (!node.backward || node.grad.empty()) continue;
    node.backward(node, node.grad);
  }
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw UsageError("backward: undefined loss");
  if (loss.numel() != 1) {
    throw UsageError("backward: loss must be a scalar, got " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) return;
  ComputationTape tape = ComputationTape::record(loss);
  loss.node()->grad_buffer()[0] += 1.0;
  tape.replay_backward();
  // Interior gradients are scratch space; only leaves keep theirs.
  for (const auto& node : tape.nodes()) {
    if (node->backward) std::vector<double>().swap(node->grad);
  }
}

Tensor detail::make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                           const char* op, BackwardFn fn) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + op);
  }
  auto node = new_leaf(std::move(shape), std::move(values), false);
  node->op = op;
  if (t_grad_enabled) {
    bool any = false;
    for (const Tensor& p : parents) any = any || p.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(parents.size());
      for (const Tensor& p : parents) node->parents.push_back(p.node());
      node->backward = std::move(fn);
    }
  }
  return Tensor(std::move(node));
}

}  // namespace spdet
