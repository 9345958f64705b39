// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace dzsl {

/// Row-major double matrix. Rows are batch samples throughout the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

namespace ad {

class Var;

/// Graph node. `backward` maps the upstream gradient to one gradient per
/// parent (an undefined Var means "no contribution"). When `smooth` is true
/// the backward is itself built from recorded ops, so it can be
/// differentiated again.
struct Node {
  Matrix value;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<std::vector<Var>(const Var&)> backward;
  bool requires_grad = false;
  bool smooth = true;
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const noexcept { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  /// Direct access for optimizers; never call on a node that is part of a
  /// live graph you still intend to differentiate.
  Matrix& mutable_value() { return node_->value; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  double item() const;

  const std::shared_ptr<Node>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Thread-local recording switch. While disabled, ops produce constants.
bool grad_enabled() noexcept;

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Records an op with a hand-written backward. Pass `smooth = true` only
/// when `backward` is composed of recorded ops.
Var custom_op(Matrix value, std::vector<Var> inputs,
              std::function<std::vector<Var>(const Var&)> backward, bool smooth = false);

Var constant(Matrix value);
Var scalar(double value);
/// Leaf variable; gradients can be requested with respect to it.
Var leaf(Matrix value, bool requires_grad = true);

/// Gradients of the scalar `output` with respect to each of `inputs`.
/// Inputs unreachable from `output` receive zeros. With `create_graph` the
/// returned gradients are themselves differentiable.
std::vector<Var> grad(const Var& output, std::span<const Var> inputs,
                      bool create_graph = false);

// Elementwise / linear algebra. Shapes must match unless noted.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

/// a [r x c] + b [1 x c], broadcast over rows.
Var add_rowvec(const Var& a, const Var& b);
/// [1 x c] -> [rows x c]
Var broadcast_rows(const Var& a, Eigen::Index rows);
/// [r x 1] -> [r x cols]
Var broadcast_cols(const Var& a, Eigen::Index cols);
/// [1 x 1] -> [rows x cols]
Var broadcast_scalar(const Var& a, Eigen::Index rows, Eigen::Index cols);
/// Column sums, [r x c] -> [1 x c].
Var sum_rows(const Var& a);
/// Row sums, [r x c] -> [r x 1].
Var sum_cols(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);

Var hcat(std::span<const Var> parts);
Var hcat(std::initializer_list<Var> parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
/// Places `a` at column `start` of a zero matrix with `total` columns.
Var pad_cols(const Var& a, Eigen::Index start, Eigen::Index total);

Var square(const Var& a);
Var sqrt(const Var& a);
Var reciprocal(const Var& a);
Var abs(const Var& a);
Var leaky_relu(const Var& a, double slope);

// First-order only: their backward uses constant Jacobians.
Var tanh(const Var& a);
Var silu(const Var& a);

}  // namespace ad
}  // namespace dzsl
