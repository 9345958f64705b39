// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dzsl/autodiff.hpp"
#include "dzsl/rng.hpp"

#include <string>
#include <vector>

namespace dzsl {

enum class Activation { LeakyRelu, Silu, Tanh };

std::string to_string(Activation act);
Activation activation_from_string(const std::string& name);

/// Fully connected stack. Hidden layers use `activation`; the last layer is
/// linear. Weights are stored [in x out] so that forward is x * W + b.
///
/// Copies are deep: parameters are owned values, never shared graph leaves.
class Mlp {
 public:
  Mlp() = default;
  /// `sizes` = {in, hidden..., out}. Weights and biases are drawn from
  /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Mlp(std::vector<int> sizes, Activation activation, Rng& rng, double leaky_slope = 0.2);

  Mlp(const Mlp& other);
  Mlp& operator=(const Mlp& other);
  Mlp(Mlp&&) noexcept = default;
  Mlp& operator=(Mlp&&) noexcept = default;

  ad::Var forward(const ad::Var& x) const;
  /// Inference without graph recording.
  Matrix forward(const Matrix& x) const;

  /// Read-only view of the parameter leaves (W0, b0, W1, b1, ...).
  const std::vector<ad::Var>& parameters() const noexcept { return params_; }
  /// Parameters for an optimizer; throws FrozenError once frozen.
  std::vector<ad::Var>& trainable_parameters();

  std::size_t parameter_count() const;
  const std::vector<int>& sizes() const noexcept { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  Activation activation() const noexcept { return activation_; }

  void zero_output_layer();
  void freeze() noexcept { frozen_ = true; }
  bool frozen() const noexcept { return frozen_; }

  /// Overwrite parameter values (checkpoint load). Shapes must match.
  void load_values(const std::vector<Matrix>& values);

 private:
  std::vector<int> sizes_;
  Activation activation_ = Activation::LeakyRelu;
  double leaky_slope_ = 0.2;
  std::vector<ad::Var> params_;
  bool frozen_ = false;
};

/// Expected parameter count of an Mlp with the given layer sizes.
std::size_t mlp_parameter_count(const std::vector<int>& sizes);

}  // namespace dzsl
