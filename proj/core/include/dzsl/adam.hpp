// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dzsl/autodiff.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace dzsl {

struct AdamOptions {
  double lr = 5e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Per-parameter moment estimates plus the shared step counter.
struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::int64_t step = 0;

  void save(const std::filesystem::path& dir) const;
  static AdamState load(const std::filesystem::path& dir);
};

/// One bias-corrected Adam update applied in place. Lazily sizes `state`
/// on first use. Throws NonFiniteError on non-finite gradients, leaving
/// parameters and state untouched.
void optimizer_step(std::span<ad::Var> params, std::span<const Matrix> grads, AdamState& state,
                    const AdamOptions& options);

class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamOptions options) : options_(options) {}

  void step(std::span<ad::Var> params, std::span<const Matrix> grads) {
    optimizer_step(params, grads, state_, options_);
  }
  /// Convenience for the common "grad of a scalar then step" pattern.
  void step(std::span<ad::Var> params, std::span<const ad::Var> grads);

  const AdamOptions& options() const noexcept { return options_; }
  const AdamState& state() const noexcept { return state_; }
  AdamState& state() noexcept { return state_; }
  std::int64_t steps() const noexcept { return state_.step; }

 private:
  AdamOptions options_;
  AdamState state_;
};

}  // namespace dzsl
