// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dzsl/autodiff.hpp"
#include "dzsl/rng.hpp"

#include <vector>

namespace dzsl {

/// Coefficients of the Gaussian posterior q(x_{t-1} | x_t, x_0):
/// mean = x0_coef * x_0 + xt_coef * x_t, variance = variance * I.
struct PosteriorCoefficients {
  double x0_coef = 0.0;
  double xt_coef = 0.0;
  double variance = 0.0;
};

/// Discrete noise schedule over steps 1..T. Index 0 of the cumulative
/// quantities refers to clean data (alpha_bar(0) = 1, n2d(0) = 0).
class DiffusionSchedule {
 public:
  /// Variance-preserving discretization: alpha_bar(t_i) =
  /// exp(-0.5 t_i^2 (beta_max - beta_min) - t_i beta_min) with t_i = i/T.
  static DiffusionSchedule vp(int steps, double beta_min = 0.1, double beta_max = 20.0);
  /// Arbitrary per-step variances in [0, 1).
  static DiffusionSchedule from_betas(std::vector<double> betas);

  int steps() const noexcept { return static_cast<int>(betas_.size()); }
  double beta(int t) const;
  double alpha(int t) const { return 1.0 - beta(t); }
  double alpha_bar(int t) const;
  /// Noise-to-data ratio 1 - sqrt(alpha_bar(t)).
  double n2d(int t) const;
  PosteriorCoefficients posterior(int t) const;

  const std::vector<double>& betas() const noexcept { return betas_; }
  const std::vector<double>& alpha_bars() const noexcept { return alpha_bars_; }
  const std::vector<double>& n2d_ratios() const noexcept { return n2d_; }

 private:
  explicit DiffusionSchedule(std::vector<double> betas);
  void check_step(int t, int lo) const;

  std::vector<double> betas_;       // beta_1..beta_T at [0..T-1]
  std::vector<double> alpha_bars_;  // alpha_bar_0..alpha_bar_T
  std::vector<double> n2d_;         // kappa_0..kappa_T
};

struct NoisedBatch {
  Matrix x_t;
  int t = 0;
  Matrix eps;  // the standard-normal draws that produced x_t
};

/// One-shot marginal q(x_t | x_0) = N(sqrt(abar_t) x_0, (1 - abar_t) I).
NoisedBatch forward_sample(const DiffusionSchedule& schedule, const Matrix& x0, int t, Rng& rng);

/// Single transition q(x_t | x_{t-1}) = N(sqrt(1 - beta_t) x_{t-1}, beta_t I).
Matrix forward_step(const DiffusionSchedule& schedule, const Matrix& x_prev, int t, Rng& rng);

/// Draws (x_{t-1}, x_t) jointly from the forward chain: x_{t-1} from the
/// marginal, then one transition. For t = 1, x_{t-1} is x_0 itself.
std::pair<Matrix, Matrix> forward_sample_pair(const DiffusionSchedule& schedule, const Matrix& x0,
                                              int t, Rng& rng);

/// x_{t-1} ~ q(x_{t-1} | x_t, x_0_hat). Deterministic (returns x0_hat) at t = 1.
Matrix posterior_sample(const DiffusionSchedule& schedule, const Matrix& x0_hat,
                        const Matrix& x_t, int t, Rng& rng);

/// Same draw as posterior_sample with externally supplied noise, keeping the
/// result differentiable with respect to `x0_hat`.
ad::Var posterior_reparam(const DiffusionSchedule& schedule, const ad::Var& x0_hat,
                          const Matrix& x_t, int t, const Matrix& noise);

/// kappa_t ^ gamma.
double n2d_weight(const DiffusionSchedule& schedule, int t, double gamma);

/// Fixed sinusoidal code of the integer step t, replicated over `rows`.
Matrix time_embedding(int t, Eigen::Index rows, int dim);

}  // namespace dzsl
