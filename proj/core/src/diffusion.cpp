// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#include "dzsl/diffusion.hpp"

#include "dzsl/errors.hpp"

#include <cmath>
#include <string>

namespace dzsl {

DiffusionSchedule DiffusionSchedule::vp(int steps, double beta_min, double beta_max) {
  if (steps < 1) throw InvalidArgument("diffusion schedule needs at least one step");
  if (!(beta_min > 0.0) || !(beta_max >= beta_min)) {
    throw InvalidArgument("VP schedule requires 0 < beta_min <= beta_max");
  }
  auto log_alpha_bar = [&](double s) { return -0.5 * s * s * (beta_max - beta_min) - s * beta_min; };
  std::vector<double> betas;
  betas.reserve(steps);
  for (int i = 1; i <= steps; ++i) {
    const double s_prev = static_cast<double>(i - 1) / steps;
    const double s_cur = static_cast<double>(i) / steps;
    betas.push_back(-std::expm1(log_alpha_bar(s_cur) - log_alpha_bar(s_prev)));
  }
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (!(betas[i] > 0.0 && betas[i] < 1.0)) {
      throw InvalidArgument("VP schedule produced beta_" + std::to_string(i + 1) +
                            " outside (0, 1)");
    }
  }
  return DiffusionSchedule(std::move(betas));
}

DiffusionSchedule DiffusionSchedule::from_betas(std::vector<double> betas) {
  if (betas.empty()) throw InvalidArgument("diffusion schedule needs at least one step");
  for (double b : betas) {
    if (!(b >= 0.0 && b < 1.0)) throw InvalidArgument("beta values must lie in [0, 1)");
  }
  return DiffusionSchedule(std::move(betas));
}

DiffusionSchedule::DiffusionSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  alpha_bars_.assign(betas_.size() + 1, 1.0);
  n2d_.assign(betas_.size() + 1, 0.0);
  for (std::size_t t = 1; t <= betas_.size(); ++t) {
    alpha_bars_[t] = alpha_bars_[t - 1] * (1.0 - betas_[t - 1]);
    n2d_[t] = 1.0 - std::sqrt(alpha_bars_[t]);
  }
}

void DiffusionSchedule::check_step(int t, int lo) const {
  if (t < lo || t > steps()) {
    throw RangeError("diffusion step " + std::to_string(t) + " outside [" + std::to_string(lo) +
                     ", " + std::to_string(steps()) + "]");
  }
}

double DiffusionSchedule::beta(int t) const {
  check_step(t, 1);
  return betas_[t - 1];
}

double DiffusionSchedule::alpha_bar(int t) const {
  check_step(t, 0);
  return alpha_bars_[t];
}

double DiffusionSchedule::n2d(int t) const {
  check_step(t, 0);
  return n2d_[t];
}

PosteriorCoefficients DiffusionSchedule::posterior(int t) const {
  check_step(t, 1);
  // alpha_bar_0 = 1 makes the first step exact; skip the rounding of b / b.
  if (t == 1) return {1.0, 0.0, 0.0};
  const double abar_t = alpha_bars_[t];
  const double abar_prev = alpha_bars_[t - 1];
  const double b = betas_[t - 1];
  const double denom = 1.0 - abar_t;
  if (!(denom > 0.0)) throw RangeError("posterior undefined where alpha_bar_t = 1");
  PosteriorCoefficients c;
  c.x0_coef = std::sqrt(abar_prev) * b / denom;
  c.xt_coef = std::sqrt(1.0 - b) * (1.0 - abar_prev) / denom;
  c.variance = (1.0 - abar_prev) / denom * b;
  return c;
}

NoisedBatch forward_sample(const DiffusionSchedule& schedule, const Matrix& x0, int t, Rng& rng) {
  if (t < 1 || t > schedule.steps()) {
    throw RangeError("forward_sample: step " + std::to_string(t) + " outside [1, " +
                     std::to_string(schedule.steps()) + "]");
  }
  if (!x0.allFinite()) throw NonFiniteError("forward_sample: non-finite x_0");
  NoisedBatch out;
  out.t = t;
  out.eps = randn(x0.rows(), x0.cols(), rng);
  const double abar = schedule.alpha_bar(t);
  out.x_t = std::sqrt(abar) * x0 + std::sqrt(1.0 - abar) * out.eps;
  return out;
}

Matrix forward_step(const DiffusionSchedule& schedule, const Matrix& x_prev, int t, Rng& rng) {
  const double b = schedule.beta(t);
  return std::sqrt(1.0 - b) * x_prev + std::sqrt(b) * randn(x_prev.rows(), x_prev.cols(), rng);
}

std::pair<Matrix, Matrix> forward_sample_pair(const DiffusionSchedule& schedule, const Matrix& x0,
                                              int t, Rng& rng) {
  if (t < 1 || t > schedule.steps()) {
    throw RangeError("forward_sample_pair: step " + std::to_string(t) + " out of range");
  }
  Matrix prev = t == 1 ? x0 : forward_sample(schedule, x0, t - 1, rng).x_t;
  Matrix cur = forward_step(schedule, prev, t, rng);
  return {std::move(prev), std::move(cur)};
}

Matrix posterior_sample(const DiffusionSchedule& schedule, const Matrix& x0_hat, const Matrix& x_t,
                        int t, Rng& rng) {
  if (t < 1 || t > schedule.steps()) {
    throw RangeError("posterior_sample: step " + std::to_string(t) + " outside [1, " +
                     std::to_string(schedule.steps()) + "]");
  }
  if (x0_hat.rows() != x_t.rows() || x0_hat.cols() != x_t.cols()) {
    throw DimensionError("posterior_sample: x0_hat and x_t shapes differ");
  }
  if (t == 1) return x0_hat;
  const auto c = schedule.posterior(t);
  return c.x0_coef * x0_hat + c.xt_coef * x_t +
         std::sqrt(c.variance) * randn(x_t.rows(), x_t.cols(), rng);
}

ad::Var posterior_reparam(const DiffusionSchedule& schedule, const ad::Var& x0_hat,
                          const Matrix& x_t, int t, const Matrix& noise) {
  if (t < 1 || t > schedule.steps()) throw RangeError("posterior_reparam: step out of range");
  if (t == 1) return x0_hat;
  const auto c = schedule.posterior(t);
  Matrix offset = c.xt_coef * x_t + std::sqrt(c.variance) * noise;
  return ad::add(ad::scale(x0_hat, c.x0_coef), ad::constant(std::move(offset)));
}

double n2d_weight(const DiffusionSchedule& schedule, int t, double gamma) {
  if (t < 1 || t > schedule.steps()) throw RangeError("n2d_weight: step out of range");
  if (gamma < 0.0) throw InvalidArgument("n2d_weight: gamma must be >= 0");
  if (gamma == 0.0) return 1.0;
  return std::pow(schedule.n2d(t), gamma);
}

Matrix time_embedding(int t, Eigen::Index rows, int dim) {
  if (dim <= 0 || dim % 2 != 0) throw InvalidArgument("time embedding dim must be even");
  RowVector code(dim);
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / half);
    code(2 * i) = std::sin(t * freq);
    code(2 * i + 1) = std::cos(t * freq);
  }
  return code.replicate(rows, 1);
}

}  // namespace dzsl
