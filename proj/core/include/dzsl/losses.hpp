// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dzsl/networks.hpp"
#include "dzsl/rng.hpp"

#include <functional>
#include <span>

namespace dzsl {

/// Maps a (penalized) input batch to [B x 1] critic scores; conditioning
/// inputs are bound inside.
using ScoreFn = std::function<ad::Var(const ad::Var&)>;

/// mean D(real) - mean D(fake).
ad::Var wasserstein_term(const ScoreFn& score, const ad::Var& real, const ad::Var& fake);
ad::Var wasserstein_term(const Critic& critic, std::span<const ad::Var> real,
                         std::span<const ad::Var> fake);

/// mean_rows (||grad_x D(x_hat)||_2 - 1)^2 with x_hat = alpha*real + (1-alpha)*fake
/// and one alpha per row ([B x 1]). The result stays differentiable with
/// respect to everything `score` closes over.
ad::Var gradient_penalty(const ScoreFn& score, const Matrix& real, const Matrix& fake,
                         const Matrix& alpha);
ad::Var gradient_penalty(const ScoreFn& score, const Matrix& real, const Matrix& fake, Rng& rng);

/// Penalty on the first input of `critic`; `conditioning` (the rest of the
/// tuple) is shared by real and fake rows.
ad::Var gradient_penalty(const Critic& critic, const Matrix& real, const Matrix& fake,
                         std::span<const ad::Var> conditioning, const Matrix& alpha);

/// kappa^gamma (|w_diff - w_adv| + |w_diff - w_rep|) + |w_adv - w_rep|.
ad::Var mutual_loss(const ad::Var& w_adv, const ad::Var& w_diff, const ad::Var& w_rep,
                    double kappa, double gamma);
double mutual_loss(double w_adv, double w_diff, double w_rep, double kappa, double gamma);

struct LossWeights {
  double lambda_gp_adv = 10.0;
  double lambda_gp_diff = 10.0;
  double lambda_gp_rep = 10.0;
  double lambda_mu = 1.0;
  double gamma = 1.0;
  bool use_diff = true;
  bool use_rep = true;
};

/// Batch-level values of every critic-side term.
struct CriticTerms {
  double w_adv = 0.0;
  double w_diff = 0.0;
  double w_rep = 0.0;
  double gp_adv = 0.0;
  double gp_diff = 0.0;
  double gp_rep = 0.0;
  double l_mu = 0.0;
  double kappa_gamma = 0.0;
};

struct Objective {
  ad::Var loss;      // minimized by the optimizer
  double value = 0;  // the quantity as written (maximized for critics)
  CriticTerms terms;
};

/// Critic set of the feature generator; disabled critics may be null.
struct FeatureCritics {
  const Critic* adv = nullptr;
  const Critic* diff = nullptr;
  const Critic* rep = nullptr;
};

/// Conditioning shared by real and fake rows at one diffusion step.
struct FeatureConditioning {
  Matrix a;
  Matrix r0;
  Matrix v_t;
  Matrix temb;
};

struct FeatureCriticBatch {
  FeatureConditioning cond;
  Matrix v0;         // real clean features
  Matrix v_prev;     // real v_{t-1}
  Matrix fake_v0;    // generator output, detached
  Matrix fake_prev;  // posterior renoise of fake_v0
  Matrix alpha_adv, alpha_diff, alpha_rep;  // [B x 1] interpolation weights
  double kappa = 0.0;                       // N2D ratio at the batch's t
};

/// Critics maximize L_adv + L_diff + L_rep - lambda_mu L_mu with
/// L_x = W_x - lambda_gp_x * GP_x; `loss` is the negation.
Objective critic_objective(const FeatureCritics& critics, const FeatureCriticBatch& batch,
                           const LossWeights& weights);

/// -(mean D_adv(fake_v0, a) + mean D_diff(fake_prev, v_t, r0, a, t) + mean D_rep(fake_v0, r0)).
/// Only the fake scores carry gradient.
Objective generator_objective(const FeatureCritics& critics, const ad::Var& fake_v0,
                              const ad::Var& fake_prev, const FeatureConditioning& cond);

/// Two-critic variant for the representation generator.
struct RepCritics {
  const Critic* adv = nullptr;
  const Critic* diff = nullptr;
};

struct RepConditioning {
  Matrix a;
  Matrix r_t;
  Matrix temb;
};

struct RepCriticBatch {
  RepConditioning cond;
  Matrix r0;
  Matrix r_prev;
  Matrix fake_r0;
  Matrix fake_prev;
  Matrix alpha_adv, alpha_diff;
};

/// L'_adv + L'_diff (no representation critic, no mutual term); `loss` is the negation.
Objective drg_critic_objective(const RepCritics& critics, const RepCriticBatch& batch,
                               const LossWeights& weights);
Objective drg_generator_objective(const RepCritics& critics, const ad::Var& fake_r0,
                                  const ad::Var& fake_prev, const RepConditioning& cond);

}  // namespace dzsl
