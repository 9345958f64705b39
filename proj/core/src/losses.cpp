// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#include "dzsl/losses.hpp"

#include "dzsl/errors.hpp"

#include <cmath>

namespace dzsl {
namespace {

using ad::Var;

// Guards the norm's derivative when a critic has zero input gradient.
constexpr double kNormEps = 1e-12;

ScoreFn bind_critic(const Critic& critic, std::span<const Var> conditioning) {
  std::vector<Var> cond(conditioning.begin(), conditioning.end());
  return [&critic, cond = std::move(cond)](const Var& x) {
    std::vector<Var> inputs;
    inputs.reserve(cond.size() + 1);
    inputs.push_back(x);
    inputs.insert(inputs.end(), cond.begin(), cond.end());
    return critic.score(std::span<const Var>(inputs));
  };
}

double pow_or_one(double base, double exponent) {
  return exponent == 0.0 ? 1.0 : std::pow(base, exponent);
}

}  // namespace

Var wasserstein_term(const ScoreFn& score, const Var& real, const Var& fake) {
  if (real.rows() == 0 || fake.rows() == 0) throw InvalidArgument("wasserstein_term: empty batch");
  if (real.rows() != fake.rows()) throw DimensionError("wasserstein_term: batch sizes differ");
  return ad::sub(ad::mean(score(real)), ad::mean(score(fake)));
}

Var wasserstein_term(const Critic& critic, std::span<const Var> real, std::span<const Var> fake) {
  if (real.empty() || real.front().rows() == 0) throw InvalidArgument("wasserstein_term: empty batch");
  if (fake.empty() || real.front().rows() != fake.front().rows()) {
    throw DimensionError("wasserstein_term: batch sizes differ");
  }
  return ad::sub(ad::mean(critic.score(real)), ad::mean(critic.score(fake)));
}

Var gradient_penalty(const ScoreFn& score, const Matrix& real, const Matrix& fake,
                     const Matrix& alpha) {
  if (real.rows() != fake.rows() || real.cols() != fake.cols()) {
    throw DimensionError("gradient_penalty: real and fake shapes differ");
  }
  if (alpha.rows() != real.rows() || alpha.cols() != 1) {
    throw DimensionError("gradient_penalty: alpha must be [B x 1]");
  }
  if (real.rows() == 0) throw InvalidArgument("gradient_penalty: empty batch");
  Matrix mixed = (real.array().colwise() * alpha.col(0).array()) +
                 (fake.array().colwise() * (1.0 - alpha.col(0).array()));
  const Var x_hat = ad::leaf(std::move(mixed));
  const Var scores = score(x_hat);
  const Var g = ad::grad(ad::sum(scores), std::span<const Var>(&x_hat, 1), /*create_graph=*/true)[0];
  if (!g.value().allFinite()) throw NonFiniteError("gradient_penalty: non-finite critic gradient");
  const Var norms = ad::sqrt(ad::add_scalar(ad::sum_cols(ad::square(g)), kNormEps));
  return ad::mean(ad::square(ad::add_scalar(norms, -1.0)));
}

Var gradient_penalty(const ScoreFn& score, const Matrix& real, const Matrix& fake, Rng& rng) {
  return gradient_penalty(score, real, fake, rand_uniform(real.rows(), 1, 0.0, 1.0, rng));
}

Var gradient_penalty(const Critic& critic, const Matrix& real, const Matrix& fake,
                     std::span<const Var> conditioning, const Matrix& alpha) {
  return gradient_penalty(bind_critic(critic, conditioning), real, fake, alpha);
}

Var mutual_loss(const Var& w_adv, const Var& w_diff, const Var& w_rep, double kappa, double gamma) {
  const double weight = pow_or_one(kappa, gamma);
  const Var diff_terms = ad::add(ad::abs(ad::sub(w_diff, w_adv)), ad::abs(ad::sub(w_diff, w_rep)));
  return ad::add(ad::scale(diff_terms, weight), ad::abs(ad::sub(w_adv, w_rep)));
}

double mutual_loss(double w_adv, double w_diff, double w_rep, double kappa, double gamma) {
  const double weight = pow_or_one(kappa, gamma);
  return weight * (std::abs(w_diff - w_adv) + std::abs(w_diff - w_rep)) + std::abs(w_adv - w_rep);
}

Objective critic_objective(const FeatureCritics& critics, const FeatureCriticBatch& batch,
                           const LossWeights& weights) {
  if (critics.adv == nullptr) throw InvalidArgument("critic_objective: the adversarial critic is required");
  const bool use_diff = weights.use_diff && critics.diff != nullptr;
  const bool use_rep = weights.use_rep && critics.rep != nullptr;

  const Var a = ad::constant(batch.cond.a);
  const Var r0 = ad::constant(batch.cond.r0);
  const Var v_t = ad::constant(batch.cond.v_t);
  const Var temb = ad::constant(batch.cond.temb);

  Objective out;
  out.terms.kappa_gamma = pow_or_one(batch.kappa, weights.gamma);

  // Adversarial: (v0, a)
  const Var adv_cond[] = {a};
  const Var w_adv = ad::sub(ad::mean(critics.adv->score({ad::constant(batch.v0), a})),
                            ad::mean(critics.adv->score({ad::constant(batch.fake_v0), a})));
  const Var gp_adv =
      gradient_penalty(*critics.adv, batch.v0, batch.fake_v0, adv_cond, batch.alpha_adv);
  Var total = ad::sub(w_adv, ad::scale(gp_adv, weights.lambda_gp_adv));
  out.terms.w_adv = w_adv.item();
  out.terms.gp_adv = gp_adv.item();

  Var w_diff;
  if (use_diff) {
    const Var diff_cond[] = {v_t, r0, a, temb};
    w_diff = ad::sub(
        ad::mean(critics.diff->score({ad::constant(batch.v_prev), v_t, r0, a, temb})),
        ad::mean(critics.diff->score({ad::constant(batch.fake_prev), v_t, r0, a, temb})));
    const Var gp_diff =
        gradient_penalty(*critics.diff, batch.v_prev, batch.fake_prev, diff_cond, batch.alpha_diff);
    total = ad::add(total, ad::sub(w_diff, ad::scale(gp_diff, weights.lambda_gp_diff)));
    out.terms.w_diff = w_diff.item();
    out.terms.gp_diff = gp_diff.item();
  }

  Var w_rep;
  if (use_rep) {
    const Var rep_cond[] = {r0};
    w_rep = ad::sub(ad::mean(critics.rep->score({ad::constant(batch.v0), r0})),
                    ad::mean(critics.rep->score({ad::constant(batch.fake_v0), r0})));
    const Var gp_rep =
        gradient_penalty(*critics.rep, batch.v0, batch.fake_v0, rep_cond, batch.alpha_rep);
    total = ad::add(total, ad::sub(w_rep, ad::scale(gp_rep, weights.lambda_gp_rep)));
    out.terms.w_rep = w_rep.item();
    out.terms.gp_rep = gp_rep.item();
  }

  if (weights.lambda_mu != 0.0 && (use_diff || use_rep)) {
    // Pairs that involve a disabled critic drop out.
    Var l_mu;
    auto accumulate = [&l_mu](const Var& term) { l_mu = l_mu.defined() ? ad::add(l_mu, term) : term; };
    if (use_diff) accumulate(ad::scale(ad::abs(ad::sub(w_diff, w_adv)), out.terms.kappa_gamma));
    if (use_diff && use_rep) {
      accumulate(ad::scale(ad::abs(ad::sub(w_diff, w_rep)), out.terms.kappa_gamma));
    }
    if (use_rep) accumulate(ad::abs(ad::sub(w_adv, w_rep)));
    out.terms.l_mu = l_mu.item();
    total = ad::sub(total, ad::scale(l_mu, weights.lambda_mu));
  } else if (use_diff && use_rep) {
    out.terms.l_mu = mutual_loss(out.terms.w_adv, out.terms.w_diff, out.terms.w_rep, batch.kappa,
                                 weights.gamma);
  }

  out.value = total.item();
  out.loss = ad::neg(total);
  return out;
}

Objective generator_objective(const FeatureCritics& critics, const Var& fake_v0,
                              const Var& fake_prev, const FeatureConditioning& cond) {
  if (critics.adv == nullptr) throw InvalidArgument("generator_objective: the adversarial critic is required");
  const Var a = ad::constant(cond.a);
  const Var r0 = ad::constant(cond.r0);
  Var total = ad::mean(critics.adv->score({fake_v0, a}));
  if (critics.diff != nullptr) {
    const Var v_t = ad::constant(cond.v_t);
    const Var temb = ad::constant(cond.temb);
    total = ad::add(total, ad::mean(critics.diff->score({fake_prev, v_t, r0, a, temb})));
  }
  if (critics.rep != nullptr) total = ad::add(total, ad::mean(critics.rep->score({fake_v0, r0})));
  Objective out;
  out.loss = ad::neg(total);
  out.value = out.loss.item();
  return out;
}

Objective drg_critic_objective(const RepCritics& critics, const RepCriticBatch& batch,
                               const LossWeights& weights) {
  if (critics.adv == nullptr) throw InvalidArgument("drg_critic_objective: the adversarial critic is required");
  const bool use_diff = weights.use_diff && critics.diff != nullptr;
  const Var a = ad::constant(batch.cond.a);
  const Var r_t = ad::constant(batch.cond.r_t);
  const Var temb = ad::constant(batch.cond.temb);

  Objective out;
  const Var adv_cond[] = {a};
  const Var w_adv = ad::sub(ad::mean(critics.adv->score({ad::constant(batch.r0), a})),
                            ad::mean(critics.adv->score({ad::constant(batch.fake_r0), a})));
  const Var gp_adv = gradient_penalty(*critics.adv, batch.r0, batch.fake_r0, adv_cond, batch.alpha_adv);
  Var total = ad::sub(w_adv, ad::scale(gp_adv, weights.lambda_gp_adv));
  out.terms.w_adv = w_adv.item();
  out.terms.gp_adv = gp_adv.item();

  if (use_diff) {
    const Var diff_cond[] = {r_t, a, temb};
    const Var w_diff =
        ad::sub(ad::mean(critics.diff->score({ad::constant(batch.r_prev), r_t, a, temb})),
                ad::mean(critics.diff->score({ad::constant(batch.fake_prev), r_t, a, temb})));
    const Var gp_diff =
        gradient_penalty(*critics.diff, batch.r_prev, batch.fake_prev, diff_cond, batch.alpha_diff);
    total = ad::add(total, ad::sub(w_diff, ad::scale(gp_diff, weights.lambda_gp_diff)));
    out.terms.w_diff = w_diff.item();
    out.terms.gp_diff = gp_diff.item();
  }
  out.value = total.item();
  out.loss = ad::neg(total);
  return out;
}

Objective drg_generator_objective(const RepCritics& critics, const Var& fake_r0,
                                  const Var& fake_prev, const RepConditioning& cond) {
  if (critics.adv == nullptr) throw InvalidArgument("drg_generator_objective: the adversarial critic is required");
  const Var a = ad::constant(cond.a);
  Var total = ad::mean(critics.adv->score({fake_r0, a}));
  if (critics.diff != nullptr) {
    total = ad::add(total, ad::mean(critics.diff->score(
                               {fake_prev, ad::constant(cond.r_t), a, ad::constant(cond.temb)})));
  }
  Objective out;
  out.loss = ad::neg(total);
  out.value = out.loss.item();
  return out;
}

}  // namespace dzsl
