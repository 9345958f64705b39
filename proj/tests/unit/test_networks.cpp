// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#include "dzsl/diffusion.hpp"
#include "dzsl/errors.hpp"
#include "dzsl/losses.hpp"
#include "dzsl/networks.hpp"
#include "dzsl/trainer.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace dzsl;

namespace {

NetworkDims tiny_dims() {
  NetworkDims d;
  d.attr_dim = 3;
  d.feature_dim = 4;
  d.rep_dim = 3;
  d.z_dim = 2;
  d.time_dim = 4;
  d.hidden = 8;
  d.hidden_layers = 2;
  d.steps = 4;
  return d;
}

// Parameters of a dense stack in -> h -> h -> out.
std::size_t dense_count(int in, int h, int out) {
  return static_cast<std::size_t>(in * h + h + h * h + h + h * out + out);
}

}  // namespace

TEST_SUITE("networks") {

TEST_CASE("same seed gives identical parameters") {
  const NetworkDims d = tiny_dims();
  const ModelSet a = init_models(d, 42);
  const ModelSet b = init_models(d, 42);
  const ModelSet c = init_models(d, 43);
  auto same = [](const Mlp& x, const Mlp& y) {
    for (std::size_t i = 0; i < x.parameters().size(); ++i) {
      if (x.parameters()[i].value() != y.parameters()[i].value()) return false;
    }
    return true;
  };
  CHECK(same(a.generator.net(), b.generator.net()));
  CHECK(same(a.rep_generator.net(), b.rep_generator.net()));
  CHECK(same(a.d_adv.net(), b.d_adv.net()));
  CHECK(same(a.d_diff.net(), b.d_diff.net()));
  CHECK(same(a.d_rep.net(), b.d_rep.net()));
  CHECK(same(a.d_rep_adv.net(), b.d_rep_adv.net()));
  CHECK(same(a.d_rep_diff.net(), b.d_rep_diff.net()));
  CHECK_FALSE(same(a.generator.net(), c.generator.net()));
}

TEST_CASE("invalid dims are rejected") {
  NetworkDims d = tiny_dims();
  d.z_dim = 0;
  CHECK_THROWS_AS(init_models(d, 1), InvalidArgument);
  d = tiny_dims();
  d.time_dim = 3;
  CHECK_THROWS_AS(d.validate(), InvalidArgument);
  d = tiny_dims();
  d.steps = 0;
  CHECK_THROWS_AS(d.validate(), InvalidArgument);
}

TEST_CASE("parameter counts match the declared architecture") {
  const NetworkDims d = tiny_dims();
  const ModelSet m = init_models(d, 1);
  const int a = d.attr_dim, v = d.feature_dim, r = d.rep_dim, z = d.z_dim, te = d.time_dim, h = d.hidden;
  CHECK(m.generator.net().parameter_count() == dense_count(a + r + te + v + z, h, v));
  CHECK(m.rep_generator.net().parameter_count() == dense_count(a + te + r + z, h, r));
  CHECK(m.d_adv.net().parameter_count() == dense_count(v + a, h, 1));
  CHECK(m.d_diff.net().parameter_count() == dense_count(v + v + r + a + te, h, 1));
  CHECK(m.d_rep.net().parameter_count() == dense_count(v + r, h, 1));
  CHECK(m.d_rep_adv.net().parameter_count() == dense_count(r + a, h, 1));
  CHECK(m.d_rep_diff.net().parameter_count() == dense_count(r + r + a + te, h, 1));

  const auto arch = describe_architecture(d);
  REQUIRE(arch.size() == 7);
  const Mlp* nets[] = {&m.generator.net(), &m.rep_generator.net(), &m.d_adv.net(),
                       &m.d_diff.net(),    &m.d_rep.net(),         &m.d_rep_adv.net(),
                       &m.d_rep_diff.net()};
  for (std::size_t i = 0; i < arch.size(); ++i) {
    CHECK(arch[i].parameter_count == nets[i]->parameter_count());
    CHECK(arch[i].sizes == nets[i]->sizes());
  }
}

TEST_CASE("initialized critics neither saturate nor blow up") {
  const NetworkDims d = TrainConfig{}.dims(16, 64, 32);
  const ModelSet m = init_models(d, 5);
  Rng rng = make_rng(6);
  const int n = 512;
  auto check_std = [&](const Critic& c) {
    std::vector<Matrix> inputs;
    for (int w : c.input_dims()) inputs.push_back(randn(n, w, rng));
    const Matrix s = c.score(std::span<const Matrix>(inputs));
    const double mean = s.mean();
    const double sd = std::sqrt((s.array() - mean).square().sum() / (n - 1));
    CHECK(sd > 0.01);
    CHECK(sd < 100.0);
  };
  for (const Critic* c : {&m.d_adv, &m.d_diff, &m.d_rep, &m.d_rep_adv, &m.d_rep_diff}) check_std(*c);
}

TEST_CASE("generators are batch consistent and finite") {
  const NetworkDims d = tiny_dims();
  const ModelSet m = init_models(d, 7);
  Rng rng = make_rng(8);
  const int b = 5;
  const Matrix a = randn(b, d.attr_dim, rng), r0 = randn(b, d.rep_dim, rng);
  const Matrix vt = randn(b, d.feature_dim, rng), z = randn(b, d.z_dim, rng);
  const Matrix zr = randn(b, d.z_dim, rng), rt = randn(b, d.rep_dim, rng);
  const Matrix out = m.generator.generate(a, r0, 3, vt, z);
  const Matrix rout = m.rep_generator.generate(a, 2, rt, zr);
  CHECK(out.rows() == b);
  CHECK(out.cols() == d.feature_dim);
  CHECK(rout.cols() == d.rep_dim);
  CHECK(out.allFinite());
  for (int i = 0; i < b; ++i) {
    const Matrix one = m.generator.generate(a.row(i), r0.row(i), 3, vt.row(i), z.row(i));
    CHECK((one - out.row(i)).cwiseAbs().maxCoeff() < 1e-12);
    const Matrix rone = m.rep_generator.generate(a.row(i), 2, rt.row(i), zr.row(i));
    CHECK((rone - rout.row(i)).cwiseAbs().maxCoeff() < 1e-12);
  }
  // Graph and inference paths agree.
  const ad::Var g = m.generator.forward(ad::constant(a), ad::constant(r0), 3, ad::constant(vt),
                                        ad::constant(z));
  CHECK((g.value() - out).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("generator argument checks") {
  const NetworkDims d = tiny_dims();
  const ModelSet m = init_models(d, 9);
  const Matrix a = Matrix::Zero(2, d.attr_dim), r0 = Matrix::Zero(2, d.rep_dim);
  const Matrix vt = Matrix::Zero(2, d.feature_dim), z = Matrix::Zero(2, d.z_dim);
  CHECK_THROWS_AS(m.generator.generate(a, r0, 0, vt, z), RangeError);
  CHECK_THROWS_AS(m.generator.generate(a, r0, 5, vt, z), RangeError);
  CHECK_THROWS_AS(m.rep_generator.generate(a, 5, r0, z), RangeError);
  Matrix bad = a;
  bad(1, 0) = std::nan("");
  CHECK_THROWS_AS(m.generator.generate(bad, r0, 1, vt, z), NonFiniteError);
  CHECK_THROWS_AS(m.generator.generate(a, r0, 1, vt, Matrix::Zero(2, d.z_dim + 1)), DimensionError);
}

TEST_CASE("generator is z-sensitive after a training step") {
  const NetworkDims d = tiny_dims();
  ModelSet m = init_models(d, 10);
  Rng rng = make_rng(11);
  const int b = 6;
  const auto schedule = DiffusionSchedule::vp(4);
  const Matrix a = randn(b, d.attr_dim, rng), r0 = randn(b, d.rep_dim, rng);
  const Matrix vt = randn(b, d.feature_dim, rng);
  FeatureConditioning cond{a, r0, vt, time_embedding(2, b, d.time_dim)};
  const Critic* adv = &m.d_adv;
  auto& params = m.generator.net().trainable_parameters();
  const ad::Var fake = m.generator.forward(ad::constant(a), ad::constant(r0), 2, ad::constant(vt),
                                           ad::constant(randn(b, d.z_dim, rng)));
  const auto obj = generator_objective({adv, nullptr, nullptr}, fake,
                                       posterior_reparam(schedule, fake, vt, 2, randn(b, d.feature_dim, rng)),
                                       cond);
  Adam opt;
  opt.step(params, ad::grad(obj.loss, params));
  const Matrix z1 = randn(b, d.z_dim, rng), z2 = randn(b, d.z_dim, rng);
  const Matrix o1 = m.generator.generate(a, r0, 2, vt, z1);
  const Matrix o2 = m.generator.generate(a, r0, 2, vt, z2);
  CHECK((o1 - o2).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("critic arity, widths and zero head") {
  const NetworkDims d = tiny_dims();
  ModelSet m = init_models(d, 12);
  Rng rng = make_rng(13);
  const ad::Var v = ad::constant(randn(4, d.feature_dim, rng));
  const ad::Var a = ad::constant(randn(4, d.attr_dim, rng));
  CHECK_THROWS_AS(m.d_diff.score({v, a}), InvalidArgument);
  CHECK_THROWS_AS(m.d_adv.score({a, v}), DimensionError);
  CHECK(m.d_adv.score({v, a}).rows() == 4);
  m.d_adv.net().zero_output_layer();
  CHECK(m.d_adv.score({v, a}).value().cwiseAbs().maxCoeff() == 0.0);
  CHECK(m.d_adv.input_dims() == std::vector<int>{d.feature_dim, d.attr_dim});
}

TEST_CASE("critic scores are invariant to batch permutation") {
  const NetworkDims d = tiny_dims();
  const ModelSet m = init_models(d, 14);
  Rng rng = make_rng(15);
  const Matrix v = randn(5, d.feature_dim, rng), r = randn(5, d.rep_dim, rng);
  const Matrix s = m.d_rep.score(std::vector<Matrix>{v, r});
  const std::vector<int> perm{3, 0, 4, 1, 2};
  Matrix vp(5, d.feature_dim), rp(5, d.rep_dim);
  for (int i = 0; i < 5; ++i) {
    vp.row(i) = v.row(perm[i]);
    rp.row(i) = r.row(perm[i]);
  }
  const Matrix sp = m.d_rep.score(std::vector<Matrix>{vp, rp});
  for (int i = 0; i < 5; ++i) CHECK(sp(i, 0) == doctest::Approx(s(perm[i], 0)).epsilon(1e-14));
}

TEST_CASE("dims json round trip") {
  const NetworkDims d = tiny_dims();
  CHECK(dims_from_json(to_json(d)) == d);
}

}  // TEST_SUITE
