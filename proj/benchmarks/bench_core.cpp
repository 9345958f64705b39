// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#include "dzsl/diffusion.hpp"
#include "dzsl/losses.hpp"
#include "dzsl/trainer.hpp"
#include "dzsl/zsl_eval.hpp"

#include <benchmark/benchmark.h>

using namespace dzsl;

namespace {

// Default-sized dims for the synthetic task.
NetworkDims bench_dims(int hidden) {
  TrainConfig c;
  c.hidden = hidden;
  return c.dims(16, 64, 32);
}

TrainingSet random_set(const NetworkDims& d, int n, Rng& rng) {
  TrainingSet s;
  s.v0 = randn(n, d.feature_dim, rng);
  s.r0 = randn(n, d.rep_dim, rng);
  s.a = rand_uniform(n, d.attr_dim, 0.0, 1.0, rng);
  for (int i = 0; i < n; ++i) {
    s.labels.push_back(i % 15);
    s.source_rows.push_back(static_cast<std::size_t>(i));
  }
  return s;
}

void BM_ForwardSample(benchmark::State& state) {
  const auto s = DiffusionSchedule::vp(4);
  Rng rng = make_rng(1);
  const Matrix x0 = randn(state.range(0), 64, rng);
  for (auto _ : state) benchmark::DoNotOptimize(forward_sample(s, x0, 3, rng).x_t.data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardSample)->Arg(64)->Arg(1024);

// Penalty value plus the double-backward parameter gradient.
void BM_GradientPenalty(benchmark::State& state) {
  const NetworkDims d = bench_dims(static_cast<int>(state.range(0)));
  ModelSet m = init_models(d, 2);
  Rng rng = make_rng(3);
  const int b = 64;
  const Matrix real = randn(b, d.feature_dim, rng), fake = randn(b, d.feature_dim, rng);
  const std::vector<ad::Var> cond{ad::constant(rand_uniform(b, d.attr_dim, 0.0, 1.0, rng))};
  const Matrix alpha = rand_uniform(b, 1, 0.0, 1.0, rng);
  auto& params = m.d_adv.net().trainable_parameters();
  for (auto _ : state) {
    const auto gp = gradient_penalty(m.d_adv, real, fake, cond, alpha);
    benchmark::DoNotOptimize(ad::grad(gp, params));
  }
}
BENCHMARK(BM_GradientPenalty)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

// One DFG iteration: critic updates plus one generator update.
void BM_DfgStep(benchmark::State& state) {
  TrainConfig c;
  c.hidden = static_cast<int>(state.range(0));
  const NetworkDims d = c.dims(16, 64, 32);
  ModelSet m = init_models(d, 4);
  Rng rng = make_rng(5);
  const TrainingSet data = random_set(d, 1200, rng);
  StageTrainer trainer(Stage::Dfg, data, m, c, make_rng(6));
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step());
}
BENCHMARK(BM_DfgStep)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_DrgStep(benchmark::State& state) {
  TrainConfig c;
  c.hidden = static_cast<int>(state.range(0));
  const NetworkDims d = c.dims(16, 64, 32);
  ModelSet m = init_models(d, 7);
  Rng rng = make_rng(8);
  const TrainingSet data = random_set(d, 1200, rng);
  StageTrainer trainer(Stage::Drg, data, m, c, make_rng(9));
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step());
}
BENCHMARK(BM_DrgStep)->Arg(256)->Unit(benchmark::kMillisecond);

// Synthesis of 300 samples for each of 5 unseen classes.
void BM_Synthesize(benchmark::State& state) {
  const NetworkDims d = bench_dims(256);
  const ModelSet m = init_models(d, 10);
  Rng rng = make_rng(11);
  const Matrix attrs = rand_uniform(20, d.attr_dim, 0.0, 1.0, rng);
  const std::vector<int> unseen{15, 16, 17, 18, 19};
  const auto s = DiffusionSchedule::vp(4);
  const int t_te = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(synthesize(m.rep_generator, m.generator, attrs, unseen, 300, t_te, s, 12));
  }
}
BENCHMARK(BM_Synthesize)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
