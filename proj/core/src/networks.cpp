// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#include "dzsl/networks.hpp"

#include "dzsl/diffusion.hpp"
#include "dzsl/errors.hpp"

namespace dzsl {
namespace {

std::vector<int> layer_sizes(int in, const NetworkDims& dims, int out) {
  std::vector<int> sizes{in};
  for (int l = 0; l < dims.hidden_layers; ++l) sizes.push_back(dims.hidden);
  sizes.push_back(out);
  return sizes;
}

int generator_input(const NetworkDims& d) {
  return d.attr_dim + d.rep_dim + d.time_dim + d.feature_dim + d.z_dim;
}

int rep_generator_input(const NetworkDims& d) {
  return d.attr_dim + d.time_dim + d.rep_dim + d.z_dim;
}

std::vector<int> critic_inputs(CriticKind kind, const NetworkDims& d) {
  switch (kind) {
    case CriticKind::Adv: return {d.feature_dim, d.attr_dim};
    case CriticKind::Diff: return {d.feature_dim, d.feature_dim, d.rep_dim, d.attr_dim, d.time_dim};
    case CriticKind::Rep: return {d.feature_dim, d.rep_dim};
    case CriticKind::RepAdv: return {d.rep_dim, d.attr_dim};
    case CriticKind::RepDiff: return {d.rep_dim, d.rep_dim, d.attr_dim, d.time_dim};
  }
  return {};
}

int sum(const std::vector<int>& v) {
  int s = 0;
  for (int x : v) s += x;
  return s;
}

void check_step(int t, const NetworkDims& dims) {
  if (t < 1 || t > dims.steps) {
    throw RangeError("diffusion step " + std::to_string(t) + " outside [1, " +
                     std::to_string(dims.steps) + "]");
  }
}

void check_width(const ad::Var& v, int cols, const char* what) {
  if (v.cols() != cols) {
    throw DimensionError(std::string(what) + " has " + std::to_string(v.cols()) +
                         " columns, expected " + std::to_string(cols));
  }
}

}  // namespace

void check_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NonFiniteError(std::string(what) + " contains non-finite values");
}

void NetworkDims::validate() const {
  if (attr_dim <= 0 || feature_dim <= 0 || rep_dim <= 0) {
    throw InvalidArgument("network dims: attribute/feature/representation dims must be positive");
  }
  if (z_dim <= 0) throw InvalidArgument("network dims: z_dim must be positive");
  if (time_dim <= 0 || time_dim % 2 != 0) {
    throw InvalidArgument("network dims: time_dim must be a positive even number");
  }
  if (hidden <= 0 || hidden_layers < 0) throw InvalidArgument("network dims: bad hidden layout");
  if (steps < 1) throw InvalidArgument("network dims: steps must be >= 1");
}

nlohmann::json to_json(const NetworkDims& d) {
  return {{"attr_dim", d.attr_dim}, {"feature_dim", d.feature_dim}, {"rep_dim", d.rep_dim},
          {"z_dim", d.z_dim},       {"time_dim", d.time_dim},       {"hidden", d.hidden},
          {"hidden_layers", d.hidden_layers}, {"steps", d.steps}};
}

NetworkDims dims_from_json(const nlohmann::json& j) {
  NetworkDims d;
  d.attr_dim = j.at("attr_dim").get<int>();
  d.feature_dim = j.at("feature_dim").get<int>();
  d.rep_dim = j.at("rep_dim").get<int>();
  d.z_dim = j.at("z_dim").get<int>();
  d.time_dim = j.at("time_dim").get<int>();
  d.hidden = j.at("hidden").get<int>();
  d.hidden_layers = j.at("hidden_layers").get<int>();
  d.steps = j.at("steps").get<int>();
  d.validate();
  return d;
}

Generator::Generator(const NetworkDims& dims, Rng& rng) : dims_(dims) {
  dims_.validate();
  net_ = Mlp(layer_sizes(generator_input(dims_), dims_, dims_.feature_dim), Activation::Silu, rng);
}

ad::Var Generator::forward(const ad::Var& a, const ad::Var& r0, int t, const ad::Var& v_t,
                           const ad::Var& z) const {
  check_step(t, dims_);
  check_width(a, dims_.attr_dim, "generator attributes");
  check_width(r0, dims_.rep_dim, "generator representation");
  check_width(v_t, dims_.feature_dim, "generator noised feature");
  check_width(z, dims_.z_dim, "generator latent");
  const ad::Var temb = ad::constant(time_embedding(t, a.rows(), dims_.time_dim));
  return net_.forward(ad::hcat({a, r0, temb, v_t, z}));
}

Matrix Generator::generate(const Matrix& a, const Matrix& r0, int t, const Matrix& v_t,
                           const Matrix& z) const {
  check_finite(a, "generator attributes");
  check_finite(r0, "generator representation");
  check_finite(v_t, "generator noised feature");
  check_finite(z, "generator latent");
  ad::NoGradGuard guard;
  return forward(ad::constant(a), ad::constant(r0), t, ad::constant(v_t), ad::constant(z)).value();
}

RepGenerator::RepGenerator(const NetworkDims& dims, Rng& rng) : dims_(dims) {
  dims_.validate();
  net_ = Mlp(layer_sizes(rep_generator_input(dims_), dims_, dims_.rep_dim), Activation::Silu, rng);
}

ad::Var RepGenerator::forward(const ad::Var& a, int t, const ad::Var& r_t, const ad::Var& z) const {
  check_step(t, dims_);
  check_width(a, dims_.attr_dim, "rep generator attributes");
  check_width(r_t, dims_.rep_dim, "rep generator noised representation");
  check_width(z, dims_.z_dim, "rep generator latent");
  const ad::Var temb = ad::constant(time_embedding(t, a.rows(), dims_.time_dim));
  return net_.forward(ad::hcat({a, temb, r_t, z}));
}

Matrix RepGenerator::generate(const Matrix& a, int t, const Matrix& r_t, const Matrix& z) const {
  check_finite(a, "rep generator attributes");
  check_finite(r_t, "rep generator noised representation");
  check_finite(z, "rep generator latent");
  ad::NoGradGuard guard;
  return forward(ad::constant(a), t, ad::constant(r_t), ad::constant(z)).value();
}

std::string to_string(CriticKind kind) {
  switch (kind) {
    case CriticKind::Adv: return "adv";
    case CriticKind::Diff: return "diff";
    case CriticKind::Rep: return "rep";
    case CriticKind::RepAdv: return "rep_adv";
    case CriticKind::RepDiff: return "rep_diff";
  }
  return "unknown";
}

Critic::Critic(CriticKind kind, const NetworkDims& dims, Rng& rng) : kind_(kind), dims_(dims) {
  dims_.validate();
  net_ = Mlp(layer_sizes(sum(critic_inputs(kind, dims_)), dims_, 1), Activation::LeakyRelu, rng);
}

std::vector<int> Critic::input_dims() const { return critic_inputs(kind_, dims_); }

ad::Var Critic::score(std::span<const ad::Var> inputs) const {
  const auto expected = input_dims();
  if (inputs.size() != expected.size()) {
    throw InvalidArgument(to_string(kind_) + " critic takes " + std::to_string(expected.size()) +
                          " inputs, got " + std::to_string(inputs.size()));
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].cols() != expected[i]) {
      throw DimensionError(to_string(kind_) + " critic input " + std::to_string(i) + " has " +
                           std::to_string(inputs[i].cols()) + " columns, expected " +
                           std::to_string(expected[i]));
    }
  }
  return net_.forward(ad::hcat(inputs));
}

ad::Var Critic::score(std::initializer_list<ad::Var> inputs) const {
  return score(std::span<const ad::Var>(inputs.begin(), inputs.size()));
}

Matrix Critic::score(std::span<const Matrix> inputs) const {
  ad::NoGradGuard guard;
  std::vector<ad::Var> vars;
  vars.reserve(inputs.size());
  for (const auto& m : inputs) vars.push_back(ad::constant(m));
  return score(std::span<const ad::Var>(vars)).value();
}

ModelSet init_models(const NetworkDims& dims, std::uint64_t seed) {
  dims.validate();
  auto stream = [seed](const char* name) { return make_rng(seed, stream_id(name)); };
  ModelSet set;
  set.dims = dims;
  {
    Rng rng = stream("generator");
    set.generator = Generator(dims, rng);
  }
  {
    Rng rng = stream("rep_generator");
    set.rep_generator = RepGenerator(dims, rng);
  }
  {
    Rng rng = stream("d_adv");
    set.d_adv = Critic(CriticKind::Adv, dims, rng);
  }
  {
    Rng rng = stream("d_diff");
    set.d_diff = Critic(CriticKind::Diff, dims, rng);
  }
  {
    Rng rng = stream("d_rep");
    set.d_rep = Critic(CriticKind::Rep, dims, rng);
  }
  {
    Rng rng = stream("d_rep_adv");
    set.d_rep_adv = Critic(CriticKind::RepAdv, dims, rng);
  }
  {
    Rng rng = stream("d_rep_diff");
    set.d_rep_diff = Critic(CriticKind::RepDiff, dims, rng);
  }
  return set;
}

std::vector<ArchitectureEntry> describe_architecture(const NetworkDims& dims) {
  std::vector<ArchitectureEntry> out;
  auto add = [&](std::string name, std::vector<int> sizes) {
    const auto count = mlp_parameter_count(sizes);
    out.push_back({std::move(name), std::move(sizes), count});
  };
  add("generator", layer_sizes(generator_input(dims), dims, dims.feature_dim));
  add("rep_generator", layer_sizes(rep_generator_input(dims), dims, dims.rep_dim));
  for (auto kind : {CriticKind::Adv, CriticKind::Diff, CriticKind::Rep, CriticKind::RepAdv,
                    CriticKind::RepDiff}) {
    add("d_" + to_string(kind), layer_sizes(sum(critic_inputs(kind, dims)), dims, 1));
  }
  return out;
}

}  // namespace dzsl
