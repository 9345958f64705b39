// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dzsl/nn.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dzsl {

struct NetworkDims {
  int attr_dim = 16;
  int feature_dim = 64;
  int rep_dim = 32;
  int z_dim = 32;
  int time_dim = 16;
  int hidden = 256;
  int hidden_layers = 2;
  int steps = 4;  // valid diffusion steps are 1..steps

  void validate() const;
  bool operator==(const NetworkDims&) const = default;
};

nlohmann::json to_json(const NetworkDims& dims);
NetworkDims dims_from_json(const nlohmann::json& j);

/// Feature generator: (a, r_0, t, v_t, z) -> v~_0.
class Generator {
 public:
  Generator() = default;
  Generator(const NetworkDims& dims, Rng& rng);

  ad::Var forward(const ad::Var& a, const ad::Var& r0, int t, const ad::Var& v_t,
                  const ad::Var& z) const;
  Matrix generate(const Matrix& a, const Matrix& r0, int t, const Matrix& v_t,
                  const Matrix& z) const;

  const Mlp& net() const noexcept { return net_; }
  Mlp& net() noexcept { return net_; }
  const NetworkDims& dims() const noexcept { return dims_; }

 private:
  NetworkDims dims_;
  Mlp net_;
};

/// Representation generator: (a, t, r_t, z) -> r~_0.
class RepGenerator {
 public:
  RepGenerator() = default;
  RepGenerator(const NetworkDims& dims, Rng& rng);

  ad::Var forward(const ad::Var& a, int t, const ad::Var& r_t, const ad::Var& z) const;
  Matrix generate(const Matrix& a, int t, const Matrix& r_t, const Matrix& z) const;

  const Mlp& net() const noexcept { return net_; }
  Mlp& net() noexcept { return net_; }
  const NetworkDims& dims() const noexcept { return dims_; }

 private:
  NetworkDims dims_;
  Mlp net_;
};

/// Which tuple a critic scores. The first element of every tuple is the
/// penalized input; the rest is conditioning.
///   Adv:     (v_0, a)
///   Diff:    (v_{t-1}, v_t, r_0, a, t_emb)
///   Rep:     (v_0, r_0)
///   RepAdv:  (r_0, a)
///   RepDiff: (r_{t-1}, r_t, a, t_emb)
enum class CriticKind { Adv, Diff, Rep, RepAdv, RepDiff };

std::string to_string(CriticKind kind);

/// Scalar Wasserstein critic without an output nonlinearity.
class Critic {
 public:
  Critic() = default;
  Critic(CriticKind kind, const NetworkDims& dims, Rng& rng);

  CriticKind kind() const noexcept { return kind_; }
  /// Column widths of the expected input tuple.
  std::vector<int> input_dims() const;

  /// [B x 1] scores. Throws InvalidArgument on wrong arity or widths.
  ad::Var score(std::span<const ad::Var> inputs) const;
  ad::Var score(std::initializer_list<ad::Var> inputs) const;
  Matrix score(std::span<const Matrix> inputs) const;

  const Mlp& net() const noexcept { return net_; }
  Mlp& net() noexcept { return net_; }

 private:
  CriticKind kind_ = CriticKind::Adv;
  NetworkDims dims_;
  Mlp net_;
};

/// Every trainable network of the generation stage.
struct ModelSet {
  NetworkDims dims;
  Generator generator;
  RepGenerator rep_generator;
  Critic d_adv;
  Critic d_diff;
  Critic d_rep;
  Critic d_rep_adv;
  Critic d_rep_diff;
};

/// Deterministic in `seed`; each network draws from its own stream.
ModelSet init_models(const NetworkDims& dims, std::uint64_t seed);

/// Human-readable layer listing with the parameter count it implies.
struct ArchitectureEntry {
  std::string name;
  std::vector<int> sizes;
  std::size_t parameter_count = 0;
};
std::vector<ArchitectureEntry> describe_architecture(const NetworkDims& dims);

void check_finite(const Matrix& m, const char* what);

}  // namespace dzsl
