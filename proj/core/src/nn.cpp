// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#include "dzsl/nn.hpp"

#include "dzsl/errors.hpp"

#include <cmath>

namespace dzsl {

std::string to_string(Activation act) {
  switch (act) {
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Silu: return "silu";
    case Activation::Tanh: return "tanh";
  }
  return "unknown";
}

Activation activation_from_string(const std::string& name) {
  if (name == "leaky_relu") return Activation::LeakyRelu;
  if (name == "silu") return Activation::Silu;
  if (name == "tanh") return Activation::Tanh;
  throw FormatError("unknown activation '" + name + "'");
}

Mlp::Mlp(std::vector<int> sizes, Activation activation, Rng& rng, double leaky_slope)
    : sizes_(std::move(sizes)), activation_(activation), leaky_slope_(leaky_slope) {
  if (sizes_.size() < 2) throw InvalidArgument("Mlp needs at least input and output sizes");
  for (int s : sizes_) {
    if (s <= 0) throw InvalidArgument("Mlp layer sizes must be positive");
  }
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    params_.push_back(ad::leaf(rand_uniform(sizes_[l], sizes_[l + 1], -bound, bound, rng)));
    params_.push_back(ad::leaf(rand_uniform(1, sizes_[l + 1], -bound, bound, rng)));
  }
}

Mlp::Mlp(const Mlp& other)
    : sizes_(other.sizes_),
      activation_(other.activation_),
      leaky_slope_(other.leaky_slope_),
      frozen_(other.frozen_) {
  params_.reserve(other.params_.size());
  for (const auto& p : other.params_) params_.push_back(ad::leaf(p.value()));
}

Mlp& Mlp::operator=(const Mlp& other) {
  if (this != &other) {
    Mlp copy(other);
    *this = std::move(copy);
  }
  return *this;
}

ad::Var Mlp::forward(const ad::Var& x) const {
  if (x.cols() != input_dim()) {
    throw DimensionError("Mlp input has " + std::to_string(x.cols()) + " columns, expected " +
                         std::to_string(input_dim()));
  }
  ad::Var h = x;
  const std::size_t layers = params_.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    h = ad::add_rowvec(ad::matmul(h, params_[2 * l]), params_[2 * l + 1]);
    if (l + 1 < layers) {
      switch (activation_) {
        case Activation::LeakyRelu: h = ad::leaky_relu(h, leaky_slope_); break;
        case Activation::Silu: h = ad::silu(h); break;
        case Activation::Tanh: h = ad::tanh(h); break;
      }
    }
  }
  return h;
}

Matrix Mlp::forward(const Matrix& x) const {
  if (x.cols() != input_dim()) {
    throw DimensionError("Mlp input has " + std::to_string(x.cols()) + " columns, expected " +
                         std::to_string(input_dim()));
  }
  Matrix h = x;
  const std::size_t layers = params_.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix next = h * params_[2 * l].value();
    next.rowwise() += params_[2 * l + 1].value().row(0);
    if (l + 1 < layers) {
      switch (activation_) {
        case Activation::LeakyRelu:
          next = next.unaryExpr([s = leaky_slope_](double v) { return v > 0.0 ? v : s * v; });
          break;
        case Activation::Silu:
          next = next.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
          break;
        case Activation::Tanh: next = next.array().tanh(); break;
      }
    }
    h = std::move(next);
  }
  return h;
}

std::vector<ad::Var>& Mlp::trainable_parameters() {
  if (frozen_) throw FrozenError("network is frozen");
  return params_;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value().size());
  return n;
}

void Mlp::zero_output_layer() {
  params_[params_.size() - 2].mutable_value().setZero();
  params_.back().mutable_value().setZero();
}

void Mlp::load_values(const std::vector<Matrix>& values) {
  if (values.size() != params_.size()) {
    throw DimensionError("parameter tensor count mismatch");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].rows() != params_[i].rows() || values[i].cols() != params_[i].cols()) {
      throw DimensionError("parameter tensor " + std::to_string(i) + " shape mismatch");
    }
    params_[i].mutable_value() = values[i];
  }
}

std::size_t mlp_parameter_count(const std::vector<int>& sizes) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    n += static_cast<std::size_t>(sizes[l]) * sizes[l + 1] + sizes[l + 1];
  }
  return n;
}

}  // namespace dzsl
