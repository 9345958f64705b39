// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#include "dzsl/adam.hpp"

#include "dzsl/errors.hpp"
#include "dzsl/matrix_io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace dzsl {

void optimizer_step(std::span<ad::Var> params, std::span<const Matrix> grads, AdamState& state,
                    const AdamOptions& options) {
  if (params.size() != grads.size()) throw DimensionError("optimizer_step: param/grad count");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].rows() != grads[i].rows() || params[i].cols() != grads[i].cols()) {
      throw DimensionError("optimizer_step: shape mismatch for tensor " + std::to_string(i));
    }
    if (!grads[i].allFinite()) {
      throw NonFiniteError("optimizer_step: non-finite gradient in tensor " + std::to_string(i));
    }
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Matrix::Zero(p.rows(), p.cols()));
      state.v.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  } else if (state.m.size() != params.size()) {
    throw DimensionError("optimizer_step: state does not match parameter list");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(options.beta1, t);
  const double bc2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    m = options.beta1 * m + (1.0 - options.beta1) * grads[i];
    v = options.beta2 * v + (1.0 - options.beta2) * grads[i].cwiseProduct(grads[i]);
    auto m_hat = m.array() / bc1;
    auto v_hat = v.array() / bc2;
    params[i].mutable_value().array() -= options.lr * m_hat / (v_hat.sqrt() + options.eps);
  }
}

void Adam::step(std::span<ad::Var> params, std::span<const ad::Var> grads) {
  std::vector<Matrix> values;
  values.reserve(grads.size());
  for (const auto& g : grads) values.push_back(g.value());
  optimizer_step(params, values, state_, options_);
}

void AdamState::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nlohmann::json meta{{"step", step}, {"tensors", m.size()}};
  io::write_text(dir / "adam.json", meta.dump(2));
  for (std::size_t i = 0; i < m.size(); ++i) {
    io::write_f64(dir / ("m" + std::to_string(i) + ".f64"), m[i]);
    io::write_f64(dir / ("v" + std::to_string(i) + ".f64"), v[i]);
  }
}

AdamState AdamState::load(const std::filesystem::path& dir) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(io::read_text(dir / "adam.json"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("adam state: " + std::string(e.what()));
  }
  AdamState state;
  state.step = meta.at("step").get<std::int64_t>();
  const auto n = meta.at("tensors").get<std::size_t>();
  for (std::size_t i = 0; i < n; ++i) {
    state.m.push_back(io::read_f64(dir / ("m" + std::to_string(i) + ".f64")));
    state.v.push_back(io::read_f64(dir / ("v" + std::to_string(i) + ".f64")));
  }
  return state;
}

}  // namespace dzsl
