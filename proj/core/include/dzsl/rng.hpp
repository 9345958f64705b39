// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dzsl/autodiff.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace dzsl {

using Rng = std::mt19937_64;

/// Independent, reproducible stream derived from a seed and a stream label.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

/// Stable label hash for naming rng streams.
std::uint64_t stream_id(const std::string& name);

Matrix randn(Eigen::Index rows, Eigen::Index cols, Rng& rng);
Matrix rand_uniform(Eigen::Index rows, Eigen::Index cols, double lo, double hi, Rng& rng);
int rand_int(int lo, int hi, Rng& rng);  // inclusive bounds

/// `count` distinct positions drawn from [0, n); count is clamped to n.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count, Rng& rng);

std::string serialize_rng(const Rng& rng);
Rng deserialize_rng(const std::string& text);

}  // namespace dzsl
