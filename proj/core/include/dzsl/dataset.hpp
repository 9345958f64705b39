// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dzsl/autodiff.hpp"
#include "dzsl/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

namespace dzsl {

enum class SplitTag : std::uint8_t { TrainSeen = 0, TestSeen = 1, TestUnseen = 2 };

/// Samples, labels and class semantics for one zero-shot task.
///
/// Either `raw` is present (extractors are fine-tuned on it) or the bundle
/// is in precomputed mode, carrying `features` and `representations`
/// produced elsewhere.
struct DatasetBundle {
  std::optional<Matrix> raw;
  std::optional<Matrix> features;
  std::optional<Matrix> representations;
  std::vector<int> labels;
  Matrix attributes;  // [num_classes x attr_dim]
  std::vector<int> seen_classes;
  std::vector<int> unseen_classes;
  std::vector<SplitTag> split;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return labels.size(); }
  int num_classes() const noexcept { return static_cast<int>(attributes.rows()); }
  int attr_dim() const noexcept { return static_cast<int>(attributes.cols()); }
  bool precomputed() const noexcept { return !raw.has_value() && features.has_value(); }

  std::vector<std::size_t> indices(SplitTag tag) const;
  /// Throws InvalidArgument describing the first broken invariant.
  void validate() const;

  bool operator==(const DatasetBundle& other) const;
};

struct SynthConfig {
  int seen_classes = 15;
  int unseen_classes = 5;
  int attr_dim = 16;
  int raw_dim = 64;
  int samples_per_class = 100;
  double noise = 0.3;
  std::uint64_t seed = 7;
  double train_fraction = 0.8;
};

/// Attribute-conditioned synthetic task: a_c ~ U(0,1)^d_a, prototypes
/// p_c = M a_c for a fixed random M, samples x = p_c + noise * eps.
/// All stored values are float-representable.
DatasetBundle generate_synthetic(const SynthConfig& config);

/// The prototype map M [raw_dim x attr_dim] used by generate_synthetic.
Matrix synthetic_prototype_map(const SynthConfig& config);

void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);
DatasetBundle load_bundle(const std::filesystem::path& dir);

/// CSV interop: `samples.csv` (label, split, then every present matrix's
/// columns with a prefixed header) and `attributes.csv`.
void export_bundle_csv(const DatasetBundle& bundle, const std::filesystem::path& dir);
DatasetBundle import_bundle_csv(const std::filesystem::path& dir);

struct KeepRatioPlan {
  double ratio = 1.0;
  std::map<int, std::vector<std::size_t>> per_class_kept;  // indices into the source bundle
  int n_syn_scaled = 0;
};

/// Subsamples train_seen per class to ceil(ratio * n_c) (at least 1) and
/// scales the synthesis budget to round(ratio * n_syn) (at least 1).
std::pair<DatasetBundle, KeepRatioPlan> apply_keep_ratio(const DatasetBundle& bundle, double ratio,
                                                         int n_syn, Rng& rng);

/// Rows of `m` at `index`.
Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& index);

}  // namespace dzsl
