// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dzsl/adam.hpp"
#include "dzsl/dataset.hpp"
#include "dzsl/nn.hpp"

#include <filesystem>
#include <span>

namespace dzsl {

struct ExtractorConfig {
  int feature_dim = 64;
  int rep_dim = 32;
  int proj_dim = 32;
  int hidden = 128;
  int iterations = 2000;
  int batch_size = 64;
  double lr = 1e-3;
  double tau = 0.1;
};

/// Mean negative log-softmax of the true column. `labels` index columns.
ad::Var cross_entropy(const ad::Var& logits, std::span<const int> labels);
double ce_loss(const Matrix& logits, std::span<const int> labels);

/// Divides each row by its Euclidean norm.
ad::Var normalize_rows(const ad::Var& x);

/// Supervised contrastive loss with one uniformly sampled positive per
/// anchor and every different-label row as a negative:
///   -log( e^{h.h+/tau} / (e^{h.h+/tau} + sum_k e^{h.h-_k/tau}) ),
/// averaged over anchors that have a positive. Rows must be unit-norm.
/// Throws NoPositiveError when no anchor has a positive.
ad::Var sc_loss(const ad::Var& projections, std::span<const int> labels, double tau, Rng& rng);

/// Frozen-after-training feature (CE) and representation (SC) extractors.
/// Outputs are standardized with statistics of the training split.
class ExtractorPair {
 public:
  ExtractorPair() = default;
  /// Fresh trainable pair over raw vectors of `raw_dim`.
  static ExtractorPair create(int raw_dim, int num_seen, const ExtractorConfig& config, Rng& rng);
  /// Identity encoders for bundles that already carry features/representations.
  static ExtractorPair passthrough(int feature_dim, int rep_dim);

  bool passthrough() const noexcept { return passthrough_; }
  bool frozen() const noexcept { return frozen_; }
  int feature_dim() const noexcept { return feature_dim_; }
  int rep_dim() const noexcept { return rep_dim_; }

  Matrix features(const Matrix& raw) const;
  Matrix representations(const Matrix& raw) const;
  /// Unit-norm contrastive projections of the representations.
  Matrix projections(const Matrix& raw) const;
  /// Seen-class logits of the CE head.
  Matrix logits(const Matrix& raw) const;

  /// Feature / representation rows of the bundle, reading precomputed
  /// matrices in pass-through mode.
  Matrix bundle_features(const DatasetBundle& bundle, const std::vector<std::size_t>& rows) const;
  Matrix bundle_representations(const DatasetBundle& bundle,
                                const std::vector<std::size_t>& rows) const;

  /// One optimizer step on each branch. `labels` are seen-class positions.
  /// Returns (ce, sc) loss values; sc is NaN when the batch had no positive.
  std::pair<double, double> train_step(const Matrix& raw, std::span<const int> labels, Rng& rng);

  /// Computes output standardization from `raw` and locks all parameters.
  void freeze(const Matrix& train_raw);

  void save(const std::filesystem::path& dir) const;
  static ExtractorPair load(const std::filesystem::path& dir);

  // Exposed for gradient checks.
  Mlp& ce_encoder() noexcept { return ce_encoder_; }
  Mlp& ce_head() noexcept { return ce_head_; }
  Mlp& sc_encoder() noexcept { return sc_encoder_; }
  Mlp& projector() noexcept { return projector_; }

  double tau() const noexcept { return tau_; }

 private:
  Mlp ce_encoder_;
  Mlp ce_head_;
  Mlp sc_encoder_;
  Mlp projector_;
  RowVector feature_mean_, feature_scale_;
  RowVector rep_mean_, rep_scale_;
  Adam ce_opt_;
  Adam sc_opt_;
  int raw_dim_ = 0;
  int feature_dim_ = 0;
  int rep_dim_ = 0;
  double tau_ = 0.1;
  bool passthrough_ = false;
  bool frozen_ = false;
};

/// Trains both extractors on the bundle's train_seen split and freezes them.
/// Precomputed bundles yield a pass-through pair.
ExtractorPair finetune(const DatasetBundle& bundle, const ExtractorConfig& config, Rng& rng);

/// Positions of `labels` within `classes` (e.g. seen class id -> head column).
std::vector<int> local_labels(std::span<const int> labels, std::span<const int> classes);

}  // namespace dzsl
