// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dzsl/dataset.hpp"
#include "dzsl/diffusion.hpp"
#include "dzsl/extractors.hpp"
#include "dzsl/networks.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace dzsl {

/// Generated unseen-class samples for final-classifier training.
struct SynthesizedSet {
  Matrix features;         // [C_u * n x d_v]
  Matrix representations;  // [C_u * n x d_r]
  std::vector<int> labels;
  int n_per_class = 0;
  int steps_used = 0;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return labels.size(); }
  /// Writes features/representations/labels in the bundle binary format.
  void save(const std::filesystem::path& dir) const;
};

/// Representations first through R*, then features through G* conditioned
/// on them. Both chains start from pure noise at step T and take `t_te`
/// generate-then-renoise moves (T, T-1, ...); the last generated clean
/// sample is kept. Only class attributes are read.
SynthesizedSet synthesize(const RepGenerator& rep_generator, const Generator& generator,
                          const Matrix& attributes, std::span<const int> classes, int n_per_class,
                          int t_te, const DiffusionSchedule& schedule, std::uint64_t seed);

struct ClassifierConfig {
  int iterations = 1000;
  double lr = 1e-3;
  int batch_size = 128;
};

/// Linear softmax classifier over [v, r] with an explicit label space.
class LinearClassifier {
 public:
  LinearClassifier() = default;
  LinearClassifier(int input_dim, std::vector<int> classes, Rng& rng);

  /// [N x classes] scores.
  Matrix scores(const Matrix& x) const;
  /// Predicted class ids; ties go to the lowest class id.
  std::vector<int> predict(const Matrix& x) const;
  /// Same, with the argmax restricted to `allowed` class ids.
  std::vector<int> predict(const Matrix& x, std::span<const int> allowed) const;

  const std::vector<int>& classes() const noexcept { return classes_; }
  int input_dim() const noexcept { return static_cast<int>(weights_.value().rows()); }
  bool frozen() const noexcept { return frozen_; }
  void freeze() noexcept { frozen_ = true; }

  ad::Var& weights() { return weights_; }
  ad::Var& bias() { return bias_; }

 private:
  std::vector<int> columns_for(std::span<const int> allowed) const;

  std::vector<int> classes_;  // sorted class ids, one column each
  ad::Var weights_;           // [d x K]
  ad::Var bias_;              // [1 x K]
  bool frozen_ = false;
};

/// Concatenates features and representations column-wise.
Matrix join_features(const Matrix& v, const Matrix& r);

/// Trains a linear classifier with cross-entropy and Adam. Every label must
/// belong to `classes` (RangeError otherwise). Returns it frozen.
LinearClassifier train_final_classifier(const Matrix& x, std::span<const int> labels,
                                        std::vector<int> classes, const ClassifierConfig& config,
                                        Rng& rng);

/// Mean over `classes` of per-class top-1 accuracy in percent. Classes with
/// no samples are skipped. Per-class values land in `per_class` if given.
double macro_accuracy(std::span<const int> predicted, std::span<const int> truth,
                      std::span<const int> classes, std::map<int, double>* per_class = nullptr);

/// 2 S U / (S + U), or 0 when S + U = 0.
double harmonic_mean(double s, double u);

struct MetricsReport {
  double t1_zsl = 0.0;
  double u = 0.0;
  double s = 0.0;
  double h = 0.0;
  std::map<int, double> per_class_zsl;
  std::map<int, double> per_class_gzsl;
  std::string config_hash;

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
  static std::string csv_header();
  std::string csv_row() const;
  void save(const std::filesystem::path& dir) const;
};

enum class EvalMode { Zsl, Gzsl };

/// Test-split tensors read through the frozen extractors.
struct EvalData {
  Matrix unseen_x;  // [v, r] of test_unseen rows
  std::vector<int> unseen_labels;
  Matrix seen_x;    // [v, r] of test_seen rows
  std::vector<int> seen_labels;
};

EvalData make_eval_data(const DatasetBundle& bundle, const ExtractorPair& extractors);

/// ZSL fills t1_zsl (argmax over unseen labels); GZSL fills u, s, h with the
/// joint label space. Throws InvalidArgument on an empty test split.
void evaluate(const LinearClassifier& classifier, const EvalData& data,
              std::span<const int> unseen_classes, std::span<const int> seen_classes,
              EvalMode mode, MetricsReport& report);

/// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

}  // namespace dzsl
