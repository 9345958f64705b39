// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dzsl/dataset.hpp"
#include "dzsl/extractors.hpp"
#include "dzsl/trainer.hpp"
#include "dzsl/zsl_eval.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dzsl {

struct EvalConfig {
  int t_te = 4;  // generation moves per sample, 1..T
  ClassifierConfig classifier;
  std::uint64_t seed = 11;
};

/// Everything one experiment needs. Loadable from JSON with sections
/// "synth", "extractor", "train", "eval" and an optional "bundle" path.
struct ExperimentConfig {
  SynthConfig synth;
  ExtractorConfig extractor;
  TrainConfig train;
  EvalConfig eval;
  std::string bundle_path;  // empty: generate the synthetic task

  /// Throws ConfigError on the first invalid field.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Sections and fields absent from `j` keep their values in `base`.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

nlohmann::json to_json(const SynthConfig& config);
nlohmann::json to_json(const ExtractorConfig& config);

/// Generated or loaded bundle, validated.
DatasetBundle obtain_bundle(const ExperimentConfig& config);

struct EvalOutcome {
  MetricsReport report;
  SynthesizedSet synthetic;
};

/// Synthesizes `n_syn` samples per unseen class, trains the ZSL (unseen
/// labels) and GZSL (all labels, plus real train_seen rows) classifiers and
/// evaluates both on the test splits.
EvalOutcome evaluate_models(const DatasetBundle& bundle, const ExtractorPair& extractors,
                            const ModelSet& models, const TrainConfig& train, int n_syn,
                            const EvalConfig& eval);

struct PipelineHooks {
  TrainHooks train;
  /// Called with each stage name as it starts.
  std::function<void(const std::string&)> on_stage;
};

struct PipelineResult {
  DatasetBundle bundle;  // after the keep-ratio plan
  KeepRatioPlan plan;
  ExtractorPair extractors;
  ModelSet models;
  TrainTrace drg_trace;
  TrainTrace dfg_trace;
  MetricsReport report;
  nlohmann::json resolved_config;
};

/// gen-data -> finetune -> train-drg -> train-dfg -> synthesize -> evaluate.
/// With `out_dir`, writes the resolved config, bundle, extractors, models,
/// trace and metrics there.
PipelineResult run_pipeline(const ExperimentConfig& config,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                            const PipelineHooks& hooks = {});

struct ProtocolRow {
  double keep_ratio = 1.0;
  std::uint64_t seed = 0;
  int n_syn = 0;
  MetricsReport report;
  std::string error;  // non-empty when the run failed

  bool ok() const noexcept { return error.empty(); }
};

struct ProtocolResult {
  std::vector<ProtocolRow> rows;

  std::string csv() const;
};

/// One full pipeline per (ratio, seed); failures are recorded per row and
/// the sweep continues. Throws ConfigError on an empty or invalid ratio list.
ProtocolResult run_protocol(const ExperimentConfig& config, const std::vector<double>& ratios,
                            const std::vector<std::uint64_t>& seeds,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Gap diagnostics of a run directory: per-record values from the trace plus
/// the final models. Throws FormatError when the models do not fit the bundle.
nlohmann::json run_diag(const std::filesystem::path& run_dir, std::uint64_t seed = 5);

/// Side-by-side final gaps of several run_diag outputs, one CSV row per run.
std::string diag_comparison_csv(const std::vector<std::string>& names,
                                const std::vector<nlohmann::json>& diags);

}  // namespace dzsl
