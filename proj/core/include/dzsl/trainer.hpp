// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dzsl/adam.hpp"
#include "dzsl/dataset.hpp"
#include "dzsl/diffusion.hpp"
#include "dzsl/extractors.hpp"
#include "dzsl/losses.hpp"
#include "dzsl/networks.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dzsl {

struct TrainConfig {
  // Diffusion
  int steps = 4;
  double beta_min = 0.1;
  double beta_max = 20.0;
  // Optimizer
  double lr = 5e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int batch_size = 64;
  // Schedule: generator updates per stage and critic updates per generator update
  int n_gen_iters = 3000;
  int n_rep_iters = 3000;
  int critic_steps = 5;
  LossWeights weights;
  // Architecture
  int z_dim = 32;
  int time_dim = 16;
  int hidden = 256;
  int hidden_layers = 2;
  // Synthesis budget and limited-data protocol
  int n_syn = 300;
  double keep_ratio = 1.0;
  std::uint64_t seed = 1;
  // Cadences (0 disables)
  int checkpoint_every = 0;
  int diag_every = 0;

  /// Throws ConfigError naming the first bad field.
  void validate() const;
  DiffusionSchedule schedule() const { return DiffusionSchedule::vp(steps, beta_min, beta_max); }
  AdamOptions adam() const { return {lr, adam_beta1, adam_beta2, 1e-8}; }
  NetworkDims dims(int attr_dim, int feature_dim, int rep_dim) const;
};

nlohmann::json to_json(const TrainConfig& config);
/// Fields absent from `j` keep their values in `base`.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// Per-row training tensors of one split, built from the frozen extractors.
struct TrainingSet {
  Matrix v0;  // features
  Matrix r0;  // representations
  Matrix a;   // attribute row of each sample's class
  std::vector<int> labels;
  std::vector<std::size_t> source_rows;  // indices into the bundle

  Eigen::Index size() const noexcept { return v0.rows(); }
};

/// Reads only the rows tagged `tag`; other rows are never touched.
TrainingSet make_split_set(const DatasetBundle& bundle, const ExtractorPair& extractors,
                           SplitTag tag = SplitTag::TrainSeen);

struct CriticGap {
  double delta_adv = 0.0;
  double delta_diff = 0.0;
};

/// delta_adv = mean D_adv(v_tr, a) - mean D_adv(v_te, a);
/// delta_diff = mean over t of [mean D_diff(real v_{t-1}) - mean D_diff(fake v~_{t-1})]
/// on training rows. Throws InvalidArgument when `test_seen` is empty.
CriticGap critic_gap_diagnostics(const ModelSet& models, const TrainingSet& train,
                                 const TrainingSet& test_seen, const DiffusionSchedule& schedule,
                                 Rng& rng);

enum class Stage { Drg, Dfg };
std::string to_string(Stage stage);

struct TraceRecord {
  Stage stage = Stage::Dfg;
  int iteration = 0;
  int t = 0;  // step of the last critic batch
  CriticTerms terms;
  double critic_objective = 0.0;
  double generator_loss = 0.0;
  std::optional<CriticGap> gap;
  double wall_ms = 0.0;
};

nlohmann::json to_json(const TraceRecord& record);

/// Append-only list of per-iteration records.
class TrainTrace {
 public:
  void append(TraceRecord record) { records_.push_back(std::move(record)); }
  const std::vector<TraceRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  /// Newline-delimited JSON, one record per line.
  void write_jsonl(const std::filesystem::path& path, bool append = false) const;
  static TrainTrace read_jsonl(const std::filesystem::path& path);

 private:
  std::vector<TraceRecord> records_;
};

struct TrainHooks {
  /// Bundle rows of every minibatch, in draw order.
  std::function<void(std::span<const std::size_t>)> on_batch;
  std::function<void(const TraceRecord&)> on_record;
  /// After every optimizer update; the flag is true for generator updates.
  std::function<void(bool)> after_update;
  /// Seen-test tensors for periodic gap diagnostics (read by no update).
  const TrainingSet* diag_set = nullptr;
  /// Where periodic checkpoints go when checkpoint_every > 0.
  std::optional<std::filesystem::path> checkpoint_dir;
};

/// Alternating critic/generator optimization of one stage. Exactly
/// `critic_steps` critic updates precede each generator update; each update
/// differentiates only the parameters it changes.
class StageTrainer {
 public:
  StageTrainer(Stage stage, const TrainingSet& data, ModelSet& models, const TrainConfig& config,
               Rng rng, TrainHooks hooks = {});

  /// One outer iteration. Throws TrainingDivergence on a non-finite loss.
  TraceRecord step();
  /// Runs until `iterations()` reaches `total`, appending to the trace.
  void run(int total);

  int iterations() const noexcept { return iteration_; }
  const TrainTrace& trace() const noexcept { return trace_; }
  Stage stage() const noexcept { return stage_; }

  /// Parameters, optimizer moments, rng and counters, losslessly.
  void save(const std::filesystem::path& dir) const;
  /// Restores a state written by save() for the same stage and shapes.
  void load(const std::filesystem::path& dir);

 private:
  std::vector<std::size_t> draw_batch();
  double critic_update(TraceRecord& record);
  double generator_update();
  std::vector<Mlp*> critic_nets() const;
  Mlp& generator_net() const;

  Stage stage_;
  const TrainingSet& data_;
  ModelSet& models_;
  TrainConfig config_;
  DiffusionSchedule schedule_;
  Rng rng_;
  TrainHooks hooks_;
  std::vector<Adam> critic_opts_;
  Adam generator_opt_;
  TrainTrace trace_;
  int iteration_ = 0;
};

/// Stage 1: trains R against D'_adv and D'_diff for n_rep_iters, then freezes R.
TrainTrace train_drg(const TrainingSet& data, ModelSet& models, const TrainConfig& config,
                     Rng& rng, const TrainHooks& hooks = {});

/// Stage 2: trains G against D_adv, D_diff, D_rep (plus the mutual loss) for
/// n_gen_iters, then freezes G. Real r_0 conditions G throughout.
TrainTrace train_dfg(const TrainingSet& data, ModelSet& models, const TrainConfig& config,
                     Rng& rng, const TrainHooks& hooks = {});

/// Saves every network of the set (f32) with an architecture manifest.
void save_models(const ModelSet& models, const std::filesystem::path& dir);
ModelSet load_models(const std::filesystem::path& dir);

}  // namespace dzsl
