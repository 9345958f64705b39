// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#include "dzsl/trainer.hpp"

#include "dzsl/checkpoint.hpp"
#include "dzsl/errors.hpp"
#include "dzsl/matrix_io.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dzsl {
namespace {

using nlohmann::json;

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("train config: " + what);
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: field '") + key + "': " + e.what());
  }
}

Matrix rows_of(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

std::vector<ad::Var> collect(const std::vector<Mlp*>& nets) {
  std::vector<ad::Var> params;
  for (Mlp* net : nets) {
    auto& p = net->trainable_parameters();
    params.insert(params.end(), p.begin(), p.end());
  }
  return params;
}

std::vector<Matrix> gradient_values(const ad::Var& loss, std::span<const ad::Var> params) {
  const auto grads = ad::grad(loss, params);
  std::vector<Matrix> out;
  out.reserve(grads.size());
  for (const auto& g : grads) out.push_back(g.value());
  return out;
}

bool finite_terms(const CriticTerms& t) {
  return std::isfinite(t.w_adv) && std::isfinite(t.w_diff) && std::isfinite(t.w_rep) &&
         std::isfinite(t.gp_adv) && std::isfinite(t.gp_diff) && std::isfinite(t.gp_rep) &&
         std::isfinite(t.l_mu);
}

json terms_json(const CriticTerms& t) {
  return {{"w_adv", t.w_adv},   {"w_diff", t.w_diff}, {"w_rep", t.w_rep},
          {"gp_adv", t.gp_adv}, {"gp_diff", t.gp_diff}, {"gp_rep", t.gp_rep},
          {"l_mu", t.l_mu},     {"kappa_gamma", t.kappa_gamma}};
}

CriticTerms terms_from_json(const json& j) {
  CriticTerms t;
  t.w_adv = j.at("w_adv").get<double>();
  t.w_diff = j.at("w_diff").get<double>();
  t.w_rep = j.at("w_rep").get<double>();
  t.gp_adv = j.at("gp_adv").get<double>();
  t.gp_diff = j.at("gp_diff").get<double>();
  t.gp_rep = j.at("gp_rep").get<double>();
  t.l_mu = j.at("l_mu").get<double>();
  t.kappa_gamma = j.at("kappa_gamma").get<double>();
  return t;
}

}  // namespace

void TrainConfig::validate() const {
  require(steps >= 1, "steps must be >= 1");
  require(beta_min > 0.0 && beta_max >= beta_min, "need 0 < beta_min <= beta_max");
  require(lr > 0.0, "lr must be positive");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
          "adam betas must lie in [0, 1)");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(n_gen_iters >= 0 && n_rep_iters >= 0, "iteration counts must be >= 0");
  require(critic_steps >= 1, "critic_steps must be >= 1");
  require(weights.lambda_gp_adv >= 0.0 && weights.lambda_gp_diff >= 0.0 &&
              weights.lambda_gp_rep >= 0.0,
          "gradient-penalty weights must be >= 0");
  require(weights.lambda_mu >= 0.0, "lambda_mu must be >= 0");
  require(weights.gamma >= 0.0, "gamma must be >= 0");
  require(z_dim >= 1, "z_dim must be >= 1");
  require(time_dim >= 2 && time_dim % 2 == 0, "time_dim must be a positive even number");
  require(hidden >= 1 && hidden_layers >= 0, "bad hidden layout");
  require(n_syn >= 0, "n_syn must be >= 0");
  require(keep_ratio > 0.0 && keep_ratio <= 1.0, "keep_ratio must lie in (0, 1]");
  require(checkpoint_every >= 0 && diag_every >= 0, "cadences must be >= 0");
}

NetworkDims TrainConfig::dims(int attr_dim, int feature_dim, int rep_dim) const {
  NetworkDims d;
  d.attr_dim = attr_dim;
  d.feature_dim = feature_dim;
  d.rep_dim = rep_dim;
  d.z_dim = z_dim;
  d.time_dim = time_dim;
  d.hidden = hidden;
  d.hidden_layers = hidden_layers;
  d.steps = steps;
  return d;
}

json to_json(const TrainConfig& c) {
  return {{"steps", c.steps},
          {"beta_min", c.beta_min},
          {"beta_max", c.beta_max},
          {"lr", c.lr},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"batch_size", c.batch_size},
          {"n_gen_iters", c.n_gen_iters},
          {"n_rep_iters", c.n_rep_iters},
          {"critic_steps", c.critic_steps},
          {"lambda_gp_adv", c.weights.lambda_gp_adv},
          {"lambda_gp_diff", c.weights.lambda_gp_diff},
          {"lambda_gp_rep", c.weights.lambda_gp_rep},
          {"lambda_mu", c.weights.lambda_mu},
          {"gamma", c.weights.gamma},
          {"use_diff", c.weights.use_diff},
          {"use_rep", c.weights.use_rep},
          {"z_dim", c.z_dim},
          {"time_dim", c.time_dim},
          {"hidden", c.hidden},
          {"hidden_layers", c.hidden_layers},
          {"n_syn", c.n_syn},
          {"keep_ratio", c.keep_ratio},
          {"seed", c.seed},
          {"checkpoint_every", c.checkpoint_every},
          {"diag_every", c.diag_every}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  static const char* known[] = {
      "steps",     "beta_min",      "beta_max",      "lr",          "adam_beta1",
      "adam_beta2", "batch_size",   "n_gen_iters",   "n_rep_iters", "critic_steps",
      "lambda_gp_adv", "lambda_gp_diff", "lambda_gp_rep", "lambda_mu", "gamma",
      "use_diff",  "use_rep",       "z_dim",         "time_dim",    "hidden",
      "hidden_layers", "n_syn",     "keep_ratio",    "seed",        "checkpoint_every",
      "diag_every"};
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("train config: unknown field '" + key + "'");
  }
  read_field(j, "steps", c.steps);
  read_field(j, "beta_min", c.beta_min);
  read_field(j, "beta_max", c.beta_max);
  read_field(j, "lr", c.lr);
  read_field(j, "adam_beta1", c.adam_beta1);
  read_field(j, "adam_beta2", c.adam_beta2);
  read_field(j, "batch_size", c.batch_size);
  read_field(j, "n_gen_iters", c.n_gen_iters);
  read_field(j, "n_rep_iters", c.n_rep_iters);
  read_field(j, "critic_steps", c.critic_steps);
  read_field(j, "lambda_gp_adv", c.weights.lambda_gp_adv);
  read_field(j, "lambda_gp_diff", c.weights.lambda_gp_diff);
  read_field(j, "lambda_gp_rep", c.weights.lambda_gp_rep);
  read_field(j, "lambda_mu", c.weights.lambda_mu);
  read_field(j, "gamma", c.weights.gamma);
  read_field(j, "use_diff", c.weights.use_diff);
  read_field(j, "use_rep", c.weights.use_rep);
  read_field(j, "z_dim", c.z_dim);
  read_field(j, "time_dim", c.time_dim);
  read_field(j, "hidden", c.hidden);
  read_field(j, "hidden_layers", c.hidden_layers);
  read_field(j, "n_syn", c.n_syn);
  read_field(j, "keep_ratio", c.keep_ratio);
  read_field(j, "seed", c.seed);
  read_field(j, "checkpoint_every", c.checkpoint_every);
  read_field(j, "diag_every", c.diag_every);
  c.validate();
  return c;
}

TrainingSet make_split_set(const DatasetBundle& bundle, const ExtractorPair& extractors,
                           SplitTag tag) {
  if (!extractors.frozen()) throw InvalidArgument("extractors must be frozen before training");
  TrainingSet set;
  set.source_rows = bundle.indices(tag);
  set.v0 = extractors.bundle_features(bundle, set.source_rows);
  set.r0 = extractors.bundle_representations(bundle, set.source_rows);
  set.a.resize(static_cast<Eigen::Index>(set.source_rows.size()), bundle.attr_dim());
  set.labels.reserve(set.source_rows.size());
  for (std::size_t i = 0; i < set.source_rows.size(); ++i) {
    const int label = bundle.labels[set.source_rows[i]];
    set.labels.push_back(label);
    set.a.row(static_cast<Eigen::Index>(i)) = bundle.attributes.row(label);
  }
  check_finite(set.v0, "training features");
  check_finite(set.r0, "training representations");
  return set;
}

CriticGap critic_gap_diagnostics(const ModelSet& models, const TrainingSet& train,
                                 const TrainingSet& test_seen, const DiffusionSchedule& schedule,
                                 Rng& rng) {
  if (test_seen.size() == 0) throw InvalidArgument("critic gap: empty seen-test split");
  if (train.size() == 0) throw InvalidArgument("critic gap: empty training split");
  CriticGap gap;
  {
    const Matrix tr[] = {train.v0, train.a};
    const Matrix te[] = {test_seen.v0, test_seen.a};
    gap.delta_adv = models.d_adv.score(std::span<const Matrix>(tr)).mean() -
                    models.d_adv.score(std::span<const Matrix>(te)).mean();
  }
  const auto n = train.size();
  const int T = schedule.steps();
  double total = 0.0;
  for (int t = 1; t <= T; ++t) {
    const auto [v_prev, v_t] = forward_sample_pair(schedule, train.v0, t, rng);
    const Matrix z = randn(n, models.dims.z_dim, rng);
    const Matrix fake_v0 = models.generator.generate(train.a, train.r0, t, v_t, z);
    const Matrix fake_prev = posterior_sample(schedule, fake_v0, v_t, t, rng);
    const Matrix temb = time_embedding(t, n, models.dims.time_dim);
    const Matrix real_in[] = {v_prev, v_t, train.r0, train.a, temb};
    const Matrix fake_in[] = {fake_prev, v_t, train.r0, train.a, temb};
    total += models.d_diff.score(std::span<const Matrix>(real_in)).mean() -
             models.d_diff.score(std::span<const Matrix>(fake_in)).mean();
  }
  gap.delta_diff = total / T;
  return gap;
}

std::string to_string(Stage stage) { return stage == Stage::Drg ? "drg" : "dfg"; }

json to_json(const TraceRecord& r) {
  json j{{"stage", to_string(r.stage)},
         {"iteration", r.iteration},
         {"t", r.t},
         {"terms", terms_json(r.terms)},
         {"critic_objective", r.critic_objective},
         {"generator_loss", r.generator_loss},
         {"wall_ms", r.wall_ms}};
  if (r.gap) j["gap"] = {{"delta_adv", r.gap->delta_adv}, {"delta_diff", r.gap->delta_diff}};
  return j;
}

void TrainTrace::write_jsonl(const std::filesystem::path& path, bool append) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw IoError("cannot write trace " + path.string());
  for (const auto& r : records_) out << to_json(r).dump() << '\n';
  if (!out) throw IoError("failed writing trace " + path.string());
}

TrainTrace TrainTrace::read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read trace " + path.string());
  TrainTrace trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      TraceRecord r;
      r.stage = j.at("stage").get<std::string>() == "drg" ? Stage::Drg : Stage::Dfg;
      r.iteration = j.at("iteration").get<int>();
      r.t = j.at("t").get<int>();
      r.terms = terms_from_json(j.at("terms"));
      r.critic_objective = j.at("critic_objective").get<double>();
      r.generator_loss = j.at("generator_loss").get<double>();
      r.wall_ms = j.at("wall_ms").get<double>();
      if (j.contains("gap")) {
        r.gap = CriticGap{j["gap"].at("delta_adv").get<double>(),
                          j["gap"].at("delta_diff").get<double>()};
      }
      trace.append(std::move(r));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return trace;
}

StageTrainer::StageTrainer(Stage stage, const TrainingSet& data, ModelSet& models,
                           const TrainConfig& config, Rng rng, TrainHooks hooks)
    : stage_(stage),
      data_(data),
      models_(models),
      config_(config),
      schedule_(config.schedule()),
      rng_(std::move(rng)),
      hooks_(std::move(hooks)),
      generator_opt_(config.adam()) {
  config_.validate();
  if (data_.size() == 0) throw InvalidArgument(to_string(stage) + ": empty training split");
  if (models_.dims.steps != config_.steps) {
    throw DimensionError("model step count differs from the training schedule");
  }
  const auto nets = critic_nets();
  critic_opts_.assign(nets.size(), Adam(config_.adam()));
}

std::vector<Mlp*> StageTrainer::critic_nets() const {
  if (stage_ == Stage::Drg) {
    std::vector<Mlp*> nets{&models_.d_rep_adv.net()};
    if (config_.weights.use_diff) nets.push_back(&models_.d_rep_diff.net());
    return nets;
  }
  std::vector<Mlp*> nets{&models_.d_adv.net()};
  if (config_.weights.use_diff) nets.push_back(&models_.d_diff.net());
  if (config_.weights.use_rep) nets.push_back(&models_.d_rep.net());
  return nets;
}

Mlp& StageTrainer::generator_net() const {
  return stage_ == Stage::Drg ? models_.rep_generator.net() : models_.generator.net();
}

std::vector<std::size_t> StageTrainer::draw_batch() {
  const auto n = static_cast<std::size_t>(data_.size());
  const auto b = std::min<std::size_t>(static_cast<std::size_t>(config_.batch_size), n);
  auto idx = sample_without_replacement(n, b, rng_);
  if (hooks_.on_batch) {
    std::vector<std::size_t> rows;
    rows.reserve(idx.size());
    for (auto i : idx) rows.push_back(data_.source_rows[i]);
    hooks_.on_batch(rows);
  }
  return idx;
}

double StageTrainer::critic_update(TraceRecord& record) {
  const auto idx = draw_batch();
  const auto B = static_cast<Eigen::Index>(idx.size());
  const int t = rand_int(1, config_.steps, rng_);
  record.t = t;
  const Matrix a = rows_of(data_.a, idx);
  const Matrix temb = time_embedding(t, B, config_.time_dim);
  Objective obj;
  if (stage_ == Stage::Drg) {
    RepCriticBatch batch;
    batch.r0 = rows_of(data_.r0, idx);
    std::tie(batch.r_prev, batch.cond.r_t) = forward_sample_pair(schedule_, batch.r0, t, rng_);
    batch.cond.a = a;
    batch.cond.temb = temb;
    const Matrix z = randn(B, config_.z_dim, rng_);
    batch.fake_r0 = models_.rep_generator.generate(a, t, batch.cond.r_t, z);
    batch.fake_prev = posterior_sample(schedule_, batch.fake_r0, batch.cond.r_t, t, rng_);
    batch.alpha_adv = rand_uniform(B, 1, 0.0, 1.0, rng_);
    batch.alpha_diff = rand_uniform(B, 1, 0.0, 1.0, rng_);
    RepCritics critics{&models_.d_rep_adv, config_.weights.use_diff ? &models_.d_rep_diff : nullptr};
    obj = drg_critic_objective(critics, batch, config_.weights);
  } else {
    FeatureCriticBatch batch;
    batch.v0 = rows_of(data_.v0, idx);
    std::tie(batch.v_prev, batch.cond.v_t) = forward_sample_pair(schedule_, batch.v0, t, rng_);
    batch.cond.a = a;
    batch.cond.r0 = rows_of(data_.r0, idx);
    batch.cond.temb = temb;
    const Matrix z = randn(B, config_.z_dim, rng_);
    batch.fake_v0 = models_.generator.generate(a, batch.cond.r0, t, batch.cond.v_t, z);
    batch.fake_prev = posterior_sample(schedule_, batch.fake_v0, batch.cond.v_t, t, rng_);
    batch.alpha_adv = rand_uniform(B, 1, 0.0, 1.0, rng_);
    batch.alpha_diff = rand_uniform(B, 1, 0.0, 1.0, rng_);
    batch.alpha_rep = rand_uniform(B, 1, 0.0, 1.0, rng_);
    batch.kappa = schedule_.n2d(t);
    FeatureCritics critics{&models_.d_adv, config_.weights.use_diff ? &models_.d_diff : nullptr,
                           config_.weights.use_rep ? &models_.d_rep : nullptr};
    obj = critic_objective(critics, batch, config_.weights);
  }
  record.terms = obj.terms;
  if (!std::isfinite(obj.value) || !finite_terms(obj.terms)) {
    throw TrainingDivergence(to_string(stage_), iteration_, "critic objective");
  }
  // One backward pass for all critics; the mutual term couples them.
  const auto nets = critic_nets();
  const auto all_params = collect(nets);
  const auto grads = gradient_values(obj.loss, all_params);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < nets.size(); ++k) {
    auto& params = nets[k]->trainable_parameters();
    try {
      critic_opts_[k].step(params, std::span<const Matrix>(grads).subspan(offset, params.size()));
    } catch (const NonFiniteError& e) {
      throw TrainingDivergence(to_string(stage_), iteration_, e.what());
    }
    offset += params.size();
  }
  if (hooks_.after_update) hooks_.after_update(false);
  return obj.value;
}

double StageTrainer::generator_update() {
  const auto idx = draw_batch();
  const auto B = static_cast<Eigen::Index>(idx.size());
  const int t = rand_int(1, config_.steps, rng_);
  const Matrix a = rows_of(data_.a, idx);
  const Matrix temb = time_embedding(t, B, config_.time_dim);
  Objective obj;
  if (stage_ == Stage::Drg) {
    const Matrix r0 = rows_of(data_.r0, idx);
    const Matrix r_t = forward_sample(schedule_, r0, t, rng_).x_t;
    const Matrix z = randn(B, config_.z_dim, rng_);
    const Matrix noise = randn(B, r0.cols(), rng_);
    const ad::Var fake_r0 =
        models_.rep_generator.forward(ad::constant(a), t, ad::constant(r_t), ad::constant(z));
    const ad::Var fake_prev = posterior_reparam(schedule_, fake_r0, r_t, t, noise);
    RepCritics critics{&models_.d_rep_adv, config_.weights.use_diff ? &models_.d_rep_diff : nullptr};
    obj = drg_generator_objective(critics, fake_r0, fake_prev, RepConditioning{a, r_t, temb});
  } else {
    const Matrix v0 = rows_of(data_.v0, idx);
    const Matrix r0 = rows_of(data_.r0, idx);
    const Matrix v_t = forward_sample(schedule_, v0, t, rng_).x_t;
    const Matrix z = randn(B, config_.z_dim, rng_);
    const Matrix noise = randn(B, v0.cols(), rng_);
    const ad::Var fake_v0 = models_.generator.forward(ad::constant(a), ad::constant(r0), t,
                                                      ad::constant(v_t), ad::constant(z));
    const ad::Var fake_prev = posterior_reparam(schedule_, fake_v0, v_t, t, noise);
    FeatureCritics critics{&models_.d_adv, config_.weights.use_diff ? &models_.d_diff : nullptr,
                           config_.weights.use_rep ? &models_.d_rep : nullptr};
    obj = generator_objective(critics, fake_v0, fake_prev, FeatureConditioning{a, r0, v_t, temb});
  }
  if (!std::isfinite(obj.value)) {
    throw TrainingDivergence(to_string(stage_), iteration_, "generator objective");
  }
  auto& params = generator_net().trainable_parameters();
  const auto grads = gradient_values(obj.loss, params);
  try {
    generator_opt_.step(params, grads);
  } catch (const NonFiniteError& e) {
    throw TrainingDivergence(to_string(stage_), iteration_, e.what());
  }
  if (hooks_.after_update) hooks_.after_update(true);
  return obj.value;
}

TraceRecord StageTrainer::step() {
  const auto start = std::chrono::steady_clock::now();
  TraceRecord record;
  record.stage = stage_;
  record.iteration = iteration_;
  try {
    for (int k = 0; k < config_.critic_steps; ++k) record.critic_objective = critic_update(record);
    record.generator_loss = generator_update();
  } catch (const NonFiniteError& e) {
    // Overflow inside a loss term (e.g. the penalty's critic gradient).
    throw TrainingDivergence(to_string(stage_), iteration_, e.what());
  }
  ++iteration_;
  if (stage_ == Stage::Dfg && config_.diag_every > 0 && hooks_.diag_set != nullptr &&
      iteration_ % config_.diag_every == 0) {
    Rng diag_rng = make_rng(config_.seed, stream_id("diag") + static_cast<std::uint64_t>(iteration_));
    record.gap = critic_gap_diagnostics(models_, data_, *hooks_.diag_set, schedule_, diag_rng);
  }
  record.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  trace_.append(record);
  if (hooks_.on_record) hooks_.on_record(record);
  if (config_.checkpoint_every > 0 && hooks_.checkpoint_dir &&
      iteration_ % config_.checkpoint_every == 0) {
    save(*hooks_.checkpoint_dir / (to_string(stage_) + "_state"));
  }
  return record;
}

void StageTrainer::run(int total) {
  while (iteration_ < total) step();
}

void StageTrainer::save(const std::filesystem::path& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  json manifest{{"kind", "trainer_state"},
                {"stage", to_string(stage_)},
                {"iteration", iteration_},
                {"config", to_json(config_)}};
  manifest["generator"] = ckpt::save_mlp(generator_net(), dir, "generator", ckpt::Precision::F64);
  generator_opt_.state().save(dir / "adam_generator");
  const auto nets = critic_nets();
  json critics = json::array();
  for (std::size_t k = 0; k < nets.size(); ++k) {
    const auto name = "critic" + std::to_string(k);
    critics.push_back(ckpt::save_mlp(*nets[k], dir, name, ckpt::Precision::F64));
    critic_opts_[k].state().save(dir / ("adam_" + name));
  }
  manifest["critics"] = critics;
  io::write_text(dir / "rng.txt", serialize_rng(rng_));
  ckpt::write_manifest(dir, manifest);
}

void StageTrainer::load(const std::filesystem::path& dir) {
  const json manifest = ckpt::read_manifest(dir, "trainer_state");
  try {
    if (manifest.at("stage").get<std::string>() != to_string(stage_)) {
      throw FormatError("trainer state belongs to stage " + manifest.at("stage").get<std::string>());
    }
    const auto nets = critic_nets();
    const auto& critics = manifest.at("critics");
    if (critics.size() != nets.size()) throw FormatError("trainer state: critic count differs");
    auto restore = [&dir](Mlp& target, const json& record) {
      const Mlp loaded = ckpt::load_mlp(record, dir);
      if (loaded.sizes() != target.sizes()) throw FormatError("trainer state: layer sizes differ");
      std::vector<Matrix> values;
      for (const auto& p : loaded.parameters()) values.push_back(p.value());
      target.load_values(values);
    };
    restore(generator_net(), manifest.at("generator"));
    generator_opt_.state() = AdamState::load(dir / "adam_generator");
    for (std::size_t k = 0; k < nets.size(); ++k) {
      restore(*nets[k], critics[k]);
      critic_opts_[k].state() = AdamState::load(dir / ("adam_critic" + std::to_string(k)));
    }
    rng_ = deserialize_rng(io::read_text(dir / "rng.txt"));
    iteration_ = manifest.at("iteration").get<int>();
  } catch (const json::exception& e) {
    throw FormatError("trainer state: " + std::string(e.what()));
  }
}

TrainTrace train_drg(const TrainingSet& data, ModelSet& models, const TrainConfig& config,
                     Rng& rng, const TrainHooks& hooks) {
  StageTrainer trainer(Stage::Drg, data, models, config, make_rng(rng()), hooks);
  trainer.run(config.n_rep_iters);
  models.rep_generator.net().freeze();
  return trainer.trace();
}

TrainTrace train_dfg(const TrainingSet& data, ModelSet& models, const TrainConfig& config,
                     Rng& rng, const TrainHooks& hooks) {
  StageTrainer trainer(Stage::Dfg, data, models, config, make_rng(rng()), hooks);
  trainer.run(config.n_gen_iters);
  models.generator.net().freeze();
  return trainer.trace();
}

void save_models(const ModelSet& m, const std::filesystem::path& dir) {
  json manifest{{"kind", "models"}, {"dims", to_json(m.dims)}};
  manifest["generator"] = ckpt::save_mlp(m.generator.net(), dir, "generator");
  manifest["rep_generator"] = ckpt::save_mlp(m.rep_generator.net(), dir, "rep_generator");
  manifest["d_adv"] = ckpt::save_mlp(m.d_adv.net(), dir, "d_adv");
  manifest["d_diff"] = ckpt::save_mlp(m.d_diff.net(), dir, "d_diff");
  manifest["d_rep"] = ckpt::save_mlp(m.d_rep.net(), dir, "d_rep");
  manifest["d_rep_adv"] = ckpt::save_mlp(m.d_rep_adv.net(), dir, "d_rep_adv");
  manifest["d_rep_diff"] = ckpt::save_mlp(m.d_rep_diff.net(), dir, "d_rep_diff");
  ckpt::write_manifest(dir, manifest);
}

ModelSet load_models(const std::filesystem::path& dir) {
  const json manifest = ckpt::read_manifest(dir, "models");
  try {
    ModelSet m = init_models(dims_from_json(manifest.at("dims")), 0);
    auto restore = [&](Mlp& target, const char* key) {
      Mlp loaded = ckpt::load_mlp(manifest.at(key), dir);
      if (loaded.sizes() != target.sizes()) {
        throw FormatError(std::string("models: ") + key + " does not match the declared dims");
      }
      target = std::move(loaded);
    };
    restore(m.generator.net(), "generator");
    restore(m.rep_generator.net(), "rep_generator");
    restore(m.d_adv.net(), "d_adv");
    restore(m.d_diff.net(), "d_diff");
    restore(m.d_rep.net(), "d_rep");
    restore(m.d_rep_adv.net(), "d_rep_adv");
    restore(m.d_rep_diff.net(), "d_rep_diff");
    return m;
  } catch (const json::exception& e) {
    throw FormatError("models manifest: " + std::string(e.what()));
  } catch (const InvalidArgument& e) {
    throw FormatError("models manifest: " + std::string(e.what()));
  }
}

}  // namespace dzsl
