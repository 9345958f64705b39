// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line driver: data generation, the training stages, synthesis,
// evaluation, the limited-data sweep and gap diagnostics.

#include "dzsl/errors.hpp"
#include "dzsl/matrix_io.hpp"
#include "dzsl/pipeline.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dzsl;

namespace {

enum Exit : int { kOk = 0, kConfig = 1, kRuntime = 2, kIo = 3 };

constexpr const char* kRootEnv = "DZSL_ARTIFACTS";

/// Flags shared by every subcommand; unset optionals leave the config alone.
struct Overrides {
  std::string config_file;
  std::string out;
  std::string bundle;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> data_seed;
  std::optional<double> keep_ratio;
  std::optional<int> n_syn;
  std::optional<int> iters;
  std::optional<int> rep_iters;
  std::optional<int> finetune_iters;
  std::optional<int> hidden;
  std::optional<int> steps;
  std::optional<int> t_te;
  std::optional<int> batch_size;
  std::optional<int> critic_steps;
  std::optional<double> lr;
  std::optional<double> lambda_mu;
  std::optional<double> gamma;
  std::optional<double> noise;
  std::optional<int> diag_every;
  std::optional<int> checkpoint_every;
  bool no_diff = false;
  bool no_rep = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config_file, "JSON experiment config");
  cmd->add_option("-o,--out", o.out, "Output directory (default: $" + std::string(kRootEnv) + "/<command>)");
  cmd->add_option("--seed", o.seed, "Training seed");
  cmd->add_option("--data-seed", o.data_seed, "Synthetic data seed");
  cmd->add_option("--keep-ratio", o.keep_ratio, "Fraction of train_seen samples kept per class");
  cmd->add_option("--n-syn", o.n_syn, "Synthetic samples per unseen class");
  cmd->add_option("--iters", o.iters, "Feature-generator iterations");
  cmd->add_option("--rep-iters", o.rep_iters, "Representation-generator iterations");
  cmd->add_option("--finetune-iters", o.finetune_iters, "Extractor fine-tuning iterations");
  cmd->add_option("--hidden", o.hidden, "Hidden width of generators and critics");
  cmd->add_option("--steps", o.steps, "Diffusion steps T");
  cmd->add_option("--t-te", o.t_te, "Generation moves at synthesis time");
  cmd->add_option("--batch-size", o.batch_size, "Minibatch size");
  cmd->add_option("--critic-steps", o.critic_steps, "Critic updates per generator update");
  cmd->add_option("--lr", o.lr, "Adam learning rate");
  cmd->add_option("--lambda-mu", o.lambda_mu, "Mutual-loss weight");
  cmd->add_option("--gamma", o.gamma, "Exponent on the noise-to-data ratio");
  cmd->add_option("--noise", o.noise, "Synthetic sample noise scale");
  cmd->add_option("--diag-every", o.diag_every, "Gap diagnostics cadence (0 = off)");
  cmd->add_option("--checkpoint-every", o.checkpoint_every, "Trainer checkpoint cadence (0 = off)");
  cmd->add_flag("--no-diff", o.no_diff, "Disable the diffusion critic");
  cmd->add_flag("--no-rep", o.no_rep, "Disable the representation critic");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c = o.config_file.empty() ? ExperimentConfig{} : load_experiment_config(o.config_file);
  if (!o.bundle.empty()) c.bundle_path = o.bundle;
  if (o.seed) c.train.seed = *o.seed;
  if (o.data_seed) c.synth.seed = *o.data_seed;
  if (o.keep_ratio) c.train.keep_ratio = *o.keep_ratio;
  if (o.n_syn) c.train.n_syn = *o.n_syn;
  if (o.iters) c.train.n_gen_iters = *o.iters;
  if (o.rep_iters) c.train.n_rep_iters = *o.rep_iters;
  if (o.finetune_iters) c.extractor.iterations = *o.finetune_iters;
  if (o.hidden) c.train.hidden = *o.hidden;
  if (o.steps) c.train.steps = *o.steps;
  if (o.t_te) c.eval.t_te = *o.t_te;
  if (o.batch_size) c.train.batch_size = *o.batch_size;
  if (o.critic_steps) c.train.critic_steps = *o.critic_steps;
  if (o.lr) c.train.lr = *o.lr;
  if (o.lambda_mu) c.train.weights.lambda_mu = *o.lambda_mu;
  if (o.gamma) c.train.weights.gamma = *o.gamma;
  if (o.noise) c.synth.noise = *o.noise;
  if (o.diag_every) c.train.diag_every = *o.diag_every;
  if (o.checkpoint_every) c.train.checkpoint_every = *o.checkpoint_every;
  if (o.no_diff) c.train.weights.use_diff = false;
  if (o.no_rep) c.train.weights.use_rep = false;
  c.validate();
  return c;
}

fs::path output_dir(const Overrides& o, const std::string& command) {
  if (!o.out.empty()) return o.out;
  const char* root = std::getenv(kRootEnv);
  return fs::path(root != nullptr && *root != '\0' ? root : "artifacts") / command;
}

void write_config(const fs::path& dir, const ExperimentConfig& c) {
  io::write_text(dir / "config.json", to_json(c).dump(2) + "\n");
}

DatasetBundle require_bundle(const std::string& path) {
  if (path.empty()) throw ConfigError("--bundle is required");
  if (!fs::is_directory(path)) throw IoError("bundle directory not found: " + path);
  return load_bundle(path);
}

void note(const std::string& msg) { std::cerr << "[dzsl] " << msg << '\n'; }

int report_error(const std::string& command, const std::string& kind, const std::string& what,
                 int code) {
  json err{{"command", command}, {"error", kind}, {"message", what}, {"exit_code", code}};
  std::cerr << err.dump() << '\n';
  return code;
}

// ---- subcommands ----

void cmd_gen_data(const Overrides& o) {
  const auto c = resolve(o);
  const auto dir = output_dir(o, "gen-data");
  DatasetBundle bundle = obtain_bundle(c);
  json plan_json;
  if (c.train.keep_ratio < 1.0) {
    Rng rng = make_rng(c.train.seed, stream_id("keep-ratio"));
    auto [kept, plan] = apply_keep_ratio(bundle, c.train.keep_ratio, c.train.n_syn, rng);
    bundle = std::move(kept);
    plan_json = {{"keep_ratio", plan.ratio}, {"n_syn_scaled", plan.n_syn_scaled}};
  }
  save_bundle(bundle, dir / "bundle");
  write_config(dir, c);
  if (!plan_json.is_null()) io::write_text(dir / "keep_ratio.json", plan_json.dump(2) + "\n");
  note("bundle written to " + (dir / "bundle").string());
}

void cmd_finetune(const Overrides& o) {
  const auto c = resolve(o);
  const auto dir = output_dir(o, "finetune");
  const DatasetBundle bundle = require_bundle(o.bundle);
  Rng rng = make_rng(c.train.seed, stream_id("finetune"));
  const ExtractorPair pair = finetune(bundle, c.extractor, rng);
  pair.save(dir / "extractors");
  write_config(dir, c);
  note("extractors written to " + (dir / "extractors").string());
}

struct StageInputs {
  DatasetBundle bundle;
  ExtractorPair extractors;
};

StageInputs stage_inputs(const Overrides& o, const std::string& extractors_dir) {
  StageInputs in{require_bundle(o.bundle), {}};
  if (extractors_dir.empty()) throw ConfigError("--extractors is required");
  in.extractors = ExtractorPair::load(extractors_dir);
  return in;
}

void cmd_train_drg(const Overrides& o, const std::string& extractors_dir) {
  const auto c = resolve(o);
  const auto dir = output_dir(o, "train-drg");
  const auto in = stage_inputs(o, extractors_dir);
  const TrainingSet data = make_split_set(in.bundle, in.extractors);
  ModelSet models = init_models(
      c.train.dims(in.bundle.attr_dim(), in.extractors.feature_dim(), in.extractors.rep_dim()),
      c.train.seed);
  Rng rng = make_rng(c.train.seed, stream_id("train-drg"));
  TrainHooks hooks;
  hooks.checkpoint_dir = dir / "state";
  const auto trace = train_drg(data, models, c.train, rng, hooks);
  save_models(models, dir / "models");
  trace.write_jsonl(dir / "trace.jsonl");
  write_config(dir, c);
  note("representation generator written to " + (dir / "models").string());
}

void cmd_train_dfg(const Overrides& o, const std::string& extractors_dir,
                   const std::string& models_dir) {
  const auto c = resolve(o);
  const auto dir = output_dir(o, "train-dfg");
  const auto in = stage_inputs(o, extractors_dir);
  if (models_dir.empty()) throw ConfigError("--models is required (output of train-drg)");
  ModelSet models = load_models(models_dir);
  if (models.dims != c.train.dims(in.bundle.attr_dim(), in.extractors.feature_dim(),
                                  in.extractors.rep_dim())) {
    throw ConfigError("--models dims differ from the resolved config");
  }
  const TrainingSet data = make_split_set(in.bundle, in.extractors);
  std::optional<TrainingSet> diag;
  TrainHooks hooks;
  hooks.checkpoint_dir = dir / "state";
  if (c.train.diag_every > 0) {
    diag = make_split_set(in.bundle, in.extractors, SplitTag::TestSeen);
    hooks.diag_set = &*diag;
  }
  Rng rng = make_rng(c.train.seed, stream_id("train-dfg"));
  const auto trace = train_dfg(data, models, c.train, rng, hooks);
  save_models(models, dir / "models");
  trace.write_jsonl(dir / "trace.jsonl");
  write_config(dir, c);
  note("feature generator written to " + (dir / "models").string());
}

void cmd_synth(const Overrides& o, const std::string& models_dir) {
  const auto c = resolve(o);
  const auto dir = output_dir(o, "synth");
  const DatasetBundle bundle = require_bundle(o.bundle);
  if (models_dir.empty()) throw ConfigError("--models is required");
  const ModelSet models = load_models(models_dir);
  const auto set = synthesize(models.rep_generator, models.generator, bundle.attributes,
                              bundle.unseen_classes, c.train.n_syn, c.eval.t_te,
                              c.train.schedule(), c.eval.seed);
  set.save(dir / "synth");
  write_config(dir, c);
  note(std::to_string(set.size()) + " samples written to " + (dir / "synth").string());
}

void cmd_eval(const Overrides& o, const std::string& extractors_dir, const std::string& models_dir) {
  const auto c = resolve(o);
  const auto dir = output_dir(o, "eval");
  const auto in = stage_inputs(o, extractors_dir);
  if (models_dir.empty()) throw ConfigError("--models is required");
  const ModelSet models = load_models(models_dir);
  auto outcome = evaluate_models(in.bundle, in.extractors, models, c.train, c.train.n_syn, c.eval);
  const json resolved = to_json(c);
  outcome.report.config_hash = config_hash(resolved);
  outcome.report.save(dir);
  write_config(dir, c);
  std::cout << outcome.report.to_json().dump(2) << '\n';
}

void cmd_run(const Overrides& o) {
  const auto c = resolve(o);
  const auto dir = output_dir(o, "run");
  PipelineHooks hooks;
  hooks.on_stage = [](const std::string& stage) { note("stage " + stage); };
  const auto result = run_pipeline(c, dir, hooks);
  std::cout << result.report.to_json().dump(2) << '\n';
}

std::vector<double> parse_ratios(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("bad keep ratio '" + item + "'");
    }
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw ConfigError("bad seed '" + item + "'");
    }
  }
  return out;
}

int cmd_protocol(const Overrides& o, const std::string& ratios, const std::string& seeds) {
  const auto c = resolve(o);
  const auto dir = output_dir(o, "protocol");
  const auto ratio_list = parse_ratios(ratios);
  if (ratio_list.empty()) throw ConfigError("--ratios must list at least one keep ratio");
  auto seed_list = parse_seeds(seeds);
  if (seed_list.empty()) seed_list.push_back(c.train.seed);
  fs::create_directories(dir);
  write_config(dir, c);
  const auto result = run_protocol(c, ratio_list, seed_list, dir);
  std::cout << result.csv();
  for (const auto& row : result.rows) {
    if (!row.ok()) return kRuntime;
  }
  return kOk;
}

void cmd_diag(const std::vector<std::string>& run_dirs, std::uint64_t seed) {
  if (run_dirs.empty()) throw ConfigError("--run is required");
  if (run_dirs.size() == 1) {
    std::cout << run_diag(run_dirs.front(), seed).dump(2) << '\n';
    return;
  }
  // Several runs: one side-by-side table of the final gaps.
  std::vector<json> diags;
  for (const auto& dir : run_dirs) diags.push_back(run_diag(dir, seed));
  std::cout << diag_comparison_csv(run_dirs, diags);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion-based generative zero-shot learning at desk scale"};
  app.require_subcommand(1);
  Overrides o;
  std::string extractors_dir;
  std::string models_dir;
  std::string ratios;
  std::string seeds;
  std::vector<std::string> run_dirs;
  std::uint64_t diag_seed = 5;

  auto* gen = app.add_subcommand("gen-data", "Generate (or re-save) a dataset bundle");
  add_common(gen, o);
  gen->add_option("--bundle", o.bundle, "Existing bundle to re-save instead of generating");

  auto* ft = app.add_subcommand("finetune", "Train and freeze the feature/representation extractors");
  add_common(ft, o);
  ft->add_option("--bundle", o.bundle, "Bundle directory")->required();

  auto* drg = app.add_subcommand("train-drg", "Train the representation generator");
  add_common(drg, o);
  drg->add_option("--bundle", o.bundle, "Bundle directory")->required();
  drg->add_option("--extractors", extractors_dir, "Frozen extractors directory")->required();

  auto* dfg = app.add_subcommand("train-dfg", "Train the feature generator");
  add_common(dfg, o);
  dfg->add_option("--bundle", o.bundle, "Bundle directory")->required();
  dfg->add_option("--extractors", extractors_dir, "Frozen extractors directory")->required();
  dfg->add_option("--models", models_dir, "Models directory from train-drg")->required();

  auto* syn = app.add_subcommand("synth", "Synthesize unseen-class samples");
  add_common(syn, o);
  syn->add_option("--bundle", o.bundle, "Bundle directory (attributes)")->required();
  syn->add_option("--models", models_dir, "Trained models directory")->required();

  auto* ev = app.add_subcommand("eval", "Synthesize, train the final classifiers and evaluate");
  add_common(ev, o);
  ev->add_option("--bundle", o.bundle, "Bundle directory")->required();
  ev->add_option("--extractors", extractors_dir, "Frozen extractors directory")->required();
  ev->add_option("--models", models_dir, "Trained models directory")->required();

  auto* run = app.add_subcommand("run", "Run every stage end to end");
  add_common(run, o);
  run->add_option("--bundle", o.bundle, "Use an existing bundle instead of generating one");

  auto* proto = app.add_subcommand("protocol", "Limited-training-data sweep");
  add_common(proto, o);
  proto->add_option("--bundle", o.bundle, "Use an existing bundle instead of generating one");
  proto->add_option("--ratios", ratios, "Comma-separated keep ratios, e.g. 1.0,0.3,0.1")->required();
  proto->add_option("--seeds", seeds, "Comma-separated training seeds");

  auto* diag = app.add_subcommand("diag", "Critic-gap diagnostics of a run directory");
  diag->add_option("--run", run_dirs, "Directory written by `run` (repeat to compare runs)")->required();
  diag->add_option("--seed", diag_seed, "Noise seed for the diffusion gap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "gen-data") cmd_gen_data(o);
    else if (command == "finetune") cmd_finetune(o);
    else if (command == "train-drg") cmd_train_drg(o, extractors_dir);
    else if (command == "train-dfg") cmd_train_dfg(o, extractors_dir, models_dir);
    else if (command == "synth") cmd_synth(o, models_dir);
    else if (command == "eval") cmd_eval(o, extractors_dir, models_dir);
    else if (command == "run") cmd_run(o);
    else if (command == "protocol") return cmd_protocol(o, ratios, seeds);
    else if (command == "diag") cmd_diag(run_dirs, diag_seed);
    return kOk;
  } catch (const ConfigError& e) {
    return report_error(command, "config", e.what(), kConfig);
  } catch (const InvalidArgument& e) {
    return report_error(command, "config", e.what(), kConfig);
  } catch (const IoError& e) {
    return report_error(command, "io", e.what(), kIo);
  } catch (const TrainingDivergence& e) {
    return report_error(command, "training", e.what(), kRuntime);
  } catch (const std::exception& e) {
    return report_error(command, "runtime", e.what(), kRuntime);
  }
}
