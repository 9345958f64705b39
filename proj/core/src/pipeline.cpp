// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#include "dzsl/pipeline.hpp"

#include "dzsl/checkpoint.hpp"
#include "dzsl/errors.hpp"
#include "dzsl/matrix_io.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace dzsl {
namespace {

using nlohmann::json;

template <typename T>
void read_field(const json& j, const char* section, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(section) + "." + key + ": " + e.what());
  }
}

void reject_unknown(const json& j, const char* section, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ConfigError(std::string(section) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(std::string(section) + ": unknown field '" + key + "'");
  }
}

void announce(const PipelineHooks& hooks, const std::string& stage) {
  if (hooks.on_stage) hooks.on_stage(stage);
}

std::vector<int> labels_of(const TrainingSet& set) { return set.labels; }

}  // namespace

json to_json(const SynthConfig& c) {
  return {{"seen_classes", c.seen_classes},     {"unseen_classes", c.unseen_classes},
          {"attr_dim", c.attr_dim},             {"raw_dim", c.raw_dim},
          {"samples_per_class", c.samples_per_class}, {"noise", c.noise},
          {"seed", c.seed},                     {"train_fraction", c.train_fraction}};
}

json to_json(const ExtractorConfig& c) {
  return {{"feature_dim", c.feature_dim}, {"rep_dim", c.rep_dim},
          {"proj_dim", c.proj_dim},       {"hidden", c.hidden},
          {"iterations", c.iterations},   {"batch_size", c.batch_size},
          {"lr", c.lr},                   {"tau", c.tau}};
}

json to_json(const ExperimentConfig& c) {
  json j{{"synth", to_json(c.synth)},
         {"extractor", to_json(c.extractor)},
         {"train", to_json(c.train)},
         {"eval",
          {{"t_te", c.eval.t_te},
           {"seed", c.eval.seed},
           {"classifier_iterations", c.eval.classifier.iterations},
           {"classifier_lr", c.eval.classifier.lr},
           {"classifier_batch_size", c.eval.classifier.batch_size}}}};
  if (!c.bundle_path.empty()) j["bundle"] = c.bundle_path;
  return j;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (bundle_path.empty()) {
    if (synth.seen_classes < 1) fail("synth.seen_classes must be >= 1");
    if (synth.unseen_classes < 1) fail("synth.unseen_classes must be >= 1");
    if (synth.attr_dim < 1) fail("synth.attr_dim must be >= 1");
    if (synth.raw_dim < 1) fail("synth.raw_dim must be >= 1");
    if (synth.samples_per_class < 2) fail("synth.samples_per_class must be >= 2");
    if (synth.noise < 0.0) fail("synth.noise must be >= 0");
    if (!(synth.train_fraction > 0.0 && synth.train_fraction < 1.0)) {
      fail("synth.train_fraction must lie in (0, 1)");
    }
  }
  if (extractor.feature_dim < 1 || extractor.rep_dim < 1 || extractor.proj_dim < 1 ||
      extractor.hidden < 1) {
    fail("extractor dims must be >= 1");
  }
  if (extractor.iterations < 0 || extractor.batch_size < 2) fail("extractor schedule is invalid");
  if (extractor.lr <= 0.0) fail("extractor.lr must be positive");
  if (extractor.tau <= 0.0) fail("extractor.tau must be positive");
  train.validate();
  if (eval.t_te < 1 || eval.t_te > train.steps) fail("eval.t_te must lie in [1, train.steps]");
  if (eval.classifier.iterations < 0 || eval.classifier.batch_size < 1 ||
      eval.classifier.lr <= 0.0) {
    fail("eval classifier settings are invalid");
  }
}

ExperimentConfig experiment_config_from_json(const json& j, ExperimentConfig c) {
  // "provenance" is written next to every artifact and only read back as metadata.
  reject_unknown(j, "config", {"synth", "extractor", "train", "eval", "bundle", "provenance"});
  if (j.contains("synth")) {
    const auto& s = j["synth"];
    reject_unknown(s, "synth",
                   {"seen_classes", "unseen_classes", "attr_dim", "raw_dim", "samples_per_class",
                    "noise", "seed", "train_fraction"});
    read_field(s, "synth", "seen_classes", c.synth.seen_classes);
    read_field(s, "synth", "unseen_classes", c.synth.unseen_classes);
    read_field(s, "synth", "attr_dim", c.synth.attr_dim);
    read_field(s, "synth", "raw_dim", c.synth.raw_dim);
    read_field(s, "synth", "samples_per_class", c.synth.samples_per_class);
    read_field(s, "synth", "noise", c.synth.noise);
    read_field(s, "synth", "seed", c.synth.seed);
    read_field(s, "synth", "train_fraction", c.synth.train_fraction);
  }
  if (j.contains("extractor")) {
    const auto& e = j["extractor"];
    reject_unknown(e, "extractor",
                   {"feature_dim", "rep_dim", "proj_dim", "hidden", "iterations", "batch_size",
                    "lr", "tau"});
    read_field(e, "extractor", "feature_dim", c.extractor.feature_dim);
    read_field(e, "extractor", "rep_dim", c.extractor.rep_dim);
    read_field(e, "extractor", "proj_dim", c.extractor.proj_dim);
    read_field(e, "extractor", "hidden", c.extractor.hidden);
    read_field(e, "extractor", "iterations", c.extractor.iterations);
    read_field(e, "extractor", "batch_size", c.extractor.batch_size);
    read_field(e, "extractor", "lr", c.extractor.lr);
    read_field(e, "extractor", "tau", c.extractor.tau);
  }
  if (j.contains("train")) c.train = train_config_from_json(j["train"], c.train);
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    reject_unknown(e, "eval",
                   {"t_te", "seed", "classifier_iterations", "classifier_lr",
                    "classifier_batch_size"});
    read_field(e, "eval", "t_te", c.eval.t_te);
    read_field(e, "eval", "seed", c.eval.seed);
    read_field(e, "eval", "classifier_iterations", c.eval.classifier.iterations);
    read_field(e, "eval", "classifier_lr", c.eval.classifier.lr);
    read_field(e, "eval", "classifier_batch_size", c.eval.classifier.batch_size);
  }
  if (j.contains("bundle")) read_field(j, "config", "bundle", c.bundle_path);
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

DatasetBundle obtain_bundle(const ExperimentConfig& config) {
  if (config.bundle_path.empty()) return generate_synthetic(config.synth);
  if (!std::filesystem::exists(config.bundle_path)) {
    throw IoError("bundle not found: " + config.bundle_path);
  }
  return load_bundle(config.bundle_path);
}

EvalOutcome evaluate_models(const DatasetBundle& bundle, const ExtractorPair& extractors,
                            const ModelSet& models, const TrainConfig& train, int n_syn,
                            const EvalConfig& eval) {
  if (n_syn < 1) throw ConfigError("evaluation needs at least one synthetic sample per class");
  EvalOutcome out;
  const auto schedule = train.schedule();
  out.synthetic = synthesize(models.rep_generator, models.generator, bundle.attributes,
                             bundle.unseen_classes, n_syn, eval.t_te, schedule, eval.seed);
  check_finite(out.synthetic.features, "synthetic features");
  check_finite(out.synthetic.representations, "synthetic representations");
  const Matrix synth_x = join_features(out.synthetic.features, out.synthetic.representations);
  const EvalData data = make_eval_data(bundle, extractors);

  Rng zsl_rng = make_rng(eval.seed, stream_id("zsl-classifier"));
  const auto zsl = train_final_classifier(synth_x, out.synthetic.labels, bundle.unseen_classes,
                                          eval.classifier, zsl_rng);
  evaluate(zsl, data, bundle.unseen_classes, bundle.seen_classes, EvalMode::Zsl, out.report);

  const TrainingSet seen = make_split_set(bundle, extractors, SplitTag::TrainSeen);
  Matrix gzsl_x(synth_x.rows() + seen.size(), synth_x.cols());
  gzsl_x << synth_x, join_features(seen.v0, seen.r0);
  std::vector<int> gzsl_labels = out.synthetic.labels;
  const auto seen_labels = labels_of(seen);
  gzsl_labels.insert(gzsl_labels.end(), seen_labels.begin(), seen_labels.end());
  std::vector<int> all_classes = bundle.seen_classes;
  all_classes.insert(all_classes.end(), bundle.unseen_classes.begin(), bundle.unseen_classes.end());
  Rng gzsl_rng = make_rng(eval.seed, stream_id("gzsl-classifier"));
  const auto gzsl =
      train_final_classifier(gzsl_x, gzsl_labels, all_classes, eval.classifier, gzsl_rng);
  evaluate(gzsl, data, bundle.unseen_classes, bundle.seen_classes, EvalMode::Gzsl, out.report);
  return out;
}

PipelineResult run_pipeline(const ExperimentConfig& config,
                            const std::optional<std::filesystem::path>& out_dir,
                            const PipelineHooks& hooks) {
  config.validate();
  PipelineResult result;
  const auto& tc = config.train;

  announce(hooks, "gen-data");
  DatasetBundle source = obtain_bundle(config);
  source.validate();
  Rng keep_rng = make_rng(tc.seed, stream_id("keep-ratio"));
  std::tie(result.bundle, result.plan) = apply_keep_ratio(source, tc.keep_ratio, tc.n_syn, keep_rng);

  result.resolved_config = to_json(config);
  result.resolved_config["provenance"] = {{"keep_ratio", result.plan.ratio},
                                          {"n_syn_scaled", result.plan.n_syn_scaled},
                                          {"bundle_seed", result.bundle.seed},
                                          {"train_seed", tc.seed},
                                          {"eval_seed", config.eval.seed}};
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    io::write_text(*out_dir / "config.json", result.resolved_config.dump(2) + "\n");
    save_bundle(result.bundle, *out_dir / "bundle");
  }

  announce(hooks, "finetune");
  Rng ft_rng = make_rng(tc.seed, stream_id("finetune"));
  result.extractors = finetune(result.bundle, config.extractor, ft_rng);
  if (out_dir) result.extractors.save(*out_dir / "extractors");

  const TrainingSet data = make_split_set(result.bundle, result.extractors, SplitTag::TrainSeen);
  result.models = init_models(
      tc.dims(result.bundle.attr_dim(), result.extractors.feature_dim(), result.extractors.rep_dim()),
      tc.seed);

  std::optional<TrainingSet> diag_set;
  TrainHooks train_hooks = hooks.train;
  if (tc.diag_every > 0 && train_hooks.diag_set == nullptr) {
    diag_set = make_split_set(result.bundle, result.extractors, SplitTag::TestSeen);
    if (diag_set->size() > 0) train_hooks.diag_set = &*diag_set;
  }
  if (out_dir && !train_hooks.checkpoint_dir) train_hooks.checkpoint_dir = *out_dir / "state";

  announce(hooks, "train-drg");
  Rng drg_rng = make_rng(tc.seed, stream_id("train-drg"));
  result.drg_trace = train_drg(data, result.models, tc, drg_rng, train_hooks);

  announce(hooks, "train-dfg");
  Rng dfg_rng = make_rng(tc.seed, stream_id("train-dfg"));
  result.dfg_trace = train_dfg(data, result.models, tc, dfg_rng, train_hooks);
  if (out_dir) {
    save_models(result.models, *out_dir / "models");
    result.drg_trace.write_jsonl(*out_dir / "trace.jsonl");
    result.dfg_trace.write_jsonl(*out_dir / "trace.jsonl", /*append=*/true);
  }

  announce(hooks, "evaluate");
  auto outcome = evaluate_models(result.bundle, result.extractors, result.models, tc,
                                 result.plan.n_syn_scaled, config.eval);
  result.report = std::move(outcome.report);
  result.report.config_hash = config_hash(result.resolved_config);
  if (out_dir) {
    outcome.synthetic.save(*out_dir / "synth");
    result.report.save(*out_dir);
  }
  return result;
}

std::string ProtocolResult::csv() const {
  std::ostringstream out;
  out << "keep_ratio,seed,n_syn,t1_zsl,u,s,h,status\n";
  char buf[200];
  for (const auto& r : rows) {
    if (r.ok()) {
      std::snprintf(buf, sizeof buf, "%.4f,%llu,%d,%.4f,%.4f,%.4f,%.4f,ok\n", r.keep_ratio,
                    static_cast<unsigned long long>(r.seed), r.n_syn, r.report.t1_zsl, r.report.u,
                    r.report.s, r.report.h);
      out << buf;
    } else {
      std::string msg = r.error;
      for (char& ch : msg) {
        if (ch == ',' || ch == '\n') ch = ' ';
      }
      std::snprintf(buf, sizeof buf, "%.4f,%llu,%d,,,,,", r.keep_ratio,
                    static_cast<unsigned long long>(r.seed), r.n_syn);
      out << buf << "error: " << msg << '\n';
    }
  }
  return out.str();
}

ProtocolResult run_protocol(const ExperimentConfig& config, const std::vector<double>& ratios,
                            const std::vector<std::uint64_t>& seeds,
                            const std::optional<std::filesystem::path>& out_dir) {
  if (ratios.empty()) throw ConfigError("protocol: empty keep-ratio list");
  if (seeds.empty()) throw ConfigError("protocol: empty seed list");
  for (double r : ratios) {
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("protocol: keep ratios must lie in (0, 1]");
  }
  ProtocolResult result;
  for (double ratio : ratios) {
    for (auto seed : seeds) {
      ProtocolRow row;
      row.keep_ratio = ratio;
      row.seed = seed;
      ExperimentConfig run = config;
      run.train.keep_ratio = ratio;
      run.train.seed = seed;
      try {
        std::optional<std::filesystem::path> dir;
        if (out_dir) {
          char name[64];
          std::snprintf(name, sizeof name, "ratio_%.4g_seed_%llu", ratio,
                        static_cast<unsigned long long>(seed));
          dir = *out_dir / name;
        }
        auto res = run_pipeline(run, dir);
        row.n_syn = res.plan.n_syn_scaled;
        row.report = res.report;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      result.rows.push_back(std::move(row));
    }
  }
  if (out_dir) io::write_text(*out_dir / "protocol.csv", result.csv());
  return result;
}

json run_diag(const std::filesystem::path& run_dir, std::uint64_t seed) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(run_dir)) throw IoError("run directory not found: " + run_dir.string());
  const DatasetBundle bundle = load_bundle(run_dir / "bundle");
  const ExtractorPair extractors = ExtractorPair::load(run_dir / "extractors");
  const ModelSet models = load_models(run_dir / "models");
  if (models.dims.attr_dim != bundle.attr_dim() ||
      models.dims.feature_dim != extractors.feature_dim() ||
      models.dims.rep_dim != extractors.rep_dim()) {
    throw FormatError("checkpoint does not match the bundle/extractor dimensions");
  }
  const TrainingSet train = make_split_set(bundle, extractors, SplitTag::TrainSeen);
  const TrainingSet test = make_split_set(bundle, extractors, SplitTag::TestSeen);
  NetworkDims dims = models.dims;
  double beta_min = 0.1;
  double beta_max = 20.0;
  if (fs::exists(run_dir / "config.json")) {
    try {
      const auto cfg = json::parse(io::read_text(run_dir / "config.json"));
      beta_min = cfg.at("train").value("beta_min", beta_min);
      beta_max = cfg.at("train").value("beta_max", beta_max);
    } catch (const json::exception& e) {
      throw FormatError("config.json: " + std::string(e.what()));
    }
  }
  const auto schedule = DiffusionSchedule::vp(dims.steps, beta_min, beta_max);
  Rng rng = make_rng(seed, stream_id("diag"));
  const CriticGap gap = critic_gap_diagnostics(models, train, test, schedule, rng);

  json out{{"final", {{"delta_adv", gap.delta_adv}, {"delta_diff", gap.delta_diff}}}};
  json series = json::array();
  std::string csv = "iteration,delta_adv,delta_diff\n";
  if (fs::exists(run_dir / "trace.jsonl")) {
    const auto trace = TrainTrace::read_jsonl(run_dir / "trace.jsonl");
    for (const auto& r : trace.records()) {
      if (r.stage != Stage::Dfg || !r.gap) continue;
      series.push_back({{"iteration", r.iteration},
                        {"delta_adv", r.gap->delta_adv},
                        {"delta_diff", r.gap->delta_diff}});
      csv += std::to_string(r.iteration) + "," + std::to_string(r.gap->delta_adv) + "," +
             std::to_string(r.gap->delta_diff) + "\n";
    }
  }
  out["trace"] = series;
  io::write_text(run_dir / "diag.json", out.dump(2) + "\n");
  io::write_text(run_dir / "diag.csv", csv);
  return out;
}

std::string diag_comparison_csv(const std::vector<std::string>& names,
                                const std::vector<json>& diags) {
  if (names.size() != diags.size()) throw InvalidArgument("one name per diagnostics record");
  std::ostringstream csv;
  csv << "run,delta_adv,delta_diff\n";
  for (std::size_t i = 0; i < diags.size(); ++i) {
    const auto& fin = diags[i].at("final");
    char buf[96];
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f\n", fin.at("delta_adv").get<double>(),
                  fin.at("delta_diff").get<double>());
    csv << names[i] << buf;
  }
  return csv.str();
}

}  // namespace dzsl
