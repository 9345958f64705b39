// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#include "dzsl/errors.hpp"
#include "dzsl/matrix_io.hpp"
#include "dzsl/pipeline.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <string>

#include <sys/wait.h>

using namespace dzsl;
using dzsl::testing::TempDir;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.synth.samples_per_class = 12;
  c.extractor.iterations = 20;
  c.extractor.hidden = 16;
  c.extractor.feature_dim = 8;
  c.extractor.rep_dim = 4;
  c.extractor.proj_dim = 4;
  c.train.hidden = 8;
  c.train.batch_size = 16;
  c.train.critic_steps = 1;
  c.train.n_rep_iters = 3;
  c.train.n_gen_iters = 3;
  c.train.n_syn = 10;
  c.eval.classifier.iterations = 20;
  return c;
}

#ifdef DZSL_CLI_PATH
int run_cli(const std::string& args) {
  const std::string cmd = std::string(DZSL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
#endif

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("experiment config json round trip and strictness") {
  ExperimentConfig c = tiny_config();
  c.train.weights.lambda_mu = 0.5;
  c.eval.t_te = 2;
  c.bundle_path = "/data/b";
  const auto back = experiment_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));

  // Missing fields keep the base values.
  const auto partial = experiment_config_from_json(nlohmann::json{{"train", {{"hidden", 5}}}}, c);
  CHECK(partial.train.hidden == 5);
  CHECK(partial.train.batch_size == c.train.batch_size);
  CHECK(partial.eval.t_te == 2);

  CHECK_THROWS_AS(experiment_config_from_json(nlohmann::json{{"trian", nlohmann::json::object()}}),
                  ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json(nlohmann::json{{"eval", {{"tte", 1}}}}), ConfigError);
  ExperimentConfig bad = c;
  bad.eval.t_te = 5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  TempDir dir("cfg");
  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK_THROWS_AS(load_experiment_config(dir / "bad.json"), ConfigError);
  CHECK_THROWS_AS(load_experiment_config(dir / "absent.json"), IoError);
}

TEST_CASE("missing bundle path fails in the first stage and names the path") {
  ExperimentConfig c = tiny_config();
  c.bundle_path = "/nonexistent/bundle_dir";
  std::string stage;
  PipelineHooks hooks;
  hooks.on_stage = [&](const std::string& s) { stage = s; };
  try {
    run_pipeline(c, std::nullopt, hooks);
    FAIL("expected an I/O error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/bundle_dir") != std::string::npos);
  }
  CHECK(stage == "gen-data");
}

TEST_CASE("run writes reproducible artifacts with provenance") {
  TempDir dir("run");
  ExperimentConfig c = tiny_config();
  c.train.keep_ratio = 0.3;
  const auto result = run_pipeline(c, dir / "out");
  const auto& prov = result.resolved_config.at("provenance");
  CHECK(prov.at("n_syn_scaled").get<int>() == 3);  // round(0.3 * 10)
  CHECK(prov.at("keep_ratio").get<double>() == 0.3);
  for (const char* f : {"config.json", "metrics.json", "metrics.csv", "trace.jsonl"}) {
    CHECK(fs::exists(dir / "out" / f));
  }
  CHECK(result.report.config_hash == config_hash(result.resolved_config));
  // The stored config reproduces the run exactly.
  const auto again = run_pipeline(load_experiment_config(dir / "out" / "config.json"));
  CHECK(again.report.to_json() == result.report.to_json());
}

TEST_CASE("protocol: single point matches run, errors and per-row failures") {
  const ExperimentConfig c = tiny_config();
  const auto run = run_pipeline(c);
  const auto proto = run_protocol(c, {1.0}, {c.train.seed});
  REQUIRE(proto.rows.size() == 1);
  CHECK(proto.rows[0].ok());
  CHECK(proto.rows[0].report.to_json() == run.report.to_json());
  CHECK_THROWS_AS(run_protocol(c, {}, {1}), ConfigError);
  CHECK_THROWS_AS(run_protocol(c, {1.5}, {1}), ConfigError);
  CHECK_THROWS_AS(run_protocol(c, {1.0}, {}), ConfigError);

  // A failing row is recorded and the sweep continues.
  ExperimentConfig broken = c;
  broken.bundle_path = "/nonexistent";
  const auto failed = run_protocol(broken, {1.0, 0.5}, {1});
  REQUIRE(failed.rows.size() == 2);
  CHECK_FALSE(failed.rows[0].ok());
  CHECK_FALSE(failed.rows[1].ok());
  const std::string csv = proto.csv();
  CHECK(csv.find("keep_ratio") != std::string::npos);
}

TEST_CASE("diag: zero critics, manifest errors and comparison table") {
  TempDir dir("diag");
  const ExperimentConfig c = tiny_config();
  auto result = run_pipeline(c, dir / "run");
  const auto diag = run_diag(dir / "run");
  CHECK(std::isfinite(diag.at("final").at("delta_adv").get<double>()));
  CHECK(fs::exists(dir / "run" / "diag.csv"));

  for (Critic* k : {&result.models.d_adv, &result.models.d_diff}) k->net().zero_output_layer();
  save_models(result.models, dir / "run" / "models");
  const auto zero = run_diag(dir / "run");
  CHECK(zero.at("final").at("delta_adv").get<double>() == 0.0);
  CHECK(zero.at("final").at("delta_diff").get<double>() == 0.0);

  const std::string table = diag_comparison_csv({"a", "b"}, {diag, zero});
  CHECK(table.rfind("run,delta_adv,delta_diff\n", 0) == 0);
  CHECK(table.find("\nb,0.000000,0.000000\n") != std::string::npos);
  CHECK_THROWS_AS(diag_comparison_csv({"a"}, {}), InvalidArgument);

  io::write_text(dir / "run" / "models" / "manifest.json", "{ broken");
  CHECK_THROWS_AS(run_diag(dir / "run"), FormatError);
  CHECK_THROWS_AS(run_diag(dir / "absent"), IoError);
}

#ifdef DZSL_CLI_PATH
TEST_CASE("cli exit codes and artifact root") {
  TempDir dir("cli");
  const fs::path root = dir / "artifacts";
  ::setenv("DZSL_ARTIFACTS", root.c_str(), 1);
  io::write_text(dir / "tiny.json", to_json(tiny_config()).dump());
  const std::string cfg = "--config " + (dir / "tiny.json").string();

  CHECK(run_cli("gen-data " + cfg) == 0);
  CHECK(fs::exists(root / "gen-data" / "config.json"));
  CHECK(run_cli("run " + cfg) == 0);
  CHECK(fs::exists(root / "run" / "metrics.json"));
  CHECK(fs::exists(root / "run" / "config.json"));
  CHECK(run_cli("diag --run " + (root / "run").string()) == 0);

  CHECK(run_cli("run " + cfg + " --keep-ratio 2") == 1);
  CHECK(run_cli("run --no-such-flag") == 1);
  CHECK(run_cli("protocol " + cfg + " --ratios") == 1);
  CHECK(run_cli("eval " + cfg + " --bundle /nonexistent --extractors /x --models /y") == 3);
  CHECK(run_cli("diag --run /nonexistent") == 3);
  ::unsetenv("DZSL_ARTIFACTS");
}
#endif

}  // TEST_SUITE
