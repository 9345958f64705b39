// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#include "dzsl/zsl_eval.hpp"

#include "dzsl/adam.hpp"
#include "dzsl/errors.hpp"
#include "dzsl/matrix_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

namespace dzsl {
namespace {

using nlohmann::json;

// Percentages are stored rounded so that reports are stable text.
double round6(double x) { return std::round(x * 1e6) / 1e6; }

json per_class_json(const std::map<int, double>& m) {
  json j = json::object();
  for (const auto& [c, acc] : m) j[std::to_string(c)] = round6(acc);
  return j;
}

std::map<int, double> per_class_from_json(const json& j) {
  std::map<int, double> m;
  for (const auto& [k, v] : j.items()) m[std::stoi(k)] = v.get<double>();
  return m;
}

Matrix run_chain(int t_te, int T, Eigen::Index n, Eigen::Index dim, Rng& rng,
                 const DiffusionSchedule& schedule,
                 const std::function<Matrix(int, const Matrix&, Rng&)>& denoise) {
  Matrix x_t = randn(n, dim, rng);
  Matrix x0;
  for (int k = 0; k < t_te; ++k) {
    const int t = T - k;
    x0 = denoise(t, x_t, rng);
    if (k + 1 < t_te) x_t = posterior_sample(schedule, x0, x_t, t, rng);
  }
  return x0;
}

}  // namespace

void SynthesizedSet::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  io::write_f32(dir / "features.f32", features);
  io::write_f32(dir / "representations.f32", representations);
  std::vector<std::uint32_t> l(labels.begin(), labels.end());
  io::write_u32(dir / "labels.u32", l);
  json meta{{"n_per_class", n_per_class}, {"steps_used", steps_used}, {"seed", seed},
            {"rows", labels.size()}};
  io::write_text(dir / "synth.json", meta.dump(2));
}

SynthesizedSet synthesize(const RepGenerator& rep_generator, const Generator& generator,
                          const Matrix& attributes, std::span<const int> classes, int n_per_class,
                          int t_te, const DiffusionSchedule& schedule, std::uint64_t seed) {
  const int T = schedule.steps();
  if (t_te < 1 || t_te > T) {
    throw RangeError("synthesize: t_te " + std::to_string(t_te) + " outside [1, " +
                     std::to_string(T) + "]");
  }
  if (n_per_class < 0) throw InvalidArgument("synthesize: negative n_per_class");
  const NetworkDims& dims = generator.dims();
  if (rep_generator.dims().steps != T || dims.steps != T) {
    throw DimensionError("synthesize: generator step count differs from the schedule");
  }
  SynthesizedSet out;
  out.n_per_class = n_per_class;
  out.steps_used = t_te;
  out.seed = seed;
  const auto total = static_cast<Eigen::Index>(classes.size()) * n_per_class;
  out.features.resize(total, dims.feature_dim);
  out.representations.resize(total, dims.rep_dim);
  out.labels.reserve(static_cast<std::size_t>(total));
  const Eigen::Index n = n_per_class;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const int label = classes[c];
    if (label < 0 || label >= attributes.rows()) throw RangeError("synthesize: class id out of range");
    if (n == 0) continue;
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(label) + 1);
    const Matrix a = attributes.row(label).replicate(n, 1);
    const Matrix r0 = run_chain(t_te, T, n, dims.rep_dim, rng, schedule,
                                [&](int t, const Matrix& r_t, Rng& g) {
                                  const Matrix z = randn(n, dims.z_dim, g);
                                  return rep_generator.generate(a, t, r_t, z);
                                });
    const Matrix v0 = run_chain(t_te, T, n, dims.feature_dim, rng, schedule,
                                [&](int t, const Matrix& v_t, Rng& g) {
                                  const Matrix z = randn(n, dims.z_dim, g);
                                  return generator.generate(a, r0, t, v_t, z);
                                });
    const Eigen::Index offset = static_cast<Eigen::Index>(c) * n;
    out.features.middleRows(offset, n) = v0;
    out.representations.middleRows(offset, n) = r0;
    out.labels.insert(out.labels.end(), static_cast<std::size_t>(n), label);
  }
  return out;
}

LinearClassifier::LinearClassifier(int input_dim, std::vector<int> classes, Rng& rng)
    : classes_(std::move(classes)) {
  if (input_dim <= 0) throw InvalidArgument("classifier: input_dim must be positive");
  if (classes_.empty()) throw InvalidArgument("classifier: empty label space");
  std::sort(classes_.begin(), classes_.end());
  if (std::adjacent_find(classes_.begin(), classes_.end()) != classes_.end()) {
    throw InvalidArgument("classifier: duplicate class ids");
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const auto K = static_cast<Eigen::Index>(classes_.size());
  weights_ = ad::leaf(rand_uniform(input_dim, K, -bound, bound, rng));
  bias_ = ad::leaf(Matrix::Zero(1, K));
}

Matrix LinearClassifier::scores(const Matrix& x) const {
  if (x.cols() != input_dim()) throw DimensionError("classifier: input width mismatch");
  return (x * weights_.value()).rowwise() + bias_.value().row(0);
}

std::vector<int> LinearClassifier::columns_for(std::span<const int> allowed) const {
  std::vector<int> cols;
  for (int c : allowed) {
    const auto it = std::lower_bound(classes_.begin(), classes_.end(), c);
    if (it == classes_.end() || *it != c) {
      throw RangeError("classifier: class " + std::to_string(c) + " not in its label space");
    }
    cols.push_back(static_cast<int>(it - classes_.begin()));
  }
  std::sort(cols.begin(), cols.end());
  return cols;
}

std::vector<int> LinearClassifier::predict(const Matrix& x) const {
  return predict(x, classes_);
}

std::vector<int> LinearClassifier::predict(const Matrix& x, std::span<const int> allowed) const {
  const auto cols = columns_for(allowed);
  if (cols.empty()) throw InvalidArgument("classifier: empty allowed label set");
  const Matrix s = scores(x);
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    int best = cols.front();
    for (int c : cols) {
      if (s(i, c) > s(i, best)) best = c;  // strict: ties keep the lower id
    }
    out[static_cast<std::size_t>(i)] = classes_[static_cast<std::size_t>(best)];
  }
  return out;
}

Matrix join_features(const Matrix& v, const Matrix& r) {
  if (v.rows() != r.rows()) throw DimensionError("join_features: row counts differ");
  Matrix out(v.rows(), v.cols() + r.cols());
  out << v, r;
  return out;
}

LinearClassifier train_final_classifier(const Matrix& x, std::span<const int> labels,
                                        std::vector<int> classes, const ClassifierConfig& config,
                                        Rng& rng) {
  if (x.rows() != static_cast<Eigen::Index>(labels.size())) {
    throw DimensionError("classifier: label count differs from row count");
  }
  if (x.rows() == 0) throw InvalidArgument("classifier: empty training set");
  if (config.iterations < 0 || config.batch_size < 1 || config.lr <= 0.0) {
    throw ConfigError("classifier: bad optimization settings");
  }
  check_finite(x, "classifier inputs");
  LinearClassifier clf(static_cast<int>(x.cols()), std::move(classes), rng);
  std::vector<int> local(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& cls = clf.classes();
    const auto it = std::lower_bound(cls.begin(), cls.end(), labels[i]);
    if (it == cls.end() || *it != labels[i]) {
      throw RangeError("classifier: label " + std::to_string(labels[i]) + " outside the label space");
    }
    local[i] = static_cast<int>(it - cls.begin());
  }
  Adam opt(AdamOptions{config.lr, 0.9, 0.999, 1e-8});
  std::vector<ad::Var> params{clf.weights(), clf.bias()};
  const auto n = static_cast<std::size_t>(x.rows());
  const auto b = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), n);
  std::vector<int> batch_labels(b);
  Matrix xb(static_cast<Eigen::Index>(b), x.cols());
  for (int it = 0; it < config.iterations; ++it) {
    const auto idx = sample_without_replacement(n, b, rng);
    for (std::size_t i = 0; i < b; ++i) {
      xb.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
      batch_labels[i] = local[idx[i]];
    }
    const ad::Var logits = ad::add_rowvec(ad::matmul(ad::constant(xb), params[0]), params[1]);
    const ad::Var loss = cross_entropy(logits, batch_labels);
    const auto grads = ad::grad(loss, params);
    opt.step(params, grads);
  }
  clf.freeze();
  return clf;
}

double macro_accuracy(std::span<const int> predicted, std::span<const int> truth,
                      std::span<const int> classes, std::map<int, double>* per_class) {
  if (predicted.size() != truth.size()) throw DimensionError("macro_accuracy: length mismatch");
  double total = 0.0;
  int counted = 0;
  for (int c : classes) {
    std::size_t hits = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] != c) continue;
      ++count;
      if (predicted[i] == c) ++hits;
    }
    if (count == 0) continue;
    const double acc = 100.0 * static_cast<double>(hits) / static_cast<double>(count);
    if (per_class) (*per_class)[c] = acc;
    total += acc;
    ++counted;
  }
  return counted == 0 ? 0.0 : total / counted;
}

double harmonic_mean(double s, double u) {
  return s + u > 0.0 ? 2.0 * s * u / (s + u) : 0.0;
}

json MetricsReport::to_json() const {
  return {{"t1_zsl", round6(t1_zsl)},
          {"u", round6(u)},
          {"s", round6(s)},
          {"h", round6(h)},
          {"per_class_zsl", per_class_json(per_class_zsl)},
          {"per_class_gzsl", per_class_json(per_class_gzsl)},
          {"config_hash", config_hash}};
}

MetricsReport MetricsReport::from_json(const json& j) {
  try {
    MetricsReport r;
    r.t1_zsl = j.at("t1_zsl").get<double>();
    r.u = j.at("u").get<double>();
    r.s = j.at("s").get<double>();
    r.h = j.at("h").get<double>();
    r.per_class_zsl = per_class_from_json(j.at("per_class_zsl"));
    r.per_class_gzsl = per_class_from_json(j.at("per_class_gzsl"));
    r.config_hash = j.at("config_hash").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw FormatError("metrics report: " + std::string(e.what()));
  }
}

std::string MetricsReport::csv_header() { return "t1_zsl,u,s,h,config_hash"; }

std::string MetricsReport::csv_row() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f,%.4f,", t1_zsl, u, s, h);
  return std::string(buf) + config_hash;
}

void MetricsReport::save(const std::filesystem::path& dir) const {
  io::write_text(dir / "metrics.json", to_json().dump(2) + "\n");
  io::write_text(dir / "metrics.csv", csv_header() + "\n" + csv_row() + "\n");
}

EvalData make_eval_data(const DatasetBundle& bundle, const ExtractorPair& extractors) {
  EvalData d;
  const auto unseen = bundle.indices(SplitTag::TestUnseen);
  const auto seen = bundle.indices(SplitTag::TestSeen);
  d.unseen_x = join_features(extractors.bundle_features(bundle, unseen),
                             extractors.bundle_representations(bundle, unseen));
  d.seen_x = join_features(extractors.bundle_features(bundle, seen),
                           extractors.bundle_representations(bundle, seen));
  for (auto i : unseen) d.unseen_labels.push_back(bundle.labels[i]);
  for (auto i : seen) d.seen_labels.push_back(bundle.labels[i]);
  return d;
}

void evaluate(const LinearClassifier& classifier, const EvalData& data,
              std::span<const int> unseen_classes, std::span<const int> seen_classes,
              EvalMode mode, MetricsReport& report) {
  if (data.unseen_labels.empty()) throw InvalidArgument("evaluate: empty test_unseen split");
  if (mode == EvalMode::Zsl) {
    report.per_class_zsl.clear();
    const auto pred = classifier.predict(data.unseen_x, unseen_classes);
    report.t1_zsl = macro_accuracy(pred, data.unseen_labels, unseen_classes, &report.per_class_zsl);
    return;
  }
  if (data.seen_labels.empty()) throw InvalidArgument("evaluate: empty test_seen split");
  report.per_class_gzsl.clear();
  const auto pred_u = classifier.predict(data.unseen_x);
  const auto pred_s = classifier.predict(data.seen_x);
  report.u = macro_accuracy(pred_u, data.unseen_labels, unseen_classes, &report.per_class_gzsl);
  report.s = macro_accuracy(pred_s, data.seen_labels, seen_classes, &report.per_class_gzsl);
  report.h = harmonic_mean(report.s, report.u);
}

std::string config_hash(const json& config) {
  const std::string text = config.dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dzsl
