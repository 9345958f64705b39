// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#include "dzsl/extractors.hpp"

#include "dzsl/checkpoint.hpp"
#include "dzsl/errors.hpp"
#include "dzsl/matrix_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dzsl {
namespace {

using nlohmann::json;

RowVector column_scale(const Matrix& m, const RowVector& mean) {
  RowVector scale(m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double var = (m.col(c).array() - mean(c)).square().mean();
    const double sd = std::sqrt(var);
    scale(c) = sd > 1e-8 ? sd : 1.0;
  }
  return scale;
}

Matrix standardize(const Matrix& m, const RowVector& mean, const RowVector& scale) {
  Matrix out = m.rowwise() - mean;
  return out.array().rowwise() / scale.array();
}

std::vector<ad::Var> concat_params(Mlp& a, Mlp& b) {
  std::vector<ad::Var> out = a.trainable_parameters();
  const auto& more = b.trainable_parameters();
  out.insert(out.end(), more.begin(), more.end());
  return out;
}

}  // namespace

ad::Var cross_entropy(const ad::Var& logits, std::span<const int> labels) {
  const Matrix& z = logits.value();
  const auto batch = z.rows();
  if (batch == 0) throw DimensionError("cross_entropy: empty batch");
  if (static_cast<std::size_t>(batch) != labels.size()) {
    throw DimensionError("cross_entropy: label count differs from batch size");
  }
  Matrix probs(z.rows(), z.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < batch; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= z.cols()) {
      throw RangeError("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                       std::to_string(z.cols()) + ")");
    }
    const double zmax = z.row(i).maxCoeff();
    const auto shifted = (z.row(i).array() - zmax).exp();
    const double norm = shifted.sum();
    probs.row(i) = shifted / norm;
    total += zmax + std::log(norm) - z(i, y);
  }
  Matrix value(1, 1);
  value(0, 0) = total / static_cast<double>(batch);
  Matrix dlogits = probs;
  for (Eigen::Index i = 0; i < batch; ++i) dlogits(i, labels[i]) -= 1.0;
  dlogits /= static_cast<double>(batch);
  return ad::custom_op(std::move(value), {logits}, [dlogits = std::move(dlogits)](const ad::Var& g) {
    return std::vector<ad::Var>{ad::constant(dlogits * g.value()(0, 0))};
  });
}

double ce_loss(const Matrix& logits, std::span<const int> labels) {
  ad::NoGradGuard guard;
  return cross_entropy(ad::constant(logits), labels).item();
}

ad::Var normalize_rows(const ad::Var& x) {
  const Matrix& u = x.value();
  Eigen::VectorXd norms = u.rowwise().norm();
  if ((norms.array() <= 0.0).any()) throw InvalidArgument("normalize_rows: zero row");
  Matrix h = u.array().colwise() / norms.array();
  Matrix h_copy = h;
  return ad::custom_op(std::move(h), {x}, [h = std::move(h_copy), norms](const ad::Var& g) {
    const Matrix& gv = g.value();
    Eigen::VectorXd proj = gv.cwiseProduct(h).rowwise().sum();
    Matrix du = gv - (h.array().colwise() * proj.array()).matrix();
    du = du.array().colwise() / norms.array();
    return std::vector<ad::Var>{ad::constant(std::move(du))};
  });
}

ad::Var sc_loss(const ad::Var& projections, std::span<const int> labels, double tau, Rng& rng) {
  if (!(tau > 0.0)) throw InvalidArgument("sc_loss: temperature must be positive");
  const Matrix& h = projections.value();
  const auto batch = h.rows();
  if (static_cast<std::size_t>(batch) != labels.size()) {
    throw DimensionError("sc_loss: label count differs from batch size");
  }
  const Matrix sim = h * h.transpose() / tau;

  Matrix coeff = Matrix::Zero(batch, batch);  // dL/ds_ij summed over anchors
  double total = 0.0;
  int valid = 0;
  std::vector<Eigen::Index> positives;
  std::vector<Eigen::Index> members;
  for (Eigen::Index i = 0; i < batch; ++i) {
    positives.clear();
    for (Eigen::Index j = 0; j < batch; ++j) {
      if (j != i && labels[j] == labels[i]) positives.push_back(j);
    }
    if (positives.empty()) continue;
    const Eigen::Index p =
        positives[static_cast<std::size_t>(rand_int(0, static_cast<int>(positives.size()) - 1, rng))];
    members.assign(1, p);
    for (Eigen::Index k = 0; k < batch; ++k) {
      if (labels[k] != labels[i]) members.push_back(k);
    }
    double smax = -std::numeric_limits<double>::infinity();
    for (auto j : members) smax = std::max(smax, sim(i, j));
    double norm = 0.0;
    for (auto j : members) norm += std::exp(sim(i, j) - smax);
    total += -sim(i, p) + smax + std::log(norm);
    for (auto j : members) coeff(i, j) += std::exp(sim(i, j) - smax) / norm;
    coeff(i, p) -= 1.0;
    ++valid;
  }
  if (valid == 0) throw NoPositiveError("sc_loss: no anchor in the batch has a positive");

  Matrix value(1, 1);
  value(0, 0) = total / valid;
  Matrix dh = (coeff + coeff.transpose()) * h / (tau * valid);
  return ad::custom_op(std::move(value), {projections}, [dh = std::move(dh)](const ad::Var& g) {
    return std::vector<ad::Var>{ad::constant(dh * g.value()(0, 0))};
  });
}

ExtractorPair ExtractorPair::create(int raw_dim, int num_seen, const ExtractorConfig& config,
                                    Rng& rng) {
  if (raw_dim <= 0 || num_seen <= 0) throw InvalidArgument("extractor dims must be positive");
  if (!(config.tau > 0.0)) throw InvalidArgument("extractor temperature must be positive");
  ExtractorPair pair;
  pair.raw_dim_ = raw_dim;
  pair.feature_dim_ = config.feature_dim;
  pair.rep_dim_ = config.rep_dim;
  pair.tau_ = config.tau;
  pair.ce_encoder_ = Mlp({raw_dim, config.hidden, config.feature_dim}, Activation::Tanh, rng);
  pair.ce_head_ = Mlp({config.feature_dim, num_seen}, Activation::Tanh, rng);
  pair.sc_encoder_ = Mlp({raw_dim, config.hidden, config.rep_dim}, Activation::Tanh, rng);
  pair.projector_ = Mlp({config.rep_dim, config.proj_dim}, Activation::Tanh, rng);
  pair.feature_mean_ = RowVector::Zero(config.feature_dim);
  pair.feature_scale_ = RowVector::Ones(config.feature_dim);
  pair.rep_mean_ = RowVector::Zero(config.rep_dim);
  pair.rep_scale_ = RowVector::Ones(config.rep_dim);
  AdamOptions opts;
  opts.lr = config.lr;
  opts.beta1 = 0.9;
  pair.ce_opt_ = Adam(opts);
  pair.sc_opt_ = Adam(opts);
  return pair;
}

ExtractorPair ExtractorPair::passthrough(int feature_dim, int rep_dim) {
  ExtractorPair pair;
  pair.passthrough_ = true;
  pair.frozen_ = true;
  pair.feature_dim_ = feature_dim;
  pair.rep_dim_ = rep_dim;
  return pair;
}

Matrix ExtractorPair::features(const Matrix& raw) const {
  if (passthrough_) return raw;
  return standardize(ce_encoder_.forward(raw), feature_mean_, feature_scale_);
}

Matrix ExtractorPair::representations(const Matrix& raw) const {
  if (passthrough_) return raw;
  return standardize(sc_encoder_.forward(raw), rep_mean_, rep_scale_);
}

Matrix ExtractorPair::projections(const Matrix& raw) const {
  if (passthrough_) throw InvalidArgument("pass-through extractors have no projection head");
  ad::NoGradGuard guard;
  return normalize_rows(projector_.forward(ad::constant(sc_encoder_.forward(raw)))).value();
}

Matrix ExtractorPair::logits(const Matrix& raw) const {
  if (passthrough_) throw InvalidArgument("pass-through extractors have no classifier head");
  return ce_head_.forward(ce_encoder_.forward(raw));
}

Matrix ExtractorPair::bundle_features(const DatasetBundle& bundle,
                                      const std::vector<std::size_t>& rows) const {
  if (passthrough_) {
    if (!bundle.features) throw InvalidArgument("pass-through extractors need bundle features");
    return gather_rows(*bundle.features, rows);
  }
  if (!bundle.raw) throw InvalidArgument("bundle has no raw vectors to extract from");
  return features(gather_rows(*bundle.raw, rows));
}

Matrix ExtractorPair::bundle_representations(const DatasetBundle& bundle,
                                             const std::vector<std::size_t>& rows) const {
  if (passthrough_) {
    if (!bundle.representations) {
      throw InvalidArgument("pass-through extractors need bundle representations");
    }
    return gather_rows(*bundle.representations, rows);
  }
  if (!bundle.raw) throw InvalidArgument("bundle has no raw vectors to extract from");
  return representations(gather_rows(*bundle.raw, rows));
}

std::pair<double, double> ExtractorPair::train_step(const Matrix& raw, std::span<const int> labels,
                                                    Rng& rng) {
  if (frozen_) throw FrozenError("extractor pair is frozen");
  const ad::Var x = ad::constant(raw);

  auto ce_params = concat_params(ce_encoder_, ce_head_);
  const ad::Var ce = cross_entropy(ce_head_.forward(ce_encoder_.forward(x)), labels);
  ce_opt_.step(ce_params, ad::grad(ce, ce_params));

  double sc_value = std::numeric_limits<double>::quiet_NaN();
  auto sc_params = concat_params(sc_encoder_, projector_);
  try {
    const ad::Var h = normalize_rows(projector_.forward(sc_encoder_.forward(x)));
    const ad::Var sc = sc_loss(h, labels, tau_, rng);
    sc_opt_.step(sc_params, ad::grad(sc, sc_params));
    sc_value = sc.item();
  } catch (const NoPositiveError&) {
    // Batches without a same-class pair carry no contrastive signal.
  }
  return {ce.item(), sc_value};
}

void ExtractorPair::freeze(const Matrix& train_raw) {
  if (frozen_) throw FrozenError("extractor pair is already frozen");
  if (!passthrough_) {
    const Matrix f = ce_encoder_.forward(train_raw);
    feature_mean_ = f.colwise().mean();
    feature_scale_ = column_scale(f, feature_mean_);
    const Matrix r = sc_encoder_.forward(train_raw);
    rep_mean_ = r.colwise().mean();
    rep_scale_ = column_scale(r, rep_mean_);
    ce_encoder_.freeze();
    ce_head_.freeze();
    sc_encoder_.freeze();
    projector_.freeze();
  }
  frozen_ = true;
}

void ExtractorPair::save(const std::filesystem::path& dir) const {
  json manifest{{"kind", "extractors"},
                {"passthrough", passthrough_},
                {"frozen", frozen_},
                {"raw_dim", raw_dim_},
                {"feature_dim", feature_dim_},
                {"rep_dim", rep_dim_},
                {"tau", tau_}};
  if (!passthrough_) {
    manifest["ce_encoder"] = ckpt::save_mlp(ce_encoder_, dir, "ce_encoder");
    manifest["ce_head"] = ckpt::save_mlp(ce_head_, dir, "ce_head");
    manifest["sc_encoder"] = ckpt::save_mlp(sc_encoder_, dir, "sc_encoder");
    manifest["projector"] = ckpt::save_mlp(projector_, dir, "projector");
    io::write_f32(dir / "feature_mean.f32", feature_mean_);
    io::write_f32(dir / "feature_scale.f32", feature_scale_);
    io::write_f32(dir / "rep_mean.f32", rep_mean_);
    io::write_f32(dir / "rep_scale.f32", rep_scale_);
  }
  ckpt::write_manifest(dir, manifest);
}

ExtractorPair ExtractorPair::load(const std::filesystem::path& dir) {
  const json manifest = ckpt::read_manifest(dir, "extractors");
  try {
    if (manifest.at("passthrough").get<bool>()) {
      return passthrough(manifest.at("feature_dim").get<int>(), manifest.at("rep_dim").get<int>());
    }
    ExtractorPair pair;
    pair.raw_dim_ = manifest.at("raw_dim").get<int>();
    pair.feature_dim_ = manifest.at("feature_dim").get<int>();
    pair.rep_dim_ = manifest.at("rep_dim").get<int>();
    pair.tau_ = manifest.at("tau").get<double>();
    pair.frozen_ = manifest.at("frozen").get<bool>();
    pair.ce_encoder_ = ckpt::load_mlp(manifest.at("ce_encoder"), dir);
    pair.ce_head_ = ckpt::load_mlp(manifest.at("ce_head"), dir);
    pair.sc_encoder_ = ckpt::load_mlp(manifest.at("sc_encoder"), dir);
    pair.projector_ = ckpt::load_mlp(manifest.at("projector"), dir);
    pair.feature_mean_ = io::read_f32(dir / "feature_mean.f32");
    pair.feature_scale_ = io::read_f32(dir / "feature_scale.f32");
    pair.rep_mean_ = io::read_f32(dir / "rep_mean.f32");
    pair.rep_scale_ = io::read_f32(dir / "rep_scale.f32");
    if (pair.feature_mean_.cols() != pair.feature_dim_ || pair.rep_mean_.cols() != pair.rep_dim_) {
      throw FormatError("extractor normalization does not match declared dims");
    }
    return pair;
  } catch (const json::exception& e) {
    throw FormatError("extractor manifest: " + std::string(e.what()));
  }
}

std::vector<int> local_labels(std::span<const int> labels, std::span<const int> classes) {
  std::vector<int> out;
  out.reserve(labels.size());
  for (int y : labels) {
    auto it = std::find(classes.begin(), classes.end(), y);
    if (it == classes.end()) {
      throw RangeError("label " + std::to_string(y) + " is not in the class list");
    }
    out.push_back(static_cast<int>(it - classes.begin()));
  }
  return out;
}

ExtractorPair finetune(const DatasetBundle& bundle, const ExtractorConfig& config, Rng& rng) {
  bundle.validate();
  if (bundle.precomputed()) {
    if (!bundle.representations) {
      throw InvalidArgument("precomputed bundle is missing the representations matrix");
    }
    return ExtractorPair::passthrough(static_cast<int>(bundle.features->cols()),
                                      static_cast<int>(bundle.representations->cols()));
  }
  if (!bundle.raw) throw InvalidArgument("finetune needs raw vectors");
  const auto train = bundle.indices(SplitTag::TrainSeen);
  if (train.empty()) throw InvalidArgument("finetune: empty train_seen split");
  if (config.iterations < 0 || config.batch_size <= 0) {
    throw InvalidArgument("finetune: iterations must be >= 0 and batch size > 0");
  }

  const Matrix raw = gather_rows(*bundle.raw, train);
  std::vector<int> labels;
  for (auto i : train) labels.push_back(bundle.labels[i]);
  const std::vector<int> local = local_labels(labels, bundle.seen_classes);

  ExtractorPair pair = ExtractorPair::create(static_cast<int>(raw.cols()),
                                             static_cast<int>(bundle.seen_classes.size()), config,
                                             rng);
  std::vector<int> batch_labels;
  for (int it = 0; it < config.iterations; ++it) {
    const auto batch = sample_without_replacement(train.size(), config.batch_size, rng);
    batch_labels.clear();
    for (auto b : batch) batch_labels.push_back(local[b]);
    const auto [ce, sc] = pair.train_step(gather_rows(raw, batch), batch_labels, rng);
    if (!std::isfinite(ce) || std::isinf(sc)) {
      throw TrainingDivergence("finetune", it, "loss is not finite");
    }
  }
  pair.freeze(raw);
  return pair;
}

}  // namespace dzsl
