// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#include "dzsl/dataset.hpp"

#include "dzsl/errors.hpp"
#include "dzsl/matrix_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace dzsl {
namespace {

using nlohmann::json;

constexpr const char* kBundleFormat = "dzsl-bundle";

// Grid sizes that keep every prototype coordinate exactly representable in
// float: attributes carry 8 fractional bits, map entries 10, and a 16-term
// dot product stays inside float's 24-bit mantissa.
constexpr double kAttributeGrid = 256.0;
constexpr double kMapGrid = 1024.0;

bool optional_matrix_equal(const std::optional<Matrix>& a, const std::optional<Matrix>& b) {
  if (a.has_value() != b.has_value()) return false;
  if (!a) return true;
  return a->rows() == b->rows() && a->cols() == b->cols() && *a == *b;
}

int matrix_cols(const std::optional<Matrix>& m) { return m ? static_cast<int>(m->cols()) : 0; }

void check_matrix_file(const std::filesystem::path& path, std::size_t rows, int cols) {
  const auto [r, c] = io::read_header(path);
  if (r != rows || static_cast<int>(c) != cols) {
    throw FormatError("dimension mismatch in '" + path.filename().string() + "': manifest says " +
                      std::to_string(rows) + "x" + std::to_string(cols) + ", file has " +
                      std::to_string(r) + "x" + std::to_string(c));
  }
}

const char* split_name(SplitTag tag) {
  switch (tag) {
    case SplitTag::TrainSeen: return "train_seen";
    case SplitTag::TestSeen: return "test_seen";
    case SplitTag::TestUnseen: return "test_unseen";
  }
  return "?";
}

}  // namespace

std::vector<std::size_t> DatasetBundle::indices(SplitTag tag) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == tag) out.push_back(i);
  }
  return out;
}

void DatasetBundle::validate() const {
  const std::size_t n = labels.size();
  if (split.size() != n) throw InvalidArgument("bundle: split tags and labels differ in length");
  if (!raw && !features) throw InvalidArgument("bundle: neither raw vectors nor features present");
  for (const auto* m : {&raw, &features, &representations}) {
    if (*m && static_cast<std::size_t>((*m)->rows()) != n) {
      throw InvalidArgument("bundle: matrix row count differs from label count");
    }
  }
  if (attributes.rows() == 0 || attributes.cols() == 0) {
    throw InvalidArgument("bundle: empty attribute matrix");
  }
  if (!attributes.allFinite()) throw InvalidArgument("bundle: non-finite attribute row");

  std::set<int> seen(seen_classes.begin(), seen_classes.end());
  std::set<int> unseen(unseen_classes.begin(), unseen_classes.end());
  for (int c : seen) {
    if (unseen.count(c)) {
      throw InvalidArgument("bundle: class " + std::to_string(c) + " is both seen and unseen");
    }
  }
  for (int c : seen_classes) {
    if (c < 0 || c >= num_classes()) throw InvalidArgument("bundle: seen class out of range");
  }
  for (int c : unseen_classes) {
    if (c < 0 || c >= num_classes()) throw InvalidArgument("bundle: unseen class out of range");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= num_classes()) {
      throw InvalidArgument("bundle: label " + std::to_string(y) + " has no attribute row");
    }
    const bool ok = split[i] == SplitTag::TestUnseen ? unseen.count(y) > 0 : seen.count(y) > 0;
    if (!ok) {
      throw InvalidArgument("bundle: sample " + std::to_string(i) + " tagged " +
                            split_name(split[i]) + " has label " + std::to_string(y) +
                            " from the wrong class set");
    }
  }
}

bool DatasetBundle::operator==(const DatasetBundle& other) const {
  return optional_matrix_equal(raw, other.raw) && optional_matrix_equal(features, other.features) &&
         optional_matrix_equal(representations, other.representations) &&
         labels == other.labels && attributes.rows() == other.attributes.rows() &&
         attributes.cols() == other.attributes.cols() && attributes == other.attributes &&
         seen_classes == other.seen_classes && unseen_classes == other.unseen_classes &&
         split == other.split && seed == other.seed;
}

Matrix synthetic_prototype_map(const SynthConfig& config) {
  Rng rng = make_rng(config.seed, stream_id("prototype-map"));
  Matrix map = randn(config.raw_dim, config.attr_dim, rng) / std::sqrt(double(config.attr_dim));
  return map.unaryExpr([](double v) { return std::round(v * kMapGrid) / kMapGrid; });
}

DatasetBundle generate_synthetic(const SynthConfig& config) {
  if (config.unseen_classes <= 0) throw InvalidArgument("synthetic data needs unseen classes");
  if (config.seen_classes <= 0) throw InvalidArgument("synthetic data needs seen classes");
  if (config.attr_dim <= 0) throw InvalidArgument("attribute dimension must be positive");
  if (config.raw_dim <= 0) throw InvalidArgument("raw dimension must be positive");
  if (config.samples_per_class <= 0) throw InvalidArgument("samples per class must be positive");
  if (config.noise < 0.0) throw InvalidArgument("noise scale must be non-negative");
  if (!(config.train_fraction > 0.0 && config.train_fraction < 1.0)) {
    throw InvalidArgument("train fraction must lie in (0, 1)");
  }

  const int num_classes = config.seen_classes + config.unseen_classes;
  DatasetBundle bundle;
  bundle.seed = config.seed;

  Rng attr_rng = make_rng(config.seed, stream_id("attributes"));
  bundle.attributes = rand_uniform(num_classes, config.attr_dim, 0.0, 1.0, attr_rng)
                          .unaryExpr([](double v) { return std::round(v * kAttributeGrid) / kAttributeGrid; });
  const Matrix prototypes = bundle.attributes * synthetic_prototype_map(config).transpose();

  for (int c = 0; c < config.seen_classes; ++c) bundle.seen_classes.push_back(c);
  for (int c = config.seen_classes; c < num_classes; ++c) bundle.unseen_classes.push_back(c);

  const std::size_t n = static_cast<std::size_t>(num_classes) * config.samples_per_class;
  Matrix raw(n, config.raw_dim);
  bundle.labels.resize(n);
  bundle.split.resize(n);
  Rng sample_rng = make_rng(config.seed, stream_id("samples"));
  Rng split_rng = make_rng(config.seed, stream_id("split"));
  const auto n_train = static_cast<std::size_t>(
      std::lround(config.train_fraction * config.samples_per_class));
  std::size_t row = 0;
  for (int c = 0; c < num_classes; ++c) {
    const bool seen = c < config.seen_classes;
    std::vector<std::size_t> order = sample_without_replacement(
        config.samples_per_class, config.samples_per_class, split_rng);
    std::vector<bool> is_train(config.samples_per_class, false);
    for (std::size_t k = 0; k < n_train && k < order.size(); ++k) is_train[order[k]] = true;
    for (int s = 0; s < config.samples_per_class; ++s, ++row) {
      raw.row(row) = prototypes.row(c) + config.noise * randn(1, config.raw_dim, sample_rng);
      bundle.labels[row] = c;
      bundle.split[row] =
          !seen ? SplitTag::TestUnseen : (is_train[s] ? SplitTag::TrainSeen : SplitTag::TestSeen);
    }
  }
  bundle.raw = io::round_to_f32(raw);
  bundle.attributes = io::round_to_f32(bundle.attributes);
  bundle.validate();
  return bundle;
}

void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir) {
  bundle.validate();
  std::filesystem::create_directories(dir);
  json manifest{
      {"format", kBundleFormat},
      {"version", 1},
      {"mode", bundle.precomputed() ? "precomputed" : "raw"},
      {"num_samples", bundle.size()},
      {"num_classes", bundle.num_classes()},
      {"attr_dim", bundle.attr_dim()},
      {"raw_dim", matrix_cols(bundle.raw)},
      {"feature_dim", matrix_cols(bundle.features)},
      {"rep_dim", matrix_cols(bundle.representations)},
      {"seen_classes", bundle.seen_classes},
      {"unseen_classes", bundle.unseen_classes},
      {"seed", bundle.seed},
  };
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  if (bundle.raw) io::write_f32(dir / "raw.f32", *bundle.raw);
  if (bundle.features) io::write_f32(dir / "features.f32", *bundle.features);
  if (bundle.representations) io::write_f32(dir / "representations.f32", *bundle.representations);
  io::write_f32(dir / "attributes.f32", bundle.attributes);
  std::vector<std::uint32_t> labels(bundle.labels.begin(), bundle.labels.end());
  io::write_u32(dir / "labels.u32", labels);
  std::vector<std::uint8_t> split;
  for (auto s : bundle.split) split.push_back(static_cast<std::uint8_t>(s));
  io::write_u8(dir / "split.u8", split);
}

DatasetBundle load_bundle(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) {
    throw IoError("missing bundle manifest '" + manifest_path.string() + "'");
  }
  json manifest;
  try {
    manifest = json::parse(io::read_text(manifest_path));
  } catch (const json::exception& e) {
    throw FormatError("malformed bundle manifest: " + std::string(e.what()));
  }

  DatasetBundle bundle;
  try {
    if (manifest.at("format").get<std::string>() != kBundleFormat) {
      throw FormatError("not a dzsl bundle manifest");
    }
    const auto n = manifest.at("num_samples").get<std::size_t>();
    const int num_classes = manifest.at("num_classes").get<int>();
    const int attr_dim = manifest.at("attr_dim").get<int>();
    const int raw_dim = manifest.value("raw_dim", 0);
    const int feature_dim = manifest.value("feature_dim", 0);
    const int rep_dim = manifest.value("rep_dim", 0);
    const std::string mode = manifest.at("mode").get<std::string>();
    if (mode != "raw" && mode != "precomputed") throw FormatError("unknown bundle mode '" + mode + "'");

    check_matrix_file(dir / "attributes.f32", num_classes, attr_dim);
    bundle.attributes = io::read_f32(dir / "attributes.f32");
    if (raw_dim > 0) {
      check_matrix_file(dir / "raw.f32", n, raw_dim);
      bundle.raw = io::read_f32(dir / "raw.f32");
    }
    if (feature_dim > 0) {
      check_matrix_file(dir / "features.f32", n, feature_dim);
      bundle.features = io::read_f32(dir / "features.f32");
    }
    if (rep_dim > 0) {
      check_matrix_file(dir / "representations.f32", n, rep_dim);
      bundle.representations = io::read_f32(dir / "representations.f32");
    }
    if (mode == "precomputed" && (bundle.raw || !bundle.features)) {
      throw FormatError("precomputed bundle must carry features and no raw vectors");
    }
    if (mode == "raw" && !bundle.raw) throw FormatError("raw-mode bundle without raw.f32");

    check_matrix_file(dir / "labels.u32", n, 1);
    for (auto y : io::read_u32(dir / "labels.u32")) bundle.labels.push_back(static_cast<int>(y));
    check_matrix_file(dir / "split.u8", n, 1);
    for (auto s : io::read_u8(dir / "split.u8")) {
      if (s > 2) throw FormatError("unknown split tag " + std::to_string(s));
      bundle.split.push_back(static_cast<SplitTag>(s));
    }
    bundle.seen_classes = manifest.at("seen_classes").get<std::vector<int>>();
    bundle.unseen_classes = manifest.at("unseen_classes").get<std::vector<int>>();
    bundle.seed = manifest.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw FormatError("bundle manifest: " + std::string(e.what()));
  }
  bundle.validate();
  return bundle;
}

void export_bundle_csv(const DatasetBundle& bundle, const std::filesystem::path& dir) {
  bundle.validate();
  std::vector<std::string> header{"label", "split"};
  std::vector<std::pair<std::string, const Matrix*>> blocks;
  if (bundle.raw) blocks.emplace_back("raw", &*bundle.raw);
  if (bundle.features) blocks.emplace_back("feature", &*bundle.features);
  if (bundle.representations) blocks.emplace_back("rep", &*bundle.representations);
  Eigen::Index width = 2;
  for (const auto& [name, m] : blocks) {
    for (Eigen::Index c = 0; c < m->cols(); ++c) header.push_back(name + "_" + std::to_string(c));
    width += m->cols();
  }
  Matrix table(bundle.size(), width);
  for (std::size_t i = 0; i < bundle.size(); ++i) {
    table(i, 0) = bundle.labels[i];
    table(i, 1) = static_cast<double>(bundle.split[i]);
  }
  Eigen::Index offset = 2;
  for (const auto& [name, m] : blocks) {
    table.middleCols(offset, m->cols()) = *m;
    offset += m->cols();
  }
  io::write_csv(dir / "samples.csv", table, header);
  std::vector<std::string> attr_header;
  for (int c = 0; c < bundle.attr_dim(); ++c) attr_header.push_back("attr_" + std::to_string(c));
  io::write_csv(dir / "attributes.csv", bundle.attributes, attr_header);
}

DatasetBundle import_bundle_csv(const std::filesystem::path& dir) {
  std::vector<std::string> header;
  const Matrix table = io::read_csv(dir / "samples.csv", &header);
  if (header.size() != static_cast<std::size_t>(table.cols()) || header.size() < 3 ||
      header[0] != "label" || header[1] != "split") {
    throw FormatError("samples.csv: expected header 'label,split,...'");
  }
  DatasetBundle bundle;
  bundle.attributes = io::read_csv(dir / "attributes.csv");

  auto block = [&](const std::string& prefix) -> std::optional<Matrix> {
    Eigen::Index start = -1;
    Eigen::Index count = 0;
    for (std::size_t c = 2; c < header.size(); ++c) {
      if (header[c].rfind(prefix + "_", 0) == 0) {
        if (start < 0) start = static_cast<Eigen::Index>(c);
        ++count;
      }
    }
    if (start < 0) return std::nullopt;
    return io::round_to_f32(table.middleCols(start, count));
  };
  bundle.raw = block("raw");
  bundle.features = block("feature");
  bundle.representations = block("rep");
  bundle.attributes = io::round_to_f32(bundle.attributes);

  std::set<int> seen;
  std::set<int> unseen;
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    const int y = static_cast<int>(table(i, 0));
    const int s = static_cast<int>(table(i, 1));
    if (s < 0 || s > 2) throw FormatError("samples.csv: unknown split tag");
    bundle.labels.push_back(y);
    bundle.split.push_back(static_cast<SplitTag>(s));
    (s == 2 ? unseen : seen).insert(y);
  }
  bundle.seen_classes.assign(seen.begin(), seen.end());
  bundle.unseen_classes.assign(unseen.begin(), unseen.end());
  bundle.validate();
  return bundle;
}

std::pair<DatasetBundle, KeepRatioPlan> apply_keep_ratio(const DatasetBundle& bundle, double ratio,
                                                         int n_syn, Rng& rng) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw InvalidArgument("keep ratio must lie in (0, 1]");
  if (n_syn < 0) throw InvalidArgument("n_syn must be non-negative");

  KeepRatioPlan plan;
  plan.ratio = ratio;
  plan.n_syn_scaled =
      ratio == 1.0 ? n_syn : std::max(1, static_cast<int>(std::lround(ratio * n_syn)));

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i : bundle.indices(SplitTag::TrainSeen)) by_class[bundle.labels[i]].push_back(i);

  std::vector<bool> keep(bundle.size(), true);
  for (auto& [cls, members] : by_class) {
    const auto n_c = members.size();
    // The epsilon absorbs products such as 0.1 * 100 landing just above 10.
    auto n_keep = static_cast<std::size_t>(std::ceil(ratio * n_c - 1e-9));
    n_keep = std::clamp<std::size_t>(n_keep, 1, n_c);
    std::vector<std::size_t> picked;
    for (std::size_t k : sample_without_replacement(n_c, n_keep, rng)) picked.push_back(members[k]);
    std::sort(picked.begin(), picked.end());
    for (std::size_t i : members) keep[i] = false;
    for (std::size_t i : picked) keep[i] = true;
    plan.per_class_kept[cls] = std::move(picked);
  }

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < bundle.size(); ++i) {
    if (keep[i]) rows.push_back(i);
  }
  DatasetBundle out;
  if (bundle.raw) out.raw = gather_rows(*bundle.raw, rows);
  if (bundle.features) out.features = gather_rows(*bundle.features, rows);
  if (bundle.representations) out.representations = gather_rows(*bundle.representations, rows);
  for (std::size_t i : rows) {
    out.labels.push_back(bundle.labels[i]);
    out.split.push_back(bundle.split[i]);
  }
  out.attributes = bundle.attributes;
  out.seen_classes = bundle.seen_classes;
  out.unseen_classes = bundle.unseen_classes;
  out.seed = bundle.seed;
  return {std::move(out), std::move(plan)};
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& index) {
  Matrix out(index.size(), m.cols());
  for (std::size_t r = 0; r < index.size(); ++r) out.row(r) = m.row(index[r]);
  return out;
}

}  // namespace dzsl
