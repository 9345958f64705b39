// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#include "dzsl/dataset.hpp"
#include "dzsl/errors.hpp"
#include "dzsl/matrix_io.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <Eigen/QR>

#include <fstream>
#include <map>
#include <set>
#include <string>

using namespace dzsl;
using dzsl::testing::TempDir;

namespace {

SynthConfig small_config() {
  SynthConfig c;
  c.seen_classes = 4;
  c.unseen_classes = 2;
  c.attr_dim = 5;
  c.raw_dim = 8;
  c.samples_per_class = 20;
  c.noise = 0.3;
  c.seed = 3;
  return c;
}

// Two seen classes with `per_class` train_seen rows each, plus test rows.
DatasetBundle keep_ratio_fixture(int per_class) {
  DatasetBundle b;
  b.attributes = Matrix::Identity(3, 3);
  b.seen_classes = {0, 1};
  b.unseen_classes = {2};
  const int n = 2 * per_class + 4;
  b.raw = Matrix(n, 2);
  int row = 0;
  for (int c = 0; c < 2; ++c) {
    for (int k = 0; k < per_class; ++k, ++row) {
      b.raw->row(row) << c, k;
      b.labels.push_back(c);
      b.split.push_back(SplitTag::TrainSeen);
    }
  }
  for (int k = 0; k < 2; ++k, ++row) {
    b.raw->row(row) << k, -1;
    b.labels.push_back(k);
    b.split.push_back(SplitTag::TestSeen);
  }
  for (int k = 0; k < 2; ++k, ++row) {
    b.raw->row(row) << 2, -k;
    b.labels.push_back(2);
    b.split.push_back(SplitTag::TestUnseen);
  }
  return b;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("default synthetic bundle shape and split partition") {
  const DatasetBundle b = generate_synthetic(SynthConfig{});
  CHECK(b.num_classes() == 20);
  CHECK(b.attr_dim() == 16);
  CHECK(b.size() == 2000);
  REQUIRE(b.raw.has_value());
  CHECK(b.raw->cols() == 64);
  CHECK_FALSE(b.precomputed());
  const auto tr = b.indices(SplitTag::TrainSeen);
  const auto ts = b.indices(SplitTag::TestSeen);
  const auto tu = b.indices(SplitTag::TestUnseen);
  CHECK(tr.size() + ts.size() + tu.size() == b.size());
  CHECK(tr.size() == 15 * 80);
  CHECK(ts.size() == 15 * 20);
  CHECK(tu.size() == 5 * 100);
  const std::set<int> seen(b.seen_classes.begin(), b.seen_classes.end());
  for (auto i : tr) CHECK(seen.count(b.labels[i]) == 1);
  for (auto i : ts) CHECK(seen.count(b.labels[i]) == 1);
  for (auto i : tu) CHECK(seen.count(b.labels[i]) == 0);
  CHECK(b.attributes.minCoeff() >= 0.0);
  CHECK(b.attributes.maxCoeff() <= 1.0);
}

TEST_CASE("synthetic generation is a pure function of its config") {
  SynthConfig c;
  c.seen_classes = 15;
  c.unseen_classes = 5;
  c.attr_dim = 16;
  c.raw_dim = 64;
  c.samples_per_class = 100;
  c.noise = 0.3;
  c.seed = 7;
  const DatasetBundle a = generate_synthetic(c);
  const DatasetBundle b = generate_synthetic(c);
  CHECK(a == b);
  TempDir dir("synth");
  save_bundle(a, dir / "a");
  save_bundle(b, dir / "b");
  for (const char* f : {"raw.f32", "attributes.f32", "labels.u32", "split.u8", "manifest.json"}) {
    CHECK(io::read_text(dir / "a" / f) == io::read_text(dir / "b" / f));
  }
  c.seed = 8;
  CHECK_FALSE(generate_synthetic(c) == a);
}

TEST_CASE("noiseless classes sit on their prototypes") {
  SynthConfig c = small_config();
  c.noise = 0.0;
  const DatasetBundle b = generate_synthetic(c);
  const Matrix protos = b.attributes * synthetic_prototype_map(c).transpose();
  int correct = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    Eigen::Index best = 0;
    (protos.rowwise() - b.raw->row(i)).rowwise().squaredNorm().minCoeff(&best);
    correct += static_cast<int>(best) == b.labels[i];
    CHECK((b.raw->row(i) - protos.row(b.labels[i])).cwiseAbs().maxCoeff() < 1e-5);
  }
  CHECK(correct == static_cast<int>(b.size()));
}

TEST_CASE("unseen prototypes follow the map solved from seen prototypes") {
  // Enough seen classes for an overdetermined solve of the attribute map.
  SynthConfig c = small_config();
  c.seen_classes = 12;
  c.unseen_classes = 3;
  c.noise = 0.0;
  c.samples_per_class = 5;
  const DatasetBundle b = generate_synthetic(c);
  Matrix seen_a(c.seen_classes, c.attr_dim), seen_p(c.seen_classes, c.raw_dim);
  std::map<int, Eigen::Index> first_row;
  for (std::size_t i = 0; i < b.size(); ++i) first_row.emplace(b.labels[i], i);
  for (int k = 0; k < c.seen_classes; ++k) {
    seen_a.row(k) = b.attributes.row(k);
    seen_p.row(k) = b.raw->row(first_row[k]);
  }
  const Matrix m = seen_a.colPivHouseholderQr().solve(seen_p);  // [d_a x d_x]
  const double seen_residual = (seen_a * m - seen_p).cwiseAbs().maxCoeff();
  double unseen_residual = 0.0;
  for (int cls : b.unseen_classes) {
    const RowVector predicted = b.attributes.row(cls) * m;
    unseen_residual =
        std::max(unseen_residual, (predicted - b.raw->row(first_row[cls])).cwiseAbs().maxCoeff());
  }
  // Samples are stored as 32-bit floats, which bounds the attainable residual.
  const double f32_floor = 1e-5 * std::max(1.0, b.raw->cwiseAbs().maxCoeff());
  CHECK(seen_residual < f32_floor);
  CHECK(unseen_residual < f32_floor);
}

TEST_CASE("synthetic config errors") {
  SynthConfig c = small_config();
  c.unseen_classes = 0;
  CHECK_THROWS_AS(generate_synthetic(c), InvalidArgument);
  c = small_config();
  c.attr_dim = 0;
  CHECK_THROWS_AS(generate_synthetic(c), InvalidArgument);
  c = small_config();
  c.noise = -1.0;
  CHECK_THROWS_AS(generate_synthetic(c), InvalidArgument);
}

TEST_CASE("bundle save and load round trip") {
  TempDir dir("bundle");
  const DatasetBundle b = generate_synthetic(small_config());
  save_bundle(b, dir.path());
  const DatasetBundle loaded = load_bundle(dir.path());
  CHECK(loaded == b);
  CHECK(*loaded.raw == *b.raw);
  CHECK(loaded.attributes == b.attributes);
  CHECK(loaded.labels == b.labels);
  CHECK(loaded.split == b.split);
  CHECK(loaded.seen_classes == b.seen_classes);
  CHECK(loaded.unseen_classes == b.unseen_classes);
}

TEST_CASE("attribute file narrower than the manifest is a dimension error") {
  TempDir dir("mismatch");
  SynthConfig c = small_config();
  c.attr_dim = 16;
  const DatasetBundle b = generate_synthetic(c);
  save_bundle(b, dir.path());
  io::write_f32(dir / "attributes.f32", b.attributes.leftCols(15));
  try {
    load_bundle(dir.path());
    FAIL("expected a dimension mismatch");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("dimension mismatch") != std::string::npos);
  }
}

TEST_CASE("missing or malformed manifest") {
  TempDir dir("manifest");
  CHECK_THROWS_AS(load_bundle(dir / "nothing"), IoError);
  save_bundle(generate_synthetic(small_config()), dir.path());
  io::write_text(dir / "manifest.json", "{not json");
  CHECK_THROWS_AS(load_bundle(dir.path()), FormatError);
}

TEST_CASE("overlapping class sets are rejected") {
  DatasetBundle b = generate_synthetic(small_config());
  b.unseen_classes.push_back(b.seen_classes.front());
  CHECK_THROWS_AS(b.validate(), InvalidArgument);
  TempDir dir("overlap");
  CHECK_THROWS_AS(save_bundle(b, dir.path()), InvalidArgument);
}

TEST_CASE("mislabeled split is rejected") {
  DatasetBundle b = generate_synthetic(small_config());
  const auto tu = b.indices(SplitTag::TestUnseen);
  b.split[tu.front()] = SplitTag::TrainSeen;
  CHECK_THROWS_AS(b.validate(), InvalidArgument);
}

TEST_CASE("precomputed bundle loads and is flagged") {
  TempDir dir("pre");
  DatasetBundle b = generate_synthetic(small_config());
  Rng rng = make_rng(2);
  b.features = io::round_to_f32(randn(b.size(), 6, rng));
  b.representations = io::round_to_f32(randn(b.size(), 4, rng));
  b.raw.reset();
  save_bundle(b, dir.path());
  const DatasetBundle loaded = load_bundle(dir.path());
  CHECK(loaded.precomputed());
  CHECK_FALSE(loaded.raw.has_value());
  CHECK(*loaded.features == *b.features);
  CHECK(*loaded.representations == *b.representations);
}

TEST_CASE("csv export and import") {
  TempDir dir("csv");
  const DatasetBundle b = generate_synthetic(small_config());
  export_bundle_csv(b, dir.path());
  const DatasetBundle back = import_bundle_csv(dir.path());
  CHECK(back.labels == b.labels);
  CHECK(back.split == b.split);
  CHECK((*back.raw - *b.raw).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((back.attributes - b.attributes).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("keep ratio 1 is the identity") {
  const DatasetBundle b = generate_synthetic(small_config());
  Rng rng = make_rng(1);
  auto [kept, plan] = apply_keep_ratio(b, 1.0, 300, rng);
  CHECK(kept == b);
  CHECK(plan.n_syn_scaled == 300);
}

TEST_CASE("keep ratio 0.1 on 100 samples per class") {
  const DatasetBundle b = keep_ratio_fixture(100);
  Rng rng = make_rng(1);
  auto [kept, plan] = apply_keep_ratio(b, 0.1, 12000, rng);
  CHECK(plan.n_syn_scaled == 1200);
  for (int c : {0, 1}) CHECK(plan.per_class_kept.at(c).size() == 10);
  CHECK(kept.indices(SplitTag::TrainSeen).size() == 20);
  CHECK(kept.indices(SplitTag::TestSeen).size() == 2);
  CHECK(kept.indices(SplitTag::TestUnseen).size() == 2);
}

TEST_CASE("keep ratio never empties a class") {
  const DatasetBundle b = keep_ratio_fixture(100);
  Rng rng = make_rng(2);
  auto [kept, plan] = apply_keep_ratio(b, 0.001, 300, rng);
  for (int c : {0, 1}) CHECK(plan.per_class_kept.at(c).size() == 1);
  CHECK(kept.indices(SplitTag::TrainSeen).size() == 2);
  CHECK(plan.n_syn_scaled >= 1);
}

TEST_CASE("keep ratio leaves the test splits untouched") {
  const DatasetBundle b = generate_synthetic(SynthConfig{});
  Rng rng = make_rng(3);
  for (double ratio : {0.5, 0.3, 0.1}) {
    auto [kept, plan] = apply_keep_ratio(b, ratio, 300, rng);
    for (SplitTag tag : {SplitTag::TestSeen, SplitTag::TestUnseen}) {
      const auto before = b.indices(tag);
      const auto after = kept.indices(tag);
      REQUIRE(before.size() == after.size());
      for (std::size_t k = 0; k < before.size(); ++k) {
        CHECK(kept.raw->row(after[k]) == b.raw->row(before[k]));
        CHECK(kept.labels[after[k]] == b.labels[before[k]]);
      }
    }
    for (const auto& [cls, rows] : plan.per_class_kept) {
      CHECK(rows.size() == static_cast<std::size_t>(std::ceil(ratio * 80 - 1e-9)));
      for (auto r : rows) CHECK(b.split[r] == SplitTag::TrainSeen);
    }
    CHECK(plan.n_syn_scaled == static_cast<int>(std::lround(ratio * 300)));
  }
}

TEST_CASE("keep ratio bounds") {
  const DatasetBundle b = keep_ratio_fixture(10);
  Rng rng = make_rng(1);
  CHECK_THROWS_AS(apply_keep_ratio(b, 0.0, 10, rng), InvalidArgument);
  CHECK_THROWS_AS(apply_keep_ratio(b, 1.5, 10, rng), InvalidArgument);
  CHECK_THROWS_AS(apply_keep_ratio(b, -0.2, 10, rng), InvalidArgument);
}

TEST_CASE("matrix files round trip with their header") {
  TempDir dir("io");
  Rng rng = make_rng(4);
  const Matrix m = randn(3, 5, rng);
  io::write_f64(dir / "m.f64", m);
  CHECK(io::read_f64(dir / "m.f64") == m);
  io::write_f32(dir / "m.f32", m);
  CHECK(io::read_f32(dir / "m.f32") == io::round_to_f32(m));
  CHECK(io::read_header(dir / "m.f32") == std::pair<std::uint32_t, std::uint32_t>{3, 5});
  CHECK(std::filesystem::file_size(dir / "m.f32") == 8 + 15 * 4);
  io::write_u32(dir / "l.u32", {1, 2, 3});
  CHECK(io::read_u32(dir / "l.u32") == std::vector<std::uint32_t>{1, 2, 3});
  io::write_u8(dir / "s.u8", {0, 2});
  CHECK(io::read_u8(dir / "s.u8") == std::vector<std::uint8_t>{0, 2});
  std::ofstream(dir / "short.f32", std::ios::binary) << "abc";
  CHECK_THROWS_AS(io::read_f32(dir / "short.f32"), FormatError);
  CHECK_THROWS_AS(io::read_f32(dir / "absent.f32"), IoError);
}

TEST_CASE("csv matrices with a header") {
  TempDir dir("csvm");
  const Matrix m = (Matrix(2, 2) << 1.5, -2.0, 0.25, 3.0).finished();
  io::write_csv(dir / "m.csv", m, {"a", "b"});
  std::vector<std::string> header;
  CHECK(io::read_csv(dir / "m.csv", &header) == m);
  CHECK(header == std::vector<std::string>{"a", "b"});
}

}  // TEST_SUITE
