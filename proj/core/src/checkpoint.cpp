// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#include "dzsl/checkpoint.hpp"

#include "dzsl/errors.hpp"
#include "dzsl/matrix_io.hpp"

namespace dzsl::ckpt {

using nlohmann::json;

json save_mlp(const Mlp& net, const std::filesystem::path& dir, const std::string& name,
              Precision precision) {
  std::filesystem::create_directories(dir);
  const char* ext = precision == Precision::F32 ? ".f32" : ".f64";
  json files = json::array();
  const auto& params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string file = name + "." + std::to_string(i) + ext;
    if (precision == Precision::F32) {
      io::write_f32(dir / file, params[i].value());
    } else {
      io::write_f64(dir / file, params[i].value());
    }
    files.push_back(file);
  }
  return json{{"sizes", net.sizes()},
              {"activation", to_string(net.activation())},
              {"parameter_count", net.parameter_count()},
              {"frozen", net.frozen()},
              {"tensors", files}};
}

Mlp load_mlp(const json& record, const std::filesystem::path& dir) {
  try {
    const auto sizes = record.at("sizes").get<std::vector<int>>();
    const auto activation = activation_from_string(record.at("activation").get<std::string>());
    Rng scratch(0);
    Mlp net(sizes, activation, scratch);
    std::vector<Matrix> values;
    for (const auto& f : record.at("tensors")) {
      const auto file = f.get<std::string>();
      if (file.size() >= 4 && file.substr(file.size() - 4) == ".f64") {
        values.push_back(io::read_f64(dir / file));
      } else {
        values.push_back(io::read_f32(dir / file));
      }
    }
    try {
      net.load_values(values);
    } catch (const DimensionError& e) {
      throw FormatError(std::string("checkpoint tensor mismatch: ") + e.what());
    }
    if (record.value("frozen", false)) net.freeze();
    return net;
  } catch (const json::exception& e) {
    throw FormatError("network record: " + std::string(e.what()));
  } catch (const InvalidArgument& e) {
    throw FormatError("network record: " + std::string(e.what()));
  }
}

void write_manifest(const std::filesystem::path& dir, const json& manifest) {
  std::filesystem::create_directories(dir);
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

json read_manifest(const std::filesystem::path& dir, const std::string& kind) {
  const auto path = dir / "manifest.json";
  if (!std::filesystem::exists(path)) {
    throw IoError("missing checkpoint manifest '" + path.string() + "'");
  }
  json manifest;
  try {
    manifest = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw FormatError("malformed manifest '" + path.string() + "': " + e.what());
  }
  if (!manifest.is_object()) throw FormatError("manifest '" + path.string() + "' is not an object");
  if (!kind.empty()) {
    const auto found = manifest.value("kind", std::string{});
    if (found != kind) {
      throw FormatError("manifest '" + path.string() + "' has kind '" + found + "', expected '" +
                        kind + "'");
    }
  }
  return manifest;
}

}  // namespace dzsl::ckpt
