// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dzsl/nn.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace dzsl::ckpt {

enum class Precision { F32, F64 };

/// Writes each parameter tensor of `net` as `<name>.<i>.f32|f64` under
/// `dir` and returns the architecture record that load_mlp expects.
nlohmann::json save_mlp(const Mlp& net, const std::filesystem::path& dir, const std::string& name,
                        Precision precision = Precision::F32);
Mlp load_mlp(const nlohmann::json& record, const std::filesystem::path& dir);

void write_manifest(const std::filesystem::path& dir, const nlohmann::json& manifest);
/// Parses `<dir>/manifest.json`; missing file -> IoError, bad JSON ->
/// FormatError. When `kind` is non-empty the manifest's "kind" must match.
nlohmann::json read_manifest(const std::filesystem::path& dir, const std::string& kind = "");

}  // namespace dzsl::ckpt
