// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dzsl/autodiff.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dzsl::io {

// Binary layout shared by every matrix-like file: an 8-byte header of two
// little-endian uint32 (rows, cols) followed by rows*cols row-major
// little-endian elements. The element type is implied by the extension:
// .f32, .f64, .u32, .u8.

void write_f32(const std::filesystem::path& path, const Matrix& m);
Matrix read_f32(const std::filesystem::path& path);

/// Lossless variant used for resumable training state.
void write_f64(const std::filesystem::path& path, const Matrix& m);
Matrix read_f64(const std::filesystem::path& path);

void write_u32(const std::filesystem::path& path, const std::vector<std::uint32_t>& v);
std::vector<std::uint32_t> read_u32(const std::filesystem::path& path);

void write_u8(const std::filesystem::path& path, const std::vector<std::uint8_t>& v);
std::vector<std::uint8_t> read_u8(const std::filesystem::path& path);

/// Header-only read: (rows, cols).
std::pair<std::uint32_t, std::uint32_t> read_header(const std::filesystem::path& path);

/// Rounds every element through float, so that the matrix survives an f32
/// round trip unchanged.
Matrix round_to_f32(const Matrix& m);

void write_csv(const std::filesystem::path& path, const Matrix& m,
               const std::vector<std::string>& header = {});
/// Reads a numeric CSV. A first line that fails to parse as numbers is
/// treated as a header and returned through `header` when non-null.
Matrix read_csv(const std::filesystem::path& path, std::vector<std::string>* header = nullptr);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace dzsl::io
