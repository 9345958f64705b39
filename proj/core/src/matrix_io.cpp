// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#include "dzsl/matrix_io.hpp"

#include "dzsl/errors.hpp"

#include <bit>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace dzsl::io {
namespace {

template <typename UInt>
void put_le(std::string& out, UInt v) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

template <typename UInt>
UInt get_le(const std::string& in, std::size_t offset) {
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    v |= static_cast<UInt>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  }
  return v;
}

std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

std::string header(std::uint64_t rows, std::uint64_t cols) {
  if (rows > std::numeric_limits<std::uint32_t>::max() ||
      cols > std::numeric_limits<std::uint32_t>::max()) {
    throw IoError("matrix too large for the 32-bit header");
  }
  std::string out;
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(rows));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cols));
  return out;
}

// Returns (rows, cols) and validates the payload length.
std::pair<std::uint32_t, std::uint32_t> parse_header(const std::string& bytes,
                                                     std::size_t element_size,
                                                     const std::filesystem::path& path) {
  if (bytes.size() < 8) throw FormatError("'" + path.string() + "': truncated header");
  const auto rows = get_le<std::uint32_t>(bytes, 0);
  const auto cols = get_le<std::uint32_t>(bytes, 4);
  const std::uint64_t expected = 8 + static_cast<std::uint64_t>(rows) * cols * element_size;
  if (bytes.size() != expected) {
    throw FormatError("'" + path.string() + "': payload size " + std::to_string(bytes.size()) +
                      " does not match header " + std::to_string(rows) + "x" +
                      std::to_string(cols));
  }
  return {rows, cols};
}

}  // namespace

void write_f32(const std::filesystem::path& path, const Matrix& m) {
  std::string out = header(m.rows(), m.cols());
  out.reserve(out.size() + m.size() * 4);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(m.data()[i])));
  }
  write_bytes(path, out);
}

Matrix read_f32(const std::filesystem::path& path) {
  const std::string bytes = read_bytes(path);
  const auto [rows, cols] = parse_header(bytes, 4, path);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, 8 + 4 * i));
  }
  return m;
}

void write_f64(const std::filesystem::path& path, const Matrix& m) {
  std::string out = header(m.rows(), m.cols());
  out.reserve(out.size() + m.size() * 8);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(m.data()[i]));
  }
  write_bytes(path, out);
}

Matrix read_f64(const std::filesystem::path& path) {
  const std::string bytes = read_bytes(path);
  const auto [rows, cols] = parse_header(bytes, 8, path);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes, 8 + 8 * i));
  }
  return m;
}

void write_u32(const std::filesystem::path& path, const std::vector<std::uint32_t>& v) {
  std::string out = header(v.size(), 1);
  for (auto x : v) put_le<std::uint32_t>(out, x);
  write_bytes(path, out);
}

std::vector<std::uint32_t> read_u32(const std::filesystem::path& path) {
  const std::string bytes = read_bytes(path);
  const auto [rows, cols] = parse_header(bytes, 4, path);
  std::vector<std::uint32_t> v(static_cast<std::size_t>(rows) * cols);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = get_le<std::uint32_t>(bytes, 8 + 4 * i);
  return v;
}

void write_u8(const std::filesystem::path& path, const std::vector<std::uint8_t>& v) {
  std::string out = header(v.size(), 1);
  for (auto x : v) out.push_back(static_cast<char>(x));
  write_bytes(path, out);
}

std::vector<std::uint8_t> read_u8(const std::filesystem::path& path) {
  const std::string bytes = read_bytes(path);
  const auto [rows, cols] = parse_header(bytes, 1, path);
  std::vector<std::uint8_t> v(static_cast<std::size_t>(rows) * cols);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<std::uint8_t>(bytes[8 + i]);
  return v;
}

std::pair<std::uint32_t, std::uint32_t> read_header(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  std::string bytes(8, '\0');
  f.read(bytes.data(), 8);
  if (f.gcount() != 8) throw FormatError("'" + path.string() + "': truncated header");
  return {get_le<std::uint32_t>(bytes, 0), get_le<std::uint32_t>(bytes, 4)};
}

Matrix round_to_f32(const Matrix& m) {
  return m.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
}

void write_csv(const std::filesystem::path& path, const Matrix& m,
               const std::vector<std::string>& header_names) {
  std::ostringstream os;
  os << std::setprecision(9);
  if (!header_names.empty()) {
    for (std::size_t i = 0; i < header_names.size(); ++i) {
      os << (i ? "," : "") << header_names[i];
    }
    os << '\n';
  }
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? "," : "") << m(r, c);
    os << '\n';
  }
  write_text(path, os.str());
}

Matrix read_csv(const std::filesystem::path& path, std::vector<std::string>* header_out) {
  std::istringstream in(read_text(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);

    std::vector<double> values;
    bool numeric = true;
    for (const auto& c : cells) {
      double v = 0.0;
      const char* begin = c.data();
      while (begin < c.data() + c.size() && *begin == ' ') ++begin;
      auto [ptr, ec] = std::from_chars(begin, c.data() + c.size(), v);
      if (ec != std::errc() || ptr != c.data() + c.size()) {
        numeric = false;
        break;
      }
      values.push_back(v);
    }
    if (!numeric) {
      if (first) {
        if (header_out) *header_out = cells;
        first = false;
        continue;
      }
      throw FormatError("'" + path.string() + "': non-numeric row");
    }
    first = false;
    if (!rows.empty() && values.size() != rows.front().size()) {
      throw FormatError("'" + path.string() + "': ragged rows");
    }
    rows.push_back(std::move(values));
  }
  Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

std::string read_text(const std::filesystem::path& path) { return read_bytes(path); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_bytes(path, text);
}

}  // namespace dzsl::io
