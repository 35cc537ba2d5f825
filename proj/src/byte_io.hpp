#pragma once

// File helpers shared by the binary formats: a single JSON header line
// followed by a little-endian float64 payload.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "blockcam/error.hpp"
#include "json.hpp"

namespace blockcam::detail {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

inline void append_f64(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xffU);
  out.append(buf, 8);
}

inline double load_f64(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

template <typename Derived>
void append_matrix(std::string& out, const Eigen::DenseBase<Derived>& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) append_f64(out, m(r, c));
}

/// Reads rows x cols values in column order starting at `offset`, advancing it.
Eigen::MatrixXd take_matrix(std::string_view payload, std::size_t& offset, Eigen::Index rows, Eigen::Index cols,
                            const std::string& origin);

struct HeaderedFile {
  nlohmann::ordered_json header;
  std::string_view payload;
};

/// Splits at the first newline and parses the header. Checks `format` and
/// `version` fields.
HeaderedFile split_headered(std::string_view bytes, std::string_view format, int version,
                            const std::string& origin);

std::uint32_t crc32(std::string_view bytes);

}  // namespace blockcam::detail
