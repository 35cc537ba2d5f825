#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "blockcam/image.hpp"

namespace blockcam {

enum class MatrixKind { random_binary, permuted_hadamard };

std::string_view to_string(MatrixKind kind) noexcept;
MatrixKind parse_matrix_kind(std::string_view text);

/// M x P aperture pattern matrix shared by every block. Entries are 0/1
/// (closed/open aperture element). Always re-derivable from (kind, m, p, seed).
struct SensingMatrix {
  MatrixKind kind = MatrixKind::random_binary;
  std::uint64_t seed = 0;
  Eigen::MatrixXd entries;

  std::size_t m() const noexcept { return static_cast<std::size_t>(entries.rows()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(entries.cols()); }
};

/// I.i.d. fair 0/1 entries. Bits are taken LSB-first from successive 64-bit
/// draws, filling the matrix row-major.
SensingMatrix make_random_binary(std::size_t m, std::size_t p, std::uint64_t seed);

/// Sylvester Hadamard matrix with a random column permutation then a random
/// row permutation (both from one stream), first m rows, mapped (h + 1) / 2.
SensingMatrix make_permuted_hadamard(std::size_t m, std::size_t p, std::uint64_t seed);

SensingMatrix make_sensing_matrix(MatrixKind kind, std::size_t m, std::size_t p, std::uint64_t seed);

/// Sylvester construction, entries +-1; p must be a power of two.
Eigen::MatrixXd sylvester_hadamard(std::size_t p);

/// The +-1 matrix make_permuted_hadamard maps into {0, 1}.
Eigen::MatrixXd permuted_hadamard_signs(std::size_t m, std::size_t p, std::uint64_t seed);

struct NoiseModel {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Y = A X + N, one column per block, plus enough provenance to regenerate it.
struct MeasurementSet {
  Eigen::MatrixXd data;  // M x N_p
  std::size_t block_dim = 0;
  MatrixKind kind = MatrixKind::random_binary;
  std::uint64_t matrix_seed = 0;
  NoiseModel noise;

  // Provenance, filled in by the experiment driver.
  BlockGrid grid;
  std::string image_id;
  std::string source_image;
  std::size_t trial = 0;

  std::size_t m() const noexcept { return static_cast<std::size_t>(data.rows()); }
  std::size_t block_count() const noexcept { return static_cast<std::size_t>(data.cols()); }
};

/// Noise for block i is drawn from its own stream derive_seed(noise.seed, stream::noise, i),
/// so the result does not depend on `threads`. sigma == 0 gives exactly A X.
MeasurementSet sense(const BlockMatrix& blocks, const SensingMatrix& a, const NoiseModel& noise,
                     std::size_t threads = 1);

/// floor(csr * p), at least 1.
std::size_t csr_to_measurements(double csr, std::size_t p);

/// Measurement file: one line of JSON header, then M * N_p little-endian
/// float64 values in column order.
std::string encode_measurements(const MeasurementSet& ms);
MeasurementSet decode_measurements(std::string_view bytes, const std::string& origin);
void write_measurements(const MeasurementSet& ms, const std::filesystem::path& path);
MeasurementSet read_measurements(const std::filesystem::path& path);

}  // namespace blockcam
