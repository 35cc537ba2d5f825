#include "blockcam/sensing.hpp"

#include <bit>
#include <cmath>

#include "blockcam/error.hpp"
#include "blockcam/parallel.hpp"
#include "blockcam/rng.hpp"
#include "byte_io.hpp"

namespace blockcam {

std::string_view to_string(MatrixKind kind) noexcept {
  return kind == MatrixKind::random_binary ? "random-binary" : "permuted-hadamard";
}

MatrixKind parse_matrix_kind(std::string_view text) {
  if (text == "random-binary") return MatrixKind::random_binary;
  if (text == "permuted-hadamard") return MatrixKind::permuted_hadamard;
  fail(ErrorKind::usage, "unknown matrix kind '" + std::string(text) + "'");
}

namespace {
void check_dims(std::size_t m, std::size_t p) {
  if (p == 0 || m == 0 || m > p)
    fail(ErrorKind::dimension,
         "invalid sensing dimensions M=" + std::to_string(m) + ", P=" + std::to_string(p) + " (need 1 <= M <= P)");
}
}  // namespace

SensingMatrix make_random_binary(std::size_t m, std::size_t p, std::uint64_t seed) {
  check_dims(m, p);
  Rng rng(derive_seed(seed, stream::matrix));
  SensingMatrix a{MatrixKind::random_binary, seed,
                  Eigen::MatrixXd(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p))};
  std::uint64_t word = 0;
  int bits_left = 0;
  for (Eigen::Index r = 0; r < a.entries.rows(); ++r)
    for (Eigen::Index c = 0; c < a.entries.cols(); ++c) {
      if (bits_left == 0) {
        word = rng.next_u64();
        bits_left = 64;
      }
      a.entries(r, c) = static_cast<double>(word & 1U);
      word >>= 1;
      --bits_left;
    }
  return a;
}

Eigen::MatrixXd sylvester_hadamard(std::size_t p) {
  if (p == 0 || !std::has_single_bit(p))
    fail(ErrorKind::dimension, "Hadamard size " + std::to_string(p) + " is not a power of two");
  Eigen::MatrixXd h(1, 1);
  h(0, 0) = 1.0;
  while (static_cast<std::size_t>(h.rows()) < p) {
    const Eigen::Index n = h.rows();
    Eigen::MatrixXd next(2 * n, 2 * n);
    next << h, h, h, -h;
    h = std::move(next);
  }
  return h;
}

Eigen::MatrixXd permuted_hadamard_signs(std::size_t m, std::size_t p, std::uint64_t seed) {
  if (p == 0 || !std::has_single_bit(p))
    fail(ErrorKind::dimension, "permuted Hadamard needs P a power of two, got " + std::to_string(p));
  check_dims(m, p);
  const Eigen::MatrixXd h = sylvester_hadamard(p);
  Rng rng(derive_seed(seed, stream::matrix));
  const auto col_perm = random_permutation(p, rng);
  const auto row_perm = random_permutation(p, rng);
  Eigen::MatrixXd g(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j)
      g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          h(static_cast<Eigen::Index>(row_perm[i]), static_cast<Eigen::Index>(col_perm[j]));
  return g;
}

SensingMatrix make_permuted_hadamard(std::size_t m, std::size_t p, std::uint64_t seed) {
  Eigen::MatrixXd g = permuted_hadamard_signs(m, p, seed);
  return {MatrixKind::permuted_hadamard, seed, (g.array() + 1.0) * 0.5};
}

SensingMatrix make_sensing_matrix(MatrixKind kind, std::size_t m, std::size_t p, std::uint64_t seed) {
  return kind == MatrixKind::random_binary ? make_random_binary(m, p, seed) : make_permuted_hadamard(m, p, seed);
}

MeasurementSet sense(const BlockMatrix& blocks, const SensingMatrix& a, const NoiseModel& noise,
                     std::size_t threads) {
  if (static_cast<std::size_t>(blocks.rows()) != a.p())
    fail(ErrorKind::dimension, "blocks have dimension " + std::to_string(blocks.rows()) +
                                   " but the sensing matrix expects " + std::to_string(a.p()));
  require(noise.sigma >= 0.0 && std::isfinite(noise.sigma), ErrorKind::usage, "noise sigma must be >= 0");
  MeasurementSet ms;
  ms.block_dim = a.p();
  ms.kind = a.kind;
  ms.matrix_seed = a.seed;
  ms.noise = noise;
  ms.data.resize(a.entries.rows(), blocks.cols());
  const auto n = static_cast<std::size_t>(blocks.cols());
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    // Column-at-a-time products keep the summation order independent of chunking.
    for (std::size_t i = begin; i < end; ++i) {
      const auto col = static_cast<Eigen::Index>(i);
      ms.data.col(col).noalias() = a.entries * blocks.col(col);
      if (noise.sigma == 0.0) continue;
      Rng rng(derive_seed(noise.seed, stream::noise, i));
      for (Eigen::Index r = 0; r < ms.data.rows(); ++r)
        ms.data(r, static_cast<Eigen::Index>(i)) += noise.sigma * rng.normal();
    }
  });
  return ms;
}

std::size_t csr_to_measurements(double csr, std::size_t p) {
  if (!(csr > 0.0 && csr <= 1.0)) fail(ErrorKind::usage, "CSR must lie in (0, 1], got " + std::to_string(csr));
  require(p >= 1, ErrorKind::dimension, "block dimension must be positive");
  const auto m = static_cast<std::size_t>(std::floor(csr * static_cast<double>(p)));
  return std::max<std::size_t>(m, 1);
}

namespace {
constexpr std::string_view kMeasurementFormat = "blockcam.measurements";
constexpr int kMeasurementVersion = 1;
}  // namespace

std::string encode_measurements(const MeasurementSet& ms) {
  nlohmann::ordered_json h;
  h["format"] = kMeasurementFormat;
  h["version"] = kMeasurementVersion;
  h["m"] = ms.m();
  h["p"] = ms.block_dim;
  h["n_blocks"] = ms.block_count();
  h["matrix"] = {{"kind", to_string(ms.kind)}, {"seed", ms.matrix_seed}};
  h["noise"] = {{"sigma", ms.noise.sigma}, {"seed", ms.noise.seed}};
  h["grid"] = {{"block_side", ms.grid.block_side},
               {"rows", ms.grid.rows},
               {"cols", ms.grid.cols},
               {"overlap", ms.grid.overlap}};
  h["image_id"] = ms.image_id;
  h["source_image"] = ms.source_image;
  h["trial"] = ms.trial;
  h["payload"] = "f64le column-major";
  std::string out = h.dump();
  out += '\n';
  detail::append_matrix(out, ms.data);
  return out;
}

MeasurementSet decode_measurements(std::string_view bytes, const std::string& origin) {
  const auto file = detail::split_headered(bytes, kMeasurementFormat, kMeasurementVersion, origin);
  MeasurementSet ms;
  try {
    const auto& h = file.header;
    const auto m = h.at("m").get<std::size_t>();
    const auto n = h.at("n_blocks").get<std::size_t>();
    ms.block_dim = h.at("p").get<std::size_t>();
    ms.kind = parse_matrix_kind(h.at("matrix").at("kind").get<std::string>());
    ms.matrix_seed = h.at("matrix").at("seed").get<std::uint64_t>();
    ms.noise.sigma = h.at("noise").at("sigma").get<double>();
    ms.noise.seed = h.at("noise").at("seed").get<std::uint64_t>();
    const auto& g = h.at("grid");
    ms.grid = {g.at("block_side").get<std::size_t>(), g.at("rows").get<std::size_t>(),
               g.at("cols").get<std::size_t>(), g.at("overlap").get<std::size_t>()};
    ms.image_id = h.at("image_id").get<std::string>();
    ms.source_image = h.at("source_image").get<std::string>();
    ms.trial = h.at("trial").get<std::size_t>();
    if (file.payload.size() != m * n * 8)
      fail(ErrorKind::format, origin + ": payload holds " + std::to_string(file.payload.size()) +
                                  " bytes, header implies " + std::to_string(m * n * 8));
    std::size_t offset = 0;
    ms.data = detail::take_matrix(file.payload, offset, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n),
                                  origin);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, origin + ": bad measurement header: " + e.what());
  }
  return ms;
}

void write_measurements(const MeasurementSet& ms, const std::filesystem::path& path) {
  detail::write_file(path, encode_measurements(ms));
}

MeasurementSet read_measurements(const std::filesystem::path& path) {
  return decode_measurements(detail::read_file(path), path.string());
}

}  // namespace blockcam
