#include <cmath>
#include <random>

#include "blockcam/rng.hpp"
#include "blockcam/sensing.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace blockcam;
using testutil::kind_of;

TEST_CASE("engine output matches the standard's mt19937_64 check value") {
  std::mt19937_64 e;
  e.discard(9999);
  CHECK(e() == 9981545732273789042ULL);
}

TEST_CASE("rng variates are reproducible and in range") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const auto k = a.below(7);
    CHECK(k == b.below(7));
    CHECK(k < 7);
    CHECK(a.normal() == b.normal());
  }
  CHECK(derive_seed(1, stream::noise, 0) != derive_seed(1, stream::matrix, 0));
  CHECK(derive_seed(1, stream::noise, 0) != derive_seed(1, stream::noise, 1));
  CHECK(derive_seed(1, stream::noise, 3) == derive_seed(1, stream::noise, 3));
}

TEST_CASE("normal variates have unit variance") {
  Rng rng(7);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    s += v;
    s2 += v * v;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("random binary matrix") {
  const auto a = make_random_binary(64, 64, 5);
  CHECK(a.m() == 64);
  CHECK(a.p() == 64);
  CHECK(((a.entries.array() == 0.0) || (a.entries.array() == 1.0)).all());
  CHECK(make_random_binary(64, 64, 5).entries == a.entries);
  CHECK(make_random_binary(64, 64, 6).entries != a.entries);
  // A shorter matrix from the same seed is a prefix of the longer one.
  CHECK(make_random_binary(10, 64, 5).entries == a.entries.topRows(10));

  const auto big = make_random_binary(4096, 4096, 11);
  const double mean = big.entries.mean();
  CHECK(mean >= 0.49);
  CHECK(mean <= 0.51);
}

TEST_CASE("sylvester and permuted hadamard are orthogonal") {
  for (std::size_t p = 1; p <= 1024; p *= 2) {
    CAPTURE(p);
    const auto h = sylvester_hadamard(p);
    CHECK((h * h.transpose()).isApprox(static_cast<double>(p) * Eigen::MatrixXd::Identity(p, p)));
    if (p >= 2) {
      const auto g = permuted_hadamard_signs(p, p, 3);
      const Eigen::MatrixXd ggt = g * g.transpose();
      CHECK((ggt - static_cast<double>(p) * Eigen::MatrixXd::Identity(p, p)).cwiseAbs().maxCoeff() == 0.0);
      CHECK((g.array().abs() == 1.0).all());
    }
  }
  const auto a = make_permuted_hadamard(16, 64, 9);
  CHECK(a.m() == 16);
  CHECK(((a.entries.array() == 0.0) || (a.entries.array() == 1.0)).all());
  CHECK(a.entries == ((permuted_hadamard_signs(16, 64, 9).array() + 1.0) / 2.0).matrix());
  CHECK(make_permuted_hadamard(16, 64, 9).entries == a.entries);
  CHECK(kind_of([] { make_permuted_hadamard(4, 48, 1); }) == ErrorKind::dimension);
  CHECK(kind_of([] { make_random_binary(65, 64, 1); }) == ErrorKind::dimension);
}

TEST_CASE("matrix kind names round-trip") {
  for (auto k : {MatrixKind::random_binary, MatrixKind::permuted_hadamard}) CHECK(parse_matrix_kind(to_string(k)) == k);
  CHECK(kind_of([] { parse_matrix_kind("gaussian"); }) == ErrorKind::usage);
}

TEST_CASE("sense is a plain product without noise") {
  const BlockMatrix x = BlockMatrix::Random(16, 9);
  SensingMatrix id{MatrixKind::random_binary, 0, Eigen::MatrixXd::Identity(16, 16)};
  CHECK(sense(x, id, {}).data == x);

  SensingMatrix zero{MatrixKind::random_binary, 0, Eigen::MatrixXd::Zero(4, 16)};
  CHECK((sense(x, zero, {}).data.array() == 0.0).all());

  SensingMatrix e1{MatrixKind::random_binary, 0, Eigen::MatrixXd::Zero(1, 16)};
  e1.entries(0, 0) = 1.0;
  CHECK(sense(x, e1, {}).data.row(0) == x.row(0));

  const auto a = make_random_binary(5, 16, 2);
  const auto ms = sense(x, a, {});
  CHECK(ms.data.isApprox(a.entries * x, 1e-14));
  CHECK(kind_of([&] { sense(BlockMatrix::Zero(15, 2), a, {}); }) == ErrorKind::dimension);
}

TEST_CASE("sensing noise is deterministic and thread-independent") {
  const BlockMatrix x = BlockMatrix::Random(64, 333);
  const auto a = make_random_binary(8, 64, 1);
  const NoiseModel noise{0.05, 77};
  const auto one = sense(x, a, noise, 1);
  const auto four = sense(x, a, noise, 4);
  CHECK(one.data == four.data);
  CHECK(sense(x, a, noise, 1).data == one.data);
  const Eigen::MatrixXd resid = one.data - a.entries * x;
  CHECK(std::abs(std::sqrt(resid.squaredNorm() / static_cast<double>(resid.size())) - 0.05) < 0.005);
  CHECK(sense(x, a, NoiseModel{0.05, 78}).data != one.data);
}

TEST_CASE("csr to measurement count") {
  CHECK(csr_to_measurements(0.1, 1024) == 102);
  CHECK(csr_to_measurements(0.2, 64) == 12);
  CHECK(csr_to_measurements(0.05, 256) == 12);
  CHECK(csr_to_measurements(1.0, 64) == 64);
  CHECK(csr_to_measurements(0.001, 64) == 1);
  CHECK(kind_of([] { csr_to_measurements(0.0, 64); }) == ErrorKind::usage);
  CHECK(kind_of([] { csr_to_measurements(1.5, 64); }) == ErrorKind::usage);
}

TEST_CASE("measurement file round trip") {
  const auto a = make_random_binary(6, 64, 3);
  auto ms = sense(BlockMatrix::Random(64, 12), a, NoiseModel{0.01, 4});
  ms.grid = BlockGrid::for_image(24, 32, 8);
  ms.image_id = "scene";
  ms.source_image = "data/scene.pgm";
  ms.trial = 2;
  const std::string bytes = encode_measurements(ms);
  const auto back = decode_measurements(bytes, "inline");
  CHECK(back.data == ms.data);
  CHECK(back.block_dim == 64);
  CHECK(back.kind == ms.kind);
  CHECK(back.matrix_seed == 3);
  CHECK(back.noise.sigma == 0.01);
  CHECK(back.noise.seed == 4);
  CHECK(back.grid == ms.grid);
  CHECK(back.image_id == "scene");
  CHECK(back.source_image == "data/scene.pgm");
  CHECK(back.trial == 2);
  CHECK(encode_measurements(back) == bytes);

  CHECK(kind_of([&] { decode_measurements(bytes.substr(0, bytes.size() - 3), "x"); }) == ErrorKind::format);
  CHECK(kind_of([] { decode_measurements("not json\n", "x"); }) == ErrorKind::format);
  std::string wrong = bytes;
  wrong.replace(wrong.find("blockcam.measurements"), 21, "blockcam.measurementz");
  CHECK(kind_of([&] { decode_measurements(wrong, "x"); }) == ErrorKind::format);
  CHECK(kind_of([] { read_measurements("/nonexistent/x.bcm"); }) == ErrorKind::io);
}
