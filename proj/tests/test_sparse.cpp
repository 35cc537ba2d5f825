#include <cmath>

#include "blockcam/image.hpp"
#include "blockcam/rng.hpp"
#include "blockcam/sensing.hpp"
#include "blockcam/sparse.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace blockcam;
using testutil::kind_of;

TEST_CASE("DCT dictionary is orthonormal with a flat first atom") {
  for (std::size_t p : {4u, 16u, 64u}) {
    const auto d = make_dct_dictionary(p).d;
    const auto n = static_cast<Eigen::Index>(p);
    CHECK((d.transpose() * d - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((d.col(0).array() - 1.0 / std::sqrt(static_cast<double>(p))).abs().maxCoeff() <= 1e-15);
  }
  // Atom (0, 1) varies along the row (second index) only.
  const auto d = make_dct_dictionary(64).d;
  CHECK(d(0, 1) == doctest::Approx(d(8, 1)));
  CHECK(d(0, 1) > d(7, 1));
  CHECK(kind_of([] { make_dct_dictionary(10); }) == ErrorKind::dimension);
  CHECK(make_identity_dictionary(5).d == Eigen::MatrixXd::Identity(5, 5));
  CHECK(parse_dictionary_kind(to_string(DictionaryKind::dct2d)) == DictionaryKind::dct2d);
  CHECK(kind_of([] { parse_dictionary_kind("wavelet"); }) == ErrorKind::usage);
}

TEST_CASE("soft threshold") {
  CHECK(soft_threshold(3.0, 1.0) == 2.0);
  CHECK(soft_threshold(-3.0, 1.0) == -2.0);
  CHECK(soft_threshold(0.5, 1.0) == 0.0);
  CHECK(soft_threshold(-1.0, 1.0) == 0.0);
  CHECK(soft_threshold(2.0, 0.0) == 2.0);
  Eigen::VectorXd v(4);
  v << 1.5, -0.2, 0.0, -7.0;
  Eigen::VectorXd want(4);
  want << 1.0, 0.0, 0.0, -6.5;
  CHECK(soft_threshold(v, 0.5) == want);
}

TEST_CASE("power iteration finds the largest eigenvalue of A^T A") {
  Rng rng(1);
  for (int t = 0; t < 10; ++t) {
    const Eigen::MatrixXd a = make_random_binary(1 + static_cast<std::size_t>(t) * 6, 64, static_cast<std::uint64_t>(t)).entries;
    const double ref = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a.transpose() * a).eigenvalues().maxCoeff();
    CHECK(std::abs(power_iteration_lmax(a) - ref) <= 1e-6 * ref);
  }
  CHECK(power_iteration_lmax(Eigen::MatrixXd::Zero(3, 4)) == 0.0);
}

TEST_CASE("with lambda 0 ISTA converges to the least-squares solution") {
  Rng rng(2);
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(12, 12) + 0.1 * oracle::random_normal(12, 12, rng);
  const Eigen::VectorXd y = oracle::random_normal(12, 1, rng);
  IstaConfig cfg;
  cfg.lambda = 0.0;
  cfg.max_iters = 20000;
  cfg.tol = 1e-14;
  const auto sol = solve_block_sparse(y, a, make_identity_dictionary(12), cfg);
  CHECK((sol.x - a.fullPivLu().solve(y)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("identity operator gives the soft-thresholded measurement as a fixed point") {
  Rng rng(3);
  const Eigen::VectorXd y = oracle::random_normal(16, 1, rng);
  IstaConfig cfg;
  cfg.lambda = 0.3;
  const SparseSolver solver(Eigen::MatrixXd::Identity(16, 16), make_identity_dictionary(16), cfg);
  CHECK(solver.lipschitz() == doctest::Approx(1.0).epsilon(1e-12));
  const auto sol = solver.solve(y);
  CHECK((sol.s - soft_threshold(y, 0.3)).cwiseAbs().maxCoeff() <= 1e-12);
  const Eigen::VectorXd star = soft_threshold(y, 0.3);
  const auto again = solver.solve(y, &star);
  CHECK(again.converged);
  CHECK(again.iterations == 1);
  CHECK((again.s - star).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("a 3-sparse vector is recovered from random projections") {
  Rng rng(4);
  const Eigen::MatrixXd a = oracle::random_normal(32, 64, rng) / std::sqrt(32.0);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(64);
  s(5) = 1.0;
  s(20) = -0.8;
  s(51) = 0.6;
  IstaConfig cfg;
  cfg.lambda = 1e-4;
  cfg.max_iters = 20000;
  cfg.tol = 1e-12;
  cfg.accelerated = true;
  const auto sol = solve_block_sparse(a * s, a, make_identity_dictionary(64), cfg);
  CHECK((sol.s - s).cwiseAbs().maxCoeff() <= 1e-2);
  CHECK(sol.s.cwiseAbs().maxCoeff() > 0.5);
}

TEST_CASE("ISTA objective never increases") {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const auto a = make_random_binary(4 + static_cast<std::size_t>(t % 20), 64, static_cast<std::uint64_t>(t));
    const Eigen::VectorXd y = a.entries * oracle::random_normal(64, 1, rng).cwiseAbs();
    IstaConfig cfg;
    cfg.lambda = 0.01 + 0.5 * rng.uniform();
    cfg.max_iters = 200;
    cfg.track_objective = true;
    const auto sol = solve_block_sparse(y, a, make_dictionary(t % 2 ? DictionaryKind::dct2d : DictionaryKind::identity, 64), cfg);
    for (std::size_t i = 1; i < sol.objective.size(); ++i)
      CHECK(sol.objective[i] <= sol.objective[i - 1] * (1.0 + 1e-12) + 1e-15);
  }
}

TEST_CASE("FISTA and ISTA reach the same minimum") {
  Rng rng(6);
  const Eigen::MatrixXd a = oracle::random_normal(32, 64, rng) / std::sqrt(32.0);
  const Eigen::VectorXd y = oracle::random_normal(32, 1, rng);
  IstaConfig cfg;
  cfg.lambda = 0.1;
  cfg.max_iters = 100000;
  cfg.tol = 1e-12;
  const auto dict = make_dct_dictionary(64);
  const auto ista = solve_block_sparse(y, a, dict, cfg);
  cfg.accelerated = true;
  const auto fista = solve_block_sparse(y, a, dict, cfg);
  const SparseSolver solver(a, dict, cfg);
  const double fi = sparse_objective(y, solver.operator_matrix(), ista.s, cfg.lambda);
  const double ff = sparse_objective(y, solver.operator_matrix(), fista.s, cfg.lambda);
  INFO("ista iterations " << ista.iterations << ", fista iterations " << fista.iterations);
  CHECK(ista.converged);
  CHECK(fista.converged);
  CHECK(std::abs(fi - ff) <= 1e-9 * std::max(1.0, fi));

  // After a short fixed budget the accelerated iterate is closer to the minimum.
  cfg.max_iters = 100;
  cfg.tol = 0.0;
  const auto fista_short = solve_block_sparse(y, a, dict, cfg);
  cfg.accelerated = false;
  const auto ista_short = solve_block_sparse(y, a, dict, cfg);
  CHECK(sparse_objective(y, solver.operator_matrix(), fista_short.s, cfg.lambda) <
        sparse_objective(y, solver.operator_matrix(), ista_short.s, cfg.lambda));
}

TEST_CASE("sparse image reconstruction") {
  const auto grid = BlockGrid::for_image(16, 16, 8);
  const auto a = make_random_binary(64, 64, 1);
  Image img(16, 16, 0.25);
  const auto ms = sense(extract_blocks(img, grid), a, {});
  IstaConfig cfg;
  cfg.lambda = 0.0;
  cfg.max_iters = 5;
  SparseReconstructionStats stats;
  const Image out = reconstruct_image_sparse(ms, a, make_dct_dictionary(64), cfg, grid, 2, &stats);
  CHECK(out.width() == 16);
  CHECK(stats.max_iterations <= 5);
  CHECK(kind_of([&] { reconstruct_image_sparse(ms, make_random_binary(3, 64, 1), make_dct_dictionary(64), cfg, grid); }) ==
        ErrorKind::dimension);
  IstaConfig bad;
  bad.lambda = -1.0;
  CHECK(kind_of([&] { SparseSolver(a.entries, make_identity_dictionary(64), bad); }) == ErrorKind::usage);
}
