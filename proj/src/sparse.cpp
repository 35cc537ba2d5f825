#include "blockcam/sparse.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include "blockcam/error.hpp"
#include "blockcam/parallel.hpp"

namespace blockcam {

std::string_view to_string(DictionaryKind kind) noexcept {
  return kind == DictionaryKind::identity ? "identity" : "dct2d";
}

DictionaryKind parse_dictionary_kind(std::string_view text) {
  if (text == "identity") return DictionaryKind::identity;
  if (text == "dct2d" || text == "dct") return DictionaryKind::dct2d;
  fail(ErrorKind::usage, "unknown dictionary '" + std::string(text) + "'");
}

Dictionary make_identity_dictionary(std::size_t p) {
  require(p >= 1, ErrorKind::dimension, "dictionary dimension must be positive");
  const auto n = static_cast<Eigen::Index>(p);
  return {DictionaryKind::identity, Eigen::MatrixXd::Identity(n, n)};
}

Dictionary make_dct_dictionary(std::size_t p) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(p))));
  if (p == 0 || side * side != p)
    fail(ErrorKind::dimension, "DCT dictionary needs a square patch dimension, got " + std::to_string(p));
  const auto n = static_cast<Eigen::Index>(side);
  Eigen::MatrixXd basis(n, n);  // basis(i, u): sample i of 1-D atom u
  for (Eigen::Index u = 0; u < n; ++u) {
    const double scale = std::sqrt((u == 0 ? 1.0 : 2.0) / static_cast<double>(n));
    for (Eigen::Index i = 0; i < n; ++i)
      basis(i, u) = scale * std::cos(std::numbers::pi * (2.0 * static_cast<double>(i) + 1.0) *
                                     static_cast<double>(u) / (2.0 * static_cast<double>(n)));
  }
  Dictionary dict{DictionaryKind::dct2d, Eigen::MatrixXd(n * n, n * n)};
  for (Eigen::Index u = 0; u < n; ++u)
    for (Eigen::Index v = 0; v < n; ++v)
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) dict.d(i * n + j, u * n + v) = basis(i, u) * basis(j, v);
  return dict;
}

Dictionary make_dictionary(DictionaryKind kind, std::size_t p) {
  return kind == DictionaryKind::identity ? make_identity_dictionary(p) : make_dct_dictionary(p);
}

double soft_threshold(double v, double t) noexcept {
  const double mag = std::abs(v) - t;
  return mag > 0.0 ? std::copysign(mag, v) : 0.0;
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t) {
  return v.unaryExpr([t](double x) { return soft_threshold(x, t); });
}

double power_iteration_lmax(const Eigen::MatrixXd& op, std::size_t max_iters, double rel_tol) {
  const auto q = op.cols();
  if (q == 0 || op.rows() == 0) return 0.0;
  Eigen::VectorXd v(q);
  for (Eigen::Index i = 0; i < q; ++i) v(i) = 1.0 + 0.25 * std::sin(static_cast<double>(i) + 1.0);
  v.normalize();
  double lambda = 0.0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    const Eigen::VectorXd w = op.transpose() * (op * v);
    const double next = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    const bool done = it > 0 && std::abs(next - lambda) <= rel_tol * std::abs(next);
    lambda = next;
    if (done) break;
  }
  return lambda;
}

double sparse_objective(const Eigen::VectorXd& y, const Eigen::MatrixXd& op, const Eigen::VectorXd& s,
                        double lambda) {
  return 0.5 * (y - op * s).squaredNorm() + lambda * s.lpNorm<1>();
}

SparseSolver::SparseSolver(const Eigen::MatrixXd& a, Dictionary dict, IstaConfig cfg)
    : dict_(std::move(dict)), cfg_(cfg) {
  require(cfg_.lambda >= 0.0 && std::isfinite(cfg_.lambda), ErrorKind::usage, "lambda must be >= 0");
  if (a.cols() != dict_.d.rows())
    fail(ErrorKind::dimension, "sensing matrix has " + std::to_string(a.cols()) + " columns, dictionary atoms have " +
                                   std::to_string(dict_.d.rows()) + " entries");
  ad_ = a * dict_.d;
  lipschitz_ = power_iteration_lmax(ad_);
  if (!(lipschitz_ > 0.0)) lipschitz_ = 1.0;
}

SparseSolution SparseSolver::solve(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::VectorXd* start) const {
  if (y.size() != ad_.rows())
    fail(ErrorKind::dimension, "measurement vector has length " + std::to_string(y.size()) + ", expected " +
                                   std::to_string(ad_.rows()));
  const auto q = ad_.cols();
  const Eigen::VectorXd yv = y;
  const double step = 1.0 / lipschitz_;
  const double thresh = cfg_.lambda * step;

  SparseSolution out;
  Eigen::VectorXd s = Eigen::VectorXd::Zero(q);
  if (start) {
    require(start->size() == q, ErrorKind::dimension, "start vector has the wrong length");
    s = *start;
  }
  if (cfg_.track_objective) out.objective.push_back(sparse_objective(yv, ad_, s, cfg_.lambda));

  Eigen::VectorXd z = s;  // FISTA extrapolation point
  double momentum = 1.0;
  Eigen::VectorXd next(q);
  for (std::size_t it = 1; it <= cfg_.max_iters; ++it) {
    const Eigen::VectorXd& base = cfg_.accelerated ? z : s;
    next = soft_threshold(base - step * (ad_.transpose() * (ad_ * base - yv)), thresh);
    const double change = (next - s).norm();
    if (cfg_.accelerated) {
      const double momentum_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
      z = next + ((momentum - 1.0) / momentum_next) * (next - s);
      momentum = momentum_next;
    }
    s.swap(next);
    out.iterations = it;
    if (cfg_.track_objective) out.objective.push_back(sparse_objective(yv, ad_, s, cfg_.lambda));
    if (change <= cfg_.tol * std::max(s.norm(), 1.0)) {
      out.converged = true;
      break;
    }
  }
  out.x = dict_.d * s;
  out.s = std::move(s);
  return out;
}

SparseSolution solve_block_sparse(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::MatrixXd& a,
                                  const Dictionary& dict, const IstaConfig& cfg) {
  return SparseSolver(a, dict, cfg).solve(y);
}

SparseSolution solve_block_sparse(const Eigen::Ref<const Eigen::VectorXd>& y, const SensingMatrix& a,
                                  const Dictionary& dict, const IstaConfig& cfg) {
  return solve_block_sparse(y, a.entries, dict, cfg);
}

Image reconstruct_image_sparse(const MeasurementSet& ms, const SensingMatrix& a, const Dictionary& dict,
                               const IstaConfig& cfg, const BlockGrid& grid, std::size_t threads,
                               SparseReconstructionStats* stats) {
  const auto t0 = std::chrono::steady_clock::now();
  if (ms.m() != a.m() || grid.block_dim() != a.p() || grid.block_count() != ms.block_count())
    fail(ErrorKind::dimension, "measurements, sensing matrix and grid disagree");
  IstaConfig quiet = cfg;
  quiet.track_objective = false;
  const SparseSolver solver(a.entries, dict, quiet);
  BlockMatrix blocks(static_cast<Eigen::Index>(a.p()), ms.data.cols());
  std::vector<std::size_t> iterations(ms.block_count());
  std::vector<char> converged(ms.block_count());
  parallel_for(ms.block_count(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto col = static_cast<Eigen::Index>(i);
      auto sol = solver.solve(ms.data.col(col));
      blocks.col(col) = sol.x;
      iterations[i] = sol.iterations;
      converged[i] = sol.converged ? 1 : 0;
    }
  });
  Image img = stitch_blocks(blocks, grid);
  if (stats) {
    stats->unconverged_blocks = static_cast<std::size_t>(std::count(converged.begin(), converged.end(), 0));
    stats->max_iterations = iterations.empty() ? 0 : *std::max_element(iterations.begin(), iterations.end());
    stats->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return img;
}

}  // namespace blockcam
