#include "blockcam/inversion.hpp"

#include <chrono>
#include <cmath>

#include "blockcam/error.hpp"
#include "blockcam/linalg.hpp"
#include "blockcam/parallel.hpp"

namespace blockcam {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

NoisePrecision NoisePrecision::isotropic(std::size_t m, double sigma) {
  require(m >= 1, ErrorKind::dimension, "noise precision needs at least one measurement");
  require(sigma >= 0.0 && std::isfinite(sigma), ErrorKind::usage, "noise sigma must be >= 0");
  const double s = sigma > 0.0 ? sigma : kSigmaFloor;
  const auto n = static_cast<Eigen::Index>(m);
  return {Eigen::MatrixXd::Identity(n, n) / (s * s)};
}

PosteriorCache build_cache(const Eigen::MatrixXd& a, const NoisePrecision& r, const GmmModel& model) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto m = a.rows(), p = a.cols();
  if (static_cast<std::size_t>(p) != model.p())
    fail(ErrorKind::dimension, "sensing matrix has " + std::to_string(p) + " columns, model dimension is " +
                                   std::to_string(model.p()));
  if (r.r.rows() != m || r.r.cols() != m)
    fail(ErrorKind::dimension, "noise precision must be " + std::to_string(m) + "x" + std::to_string(m));
  require(m >= 1, ErrorKind::dimension, "sensing matrix has no rows");

  const double jitter = model.eps_reg;
  const Eigen::MatrixXd identity_p = Eigen::MatrixXd::Identity(p, p);
  const auto r_llt = cholesky(symmetrized(r.r), jitter, "noise precision R");
  const Eigen::MatrixXd noise_cov = symmetrized(r_llt.solve(Eigen::MatrixXd::Identity(m, m)));

  PosteriorCache cache;
  cache.k = model.k();
  cache.m = static_cast<std::size_t>(m);
  cache.p = static_cast<std::size_t>(p);
  cache.a_t_r = a.transpose() * r.r;
  const Eigen::MatrixXd a_t_r_a = symmetrized(cache.a_t_r * a);

  const auto k = static_cast<Eigen::Index>(cache.k);
  cache.marginal_means = a * model.means;
  cache.log_norm.resize(k);
  cache.gain.resize(k * p, m);
  cache.offset.resize(p, k);
  cache.posterior_covariance.reserve(cache.k);
  cache.posterior_precision_chol.reserve(cache.k);
  cache.marginal_chol.reserve(cache.k);

  for (Eigen::Index c = 0; c < k; ++c) {
    const std::string name = "component " + std::to_string(c);
    const auto& sigma = model.covariances[static_cast<std::size_t>(c)];

    const auto prior_llt = cholesky(sigma, jitter, name + " prior covariance");
    const Eigen::MatrixXd prior_precision = symmetrized(prior_llt.solve(identity_p));

    // Posterior covariance (A^T R A + Sigma^-1)^-1 and the products that turn
    // the posterior mean into gain * y + offset.
    const auto post_llt = cholesky(symmetrized(a_t_r_a + prior_precision), jitter, name + " posterior precision");
    cache.posterior_covariance.push_back(symmetrized(post_llt.solve(identity_p)));
    cache.posterior_precision_chol.push_back(post_llt.matrixL());
    cache.gain.middleRows(c * p, p) = post_llt.solve(cache.a_t_r);
    cache.offset.col(c) = post_llt.solve(prior_llt.solve(model.means.col(c)));

    // Marginal covariance of y under component c.
    const auto marg_llt = cholesky(symmetrized(noise_cov + a * sigma * a.transpose()), jitter, name + " marginal covariance");
    cache.marginal_chol.push_back(marg_llt.matrixL());
    cache.log_norm(c) = std::log(model.weights(c)) -
                        0.5 * (static_cast<double>(m) * kLog2Pi + log_det_from_cholesky(marg_llt));
  }
  cache.build_seconds = seconds_since(t0);
  return cache;
}

PosteriorCache build_cache(const SensingMatrix& a, const NoisePrecision& r, const GmmModel& model) {
  return build_cache(a.entries, r, model);
}

PosteriorResult invert_block(const Eigen::Ref<const Eigen::VectorXd>& y, const PosteriorCache& cache,
                             const GmmModel& model) {
  if (static_cast<std::size_t>(y.size()) != cache.m)
    fail(ErrorKind::dimension, "measurement vector has length " + std::to_string(y.size()) + ", expected " +
                                   std::to_string(cache.m));
  if (model.k() != cache.k || model.p() != cache.p)
    fail(ErrorKind::dimension, "posterior cache was built for a different model");
  const auto k = static_cast<Eigen::Index>(cache.k);
  const auto p = static_cast<Eigen::Index>(cache.p);

  // Responsibilities in log space: log pi_k + log N(y | A mu_k, C_k).
  Eigen::VectorXd logits(k);
  Eigen::VectorXd z(y.size());
  for (Eigen::Index c = 0; c < k; ++c) {
    z = y - cache.marginal_means.col(c);
    cache.marginal_chol[static_cast<std::size_t>(c)].triangularView<Eigen::Lower>().solveInPlace(z);
    logits(c) = cache.log_norm(c) - 0.5 * z.squaredNorm();
  }
  const double mx = logits.maxCoeff();
  PosteriorResult out;
  out.responsibilities = (logits.array() - mx).exp();
  out.responsibilities /= out.responsibilities.sum();

  // Component posterior means gain_k y + offset_k, mixed by responsibility.
  const Eigen::VectorXd gy = cache.gain * y;
  const Eigen::Map<const Eigen::MatrixXd> component_gain(gy.data(), p, k);
  out.mean = component_gain * out.responsibilities + cache.offset * out.responsibilities;
  return out;
}

BlockInversion invert_blocks(const Eigen::MatrixXd& y, const PosteriorCache& cache, const GmmModel& model,
                             std::size_t threads) {
  const auto t0 = std::chrono::steady_clock::now();
  BlockInversion out;
  out.means.resize(static_cast<Eigen::Index>(cache.p), y.cols());
  out.responsibilities.resize(static_cast<Eigen::Index>(cache.k), y.cols());
  parallel_for(static_cast<std::size_t>(y.cols()), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto col = static_cast<Eigen::Index>(i);
      auto res = invert_block(y.col(col), cache, model);
      out.means.col(col) = res.mean;
      out.responsibilities.col(col) = res.responsibilities;
    }
  });
  out.seconds = seconds_since(t0);
  return out;
}

Image reconstruct_image(const MeasurementSet& ms, const PosteriorCache& cache, const GmmModel& model,
                        const BlockGrid& grid, std::size_t threads, ReconstructionTiming* timing) {
  const auto t0 = std::chrono::steady_clock::now();
  if (ms.m() != cache.m) fail(ErrorKind::dimension, "measurement count differs from the posterior cache");
  if (grid.block_dim() != cache.p || grid.block_count() != ms.block_count())
    fail(ErrorKind::dimension, "grid does not match the measurements / posterior cache");
  auto inv = invert_blocks(ms.data, cache, model, threads);
  const auto t1 = std::chrono::steady_clock::now();
  Image img = stitch_blocks(inv.means, grid);
  if (timing) {
    timing->inversion_seconds = inv.seconds;
    timing->stitch_seconds = seconds_since(t1);
    timing->total_seconds = seconds_since(t0);
    timing->blocks = ms.block_count();
  }
  return img;
}

}  // namespace blockcam
