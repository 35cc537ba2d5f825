#include "blockcam/linalg.hpp"

#include <atomic>
#include <cmath>

#include "blockcam/error.hpp"

namespace blockcam {

namespace {
std::atomic<std::uint64_t> g_factorizations{0};
}

Eigen::LLT<Eigen::MatrixXd> cholesky(const Eigen::MatrixXd& a, double jitter, const std::string& what) {
  g_factorizations.fetch_add(1, std::memory_order_relaxed);
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt;

  g_factorizations.fetch_add(1, std::memory_order_relaxed);
  Eigen::MatrixXd jittered = a;
  jittered.diagonal().array() += jitter;
  llt.compute(jittered);
  if (llt.info() != Eigen::Success || !(jitter > 0.0))
    fail(ErrorKind::numerical, "Cholesky factorization failed for " + what);
  return llt;
}

std::uint64_t factorization_count() noexcept { return g_factorizations.load(std::memory_order_relaxed); }

double log_det_from_cholesky(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double pairwise_sum(const double* values, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += values[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, n - half);
}

}  // namespace blockcam
