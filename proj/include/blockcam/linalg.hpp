#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

namespace blockcam {

/// Cholesky factorization of a symmetric matrix. If the first attempt fails
/// the matrix is retried once with `jitter * I` added; a second failure
/// throws a numerical error mentioning `what`.
///
/// Every factorization in the library goes through here so the count can be
/// audited (see factorization_count).
Eigen::LLT<Eigen::MatrixXd> cholesky(const Eigen::MatrixXd& a, double jitter, const std::string& what);

/// Number of factorizations performed by this process so far.
std::uint64_t factorization_count() noexcept;

/// Sum of log of the factor diagonal, times two.
double log_det_from_cholesky(const Eigen::LLT<Eigen::MatrixXd>& llt);

/// Deterministic pairwise summation.
double pairwise_sum(const double* values, std::size_t n);

inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& a) { return 0.5 * (a + a.transpose()); }

}  // namespace blockcam
