#pragma once

#include <vector>

#include <Eigen/Dense>

#include "blockcam/gmm.hpp"
#include "blockcam/image.hpp"
#include "blockcam/sensing.hpp"

namespace blockcam {

/// Noise sigma substituted when a simulation is noiseless, keeping R finite.
inline constexpr double kSigmaFloor = 1e-6;

/// Measurement-noise precision matrix R (the inverse noise covariance).
struct NoisePrecision {
  Eigen::MatrixXd r;

  /// sigma^-2 I, with sigma == 0 replaced by kSigmaFloor.
  static NoisePrecision isotropic(std::size_t m, double sigma);
};

/// Everything per-block inversion needs, computed once per (A, R, model).
///
/// For component k with C_k = R^-1 + A Sigma_k A^T:
///   posterior_covariance[k] = (A^T R A + Sigma_k^-1)^-1
///   gain rows [kP, (k+1)P)  = posterior_covariance[k] A^T R
///   offset column k         = posterior_covariance[k] Sigma_k^-1 mu_k
/// so the component posterior mean is gain_k y + offset_k.
struct PosteriorCache {
  std::size_t k = 0;
  std::size_t m = 0;
  std::size_t p = 0;

  Eigen::MatrixXd a_t_r;                                // P x M
  std::vector<Eigen::MatrixXd> posterior_covariance;    // K of P x P
  std::vector<Eigen::MatrixXd> posterior_precision_chol;  // lower factor of A^T R A + Sigma_k^-1
  std::vector<Eigen::MatrixXd> marginal_chol;           // lower factor of C_k, K of M x M
  Eigen::MatrixXd marginal_means;                       // M x K, A mu_k
  Eigen::VectorXd log_norm;                             // log pi_k - (M log 2 pi + log det C_k) / 2
  Eigen::MatrixXd gain;                                 // K P x M
  Eigen::MatrixXd offset;                               // P x K

  double build_seconds = 0.0;
};

PosteriorCache build_cache(const Eigen::MatrixXd& a, const NoisePrecision& r, const GmmModel& model);
PosteriorCache build_cache(const SensingMatrix& a, const NoisePrecision& r, const GmmModel& model);

struct PosteriorResult {
  Eigen::VectorXd mean;              // P
  Eigen::VectorXd responsibilities;  // K
};

/// Posterior mean of one block. Uses only cached factors: triangular solves
/// and matrix-vector products, no factorization and no iteration.
PosteriorResult invert_block(const Eigen::Ref<const Eigen::VectorXd>& y, const PosteriorCache& cache,
                             const GmmModel& model);

struct BlockInversion {
  BlockMatrix means;                 // P x N_p
  Eigen::MatrixXd responsibilities;  // K x N_p
  double seconds = 0.0;
};

/// invert_block on every column of y (M x N_p), parallel over columns.
BlockInversion invert_blocks(const Eigen::MatrixXd& y, const PosteriorCache& cache, const GmmModel& model,
                             std::size_t threads = 1);

struct ReconstructionTiming {
  double inversion_seconds = 0.0;
  double stitch_seconds = 0.0;
  double total_seconds = 0.0;
  std::size_t blocks = 0;
};

Image reconstruct_image(const MeasurementSet& ms, const PosteriorCache& cache, const GmmModel& model,
                        const BlockGrid& grid, std::size_t threads = 1, ReconstructionTiming* timing = nullptr);

}  // namespace blockcam
