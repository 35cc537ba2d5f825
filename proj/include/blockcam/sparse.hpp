#pragma once

#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "blockcam/image.hpp"
#include "blockcam/sensing.hpp"

namespace blockcam {

enum class DictionaryKind { identity, dct2d };

std::string_view to_string(DictionaryKind kind) noexcept;
DictionaryKind parse_dictionary_kind(std::string_view text);

struct Dictionary {
  DictionaryKind kind = DictionaryKind::identity;
  Eigen::MatrixXd d;  // P x Q
};

Dictionary make_identity_dictionary(std::size_t p);

/// Orthonormal separable 2-D DCT-II basis for sqrt(p) x sqrt(p) patches.
/// Atom (u, v) sits in column u * side + v and is row-major within the patch.
Dictionary make_dct_dictionary(std::size_t p);

Dictionary make_dictionary(DictionaryKind kind, std::size_t p);

struct IstaConfig {
  double lambda = 0.01;
  std::size_t max_iters = 500;
  double tol = 1e-6;          // ||s_{t+1} - s_t|| <= tol * max(||s_{t+1}||, 1)
  bool accelerated = false;   // FISTA momentum
  bool track_objective = false;
};

struct SparseSolution {
  Eigen::VectorXd s;  // Q coefficients
  Eigen::VectorXd x;  // P pixels, D s
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> objective;  // filled when track_objective; entry 0 is the start point
};

double soft_threshold(double v, double t) noexcept;
Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t);

/// Largest eigenvalue of op^T op by power iteration from a fixed start vector.
double power_iteration_lmax(const Eigen::MatrixXd& op, std::size_t max_iters = 50, double rel_tol = 1e-8);

/// 0.5 ||y - op s||^2 + lambda ||s||_1
double sparse_objective(const Eigen::VectorXd& y, const Eigen::MatrixXd& op, const Eigen::VectorXd& s,
                        double lambda);

/// (F)ISTA for min 0.5 ||y - A D s||^2 + lambda ||s||_1 with step 1/L.
/// A D and L are computed once and reused for every block.
class SparseSolver {
 public:
  SparseSolver(const Eigen::MatrixXd& a, Dictionary dict, IstaConfig cfg);

  SparseSolution solve(const Eigen::Ref<const Eigen::VectorXd>& y,
                       const Eigen::VectorXd* start = nullptr) const;

  double lipschitz() const noexcept { return lipschitz_; }
  const Eigen::MatrixXd& operator_matrix() const noexcept { return ad_; }
  const IstaConfig& config() const noexcept { return cfg_; }

 private:
  Dictionary dict_;
  IstaConfig cfg_;
  Eigen::MatrixXd ad_;
  double lipschitz_ = 1.0;
};

SparseSolution solve_block_sparse(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::MatrixXd& a,
                                  const Dictionary& dict, const IstaConfig& cfg);
SparseSolution solve_block_sparse(const Eigen::Ref<const Eigen::VectorXd>& y, const SensingMatrix& a,
                                  const Dictionary& dict, const IstaConfig& cfg);

struct SparseReconstructionStats {
  double seconds = 0.0;
  std::size_t unconverged_blocks = 0;
  std::size_t max_iterations = 0;
};

Image reconstruct_image_sparse(const MeasurementSet& ms, const SensingMatrix& a, const Dictionary& dict,
                               const IstaConfig& cfg, const BlockGrid& grid, std::size_t threads = 1,
                               SparseReconstructionStats* stats = nullptr);

}  // namespace blockcam
