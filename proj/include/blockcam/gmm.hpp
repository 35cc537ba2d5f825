#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "blockcam/image.hpp"

namespace blockcam {

/// Gaussian mixture prior over vectorized patches.
struct GmmModel {
  Eigen::VectorXd weights;               // K
  Eigen::MatrixXd means;                 // P x K
  std::vector<Eigen::MatrixXd> covariances;  // K of P x P
  double eps_reg = 0.0;                  // covariance floor used in training
  std::string metadata = "{}";           // JSON object, carried verbatim through save/load

  std::size_t k() const noexcept { return static_cast<std::size_t>(weights.size()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(means.rows()); }

  /// Throws a numerical error if weights, symmetry or positive definiteness fail.
  void validate() const;

  friend bool operator==(const GmmModel&, const GmmModel&) = default;
};

enum class GmmInit { kmeans, random_responsibility };

struct TrainingConfig {
  std::size_t k = 20;
  std::size_t max_iters = 200;
  double tol = 1e-6;                    // relative change of mean log-likelihood
  std::optional<double> eps_reg;        // default: default_eps_reg(patches)
  std::uint64_t seed = 0;
  GmmInit init = GmmInit::kmeans;
  std::size_t threads = 1;
};

struct TrainingReport {
  std::vector<double> log_likelihood;   // mean per-patch value, one entry per EM iterate
  std::size_t iterations = 0;
  bool converged = false;
  double eps_reg = 0.0;
};

/// 1e-6 * trace(sample covariance) / P, floored at 1e-12.
double default_eps_reg(const BlockMatrix& patches);

/// Expectation-maximization with eps_reg * I added to every covariance
/// update. The first iterate comes from k-means (or random responsibilities)
/// followed by one M-step.
GmmModel train_gmm(const BlockMatrix& patches, const TrainingConfig& cfg, TrainingReport* report = nullptr);

/// Per-component Cholesky evaluation of a mixture density.
class GmmEvaluator {
 public:
  explicit GmmEvaluator(const GmmModel& model);

  double log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Per-column log densities and K x N component log terms (log pi_k + log N_k).
  Eigen::VectorXd log_likelihoods(const BlockMatrix& x, Eigen::MatrixXd* component_terms = nullptr,
                                  std::size_t threads = 1) const;

 private:
  std::size_t p_;
  Eigen::VectorXd log_norm_;  // log pi_k - 0.5 (P log 2 pi + log det Sigma_k)
  Eigen::MatrixXd means_;
  std::vector<Eigen::MatrixXd> chol_lower_;
};

double log_likelihood(const GmmModel& model, const Eigen::Ref<const Eigen::VectorXd>& patch);

/// Model file: one line of JSON header (format, version, k, p, eps_reg,
/// metadata, payload size, CRC-32 of the payload), then little-endian
/// float64 weights, means (column order), covariances (column order).
std::string encode_model(const GmmModel& model);
GmmModel decode_model(std::string_view bytes, const std::string& origin);
void save_model(const GmmModel& model, const std::filesystem::path& path);
GmmModel load_model(const std::filesystem::path& path);

}  // namespace blockcam
