#include "blockcam/gmm.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "blockcam/error.hpp"
#include "blockcam/linalg.hpp"
#include "blockcam/parallel.hpp"
#include "blockcam/rng.hpp"
#include "byte_io.hpp"

namespace blockcam {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2 pi)
constexpr std::size_t kColumnChunk = 1024;
constexpr double kDeadComponentMass = 1e-10;

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

}  // namespace

void GmmModel::validate() const {
  const auto kk = static_cast<Eigen::Index>(k());
  const auto pp = static_cast<Eigen::Index>(p());
  require(kk >= 1 && pp >= 1, ErrorKind::numerical, "GMM must have at least one component of positive dimension");
  require(means.cols() == kk && covariances.size() == k(), ErrorKind::dimension, "GMM component counts disagree");
  require(weights.allFinite() && means.allFinite(), ErrorKind::numerical, "GMM parameters are not finite");
  require((weights.array() > 0.0).all(), ErrorKind::numerical, "GMM weights must be positive");
  require(std::abs(weights.sum() - 1.0) <= 1e-12, ErrorKind::numerical, "GMM weights do not sum to one");
  for (std::size_t c = 0; c < k(); ++c) {
    const auto& s = covariances[c];
    const std::string name = "GMM component " + std::to_string(c);
    require(s.rows() == pp && s.cols() == pp, ErrorKind::dimension, name + " covariance has wrong shape");
    require(s.allFinite(), ErrorKind::numerical, name + " covariance is not finite");
    require((s - s.transpose()).cwiseAbs().maxCoeff() <= 1e-12, ErrorKind::numerical, name + " covariance is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
    const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(hi);
    if (eps_reg > 0.0)
      require(lo >= eps_reg * (1.0 - 1e-6) - slack, ErrorKind::numerical,
              name + " covariance has eigenvalue " + std::to_string(lo) + " below the floor");
    else
      require(lo > 0.0, ErrorKind::numerical, name + " covariance is not positive definite");
  }
}

double default_eps_reg(const BlockMatrix& patches) {
  if (patches.cols() == 0 || patches.rows() == 0) return 1e-12;
  const Eigen::VectorXd mean = patches.rowwise().mean();
  const double trace = (patches.colwise() - mean).squaredNorm() / static_cast<double>(patches.cols());
  return std::max(1e-6 * trace / static_cast<double>(patches.rows()), 1e-12);
}

GmmEvaluator::GmmEvaluator(const GmmModel& model) : p_(model.p()), means_(model.means) {
  const std::size_t k = model.k();
  log_norm_.resize(static_cast<Eigen::Index>(k));
  chol_lower_.reserve(k);
  for (std::size_t c = 0; c < k; ++c) {
    const auto llt = cholesky(model.covariances[c], model.eps_reg, "GMM component " + std::to_string(c));
    chol_lower_.push_back(llt.matrixL());
    log_norm_(static_cast<Eigen::Index>(c)) =
        std::log(model.weights(static_cast<Eigen::Index>(c))) -
        0.5 * (static_cast<double>(p_) * kLog2Pi + log_det_from_cholesky(llt));
  }
}

double GmmEvaluator::log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  require(static_cast<std::size_t>(x.size()) == p_, ErrorKind::dimension,
          "patch has dimension " + std::to_string(x.size()) + ", model expects " + std::to_string(p_));
  Eigen::VectorXd terms(log_norm_.size());
  for (Eigen::Index c = 0; c < terms.size(); ++c) {
    const Eigen::VectorXd z =
        chol_lower_[static_cast<std::size_t>(c)].triangularView<Eigen::Lower>().solve(x - means_.col(c));
    terms(c) = log_norm_(c) - 0.5 * z.squaredNorm();
  }
  return log_sum_exp(terms);
}

Eigen::VectorXd GmmEvaluator::log_likelihoods(const BlockMatrix& x, Eigen::MatrixXd* component_terms,
                                             std::size_t threads) const {
  require(static_cast<std::size_t>(x.rows()) == p_, ErrorKind::dimension,
          "patches have dimension " + std::to_string(x.rows()) + ", model expects " + std::to_string(p_));
  const auto k = log_norm_.size();
  Eigen::MatrixXd terms(k, x.cols());
  Eigen::VectorXd out(x.cols());
  parallel_for_chunks(static_cast<std::size_t>(x.cols()), kColumnChunk, threads,
                      [&](std::size_t begin, std::size_t end) {
                        const auto b = static_cast<Eigen::Index>(begin);
                        const auto len = static_cast<Eigen::Index>(end - begin);
                        for (Eigen::Index c = 0; c < k; ++c) {
                          Eigen::MatrixXd z = x.middleCols(b, len).colwise() - means_.col(c);
                          chol_lower_[static_cast<std::size_t>(c)].triangularView<Eigen::Lower>().solveInPlace(z);
                          terms.row(c).segment(b, len) =
                              (log_norm_(c) - 0.5 * z.colwise().squaredNorm().array()).matrix();
                        }
                        for (Eigen::Index i = b; i < b + len; ++i) out(i) = log_sum_exp(terms.col(i));
                      });
  if (component_terms) *component_terms = std::move(terms);
  return out;
}

double log_likelihood(const GmmModel& model, const Eigen::Ref<const Eigen::VectorXd>& patch) {
  return GmmEvaluator(model).log_likelihood(patch);
}

namespace {

// Hard k-means assignments seeded with k-means++.
Eigen::MatrixXd kmeans_responsibilities(const BlockMatrix& x, std::size_t k, Rng& rng) {
  const auto n = x.cols();
  Eigen::MatrixXd centers(x.rows(), static_cast<Eigen::Index>(k));
  centers.col(0) = x.col(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  Eigen::VectorXd d2 = (x.colwise() - centers.col(0)).colwise().squaredNorm().transpose();
  for (std::size_t c = 1; c < k; ++c) {
    const double total = pairwise_sum(d2.data(), static_cast<std::size_t>(n));
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc > target && d2(i) > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centers.col(static_cast<Eigen::Index>(c)) = x.col(pick);
    d2 = d2.cwiseMin((x.colwise() - x.col(pick)).colwise().squaredNorm().transpose());
  }

  std::vector<Eigen::Index> assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < 25; ++iter) {
    // ||x||^2 is constant per column and irrelevant to the argmin.
    Eigen::MatrixXd full = -2.0 * centers.transpose() * x;
    full.colwise() += centers.colwise().squaredNorm().transpose();
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      full.col(i).minCoeff(&best);
      if (assign[static_cast<std::size_t>(i)] != best) {
        assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(x.rows(), static_cast<Eigen::Index>(k));
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.col(assign[static_cast<std::size_t>(i)]) += x.col(i);
      counts(assign[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(k); ++c)
      if (counts(c) > 0.0) centers.col(c) = sums.col(c) / counts(c);
  }

  Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < n; ++i) resp(i, assign[static_cast<std::size_t>(i)]) = 1.0;
  return resp;
}

Eigen::MatrixXd random_responsibilities(Eigen::Index n, std::size_t k, Rng& rng) {
  Eigen::MatrixXd resp(n, static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < resp.cols(); ++c) resp(i, c) = 0.05 + rng.uniform();
    resp.row(i) /= resp.row(i).sum();
  }
  return resp;
}

// resp is N x K. `prev` supplies parameters for components that lost all mass.
GmmModel m_step(const BlockMatrix& x, const Eigen::MatrixXd& resp, double eps_reg, const GmmModel* prev) {
  const auto p = x.rows();
  const auto k = resp.cols();
  const double n = static_cast<double>(x.cols());
  GmmModel model;
  model.eps_reg = eps_reg;
  model.weights.resize(k);
  model.means.resize(p, k);
  model.covariances.resize(static_cast<std::size_t>(k));
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(p, p);
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto r = resp.col(c);
    const double nk = r.sum();
    auto& cov = model.covariances[static_cast<std::size_t>(c)];
    if (nk < kDeadComponentMass) {
      model.weights(c) = kDeadComponentMass / n;
      if (prev) {
        model.means.col(c) = prev->means.col(c);
        cov = prev->covariances[static_cast<std::size_t>(c)];
      } else {
        model.means.col(c) = x.rowwise().mean();
        cov = identity;
      }
      continue;
    }
    model.weights(c) = nk / n;
    model.means.col(c) = (x * r) / nk;
    Eigen::MatrixXd scaled = (x.colwise() - model.means.col(c)) * r.cwiseSqrt().asDiagonal();
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(p, p);
    s.selfadjointView<Eigen::Lower>().rankUpdate(scaled, 1.0 / nk);
    cov = s.selfadjointView<Eigen::Lower>();
    cov += eps_reg * identity;
  }
  model.weights /= model.weights.sum();
  return model;
}

}  // namespace

GmmModel train_gmm(const BlockMatrix& patches, const TrainingConfig& cfg, TrainingReport* report) {
  require(cfg.k >= 1, ErrorKind::usage, "component count must be at least 1");
  require(patches.rows() >= 1, ErrorKind::dimension, "patches must have positive dimension");
  if (static_cast<std::size_t>(patches.cols()) < cfg.k)
    fail(ErrorKind::insufficient_data, "too few patches: " + std::to_string(patches.cols()) + " patches for " +
                                           std::to_string(cfg.k) + " components");
  require(patches.allFinite(), ErrorKind::numerical, "training patches contain non-finite values");
  const double eps_reg = cfg.eps_reg.value_or(default_eps_reg(patches));
  require(eps_reg > 0.0 && std::isfinite(eps_reg), ErrorKind::usage, "eps_reg must be positive");

  Rng rng(derive_seed(cfg.seed, stream::training));
  Eigen::MatrixXd resp = cfg.init == GmmInit::kmeans ? kmeans_responsibilities(patches, cfg.k, rng)
                                                     : random_responsibilities(patches.cols(), cfg.k, rng);
  GmmModel model = m_step(patches, resp, eps_reg, nullptr);

  TrainingReport rep;
  rep.eps_reg = eps_reg;
  const double n = static_cast<double>(patches.cols());
  for (std::size_t iter = 0;; ++iter) {
    Eigen::MatrixXd terms;
    const Eigen::VectorXd ll = GmmEvaluator(model).log_likelihoods(patches, &terms, cfg.threads);
    const double mean_ll = pairwise_sum(ll.data(), static_cast<std::size_t>(ll.size())) / n;
    if (!std::isfinite(mean_ll)) fail(ErrorKind::numerical, "EM log-likelihood became non-finite");
    rep.log_likelihood.push_back(mean_ll);
    if (rep.log_likelihood.size() > 1) {
      const double prev = rep.log_likelihood[rep.log_likelihood.size() - 2];
      if (std::abs(mean_ll - prev) <= cfg.tol * std::max(std::abs(prev), 1e-300)) {
        rep.converged = true;
        break;
      }
    }
    if (iter >= cfg.max_iters) break;
    resp = (terms.rowwise() - ll.transpose()).array().exp().transpose();
    model = m_step(patches, resp, eps_reg, &model);
    ++rep.iterations;
  }
  model.validate();
  if (report) *report = std::move(rep);
  return model;
}

namespace {
constexpr std::string_view kModelFormat = "blockcam.gmm";
constexpr int kModelVersion = 1;

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}
}  // namespace

std::string encode_model(const GmmModel& model) {
  require(model.means.cols() == static_cast<Eigen::Index>(model.k()) && model.covariances.size() == model.k(),
          ErrorKind::dimension, "inconsistent GMM model");
  std::string payload;
  payload.reserve(8 * model.k() * (1 + model.p() + model.p() * model.p()));
  detail::append_matrix(payload, model.weights);
  detail::append_matrix(payload, model.means);
  for (const auto& c : model.covariances) detail::append_matrix(payload, c);

  nlohmann::ordered_json meta;
  try {
    meta = nlohmann::ordered_json::parse(model.metadata.empty() ? "{}" : model.metadata);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("model metadata is not JSON: ") + e.what());
  }
  nlohmann::ordered_json h;
  h["format"] = kModelFormat;
  h["version"] = kModelVersion;
  h["k"] = model.k();
  h["p"] = model.p();
  h["eps_reg"] = model.eps_reg;
  h["metadata"] = std::move(meta);
  h["payload"] = "f64le weights[k] means[p,k] covariances[k][p,p] column-major";
  h["payload_bytes"] = payload.size();
  h["checksum"] = "crc32:" + hex32(detail::crc32(payload));
  std::string out = h.dump();
  out += '\n';
  out += payload;
  return out;
}

GmmModel decode_model(std::string_view bytes, const std::string& origin) {
  const auto file = detail::split_headered(bytes, kModelFormat, kModelVersion, origin);
  GmmModel model;
  try {
    const auto& h = file.header;
    const auto k = static_cast<Eigen::Index>(h.at("k").get<std::size_t>());
    const auto p = static_cast<Eigen::Index>(h.at("p").get<std::size_t>());
    if (h.at("payload_bytes").get<std::size_t>() != file.payload.size())
      fail(ErrorKind::format, origin + ": payload size does not match header");
    if (h.at("checksum").get<std::string>() != "crc32:" + hex32(detail::crc32(file.payload)))
      fail(ErrorKind::format, origin + ": checksum mismatch (file corrupted)");
    model.eps_reg = h.at("eps_reg").get<double>();
    model.metadata = h.at("metadata").dump();
    std::size_t offset = 0;
    model.weights = detail::take_matrix(file.payload, offset, k, 1, origin);
    model.means = detail::take_matrix(file.payload, offset, p, k, origin);
    for (Eigen::Index c = 0; c < k; ++c) model.covariances.push_back(detail::take_matrix(file.payload, offset, p, p, origin));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, origin + ": bad model header: " + e.what());
  }
  model.validate();
  return model;
}

void save_model(const GmmModel& model, const std::filesystem::path& path) {
  detail::write_file(path, encode_model(model));
}

GmmModel load_model(const std::filesystem::path& path) {
  return decode_model(detail::read_file(path), path.string());
}

}  // namespace blockcam
