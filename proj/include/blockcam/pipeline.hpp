#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "blockcam/gmm.hpp"
#include "blockcam/sensing.hpp"
#include "blockcam/sparse.hpp"

namespace blockcam {

enum class Method { gmm, ista };

std::string_view to_string(Method method) noexcept;
Method parse_method(std::string_view text);

/// Environment variable consulted for the output directory when none is configured.
inline constexpr const char* kOutputDirEnv = "BLOCKCAM_OUTPUT_DIR";

struct ExperimentConfig {
  std::vector<std::filesystem::path> test_images;
  std::vector<std::filesystem::path> train_images;  // files or directories of .pgm
  std::size_t block_side = 8;
  std::size_t overlap = 0;
  std::vector<std::size_t> measurements{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::size_t trials = 10;
  std::uint64_t base_seed = 0;  // trial t uses base_seed + t
  MatrixKind matrix = MatrixKind::random_binary;
  double sigma = 0.0;
  Method method = Method::gmm;
  std::filesystem::path model;        // default <output_dir>/model.bcgmm
  std::filesystem::path output_dir;   // default $BLOCKCAM_OUTPUT_DIR, then "blockcam-out"

  // Prior training.
  std::size_t k = 20;
  std::size_t em_max_iters = 200;
  double em_tol = 1e-6;
  std::optional<double> eps_reg;
  GmmInit init = GmmInit::kmeans;
  std::size_t max_train_patches = 0;  // 0 keeps every patch

  // Sparse baseline.
  IstaConfig ista;
  DictionaryKind dictionary = DictionaryKind::dct2d;

  // Reconstruction.
  std::vector<std::filesystem::path> measurement_files;  // default: every .bcm under <output_dir>/measurements
  std::filesystem::path results_csv;                     // default <output_dir>/results.csv
  bool append_results = false;
  bool clamp_psnr = false;
  bool write_images = true;

  std::size_t threads = 1;

  std::filesystem::path resolved_output_dir() const;
  std::filesystem::path resolved_model() const;
  std::filesystem::path resolved_results_csv() const;
  std::filesystem::path measurements_dir() const { return resolved_output_dir() / "measurements"; }
  std::filesystem::path reconstructions_dir() const { return resolved_output_dir() / "reconstructions"; }

  void validate() const;
};

/// Reads a JSON config document; unknown keys are a format error.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig config_from_json(std::string_view json_text);
std::string config_to_json(const ExperimentConfig& cfg);

struct ResultRow {
  std::string image_id;
  std::string method;
  std::size_t m = 0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  double psnr_db = 0.0;  // may be +inf
  double recon_seconds = 0.0;
  double cache_seconds = 0.0;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

inline constexpr std::string_view kResultsHeader =
    "image_id,method,M,trial,seed,psnr_db,recon_seconds,cache_seconds";

std::string format_result_row(const ResultRow& row);
/// Throws a format error naming `line_number` on malformed input.
ResultRow parse_result_row(std::string_view line, std::size_t line_number);
std::vector<ResultRow> read_results(const std::filesystem::path& path);
void write_results(const std::vector<ResultRow>& rows, const std::filesystem::path& path, bool append);

struct SummaryRow {
  std::string method;
  std::size_t m = 0;
  std::size_t count = 0;
  double mean_psnr_db = 0.0;
  double std_psnr_db = 0.0;  // population standard deviation
};

/// Grouped by (method, M), sorted by method then M.
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

/// Training patches of every configured training image, stride block_side / 2.
BlockMatrix gather_training_patches(const ExperimentConfig& cfg);
std::vector<std::filesystem::path> expand_images(const std::vector<std::filesystem::path>& entries);

struct TrainOutcome {
  std::filesystem::path model_path;
  std::filesystem::path report_path;
  TrainingReport report;
};

TrainOutcome cmd_train(const ExperimentConfig& cfg, std::ostream& log);
std::vector<std::filesystem::path> cmd_simulate(const ExperimentConfig& cfg, std::ostream& log);
std::vector<ResultRow> cmd_reconstruct(const ExperimentConfig& cfg, std::ostream& log);

struct ReportOutcome {
  std::vector<SummaryRow> summary;
  std::filesystem::path summary_path;
  std::vector<std::filesystem::path> plot_paths;
};

ReportOutcome cmd_report(const std::filesystem::path& results_csv, const std::filesystem::path& output_dir,
                         std::ostream& log);

/// Regenerates a measurement file, model file or reconstruction from its
/// embedded metadata and byte-compares. Returns true when identical.
bool cmd_verify(const std::filesystem::path& file, std::ostream& log, std::size_t threads = 1);

}  // namespace blockcam
