// blockcam: train the patch prior, simulate block-wise compressive
// measurements, reconstruct, summarize and verify.

#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "blockcam/error.hpp"
#include "blockcam/pipeline.hpp"
#include "blockcam/version.hpp"

namespace {

using blockcam::ExperimentConfig;

struct Overrides {
  std::vector<std::function<void(ExperimentConfig&)>> apply;

  template <typename T, typename Setter>
  void add(CLI::App* app, const std::string& name, const std::string& desc, Setter setter) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, desc);
    apply.push_back([value, opt, setter](ExperimentConfig& cfg) {
      if (opt->count() > 0) setter(cfg, *value);
    });
  }

  void flag(CLI::App* app, const std::string& name, const std::string& desc,
            std::function<void(ExperimentConfig&)> setter) {
    CLI::Option* opt = app->add_flag(name, desc);
    apply.push_back([opt, setter](ExperimentConfig& cfg) {
      if (opt->count() > 0) setter(cfg);
    });
  }
};

using Paths = std::vector<std::string>;

std::vector<std::filesystem::path> to_paths(const Paths& v) { return {v.begin(), v.end()}; }

void add_common(CLI::App* app, Overrides& o) {
  o.add<Paths>(app, "--test-images", "Test images (.pgm files or directories)",
               [](auto& c, const Paths& v) { c.test_images = to_paths(v); });
  o.add<Paths>(app, "--train-images", "Training images (.pgm files or directories)",
               [](auto& c, const Paths& v) { c.train_images = to_paths(v); });
  o.add<std::size_t>(app, "--block-side", "Block side in pixels", [](auto& c, auto v) { c.block_side = v; });
  o.add<std::size_t>(app, "--overlap", "Block overlap in pixels", [](auto& c, auto v) { c.overlap = v; });
  o.add<std::vector<std::size_t>>(app, "--measurements,-m", "Measurements per block (list)",
                                  [](auto& c, const auto& v) { c.measurements = v; });
  o.add<std::size_t>(app, "--trials", "Trials per measurement count", [](auto& c, auto v) { c.trials = v; });
  o.add<std::uint64_t>(app, "--seed", "Base seed; trial t uses seed + t", [](auto& c, auto v) { c.base_seed = v; });
  o.add<std::string>(app, "--matrix", "random-binary | permuted-hadamard",
                     [](auto& c, const std::string& v) { c.matrix = blockcam::parse_matrix_kind(v); });
  o.add<double>(app, "--sigma", "Measurement noise standard deviation", [](auto& c, auto v) { c.sigma = v; });
  o.add<std::string>(app, "--method", "gmm | ista",
                     [](auto& c, const std::string& v) { c.method = blockcam::parse_method(v); });
  o.add<std::string>(app, "--model", "Model file path", [](auto& c, const std::string& v) { c.model = v; });
  o.add<std::string>(app, "--output-dir,-o", "Output directory (default $BLOCKCAM_OUTPUT_DIR)",
                     [](auto& c, const std::string& v) { c.output_dir = v; });
  o.add<std::size_t>(app, "--threads", "Worker threads (0 = all cores)", [](auto& c, auto v) { c.threads = v; });
}

void add_training(CLI::App* app, Overrides& o) {
  o.add<std::size_t>(app, "--k", "Mixture components", [](auto& c, auto v) { c.k = v; });
  o.add<std::size_t>(app, "--em-max-iters", "EM iteration cap", [](auto& c, auto v) { c.em_max_iters = v; });
  o.add<double>(app, "--em-tol", "Relative log-likelihood tolerance", [](auto& c, auto v) { c.em_tol = v; });
  o.add<double>(app, "--eps-reg", "Covariance floor (default 1e-6 trace/P)", [](auto& c, auto v) { c.eps_reg = v; });
  o.add<std::string>(app, "--init", "kmeans | random-responsibility", [](auto& c, const std::string& v) {
    c.init = v == "kmeans" ? blockcam::GmmInit::kmeans : blockcam::GmmInit::random_responsibility;
    if (v != "kmeans" && v != "random-responsibility")
      blockcam::fail(blockcam::ErrorKind::usage, "unknown GMM initialization '" + v + "'");
  });
  o.add<std::size_t>(app, "--max-train-patches", "Random subset size (0 = all)",
                     [](auto& c, auto v) { c.max_train_patches = v; });
}

void add_reconstruction(CLI::App* app, Overrides& o) {
  o.add<Paths>(app, "--inputs", "Measurement files (default: <output>/measurements/*.bcm)",
               [](auto& c, const Paths& v) { c.measurement_files = to_paths(v); });
  o.add<std::string>(app, "--results", "Results CSV path", [](auto& c, const std::string& v) { c.results_csv = v; });
  o.add<double>(app, "--lambda", "ISTA l1 weight", [](auto& c, auto v) { c.ista.lambda = v; });
  o.add<std::size_t>(app, "--ista-max-iters", "ISTA iteration cap", [](auto& c, auto v) { c.ista.max_iters = v; });
  o.add<double>(app, "--ista-tol", "ISTA relative change tolerance", [](auto& c, auto v) { c.ista.tol = v; });
  o.add<std::string>(app, "--dictionary", "dct2d | identity", [](auto& c, const std::string& v) {
    c.dictionary = blockcam::parse_dictionary_kind(v);
  });
  o.flag(app, "--fista", "Use FISTA momentum", [](auto& c) { c.ista.accelerated = true; });
  o.flag(app, "--append", "Append to an existing results CSV", [](auto& c) { c.append_results = true; });
  o.flag(app, "--clamp-psnr", "Clamp reconstructions to [0,1] before PSNR", [](auto& c) { c.clamp_psnr = true; });
  o.flag(app, "--no-images", "Do not write reconstructed PGMs", [](auto& c) { c.write_images = false; });
}

int run(int argc, char** argv) {
  CLI::App app{"Block-wise lensless compressive camera: simulation and reconstruction"};
  app.set_version_flag("--version", std::string("blockcam ") + blockcam::kVersion);
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config,-c", config_path, "JSON experiment config; flags override its values")
      ->check(CLI::ExistingFile);

  Overrides overrides;
  auto* train = app.add_subcommand("train", "Fit the Gaussian mixture patch prior");
  auto* simulate = app.add_subcommand("simulate", "Write measurement files for every (image, M, trial)");
  auto* reconstruct = app.add_subcommand("reconstruct", "Reconstruct measurement files and record PSNR");
  for (auto* sub : {train, simulate, reconstruct}) add_common(sub, overrides);
  add_training(train, overrides);
  add_reconstruction(reconstruct, overrides);

  auto* report = app.add_subcommand("report", "Mean/std PSNR per M and plot data from a results CSV");
  std::string report_csv, report_dir;
  report->add_option("results", report_csv, "Results CSV (default <output>/results.csv)");
  report->add_option("--output-dir,-o", report_dir, "Where summary.csv and plot files go");

  auto* verify = app.add_subcommand("verify", "Regenerate files from their metadata and byte-compare");
  std::vector<std::string> verify_files;
  std::size_t verify_threads = 1;
  verify->add_option("files", verify_files, "Measurement, model or reconstruction files")->required();
  verify->add_option("--threads", verify_threads, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : blockcam::exit_code(blockcam::ErrorKind::usage);
  }

  ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : blockcam::load_config(config_path);
  for (const auto& f : overrides.apply) f(cfg);

  if (train->parsed()) {
    blockcam::cmd_train(cfg, std::cerr);
  } else if (simulate->parsed()) {
    const auto files = blockcam::cmd_simulate(cfg, std::cerr);
    std::cerr << "wrote " << files.size() << " files to " << cfg.measurements_dir().string() << "\n";
  } else if (reconstruct->parsed()) {
    blockcam::cmd_reconstruct(cfg, std::cerr);
  } else if (report->parsed()) {
    const std::filesystem::path csv = report_csv.empty() ? cfg.resolved_results_csv() : std::filesystem::path(report_csv);
    const std::filesystem::path dir = report_dir.empty() ? csv.parent_path() : std::filesystem::path(report_dir);
    blockcam::cmd_report(csv, dir.empty() ? "." : dir, std::cout);
  } else if (verify->parsed()) {
    bool all_same = true;
    for (const auto& f : verify_files) all_same = blockcam::cmd_verify(f, std::cout, verify_threads) && all_same;
    if (!all_same) return blockcam::exit_code(blockcam::ErrorKind::verification);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const blockcam::Error& e) {
    std::cerr << "blockcam: " << blockcam::to_string(e.kind()) << ": " << e.what() << "\n";
    return blockcam::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "blockcam: " << e.what() << "\n";
    return 1;
  }
}
