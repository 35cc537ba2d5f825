#include "blockcam/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <limits>
#include <tuple>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "blockcam/error.hpp"
#include "blockcam/inversion.hpp"
#include "blockcam/rng.hpp"
#include "blockcam/version.hpp"
#include "byte_io.hpp"

namespace blockcam {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string_view to_string(Method method) noexcept { return method == Method::gmm ? "gmm" : "ista"; }

Method parse_method(std::string_view text) {
  if (text == "gmm") return Method::gmm;
  if (text == "ista") return Method::ista;
  fail(ErrorKind::usage, "unknown reconstruction method '" + std::string(text) + "'");
}

namespace {

std::string_view to_string(GmmInit init) { return init == GmmInit::kmeans ? "kmeans" : "random-responsibility"; }

GmmInit parse_init(std::string_view text) {
  if (text == "kmeans") return GmmInit::kmeans;
  if (text == "random-responsibility") return GmmInit::random_responsibility;
  fail(ErrorKind::usage, "unknown GMM initialization '" + std::string(text) + "'");
}

std::vector<std::string> path_strings(const std::vector<fs::path>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(p.generic_string());
  return out;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

fs::path ExperimentConfig::resolved_output_dir() const {
  if (!output_dir.empty()) return output_dir;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return "blockcam-out";
}

fs::path ExperimentConfig::resolved_model() const {
  return model.empty() ? resolved_output_dir() / "model.bcgmm" : model;
}

fs::path ExperimentConfig::resolved_results_csv() const {
  return results_csv.empty() ? resolved_output_dir() / "results.csv" : results_csv;
}

void ExperimentConfig::validate() const {
  require(block_side >= 1, ErrorKind::usage, "block_side must be positive");
  require(overlap < block_side, ErrorKind::usage, "overlap must be smaller than block_side");
  require(!measurements.empty(), ErrorKind::usage, "measurement list must not be empty");
  require(trials >= 1, ErrorKind::usage, "trials must be at least 1");
  require(sigma >= 0.0 && std::isfinite(sigma), ErrorKind::usage, "sigma must be >= 0");
  require(k >= 1, ErrorKind::usage, "k must be at least 1");
  for (auto m : measurements) require(m >= 1, ErrorKind::usage, "measurement counts must be positive");
}

ExperimentConfig config_from_json(std::string_view json_text) {
  ojson j;
  try {
    j = ojson::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("config is not valid JSON: ") + e.what());
  }
  require(j.is_object(), ErrorKind::format, "config must be a JSON object");
  ExperimentConfig cfg;
  auto paths = [](const ojson& v) {
    std::vector<fs::path> out;
    for (const auto& s : v) out.emplace_back(s.get<std::string>());
    return out;
  };
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "test_images") cfg.test_images = paths(v);
      else if (key == "train_images") cfg.train_images = paths(v);
      else if (key == "block_side") cfg.block_side = v.get<std::size_t>();
      else if (key == "overlap") cfg.overlap = v.get<std::size_t>();
      else if (key == "measurements") cfg.measurements = v.get<std::vector<std::size_t>>();
      else if (key == "trials") cfg.trials = v.get<std::size_t>();
      else if (key == "base_seed") cfg.base_seed = v.get<std::uint64_t>();
      else if (key == "matrix") cfg.matrix = parse_matrix_kind(v.get<std::string>());
      else if (key == "sigma") cfg.sigma = v.get<double>();
      else if (key == "method") cfg.method = parse_method(v.get<std::string>());
      else if (key == "model") cfg.model = v.get<std::string>();
      else if (key == "output_dir") cfg.output_dir = v.get<std::string>();
      else if (key == "k") cfg.k = v.get<std::size_t>();
      else if (key == "em_max_iters") cfg.em_max_iters = v.get<std::size_t>();
      else if (key == "em_tol") cfg.em_tol = v.get<double>();
      else if (key == "eps_reg") cfg.eps_reg = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
      else if (key == "init") cfg.init = parse_init(v.get<std::string>());
      else if (key == "max_train_patches") cfg.max_train_patches = v.get<std::size_t>();
      else if (key == "ista_lambda") cfg.ista.lambda = v.get<double>();
      else if (key == "ista_max_iters") cfg.ista.max_iters = v.get<std::size_t>();
      else if (key == "ista_tol") cfg.ista.tol = v.get<double>();
      else if (key == "fista") cfg.ista.accelerated = v.get<bool>();
      else if (key == "dictionary") cfg.dictionary = parse_dictionary_kind(v.get<std::string>());
      else if (key == "measurement_files") cfg.measurement_files = paths(v);
      else if (key == "results_csv") cfg.results_csv = v.get<std::string>();
      else if (key == "append_results") cfg.append_results = v.get<bool>();
      else if (key == "clamp_psnr") cfg.clamp_psnr = v.get<bool>();
      else if (key == "write_images") cfg.write_images = v.get<bool>();
      else if (key == "threads") cfg.threads = v.get<std::size_t>();
      else fail(ErrorKind::format, "unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("bad config value: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) { return config_from_json(detail::read_file(path)); }

std::string config_to_json(const ExperimentConfig& cfg) {
  ojson j;
  j["test_images"] = path_strings(cfg.test_images);
  j["train_images"] = path_strings(cfg.train_images);
  j["block_side"] = cfg.block_side;
  j["overlap"] = cfg.overlap;
  j["measurements"] = cfg.measurements;
  j["trials"] = cfg.trials;
  j["base_seed"] = cfg.base_seed;
  j["matrix"] = to_string(cfg.matrix);
  j["sigma"] = cfg.sigma;
  j["method"] = to_string(cfg.method);
  j["model"] = cfg.model.generic_string();
  j["output_dir"] = cfg.output_dir.generic_string();
  j["k"] = cfg.k;
  j["em_max_iters"] = cfg.em_max_iters;
  j["em_tol"] = cfg.em_tol;
  j["eps_reg"] = cfg.eps_reg ? ojson(*cfg.eps_reg) : ojson(nullptr);
  j["init"] = to_string(cfg.init);
  j["max_train_patches"] = cfg.max_train_patches;
  j["ista_lambda"] = cfg.ista.lambda;
  j["ista_max_iters"] = cfg.ista.max_iters;
  j["ista_tol"] = cfg.ista.tol;
  j["fista"] = cfg.ista.accelerated;
  j["dictionary"] = to_string(cfg.dictionary);
  j["measurement_files"] = path_strings(cfg.measurement_files);
  j["results_csv"] = cfg.results_csv.generic_string();
  j["append_results"] = cfg.append_results;
  j["clamp_psnr"] = cfg.clamp_psnr;
  j["write_images"] = cfg.write_images;
  j["threads"] = cfg.threads;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Results CSV

std::string format_result_row(const ResultRow& row) {
  require(row.image_id.find(',') == std::string::npos && row.method.find(',') == std::string::npos,
          ErrorKind::format, "image ids and method names must not contain commas");
  char times[64];
  std::snprintf(times, sizeof times, "%.6f,%.6f", row.recon_seconds, row.cache_seconds);
  return row.image_id + "," + row.method + "," + std::to_string(row.m) + "," + std::to_string(row.trial) + "," +
         std::to_string(row.seed) + "," + format_double(row.psnr_db) + "," + times;
}

namespace {

template <typename T>
T parse_number(std::string_view field, std::size_t line_number, const char* name) {
  T v{};
  if (field == "inf" || field == "+inf") {
    if constexpr (std::is_floating_point_v<T>) return std::numeric_limits<T>::infinity();
  }
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc{} || ptr != end || field.empty())
    fail(ErrorKind::format, "results line " + std::to_string(line_number) + ": bad " + name + " '" +
                                std::string(field) + "'");
  return v;
}

}  // namespace

ResultRow parse_result_row(std::string_view line, std::size_t line_number) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string_view> f;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    f.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (f.size() != 8)
    fail(ErrorKind::format, "results line " + std::to_string(line_number) + ": expected 8 fields, found " +
                                std::to_string(f.size()));
  ResultRow row;
  row.image_id = f[0];
  row.method = f[1];
  row.m = parse_number<std::size_t>(f[2], line_number, "M");
  row.trial = parse_number<std::size_t>(f[3], line_number, "trial");
  row.seed = parse_number<std::uint64_t>(f[4], line_number, "seed");
  row.psnr_db = parse_number<double>(f[5], line_number, "psnr_db");
  row.recon_seconds = parse_number<double>(f[6], line_number, "recon_seconds");
  row.cache_seconds = parse_number<double>(f[7], line_number, "cache_seconds");
  if (std::isnan(row.psnr_db) || row.recon_seconds < 0.0 || row.cache_seconds < 0.0)
    fail(ErrorKind::format, "results line " + std::to_string(line_number) + ": out-of-range value");
  return row;
}

std::vector<ResultRow> read_results(const fs::path& path) {
  std::istringstream in(detail::read_file(path));
  std::string line;
  std::vector<ResultRow> rows;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (n == 1) {
      if (line != kResultsHeader)
        fail(ErrorKind::format, "results line 1: unexpected header (expected '" + std::string(kResultsHeader) + "')");
      continue;
    }
    if (line.empty()) continue;
    rows.push_back(parse_result_row(line, n));
  }
  if (n == 0) fail(ErrorKind::format, path.string() + ": empty results file");
  return rows;
}

void write_results(const std::vector<ResultRow>& rows, const fs::path& path, bool append) {
  const bool add_header = !append || !fs::exists(path) || fs::file_size(path) == 0;
  std::string text;
  if (add_header) {
    text += kResultsHeader;
    text += '\n';
  }
  for (const auto& r : rows) text += format_result_row(r) + "\n";
  if (append && !add_header) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) fail(ErrorKind::io, "cannot append to " + path.string());
    out << text;
    return;
  }
  detail::write_file(path, text);
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  std::map<std::pair<std::string, std::size_t>, std::vector<double>> groups;
  for (const auto& r : rows) groups[{r.method, r.m}].push_back(r.psnr_db);
  std::vector<SummaryRow> out;
  for (const auto& [key, values] : groups) {
    SummaryRow s{key.first, key.second, values.size(), 0.0, 0.0};
    const auto infinite = std::count_if(values.begin(), values.end(), [](double v) { return std::isinf(v); });
    if (infinite > 0) {
      // Any lossless trial makes the mean infinite; spread is 0 only if all are.
      s.mean_psnr_db = kPsnrInfinite;
      s.std_psnr_db = infinite == static_cast<std::ptrdiff_t>(values.size()) ? 0.0 : kPsnrInfinite;
    } else {
      double sum = 0.0;
      for (double v : values) sum += v;
      s.mean_psnr_db = sum / static_cast<double>(values.size());
      double sq = 0.0;
      for (double v : values) sq += (v - s.mean_psnr_db) * (v - s.mean_psnr_db);
      s.std_psnr_db = std::sqrt(sq / static_cast<double>(values.size()));
    }
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

std::vector<fs::path> expand_images(const std::vector<fs::path>& entries) {
  std::vector<fs::path> out;
  for (const auto& e : entries) {
    if (fs::is_directory(e)) {
      std::vector<fs::path> found;
      for (const auto& de : fs::directory_iterator(e))
        if (de.is_regular_file() && de.path().extension() == ".pgm") found.push_back(de.path());
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(e)) {
      out.push_back(e);
    } else {
      fail(ErrorKind::io, "image path does not exist: " + e.string());
    }
  }
  return out;
}

BlockMatrix gather_training_patches(const ExperimentConfig& cfg) {
  const auto images = expand_images(cfg.train_images);
  require(!images.empty(), ErrorKind::usage, "no training images configured");
  const std::size_t stride = std::max<std::size_t>(1, cfg.block_side / 2);
  std::vector<BlockMatrix> parts;
  Eigen::Index total = 0;
  for (const auto& path : images) {
    parts.push_back(sample_patches(read_pgm(path), cfg.block_side, stride));
    total += parts.back().cols();
  }
  const auto p = static_cast<Eigen::Index>(cfg.block_side * cfg.block_side);
  BlockMatrix all(p, total);
  Eigen::Index at = 0;
  for (const auto& part : parts) {
    all.middleCols(at, part.cols()) = part;
    at += part.cols();
  }
  if (cfg.max_train_patches == 0 || static_cast<std::size_t>(total) <= cfg.max_train_patches) return all;

  Rng rng(derive_seed(cfg.base_seed, stream::training, 1));
  auto order = random_permutation(static_cast<std::size_t>(total), rng);
  order.resize(cfg.max_train_patches);
  std::sort(order.begin(), order.end());
  BlockMatrix subset(p, static_cast<Eigen::Index>(order.size()));
  for (std::size_t i = 0; i < order.size(); ++i)
    subset.col(static_cast<Eigen::Index>(i)) = all.col(static_cast<Eigen::Index>(order[i]));
  return subset;
}

namespace {

struct TrainedModel {
  GmmModel model;
  TrainingReport report;
  std::size_t patches = 0;
};

TrainedModel train_model(const ExperimentConfig& cfg) {
  const BlockMatrix patches = gather_training_patches(cfg);
  TrainingConfig tc;
  tc.k = cfg.k;
  tc.max_iters = cfg.em_max_iters;
  tc.tol = cfg.em_tol;
  tc.eps_reg = cfg.eps_reg;
  tc.seed = cfg.base_seed;
  tc.init = cfg.init;
  tc.threads = cfg.threads;
  TrainedModel out;
  out.patches = static_cast<std::size_t>(patches.cols());
  out.model = train_gmm(patches, tc, &out.report);

  ojson meta;
  meta["tool"] = std::string("blockcam ") + kVersion;
  meta["train_images"] = path_strings(cfg.train_images);
  meta["block_side"] = cfg.block_side;
  meta["patch_stride"] = std::max<std::size_t>(1, cfg.block_side / 2);
  meta["max_train_patches"] = cfg.max_train_patches;
  meta["n_patches"] = out.patches;
  meta["k"] = cfg.k;
  meta["em_max_iters"] = cfg.em_max_iters;
  meta["em_tol"] = cfg.em_tol;
  meta["eps_reg"] = cfg.eps_reg ? ojson(*cfg.eps_reg) : ojson(nullptr);
  meta["eps_reg_used"] = out.report.eps_reg;
  meta["init"] = to_string(cfg.init);
  meta["seed"] = cfg.base_seed;
  meta["iterations"] = out.report.iterations;
  meta["converged"] = out.report.converged;
  meta["final_log_likelihood"] = out.report.log_likelihood.back();
  out.model.metadata = meta.dump();
  return out;
}

ExperimentConfig training_config_from_metadata(const std::string& metadata) {
  const auto meta = ojson::parse(metadata);
  ExperimentConfig cfg;
  for (const auto& s : meta.at("train_images")) cfg.train_images.emplace_back(s.get<std::string>());
  cfg.block_side = meta.at("block_side").get<std::size_t>();
  cfg.max_train_patches = meta.at("max_train_patches").get<std::size_t>();
  cfg.k = meta.at("k").get<std::size_t>();
  cfg.em_max_iters = meta.at("em_max_iters").get<std::size_t>();
  cfg.em_tol = meta.at("em_tol").get<double>();
  if (!meta.at("eps_reg").is_null()) cfg.eps_reg = meta.at("eps_reg").get<double>();
  cfg.init = parse_init(meta.at("init").get<std::string>());
  cfg.base_seed = meta.at("seed").get<std::uint64_t>();
  return cfg;
}

}  // namespace

TrainOutcome cmd_train(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (!cfg.test_images.empty()) {
    std::set<fs::path> test;
    for (const auto& p : expand_images(cfg.test_images)) test.insert(fs::weakly_canonical(p));
    for (const auto& p : expand_images(cfg.train_images))
      if (test.count(fs::weakly_canonical(p)))
        log << "warning: training image " << p.string() << " is also a test image\n";
  }
  const auto t0 = std::chrono::steady_clock::now();
  auto trained = train_model(cfg);
  TrainOutcome out;
  out.model_path = cfg.resolved_model();
  out.report_path = out.model_path;
  out.report_path += ".report.json";
  save_model(trained.model, out.model_path);

  ojson rep = ojson::parse(trained.model.metadata);
  rep["log_likelihood"] = trained.report.log_likelihood;
  detail::write_file(out.report_path, rep.dump(2) + "\n");
  log << "trained K=" << cfg.k << " on " << trained.patches << " patches: " << trained.report.iterations
      << " EM iterations, mean log-likelihood " << trained.report.log_likelihood.back()
      << (trained.report.converged ? " (converged)" : " (iteration cap)") << " in " << seconds_since(t0) << " s\n"
      << "wrote " << out.model_path.string() << "\n";
  out.report = std::move(trained.report);
  return out;
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

MeasurementSet simulate_one(const Image& image, const BlockGrid& grid, MatrixKind kind, std::size_t m,
                            std::uint64_t seed, double sigma, std::size_t threads) {
  const auto a = make_sensing_matrix(kind, m, grid.block_dim(), seed);
  return sense(extract_blocks(image, grid), a, NoiseModel{sigma, seed}, threads);
}

fs::path measurement_name(const std::string& id, std::size_t m, std::size_t trial) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "_M%03zu_t%03zu.bcm", m, trial);
  return fs::path(id + buf);
}

}  // namespace

std::vector<fs::path> cmd_simulate(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto images = expand_images(cfg.test_images);
  require(!images.empty(), ErrorKind::usage, "no test images configured");
  const std::size_t p = cfg.block_side * cfg.block_side;
  for (auto m : cfg.measurements)
    if (m > p)
      fail(ErrorKind::dimension, "M=" + std::to_string(m) + " exceeds the block dimension P=" + std::to_string(p));

  std::vector<fs::path> written;
  for (const auto& path : images) {
    const Image image = read_pgm(path);
    const BlockGrid grid = BlockGrid::for_image(image.width(), image.height(), cfg.block_side, cfg.overlap);
    const std::string id = path.stem().string();
    for (auto m : cfg.measurements)
      for (std::size_t t = 0; t < cfg.trials; ++t) {
        const std::uint64_t seed = cfg.base_seed + t;
        MeasurementSet ms = simulate_one(image, grid, cfg.matrix, m, seed, cfg.sigma, cfg.threads);
        ms.grid = grid;
        ms.image_id = id;
        ms.source_image = path.generic_string();
        ms.trial = t;
        const fs::path out = cfg.measurements_dir() / measurement_name(id, m, t);
        write_measurements(ms, out);
        written.push_back(out);
      }
    log << "simulated " << id << ": " << grid.block_count() << " blocks of " << p << " pixels, "
        << cfg.measurements.size() * cfg.trials << " measurement sets\n";
  }
  return written;
}

// ---------------------------------------------------------------------------
// Reconstruction

namespace {

struct Reconstruction {
  Image image;
  ResultRow row;
  std::string provenance;
};

struct ReconstructContext {
  Method method = Method::gmm;
  const GmmModel* model = nullptr;
  fs::path model_path;
  DictionaryKind dictionary = DictionaryKind::dct2d;
  IstaConfig ista;
  bool clamp_psnr = false;
  std::size_t threads = 1;
  std::map<std::tuple<MatrixKind, std::uint64_t, std::size_t, std::size_t, double>, PosteriorCache> caches;
};

Reconstruction reconstruct_one(const fs::path& meas_path, ReconstructContext& ctx, std::ostream& log) {
  const MeasurementSet ms = read_measurements(meas_path);
  const Image reference = read_pgm(ms.source_image);
  if (ms.grid.image_width() != reference.width() || ms.grid.image_height() != reference.height())
    fail(ErrorKind::dimension, meas_path.string() + ": grid does not match the reference image");
  const auto a = make_sensing_matrix(ms.kind, ms.m(), ms.block_dim, ms.matrix_seed);

  Reconstruction out;
  out.row.image_id = ms.image_id;
  out.row.method = std::string(to_string(ctx.method));
  out.row.m = ms.m();
  out.row.trial = ms.trial;
  out.row.seed = ms.matrix_seed;

  ojson prov;
  prov["tool"] = std::string("blockcam ") + kVersion;
  prov["measurements"] = meas_path.generic_string();
  prov["method"] = to_string(ctx.method);
  prov["clamp_psnr"] = ctx.clamp_psnr;

  if (ctx.method == Method::gmm) {
    require(ctx.model != nullptr, ErrorKind::usage, "GMM reconstruction needs a model");
    const auto key = std::make_tuple(ms.kind, ms.matrix_seed, ms.m(), ms.block_dim, ms.noise.sigma);
    auto it = ctx.caches.find(key);
    if (it == ctx.caches.end())
      it = ctx.caches.emplace(key, build_cache(a, NoisePrecision::isotropic(ms.m(), ms.noise.sigma), *ctx.model)).first;
    ReconstructionTiming timing;
    out.image = reconstruct_image(ms, it->second, *ctx.model, ms.grid, ctx.threads, &timing);
    out.row.recon_seconds = timing.total_seconds;
    out.row.cache_seconds = it->second.build_seconds;
    prov["model"] = ctx.model_path.generic_string();
  } else {
    SparseReconstructionStats stats;
    out.image = reconstruct_image_sparse(ms, a, make_dictionary(ctx.dictionary, ms.block_dim), ctx.ista, ms.grid,
                                         ctx.threads, &stats);
    out.row.recon_seconds = stats.seconds;
    if (stats.unconverged_blocks > 0)
      log << "warning: " << meas_path.filename().string() << ": " << stats.unconverged_blocks
          << " blocks hit the ISTA iteration cap\n";
    prov["dictionary"] = to_string(ctx.dictionary);
    prov["ista"] = {{"lambda", ctx.ista.lambda},
                    {"max_iters", ctx.ista.max_iters},
                    {"tol", ctx.ista.tol},
                    {"fista", ctx.ista.accelerated}};
  }
  out.row.psnr_db = psnr(reference, ctx.clamp_psnr ? out.image.clamped() : out.image);
  out.provenance = prov.dump();
  return out;
}

std::vector<fs::path> list_measurement_files(const ExperimentConfig& cfg) {
  if (!cfg.measurement_files.empty()) return cfg.measurement_files;
  const auto dir = cfg.measurements_dir();
  if (!fs::is_directory(dir)) fail(ErrorKind::io, "measurement directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& de : fs::directory_iterator(dir))
    if (de.is_regular_file() && de.path().extension() == ".bcm") files.push_back(de.path());
  std::sort(files.begin(), files.end());
  require(!files.empty(), ErrorKind::io, "no measurement files in " + dir.string());
  return files;
}

}  // namespace

std::vector<ResultRow> cmd_reconstruct(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  ReconstructContext ctx;
  ctx.method = cfg.method;
  ctx.dictionary = cfg.dictionary;
  ctx.ista = cfg.ista;
  ctx.clamp_psnr = cfg.clamp_psnr;
  ctx.threads = cfg.threads;
  std::optional<GmmModel> model;
  if (cfg.method == Method::gmm) {
    ctx.model_path = cfg.resolved_model();
    model = load_model(ctx.model_path);
    ctx.model = &*model;
  }
  std::vector<ResultRow> rows;
  for (const auto& file : list_measurement_files(cfg)) {
    auto rec = reconstruct_one(file, ctx, log);
    if (cfg.write_images)
      write_pgm(rec.image,
                cfg.reconstructions_dir() / (file.stem().string() + "_" + rec.row.method + ".pgm"),
                rec.provenance);
    rows.push_back(std::move(rec.row));
  }
  const auto csv = cfg.resolved_results_csv();
  write_results(rows, csv, cfg.append_results);
  log << "reconstructed " << rows.size() << " measurement sets with " << to_string(cfg.method) << "; results in "
      << csv.string() << "\n";
  return rows;
}

// ---------------------------------------------------------------------------
// Report

ReportOutcome cmd_report(const fs::path& results_csv, const fs::path& output_dir, std::ostream& log) {
  const auto rows = read_results(results_csv);
  ReportOutcome out;
  out.summary = summarize(rows);
  out.summary_path = output_dir / "summary.csv";

  std::string text = "method,M,trials,mean_psnr_db,std_psnr_db\n";
  std::map<std::string, std::string> plots;
  for (const auto& s : out.summary) {
    text += s.method + "," + std::to_string(s.m) + "," + std::to_string(s.count) + "," + format_double(s.mean_psnr_db) +
            "," + format_double(s.std_psnr_db) + "\n";
    auto& plot = plots[s.method];
    if (plot.empty()) plot = "# M mean_psnr_db std_psnr_db\n";
    plot += std::to_string(s.m) + " " + format_double(s.mean_psnr_db) + " " + format_double(s.std_psnr_db) + "\n";
  }
  detail::write_file(out.summary_path, text);
  for (const auto& [method, plot] : plots) {
    const auto path = output_dir / ("plot_" + method + ".dat");
    detail::write_file(path, plot);
    out.plot_paths.push_back(path);
  }

  char buf[128];
  log << "method     M  trials  mean PSNR (dB)  std (dB)\n";
  for (const auto& s : out.summary) {
    std::snprintf(buf, sizeof buf, "%-8s %3zu  %6zu  %14.4f  %8.4f\n", s.method.c_str(), s.m, s.count, s.mean_psnr_db,
                  s.std_psnr_db);
    log << buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Verify

bool cmd_verify(const fs::path& file, std::ostream& log, std::size_t threads) {
  const std::string bytes = detail::read_file(file);
  std::string regenerated;
  std::string what;

  if (bytes.starts_with("P5")) {
    std::string comment;
    decode_pgm(bytes, file.string(), &comment);
    ojson prov;
    try {
      prov = ojson::parse(comment);
    } catch (const nlohmann::json::exception&) {
      fail(ErrorKind::format, file.string() + ": PGM carries no reconstruction metadata");
    }
    ReconstructContext ctx;
    ctx.method = parse_method(prov.at("method").get<std::string>());
    ctx.clamp_psnr = prov.value("clamp_psnr", false);
    ctx.threads = threads;
    std::optional<GmmModel> model;
    if (ctx.method == Method::gmm) {
      ctx.model_path = prov.at("model").get<std::string>();
      model = load_model(ctx.model_path);
      ctx.model = &*model;
    } else {
      ctx.dictionary = parse_dictionary_kind(prov.at("dictionary").get<std::string>());
      const auto& ista = prov.at("ista");
      ctx.ista.lambda = ista.at("lambda").get<double>();
      ctx.ista.max_iters = ista.at("max_iters").get<std::size_t>();
      ctx.ista.tol = ista.at("tol").get<double>();
      ctx.ista.accelerated = ista.at("fista").get<bool>();
    }
    auto rec = reconstruct_one(prov.at("measurements").get<std::string>(), ctx, log);
    regenerated = encode_pgm(rec.image, rec.provenance);
    what = "reconstruction";
  } else {
    const auto nl = bytes.find('\n');
    ojson header;
    try {
      header = ojson::parse(std::string_view(bytes).substr(0, nl));
    } catch (const nlohmann::json::exception&) {
      fail(ErrorKind::format, file.string() + ": unrecognized file type");
    }
    const std::string format = header.value("format", "");
    if (format == "blockcam.measurements") {
      const MeasurementSet ms = decode_measurements(bytes, file.string());
      const Image image = read_pgm(ms.source_image);
      MeasurementSet again =
          sense(extract_blocks(image, ms.grid), make_sensing_matrix(ms.kind, ms.m(), ms.block_dim, ms.matrix_seed),
                ms.noise, threads);
      again.grid = ms.grid;
      again.image_id = ms.image_id;
      again.source_image = ms.source_image;
      again.trial = ms.trial;
      regenerated = encode_measurements(again);
      what = "measurement set";
    } else if (format == "blockcam.gmm") {
      const GmmModel stored = decode_model(bytes, file.string());
      ExperimentConfig cfg = training_config_from_metadata(stored.metadata);
      cfg.threads = threads;
      regenerated = encode_model(train_model(cfg).model);
      what = "model";
    } else {
      fail(ErrorKind::format, file.string() + ": unrecognized file type");
    }
  }

  const bool same = regenerated == bytes;
  log << (same ? "OK: " : "MISMATCH: ") << what << " " << file.string()
      << (same ? " is reproduced byte-for-byte\n" : " differs from its regeneration\n");
  return same;
}

}  // namespace blockcam
