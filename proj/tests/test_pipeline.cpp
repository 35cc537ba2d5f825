#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "blockcam/gmm.hpp"
#include "blockcam/image.hpp"
#include "blockcam/pipeline.hpp"
#include "blockcam/rng.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace blockcam;
using testutil::kind_of;
namespace fs = std::filesystem;

namespace {

// Smooth random texture so a small GMM has something to learn.
Image texture(std::size_t w, std::size_t h, std::uint64_t seed) {
  Rng rng(seed);
  const double fx = 0.1 + 0.3 * rng.uniform(), fy = 0.1 + 0.3 * rng.uniform(), ph = 6.0 * rng.uniform();
  Image img(w, h);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c)
      img(r, c) = 0.5 + 0.3 * std::sin(fx * static_cast<double>(c) + fy * static_cast<double>(r) + ph) +
                  0.05 * rng.uniform();
  return img;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Workspace {
  testutil::TempDir dir;
  ExperimentConfig cfg;

  explicit Workspace(const std::string& name) : dir(name) {
    fs::create_directories(dir.path() / "train");
    for (int i = 0; i < 3; ++i)
      write_pgm(texture(32, 32, static_cast<std::uint64_t>(i)), dir.path() / "train" / ("t" + std::to_string(i) + ".pgm"));
    write_pgm(texture(24, 16, 99), dir.path() / "scene.pgm");
    cfg.train_images = {dir.path() / "train"};
    cfg.test_images = {dir.path() / "scene.pgm"};
    cfg.output_dir = dir.path() / "out";
    cfg.k = 2;
    cfg.em_max_iters = 10;
    cfg.measurements = {2, 4};
    cfg.trials = 2;
    cfg.base_seed = 5;
  }
};

}  // namespace

TEST_CASE("result rows round-trip") {
  ResultRow row{"camera", "gmm", 7, 3, 12, 24.5, 0.25, 0.0031};
  const std::string line = format_result_row(row);
  CHECK(line == "camera,gmm,7,3,12,24.5,0.250000,0.003100");
  auto back = parse_result_row(line, 2);
  CHECK(back == row);
  row.psnr_db = 24.123456789012345;
  back = parse_result_row(format_result_row(row), 2);
  CHECK(back.psnr_db == row.psnr_db);
  CHECK(back.m == 7);
  row.psnr_db = kPsnrInfinite;
  CHECK(parse_result_row(format_result_row(row), 2).psnr_db == kPsnrInfinite);

  try {
    parse_result_row("camera,gmm,x,3,12,1,0,0", 17);
    FAIL("expected a format error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::format);
    CHECK(std::string(e.what()).find("line 17") != std::string::npos);
  }
  CHECK(kind_of([] { parse_result_row("a,b,1,2", 3); }) == ErrorKind::format);
  CHECK(kind_of([] { format_result_row(ResultRow{"a,b", "gmm"}); }) == ErrorKind::format);
}

TEST_CASE("summary statistics") {
  std::vector<ResultRow> rows;
  for (double v : {20.0, 22.0, 24.0}) rows.push_back({"x", "gmm", 2, 0, 0, v});
  rows.push_back({"x", "gmm", 1, 0, 0, 10.0});
  rows.push_back({"x", "ista", 1, 0, 0, kPsnrInfinite});
  rows.push_back({"x", "ista", 1, 1, 0, kPsnrInfinite});
  rows.push_back({"x", "ista", 2, 0, 0, kPsnrInfinite});
  rows.push_back({"x", "ista", 2, 1, 0, 30.0});
  const auto s = summarize(rows);
  REQUIRE(s.size() == 4);
  CHECK(s[0].method == "gmm");
  CHECK(s[0].m == 1);
  CHECK(s[1].mean_psnr_db == 22.0);
  CHECK(s[1].std_psnr_db == doctest::Approx(std::sqrt(8.0 / 3.0)));
  CHECK(s[1].count == 3);
  CHECK(s[2].mean_psnr_db == kPsnrInfinite);
  CHECK(s[2].std_psnr_db == 0.0);
  CHECK(s[3].mean_psnr_db == kPsnrInfinite);
  CHECK(s[3].std_psnr_db == kPsnrInfinite);
}

TEST_CASE("results file write, append and read") {
  testutil::TempDir dir("results");
  const auto path = dir.path() / "r.csv";
  write_results({{"a", "gmm", 1, 0, 0, 1.5}}, path, false);
  write_results({{"b", "gmm", 2, 0, 0, 2.5}}, path, true);
  auto rows = read_results(path);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].image_id == "b");
  write_results({{"c", "gmm", 2, 0, 0, 2.5}}, path, false);
  CHECK(read_results(path).size() == 1);

  std::ofstream(dir.path() / "bad.csv") << "nope\n";
  CHECK(kind_of([&] { read_results(dir.path() / "bad.csv"); }) == ErrorKind::format);
  CHECK(kind_of([&] { read_results(dir.path() / "missing.csv"); }) == ErrorKind::io);
}

TEST_CASE("config JSON round trip and unknown keys") {
  ExperimentConfig cfg;
  cfg.test_images = {"a.pgm"};
  cfg.measurements = {3, 6};
  cfg.sigma = 0.01;
  cfg.matrix = MatrixKind::permuted_hadamard;
  cfg.method = Method::ista;
  cfg.eps_reg = 1e-5;
  cfg.ista.accelerated = true;
  const auto back = config_from_json(config_to_json(cfg));
  CHECK(config_to_json(back) == config_to_json(cfg));
  CHECK(back.measurements == cfg.measurements);
  CHECK(back.eps_reg == 1e-5);
  CHECK(kind_of([] { config_from_json(R"({"bogus": 1})"); }) == ErrorKind::format);
  CHECK(kind_of([] { config_from_json(R"({"trials": "many"})"); }) == ErrorKind::format);
  CHECK(kind_of([] { config_from_json("[1"); }) == ErrorKind::format);
  CHECK(kind_of([] { config_from_json(R"({"method": "magic"})"); }) == ErrorKind::usage);
}

TEST_CASE("output directory falls back to the environment") {
  ExperimentConfig cfg;
  ::setenv(kOutputDirEnv, "/tmp/blockcam-env-out", 1);
  CHECK(cfg.resolved_output_dir() == fs::path("/tmp/blockcam-env-out"));
  CHECK(cfg.resolved_model() == fs::path("/tmp/blockcam-env-out/model.bcgmm"));
  ::unsetenv(kOutputDirEnv);
  CHECK(cfg.resolved_output_dir() == fs::path("blockcam-out"));
  cfg.output_dir = "x";
  CHECK(cfg.resolved_results_csv() == fs::path("x/results.csv"));
}

TEST_CASE("training patch gathering") {
  Workspace ws("patches");
  CHECK(gather_training_patches(ws.cfg).cols() == 3 * 7 * 7);
  ws.cfg.max_train_patches = 50;
  const auto sub = gather_training_patches(ws.cfg);
  CHECK(sub.cols() == 50);
  CHECK(gather_training_patches(ws.cfg) == sub);
  CHECK(expand_images({ws.dir.path() / "train"}).size() == 3);
  CHECK(kind_of([&] { expand_images({ws.dir.path() / "nothing"}); }) == ErrorKind::io);
}

TEST_CASE("end-to-end train, simulate, reconstruct, report and verify") {
  Workspace ws("flow");
  std::ostringstream log;
  const auto trained = cmd_train(ws.cfg, log);
  CHECK(fs::exists(trained.model_path));
  CHECK(fs::exists(trained.report_path));
  const std::string model_bytes = slurp(trained.model_path);
  cmd_train(ws.cfg, log);
  CHECK(slurp(trained.model_path) == model_bytes);

  const auto files = cmd_simulate(ws.cfg, log);
  CHECK(files.size() == 4);
  CHECK(files[0].filename() == "scene_M002_t000.bcm");
  const std::string meas = slurp(files[0]);
  cmd_simulate(ws.cfg, log);
  CHECK(slurp(files[0]) == meas);
  const auto ms = read_measurements(files[0]);
  CHECK(ms.matrix_seed == 5);
  CHECK(ms.noise.seed == 5);
  CHECK(read_measurements(files[1]).matrix_seed == 6);

  const auto rows = cmd_reconstruct(ws.cfg, log);
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    CHECK(r.method == "gmm");
    CHECK(std::isfinite(r.psnr_db));
  }
  CHECK(read_results(ws.cfg.resolved_results_csv()).size() == 4);

  ws.cfg.method = Method::ista;
  ws.cfg.ista.max_iters = 50;
  ws.cfg.append_results = true;
  const auto ista_rows = cmd_reconstruct(ws.cfg, log);
  CHECK(ista_rows.size() == 4);
  CHECK(ista_rows[0].method == "ista");
  CHECK(read_results(ws.cfg.resolved_results_csv()).size() == 8);

  const auto rep = cmd_report(ws.cfg.resolved_results_csv(), ws.cfg.resolved_output_dir(), log);
  CHECK(rep.summary.size() == 4);
  CHECK(rep.plot_paths.size() == 2);
  CHECK(fs::exists(rep.summary_path));

  const auto recon = ws.cfg.reconstructions_dir() / "scene_M004_t001_gmm.pgm";
  REQUIRE(fs::exists(recon));
  std::ostringstream vlog;
  CHECK(cmd_verify(files[0], vlog));
  CHECK(cmd_verify(recon, vlog));
  CHECK(cmd_verify(ws.cfg.reconstructions_dir() / "scene_M002_t000_ista.pgm", vlog));
  CHECK(cmd_verify(trained.model_path, vlog));

  std::string tampered = slurp(recon);
  tampered.back() = static_cast<char>(tampered.back() ^ 0x10);
  std::ofstream(recon, std::ios::binary) << tampered;
  CHECK_FALSE(cmd_verify(recon, vlog));
  CHECK(vlog.str().find("MISMATCH") != std::string::npos);

  std::ofstream(ws.dir.path() / "junk.bin") << "hello\n";
  CHECK(kind_of([&] { cmd_verify(ws.dir.path() / "junk.bin", vlog); }) == ErrorKind::format);
  CHECK(kind_of([&] { cmd_verify(ws.dir.path() / "absent.bcm", vlog); }) == ErrorKind::io);
}

TEST_CASE("a flat test image is reconstructed losslessly with a full Hadamard matrix") {
  Workspace ws("lossless");
  write_pgm(Image(16, 16, 0.0), ws.dir.path() / "flat.pgm");
  ws.cfg.test_images = {ws.dir.path() / "flat.pgm"};
  ws.cfg.measurements = {64};
  ws.cfg.trials = 1;
  ws.cfg.matrix = MatrixKind::permuted_hadamard;
  std::ostringstream log;
  cmd_train(ws.cfg, log);
  cmd_simulate(ws.cfg, log);
  ws.cfg.clamp_psnr = true;
  const auto rows = cmd_reconstruct(ws.cfg, log);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].psnr_db > 80.0);
}

TEST_CASE("pipeline error paths") {
  Workspace ws("errors");
  std::ostringstream log;
  ws.cfg.measurements = {65};
  CHECK(kind_of([&] { cmd_simulate(ws.cfg, log); }) == ErrorKind::dimension);
  ws.cfg.measurements = {2};
  ws.cfg.k = 100000;
  CHECK(kind_of([&] { cmd_train(ws.cfg, log); }) == ErrorKind::insufficient_data);
  ws.cfg.k = 2;
  CHECK(kind_of([&] { cmd_reconstruct(ws.cfg, log); }) == ErrorKind::io);
  ws.cfg.trials = 0;
  CHECK(kind_of([&] { cmd_simulate(ws.cfg, log); }) == ErrorKind::usage);
}

TEST_CASE("train/test overlap is reported") {
  Workspace ws("overlap");
  ws.cfg.test_images = {ws.dir.path() / "train" / "t0.pgm"};
  std::ostringstream log;
  cmd_train(ws.cfg, log);
  CHECK(log.str().find("also a test image") != std::string::npos);
}
