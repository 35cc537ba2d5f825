#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "blockcam/error.hpp"
#include "blockcam/gmm.hpp"
#include "blockcam/image.hpp"
#include "blockcam/inversion.hpp"
#include "blockcam/sensing.hpp"
#include "blockcam/sparse.hpp"
#include "blockcam/version.hpp"

namespace py = pybind11;
using namespace blockcam;

namespace {

using Array2d = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image to_image(const Array2d& a) {
  if (a.ndim() != 2) throw py::value_error("image must be a 2-D array");
  const auto h = static_cast<std::size_t>(a.shape(0)), w = static_cast<std::size_t>(a.shape(1));
  return Image(w, h, std::vector<double>(a.data(), a.data() + a.size()));
}

Array2d to_array(const Image& img) {
  Array2d out({img.height(), img.width()});
  std::copy(img.pixels().begin(), img.pixels().end(), out.mutable_data());
  return out;
}

BlockGrid grid_for(std::size_t width, std::size_t height, std::size_t block_side, std::size_t overlap) {
  return BlockGrid::for_image(width, height, block_side, overlap);
}

MeasurementSet measurement_set(const Eigen::MatrixXd& y, std::size_t p) {
  MeasurementSet ms;
  ms.data = y;
  ms.block_dim = p;
  return ms;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Block-wise compressive camera simulation and reconstruction";
  m.attr("__version__") = std::string(kVersion);

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
    }
  });

  m.def("read_pgm", [](const std::filesystem::path& path) { return to_array(read_pgm(path)); }, py::arg("path"),
        "Load a binary PGM as a float array in [0, 1], shape (height, width).");
  m.def("write_pgm",
        [](const Array2d& img, const std::filesystem::path& path, const std::string& comment) {
          write_pgm(to_image(img), path, comment);
        },
        py::arg("image"), py::arg("path"), py::arg("comment") = "");
  m.def("psnr", [](const Array2d& ref, const Array2d& cand, double peak) { return psnr(to_image(ref), to_image(cand), peak); },
        py::arg("reference"), py::arg("candidate"), py::arg("peak") = 1.0);

  m.def("extract_blocks",
        [](const Array2d& img, std::size_t block_side, std::size_t overlap) {
          const Image image = to_image(img);
          return extract_blocks(image, grid_for(image.width(), image.height(), block_side, overlap));
        },
        py::arg("image"), py::arg("block_side") = 8, py::arg("overlap") = 0,
        "Vectorized blocks as a (P, N_p) array, blocks and pixels in row-major order.");
  m.def("stitch_blocks",
        [](const Eigen::MatrixXd& blocks, std::size_t width, std::size_t height, std::size_t block_side,
           std::size_t overlap) { return to_array(stitch_blocks(blocks, grid_for(width, height, block_side, overlap))); },
        py::arg("blocks"), py::arg("width"), py::arg("height"), py::arg("block_side") = 8, py::arg("overlap") = 0);

  m.def("csr_to_measurements", &csr_to_measurements, py::arg("csr"), py::arg("p"));
  m.def("make_sensing_matrix",
        [](const std::string& kind, std::size_t rows, std::size_t p, std::uint64_t seed) {
          return make_sensing_matrix(parse_matrix_kind(kind), rows, p, seed).entries;
        },
        py::arg("kind"), py::arg("m"), py::arg("p"), py::arg("seed"),
        "0/1 pattern matrix; kind is 'random-binary' or 'permuted-hadamard'.");
  m.def("sense",
        [](const Eigen::MatrixXd& blocks, const Eigen::MatrixXd& a, double sigma, std::uint64_t noise_seed,
           std::size_t threads) {
          SensingMatrix sm{MatrixKind::random_binary, 0, a};
          return sense(blocks, sm, NoiseModel{sigma, noise_seed}, threads).data;
        },
        py::arg("blocks"), py::arg("a"), py::arg("sigma") = 0.0, py::arg("noise_seed") = 0, py::arg("threads") = 1);

  py::class_<GmmModel>(m, "GmmModel")
      .def(py::init([](const Eigen::VectorXd& w, const Eigen::MatrixXd& mu, const std::vector<Eigen::MatrixXd>& cov,
                       double eps_reg) {
             GmmModel g{w, mu, cov, eps_reg, "{}"};
             g.validate();
             return g;
           }),
           py::arg("weights"), py::arg("means"), py::arg("covariances"), py::arg("eps_reg") = 0.0)
      .def_readonly("weights", &GmmModel::weights)
      .def_readonly("means", &GmmModel::means)
      .def_readonly("covariances", &GmmModel::covariances)
      .def_readonly("eps_reg", &GmmModel::eps_reg)
      .def_readonly("metadata", &GmmModel::metadata)
      .def_property_readonly("k", &GmmModel::k)
      .def_property_readonly("p", &GmmModel::p)
      .def("log_likelihood",
           [](const GmmModel& g, const Eigen::MatrixXd& x, std::size_t threads) {
             return GmmEvaluator(g).log_likelihoods(x, nullptr, threads);
           },
           py::arg("patches"), py::arg("threads") = 1, "Log density of every column of a (P, N) array.")
      .def("__eq__", [](const GmmModel& a, const GmmModel& b) { return a == b; });

  m.def("train_gmm",
        [](const Eigen::MatrixXd& patches, std::size_t k, std::size_t max_iters, double tol,
           std::optional<double> eps_reg, std::uint64_t seed, const std::string& init, std::size_t threads) {
          TrainingConfig cfg;
          cfg.k = k;
          cfg.max_iters = max_iters;
          cfg.tol = tol;
          cfg.eps_reg = eps_reg;
          cfg.seed = seed;
          if (init == "kmeans") cfg.init = GmmInit::kmeans;
          else if (init == "random-responsibility") cfg.init = GmmInit::random_responsibility;
          else throw py::value_error("init must be 'kmeans' or 'random-responsibility'");
          cfg.threads = threads;
          TrainingReport rep;
          GmmModel model = train_gmm(patches, cfg, &rep);
          py::dict report;
          report["log_likelihood"] = rep.log_likelihood;
          report["iterations"] = rep.iterations;
          report["converged"] = rep.converged;
          report["eps_reg"] = rep.eps_reg;
          return py::make_tuple(std::move(model), report);
        },
        py::arg("patches"), py::arg("k") = 20, py::arg("max_iters") = 200, py::arg("tol") = 1e-6,
        py::arg("eps_reg") = py::none(), py::arg("seed") = 0, py::arg("init") = "kmeans", py::arg("threads") = 1,
        "EM training on a (P, N) patch array; returns (model, report).");
  m.def("save_model", &save_model, py::arg("model"), py::arg("path"));
  m.def("load_model", &load_model, py::arg("path"));

  py::class_<PosteriorCache>(m, "PosteriorCache")
      .def_readonly("k", &PosteriorCache::k)
      .def_readonly("m", &PosteriorCache::m)
      .def_readonly("p", &PosteriorCache::p)
      .def_readonly("posterior_covariance", &PosteriorCache::posterior_covariance)
      .def_readonly("build_seconds", &PosteriorCache::build_seconds);

  m.def("build_cache",
        [](const Eigen::MatrixXd& a, const GmmModel& model, double sigma) {
          return build_cache(a, NoisePrecision::isotropic(static_cast<std::size_t>(a.rows()), sigma), model);
        },
        py::arg("a"), py::arg("model"), py::arg("sigma") = 0.0,
        "Precompute per-component posterior factors for noise precision sigma^-2 I.");
  m.def("invert_blocks",
        [](const Eigen::MatrixXd& y, const PosteriorCache& cache, const GmmModel& model, std::size_t threads) {
          auto inv = invert_blocks(y, cache, model, threads);
          return py::make_tuple(std::move(inv.means), std::move(inv.responsibilities));
        },
        py::arg("y"), py::arg("cache"), py::arg("model"), py::arg("threads") = 1,
        "Posterior means (P, N_p) and responsibilities (K, N_p) of every measurement column.");
  m.def("reconstruct_image",
        [](const Eigen::MatrixXd& y, const PosteriorCache& cache, const GmmModel& model, std::size_t width,
           std::size_t height, std::size_t block_side, std::size_t overlap, std::size_t threads) {
          const auto grid = grid_for(width, height, block_side, overlap);
          return to_array(reconstruct_image(measurement_set(y, cache.p), cache, model, grid, threads));
        },
        py::arg("y"), py::arg("cache"), py::arg("model"), py::arg("width"), py::arg("height"),
        py::arg("block_side") = 8, py::arg("overlap") = 0, py::arg("threads") = 1);

  m.def("solve_sparse",
        [](const Eigen::VectorXd& y, const Eigen::MatrixXd& a, const std::string& dictionary, double lam,
           std::size_t max_iters, double tol, bool fista) {
          IstaConfig cfg;
          cfg.lambda = lam;
          cfg.max_iters = max_iters;
          cfg.tol = tol;
          cfg.accelerated = fista;
          auto sol = solve_block_sparse(y, a, make_dictionary(parse_dictionary_kind(dictionary), static_cast<std::size_t>(a.cols())), cfg);
          return py::make_tuple(std::move(sol.x), sol.iterations, sol.converged);
        },
        py::arg("y"), py::arg("a"), py::arg("dictionary") = "dct2d", py::arg("lam") = 0.01, py::arg("max_iters") = 500,
        py::arg("tol") = 1e-6, py::arg("fista") = false,
        "(F)ISTA for one measurement vector; returns (x, iterations, converged).");
}
