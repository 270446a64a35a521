#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "lggp/io.hpp"
#include "lggp/linearization.hpp"
#include "lggp/model.hpp"
#include "lggp/sampler.hpp"
#include "lggp/schemes.hpp"

namespace py = pybind11;
using namespace lggp;

namespace {

KernelParams make_params(double mean, double noise_std, double signal_std,
                         const Vector& length_scales) {
  KernelParams params;
  params.mean = mean;
  params.noise_std = noise_std;
  params.signal_std = signal_std;
  params.length_scales = length_scales;
  return params;
}

HmcConfig hmc_config_from_kwargs(int n_samples, int n_warmup,
                                 double target_accept, int max_tree_depth,
                                 const std::string& mass_matrix,
                                 std::uint64_t seed, double step_size) {
  HmcConfig config;
  config.n_samples = n_samples;
  config.n_warmup = n_warmup;
  config.target_accept = target_accept;
  config.max_tree_depth = max_tree_depth;
  config.mass_mode = mass_matrix == "identity" ? MassMatrixMode::kIdentity
                                               : MassMatrixMode::kDiagonalAdapted;
  config.seed = seed;
  config.initial_step_size = step_size;
  return config;
}

}  // namespace

PYBIND11_MODULE(_lggp, m) {
  m.doc() = "Log-Gaussian gamma process estimation core";

  py::register_exception<InvalidInput>(m, "InvalidInputError",
                                       PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalFailureError",
                                         PyExc_ArithmeticError);

  py::class_<InputGrid>(m, "InputGrid")
      .def(py::init<Matrix>(), py::arg("points"))
      .def_static("uniform_1d", &InputGrid::uniform_1d, py::arg("k"),
                  py::arg("lo") = 0.0, py::arg("hi") = 1.0)
      .def_property_readonly("points",
                             [](const InputGrid& g) { return g.points; })
      .def_property_readonly("k", &InputGrid::size)
      .def_property_readonly("d", &InputGrid::dim);

  py::class_<KernelParams>(m, "KernelParams")
      .def(py::init(&make_params), py::arg("mean"), py::arg("noise_std"),
           py::arg("signal_std"), py::arg("length_scales"))
      .def_readwrite("mean", &KernelParams::mean)
      .def_readwrite("noise_std", &KernelParams::noise_std)
      .def_readwrite("signal_std", &KernelParams::signal_std)
      .def_readwrite("length_scales", &KernelParams::length_scales);

  py::class_<ProcessPrior>(m, "ProcessPrior")
      .def(py::init<>())
      .def_readwrite("mean_loc", &ProcessPrior::mean_loc)
      .def_readwrite("mean_scale", &ProcessPrior::mean_scale)
      .def_readwrite("noise_scale", &ProcessPrior::noise_scale)
      .def_readwrite("signal_scale", &ProcessPrior::signal_scale)
      .def_readwrite("length_loc", &ProcessPrior::length_loc)
      .def_readwrite("length_scale", &ProcessPrior::length_scale)
      .def_readwrite("length_bound", &ProcessPrior::length_bound);

  py::class_<HyperPriorSpec>(m, "HyperPriorSpec")
      .def(py::init<>())
      .def_readwrite("alpha", &HyperPriorSpec::alpha)
      .def_readwrite("beta", &HyperPriorSpec::beta);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init([](const InputGrid& grid, const Vector& y) {
             Dataset data;
             data.grid = grid;
             data.y = y;
             data.validate();
             return data;
           }),
           py::arg("grid"), py::arg("y"))
      .def_readonly("grid", &Dataset::grid)
      .def_readonly("y", &Dataset::y);

  m.def("se_covariance", &se_covariance, py::arg("grid_a"), py::arg("grid_b"),
        py::arg("params"));
  m.def("add_noise_diag", &add_noise_diag, py::arg("cov"),
        py::arg("noise_std"));
  m.def(
      "gaussian_logpdf",
      [](const Vector& x, const Vector& mean, const Matrix& cov) {
        return gaussian_logpdf(x, mean, cov);
      },
      py::arg("x"), py::arg("mean"), py::arg("cov"));
  m.def(
      "gp_predict",
      [](const InputGrid& train, const InputGrid& test, const Vector& values,
         const KernelParams& params) {
        const auto pred = gp_predict(train, test, values, params);
        return py::make_tuple(pred.mean, pred.cov);
      },
      py::arg("train_grid"), py::arg("test_grid"), py::arg("latent_values"),
      py::arg("params"));

  m.def(
      "gamma_loglik",
      [](const Dataset& data, const Vector& alpha, const Vector& beta) {
        return gamma_loglik(data, LatentState{alpha, beta});
      },
      py::arg("data"), py::arg("alpha"), py::arg("beta"));
  m.def(
      "gamma_loglik_grad",
      [](const Dataset& data, const Vector& alpha, const Vector& beta) {
        const auto grad = gamma_loglik_grad(data, LatentState{alpha, beta});
        return py::make_tuple(grad.d_alpha, grad.d_beta);
      },
      py::arg("data"), py::arg("alpha"), py::arg("beta"));

  py::class_<LggpModel>(m, "Model")
      .def(py::init<Dataset, HyperPriorSpec>(), py::arg("data"),
           py::arg("priors"))
      .def_property_readonly("packed_dim", &LggpModel::packed_dim)
      .def("joint_logpost",
           py::overload_cast<const Vector&>(&LggpModel::joint_logpost,
                                            py::const_),
           py::arg("packed"))
      .def(
          "joint_target",
          [](const LggpModel& model, const Vector& packed, bool want_grad) {
            const auto eval = model.joint_target(packed, want_grad);
            return py::make_tuple(eval.value, eval.grad);
          },
          py::arg("packed"), py::arg("want_grad") = true)
      .def("tempered_logpost", &LggpModel::tempered_logpost, py::arg("packed"),
           py::arg("kappa"), py::arg("m_alpha"), py::arg("p_alpha"),
           py::arg("m_beta"), py::arg("p_beta"));

  py::class_<MomentState>(m, "MomentState")
      .def_readonly("m", &MomentState::m)
      .def_readonly("p", &MomentState::p)
      .def_readonly("iteration", &MomentState::iteration);

  m.def(
      "iterate_pl",
      [](const HyperPriorSpec& spec, const Dataset& data, Index ensemble_size,
         int iterations, double tol, bool early_stop, std::uint64_t seed) {
        PlOptions options;
        options.max_iterations = iterations;
        options.tol = tol;
        options.early_stop = early_stop;
        Rng rng = derive_rng(seed, 1);
        return iterate_pl(spec, data, ensemble_size, rng, options).moments;
      },
      py::arg("priors"), py::arg("data"), py::arg("ensemble_size") = 10000,
      py::arg("iterations") = 5, py::arg("tol") = 1e-3,
      py::arg("early_stop") = true, py::arg("seed") = 0);

  py::class_<QuantileSummary>(m, "QuantileSummary")
      .def_readonly("mean", &QuantileSummary::mean)
      .def_readonly("sd", &QuantileSummary::sd)
      .def_readonly("q05", &QuantileSummary::q05)
      .def_readonly("q50", &QuantileSummary::q50)
      .def_readonly("q95", &QuantileSummary::q95);

  py::class_<InferenceResult>(m, "InferenceResult")
      .def_readonly("mode", &InferenceResult::mode)
      .def_readonly("seed", &InferenceResult::seed)
      .def_readonly("alpha_summary", &InferenceResult::alpha_summary)
      .def_readonly("beta_summary", &InferenceResult::beta_summary)
      .def_readonly("predictive_summary", &InferenceResult::predictive_summary)
      .def_readonly("hyper_alpha_chain", &InferenceResult::hyper_alpha_chain)
      .def_readonly("hyper_beta_chain", &InferenceResult::hyper_beta_chain)
      .def_readonly("alpha_draws", &InferenceResult::alpha_draws)
      .def_readonly("beta_draws", &InferenceResult::beta_draws)
      .def_readonly("divergences", &InferenceResult::divergences)
      .def_property_readonly("wall_times", [](const InferenceResult& r) {
        py::dict times;
        times["linearization"] = r.timings.linearization;
        times["warmup"] = r.timings.warmup;
        times["sampling"] = r.timings.sampling;
        times["prediction"] = r.timings.prediction;
        times["total"] = r.timings.total();
        return times;
      });

  auto fit_options = [](Index ensemble_size, int pl_iterations, int n_samples,
                        int n_warmup, double target_accept,
                        const std::string& mass_matrix, Index n_predict_draws,
                        std::uint64_t seed) {
    FitOptions options;
    options.ensemble_size = ensemble_size;
    options.pl.max_iterations = pl_iterations;
    options.hmc = hmc_config_from_kwargs(n_samples, n_warmup, target_accept, 10,
                                         mass_matrix, seed, 0.1);
    options.n_predict_draws = n_predict_draws;
    options.seed = seed;
    return options;
  };

  m.def(
      "fit_direct_hmc",
      [fit_options](const Dataset& data, const HyperPriorSpec& spec,
                    int n_samples, int n_warmup, double target_accept,
                    const std::string& mass_matrix, Index n_predict_draws,
                    std::uint64_t seed) {
        return fit_direct_hmc(data, spec,
                              fit_options(10000, 5, n_samples, n_warmup,
                                          target_accept, mass_matrix,
                                          n_predict_draws, seed));
      },
      py::arg("data"), py::arg("priors"), py::arg("n_samples") = 1000,
      py::arg("n_warmup") = 1200, py::arg("target_accept") = 0.99,
      py::arg("mass_matrix") = "diagonal", py::arg("n_predict_draws") = 500,
      py::arg("seed") = 0);

  m.def(
      "fit_pl",
      [fit_options](const Dataset& data, const HyperPriorSpec& spec,
                    Index ensemble_size, int pl_iterations, int n_samples,
                    int n_warmup, double target_accept, Index n_predict_draws,
                    std::uint64_t seed) {
        return fit_pl_approx(data, spec,
                             fit_options(ensemble_size, pl_iterations,
                                         n_samples, n_warmup, target_accept,
                                         "diagonal", n_predict_draws, seed));
      },
      py::arg("data"), py::arg("priors"), py::arg("ensemble_size") = 10000,
      py::arg("pl_iterations") = 5, py::arg("n_samples") = 2000,
      py::arg("n_warmup") = 1000, py::arg("target_accept") = 0.99,
      py::arg("n_predict_draws") = 500, py::arg("seed") = 0);

  m.def(
      "fit_pl_tempered",
      [fit_options](const Dataset& data, const HyperPriorSpec& spec,
                    Index ensemble_size, int pl_iterations,
                    const std::vector<double>& kappas,
                    const std::vector<int>& samples,
                    const std::vector<int>& warmups, double target_accept,
                    Index n_predict_draws, std::uint64_t seed) {
        FitOptions options = fit_options(ensemble_size, pl_iterations, 1000,
                                         1000, target_accept, "diagonal",
                                         n_predict_draws, seed);
        if (kappas.size() != samples.size() ||
            kappas.size() != warmups.size()) {
          throw InvalidInput("schedule lists must share a length");
        }
        options.schedule.steps.clear();
        for (std::size_t i = 0; i < kappas.size(); ++i) {
          options.schedule.steps.push_back(
              {kappas[i], samples[i], warmups[i]});
        }
        return fit_pl_tempered(data, spec, options);
      },
      py::arg("data"), py::arg("priors"), py::arg("ensemble_size") = 10000,
      py::arg("pl_iterations") = 5,
      py::arg("kappas") = std::vector<double>{0.0, 0.5, 1.0},
      py::arg("samples") = std::vector<int>{1, 1, 1000},
      py::arg("warmups") = std::vector<int>{100, 100, 1000},
      py::arg("target_accept") = 0.99, py::arg("n_predict_draws") = 500,
      py::arg("seed") = 0);

  m.def(
      "predict",
      [](const InferenceResult& result, const Dataset& train,
         const InputGrid& test_grid, Index n_draws, std::uint64_t seed) {
        Rng rng = derive_rng(seed, 4);
        const auto latents =
            predict_latent(result, train, test_grid, n_draws, rng);
        const auto data = predict_data(latents, rng);
        return py::make_tuple(latents.alpha, latents.beta, data.y);
      },
      py::arg("result"), py::arg("train"), py::arg("test_grid"),
      py::arg("n_draws") = 500, py::arg("seed") = 0);

  m.def(
      "simulate_lggp",
      [](const InputGrid& grid, const KernelParams& theta_alpha,
         const KernelParams& theta_beta, std::uint64_t seed) {
        Rng rng = derive_rng(seed, 8);
        const auto sim = simulate_lggp(grid, theta_alpha, theta_beta, rng);
        return py::make_tuple(sim.data, sim.truth.alpha, sim.truth.beta);
      },
      py::arg("grid"), py::arg("theta_alpha"), py::arg("theta_beta"),
      py::arg("seed") = 0);

  m.def("preprocess_spectrum", &preprocess_spectrum, py::arg("raw_x"),
        py::arg("raw_y"), py::arg("cutoff"), py::arg("y_max_target") = 10.0);
  m.def("load_dataset", &load_dataset, py::arg("path"));
  m.def("save_dataset", &save_dataset, py::arg("path"), py::arg("data"));
}
