#ifndef LGGP_SCHEMES_HPP
#define LGGP_SCHEMES_HPP

#include <string>
#include <vector>

#include "lggp/linearization.hpp"
#include "lggp/model.hpp"
#include "lggp/sampler.hpp"

namespace lggp {

// Chain presets used in the experiments.
HmcConfig long_chain_config();   // 20000 draws, 10000 tuning steps
HmcConfig short_chain_config();  // 1000 draws, 1200 tuning steps

struct TemperStep {
  double kappa = 0.0;
  int n_samples = 1;
  int n_warmup = 100;
};

// Strictly increasing kappa sequence running from exactly 0 to exactly 1.
struct TemperSchedule {
  std::vector<TemperStep> steps;

  void validate() const;
  // kappa = (0, 1/2, 1) with 100/100/1000 tuning steps and 1000 final draws.
  static TemperSchedule default_schedule();
};

struct QuantileSummary {
  Vector mean;
  Vector sd;
  Vector q05;
  Vector q50;
  Vector q95;
};

// Column-wise summary of a draws matrix.
QuantileSummary summarize_draws(const Matrix& draws);

struct PhaseTimings {
  double linearization = 0.0;
  double warmup = 0.0;
  double sampling = 0.0;
  double prediction = 0.0;
  double total() const {
    return linearization + warmup + sampling + prediction;
  }
};

struct InferenceResult {
  std::string mode;
  InputGrid grid;  // observation locations the summaries refer to
  Index n_points = 0;
  Index dim = 0;
  std::uint64_t seed = 0;

  QuantileSummary alpha_summary;
  QuantileSummary beta_summary;
  QuantileSummary predictive_summary;

  // Constrained hyperparameter draws, columns (mu, sigma_e, sigma_s, l_1..l_D).
  Matrix hyper_alpha_chain;
  Matrix hyper_beta_chain;

  // Retained latent draws (rows = draws); empty in the approximate mode,
  // which carries the linearization moments instead.
  Matrix alpha_draws;
  Matrix beta_draws;
  bool has_moments = false;
  MomentState moments;
  std::vector<PlIterationRecord> pl_history;

  int divergences = 0;
  PhaseTimings timings;
};

std::vector<std::string> hyper_column_names(Index dim);

struct FitOptions {
  Index ensemble_size = 10000;  // J
  PlOptions pl;                 // T, early stop
  HmcConfig hmc;                // chain settings (per-step counts come from the schedule in tempered mode)
  TemperSchedule schedule = TemperSchedule::default_schedule();
  Index n_predict_draws = 1000;
  std::uint64_t seed = 0;
};

// Direct NUTS over the full posterior; `mode_tag` distinguishes the long
// and short chain presets in the outputs.
InferenceResult fit_direct_hmc(const Dataset& data, const HyperPriorSpec& spec,
                               const FitOptions& options,
                               const std::string& mode_tag = "hmc");

// Iterated posterior linearization followed by NUTS on the surrogate
// hyperparameter posteriors of each process; latent posterior approximated
// by N(m^(T), P^(T)).
InferenceResult fit_pl_approx(const Dataset& data, const HyperPriorSpec& spec,
                              const FitOptions& options);

// Iterated posterior linearization followed by NUTS through the tempered
// sequence; only the final (kappa = 1) draws are retained.
InferenceResult fit_pl_tempered(const Dataset& data, const HyperPriorSpec& spec,
                                const FitOptions& options);

struct LatentPrediction {
  Matrix alpha;  // n_draws x K*
  Matrix beta;   // n_draws x K*
};

// Predictive draws of the latent processes at new locations. Modes with
// retained draws use per-draw hyperparameters; the approximate mode uses
// posterior-mean hyperparameters and precomputed predictive covariances.
LatentPrediction predict_latent(const InferenceResult& result,
                                const Dataset& train_data,
                                const InputGrid& test_grid, Index n_draws,
                                Rng& rng);

struct DataPrediction {
  Matrix y;  // n_draws x K*
  QuantileSummary summary;
};

// Gamma observation draws per latent predictive draw.
DataPrediction predict_data(const LatentPrediction& latents, Rng& rng);

struct SimulationResult {
  Dataset data;
  LatentState truth;
};

// Draws latent fields from their GPs and observations from the gamma model.
// The `mean` members of the kernel parameter structs act as mu.
SimulationResult simulate_lggp(const InputGrid& grid,
                               const KernelParams& theta_alpha,
                               const KernelParams& theta_beta, Rng& rng);

// Observations for externally supplied latent fields.
Dataset simulate_from_latents(const InputGrid& grid, const LatentState& truth,
                              Rng& rng);

}  // namespace lggp

#endif
