#ifndef LGGP_IO_HPP
#define LGGP_IO_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lggp/sampler.hpp"
#include "lggp/schemes.hpp"

namespace lggp {

// CSV with header x_1,...,x_D,y and one observation per row. Full parse
// errors carry the offending line number.
Dataset load_dataset(const std::filesystem::path& path);

void save_dataset(const std::filesystem::path& path, const Dataset& data);

// Truncates the spectrum at `cutoff` (keeping x <= cutoff), rescales the
// intensities so max{y} = y_max_target, and maps x affinely onto [0, 1].
Dataset preprocess_spectrum(const Vector& raw_x, const Vector& raw_y,
                            double cutoff, double y_max_target = 10.0);

// Whitespace-separated single-column numeric file (one value per line).
Vector load_vector(const std::filesystem::path& path);

enum class RunMode {
  kSimulate,
  kFitHmc,
  kFitHmcShort,
  kFitPl,
  kFitPlTempered,
  kPredict,
};

std::string run_mode_name(RunMode mode);
std::optional<RunMode> parse_run_mode(const std::string& name);

// Flat key-value run configuration; unknown keys are rejected at parse time.
struct RunConfig {
  RunMode mode = RunMode::kFitPl;
  std::filesystem::path dataset_path;
  std::filesystem::path output_dir = ".";
  std::uint64_t seed = 0;
  int workers = 1;

  HyperPriorSpec priors;  // defaults follow the synthetic preset

  Index ensemble_size = 10000;
  PlOptions pl;
  HmcConfig hmc;  // n_samples/n_warmup are preset per mode unless overridden
  bool chain_counts_overridden = false;
  TemperSchedule schedule = TemperSchedule::default_schedule();
  Index n_predict_draws = 1000;

  // Spectrum preprocessing (applied after loading when enabled).
  bool preprocess = false;
  double cutoff = 600.0;
  double y_max_target = 10.0;

  // Simulation inputs.
  Index sim_n_points = 128;
  KernelParams sim_alpha;  // mean acts as mu
  KernelParams sim_beta;
  std::filesystem::path mean_vector_path;  // switches to the scaled preset
  double rate_constant = 1000.0;

  // Prediction inputs.
  std::filesystem::path fit_dir;
  std::filesystem::path test_grid_path;  // CSV of x columns; empty = uniform
  Index n_test = 0;                      // used when no test grid file given

  RunConfig();
  void validate() const;

  // Canonical key-value echo; parsing the echo reproduces this config.
  std::map<std::string, std::string> echo() const;
};

// Parses `key = value` lines (with # comments). Unknown keys or malformed
// values raise ParseError/InvalidInput.
RunConfig parse_config_file(const std::filesystem::path& path);
void apply_config_entry(RunConfig& config, const std::string& key,
                        const std::string& value);

// Writes summary.json, latent/predictive quantile CSVs, hyper_chains.csv,
// and the state files used by the predict mode. Returns the written paths.
std::vector<std::filesystem::path> export_results(
    const InferenceResult& result,
    const std::map<std::string, std::string>& config_echo,
    const std::filesystem::path& dir);

// Chain export for generic sampler runs: draws + per-draw stats as CSV and
// a diagnostics summary (mean, sd, quantiles, divergences) as JSON.
void export_chain_csv(const Chain& chain, const std::filesystem::path& path);
void export_chain_diagnostics(const Chain& chain,
                              const std::filesystem::path& path);

void export_pl_trace(const std::vector<PlIterationRecord>& history,
                     const std::filesystem::path& path);

// Dispatches a validated configuration: loads inputs, runs the requested
// scheme, exports outputs. Partial outputs are removed on failure.
// Returns 0 on success, 1 on runtime failure, 2 on usage/config errors.
int run(const RunConfig& config);

// 17-significant-digit formatting used for all CSV output, chosen so that
// write -> parse round trips are exact.
std::string format_full(double value);

}  // namespace lggp

#endif
