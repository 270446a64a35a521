#ifndef LGGP_SAMPLER_HPP
#define LGGP_SAMPLER_HPP

#include <functional>
#include <utility>
#include <vector>

#include "lggp/common.hpp"

namespace lggp {

enum class MassMatrixMode { kIdentity, kDiagonalAdapted };

struct HmcConfig {
  int n_samples = 1000;
  int n_warmup = 1000;
  double target_accept = 0.9;
  int max_tree_depth = 10;
  MassMatrixMode mass_mode = MassMatrixMode::kDiagonalAdapted;
  std::uint64_t seed = 0;
  double initial_step_size = 0.1;

  void validate() const;
};

// Differentiable log-density the sampler targets. `eval` returns the log
// density and, when requested, its gradient.
struct TargetFn {
  Index dim = 0;
  std::function<std::pair<double, Vector>(const Vector&, bool want_grad)> eval;
  Vector initial_position;

  double log_density(const Vector& q) const { return eval(q, false).first; }
};

// Position/momentum pair with the cached density and gradient at q.
struct PhasePoint {
  Vector q;
  Vector p;
  Vector grad;
  double logp = 0.0;
};

// One half-kick / drift / half-kick step. A non-finite density or gradient
// at the new position is reported through the returned flag, not thrown.
struct LeapfrogResult {
  PhasePoint point;
  bool finite = true;
};

LeapfrogResult leapfrog(const TargetFn& target, const PhasePoint& start,
                        double step_size, const Vector& inv_mass_diag);

// Nesterov dual averaging on log(step size) toward a target acceptance
// statistic; parameters follow the NUTS reference settings.
class DualAveraging {
 public:
  DualAveraging(double initial_step, double target_accept);

  void update(double accept_stat);
  double current() const { return step_; }
  double averaged() const { return averaged_step_; }
  void restart(double initial_step);

 private:
  double target_;
  double mu_;
  double step_;
  double averaged_step_;
  double h_bar_ = 0.0;
  long iteration_ = 0;
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;
};

struct NutsStats {
  double accept_stat = 0.0;  // mean Metropolis acceptance over the trajectory
  int tree_depth = 0;
  bool divergent = false;
  double energy = 0.0;
};

// One multinomial NUTS transition: doubling trajectory until the U-turn
// criterion, the depth cap, or a divergence (energy error above 1000).
PhasePoint nuts_draw(const TargetFn& target, const PhasePoint& current,
                     double step_size, const Vector& inv_mass_diag, Rng& rng,
                     int max_tree_depth, NutsStats& stats);

struct Chain {
  Matrix draws;                     // n_samples x dim
  std::vector<double> accept_stats;  // per retained draw
  std::vector<double> step_sizes;    // warmup trajectory + frozen value
  Vector inv_mass_diag;
  int divergences = 0;  // during sampling
  double final_step_size = 0.0;
  double warmup_seconds = 0.0;
  double sampling_seconds = 0.0;
  double wall_seconds = 0.0;
};

// Warmup (step-size adaptation, diagonal mass adaptation from the second
// warmup quarter when enabled and the warmup is long enough) followed by
// n_samples retained draws. Fixed seed gives bit-identical output.
Chain run_chain(const TargetFn& target, const HmcConfig& config, Rng& rng);

inline Chain run_chain(const TargetFn& target, const HmcConfig& config) {
  Rng rng = derive_rng(config.seed, 0x6e757473ull);
  return run_chain(target, config, rng);
}

// Single-chain effective sample size from the autocorrelation sequence with
// Geyer's initial monotone positive truncation.
double effective_sample_size(const Vector& series);

}  // namespace lggp

#endif
