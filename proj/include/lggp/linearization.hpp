#ifndef LGGP_LINEARIZATION_HPP
#define LGGP_LINEARIZATION_HPP

#include <functional>
#include <vector>

#include "lggp/common.hpp"
#include "lggp/model.hpp"

namespace lggp {

// Gaussian approximation over the stacked (alpha, beta) vector of length 2K.
struct MomentState {
  Vector m;
  Matrix p;
  int iteration = 0;
};

// Affine observation map y ~ A z + b + N(0, Lambda), z = (alpha; beta).
struct SlrParams {
  Matrix a;       // K x 2K
  Vector b;       // K
  Matrix lambda;  // K x K
  double lambda_floor = 0.0;  // diagonal shift applied to floor Lambda at 0
};

// Joint draws of the latents and per-draw synthetic observations.
struct Ensemble {
  Matrix alpha;  // K x J
  Matrix beta;   // K x J
  Matrix y;      // K x J, strictly positive
  Index n_draws() const { return alpha.cols(); }
};

// Predicted observation moments with respect to a latent distribution.
struct MomentEstimates {
  Vector mu_plus;  // K
  Matrix p_yy;     // K x K
  Matrix p_xy;     // 2K x K
};

// Prior-mean initialization plus the Monte Carlo prior covariance estimate
// from J joint hyperparameter/GP/observation draws.
struct PlInit {
  MomentState moments;
  Ensemble ensemble;
};

PlInit init_prior_moments(const HyperPriorSpec& spec, const InputGrid& grid,
                          Index n_draws, Rng& rng);

// J joint draws from N(m, P) split into (alpha, beta), each paired with a
// gamma observation draw.
Ensemble simulate_ensemble(const MomentState& moments, Index n_draws, Rng& rng);

// Plain-average Monte Carlo estimators (divisor J); latent deviations are
// taken about m_prev, observation deviations about the ensemble mean.
MomentEstimates mc_moment_estimates(const Ensemble& ensemble,
                                    const Vector& m_prev);

SlrParams slr_from_moments(const MomentEstimates& est,
                           const MomentState& moments_prev);

// Measurement update anchored on the prior moments (m0, P0). When given,
// `s_jitter` receives the jitter applied to factorize the innovation
// covariance S.
MomentState pl_update(const MomentState& prior, const SlrParams& slr,
                      const Vector& y, double* s_jitter = nullptr);

struct PlIterationRecord {
  int iteration = 0;
  Vector m;
  Vector p_diag;
  double jitter_s = 0.0;       // applied to S inside the update
  double jitter_p = 0.0;       // needed to refactorize the posterior P
  double lambda_floor = 0.0;
};

struct PlOptions {
  int max_iterations = 5;
  bool early_stop = true;
  double tol = 1e-3;  // on the sup-norm change of m
};

struct PlResult {
  MomentState moments;
  std::vector<PlIterationRecord> history;
};

// Produces predicted-moment estimates for iteration t given the previous
// approximate posterior. Tests may inject exact (non-Monte-Carlo) moments.
using MomentBackend =
    std::function<MomentEstimates(int iteration, const MomentState& prev)>;

// Runs the recursion from explicit initial moments. Each iteration performs
// estimate -> regression -> update, always anchoring the update on `init`.
PlResult iterate_pl_from(const MomentState& init, const Vector& y,
                         const MomentBackend& backend, const PlOptions& options);

// Full pipeline: prior initialization, then Monte Carlo iterations with
// fresh J-member ensembles (the first iteration reuses the prior ensemble).
PlResult iterate_pl(const HyperPriorSpec& spec, const Dataset& data,
                    Index n_draws, Rng& rng, const PlOptions& options);

// Block views of the final joint moments.
struct MomentSplit {
  Vector m_alpha;
  Vector m_beta;
  Matrix p_alpha;
  Matrix p_beta;
  Matrix p_alpha_beta;  // cross block, alpha rows x beta cols
};

MomentSplit split_blocks(const MomentState& state);

}  // namespace lggp

#endif
