#ifndef LGGP_PRIORS_HPP
#define LGGP_PRIORS_HPP

#include "lggp/common.hpp"
#include "lggp/gp.hpp"

namespace lggp {

// Hyperparameter priors for one latent process: normal prior on the constant
// mean, half-normal priors on the noise and signal stds, and a lower-bounded
// truncated normal on each length scale.
struct ProcessPrior {
  double mean_loc = 0.0;      // gamma_mu
  double mean_scale = 1.0;    // rho_mu
  double noise_scale = 0.001;  // rho_sigma_e
  double signal_scale = 0.5;   // rho_sigma_s
  double length_loc = 0.1;     // gamma_l
  double length_scale = 0.2;   // rho_l
  double length_bound = 0.01;  // B

  void validate() const;
};

struct HyperPriorSpec {
  ProcessPrior alpha;
  ProcessPrior beta;

  void validate() const {
    alpha.validate();
    beta.validate();
  }
};

// Sum of the prior log-densities for (mu, theta) of one process. Returns
// -inf when a length scale sits below its bound.
double hyperprior_logpdf(const ProcessPrior& prior, double mu,
                         const KernelParams& params);

// d/d(mu, sigma_e, sigma_s, l_1..l_D) of hyperprior_logpdf, in constrained
// coordinates. Layout matches pack order: mu first, then theta.
Vector hyperprior_grad(const ProcessPrior& prior, double mu,
                       const KernelParams& params);

// Componentwise prior medians, used as sampler initial states.
double prior_median_mean(const ProcessPrior& prior);
KernelParams prior_median_params(const ProcessPrior& prior, Index dim);

// One joint draw of (mu, theta) from the prior.
struct HyperDraw {
  double mu;
  KernelParams params;
};
HyperDraw sample_hyper_prior(const ProcessPrior& prior, Index dim, Rng& rng);

// Unconstrained parameterization used by the samplers:
//   u = (mu, log sigma_e, log sigma_s, log(l_d - B) ...)
// Log transforms for the stds, shifted log for the bounded length scales.
Index unconstrained_dim(Index dim);

Vector transform_to_unconstrained(double mu, const KernelParams& params,
                                  double length_bound);

// Inverse of the above; throws on non-finite input.
void transform_to_constrained(const Vector& u, double length_bound, double& mu,
                              KernelParams& params);

// Sum of log |d constrained / d unconstrained| at u: one log-transform term
// per std and per length scale.
double transform_log_jacobian(const Vector& u);

}  // namespace lggp

#endif
