#include "lggp/priors.hpp"

#include <cmath>
#include <limits>

#include "lggp/stats.hpp"

namespace lggp {

void ProcessPrior::validate() const {
  if (!(mean_scale > 0.0) || !(noise_scale > 0.0) || !(signal_scale > 0.0) ||
      !(length_scale > 0.0)) {
    throw InvalidInput("prior scales must be positive");
  }
  if (length_bound < 0.0) {
    throw InvalidInput("length scale lower bound must be nonnegative");
  }
}

double hyperprior_logpdf(const ProcessPrior& prior, double mu,
                         const KernelParams& params) {
  double total = normal_logpdf(mu, prior.mean_loc, prior.mean_scale);
  total += half_normal_logpdf(params.noise_std, prior.noise_scale);
  total += half_normal_logpdf(params.signal_std, prior.signal_scale);
  for (Index d = 0; d < params.length_scales.size(); ++d) {
    total += truncated_normal_logpdf(params.length_scales[d], prior.length_loc,
                                     prior.length_scale, prior.length_bound);
  }
  return total;
}

Vector hyperprior_grad(const ProcessPrior& prior, double mu,
                       const KernelParams& params) {
  const Index dim = params.length_scales.size();
  Vector grad(3 + dim);
  grad[0] = -(mu - prior.mean_loc) / (prior.mean_scale * prior.mean_scale);
  grad[1] = -params.noise_std / (prior.noise_scale * prior.noise_scale);
  grad[2] = -params.signal_std / (prior.signal_scale * prior.signal_scale);
  for (Index d = 0; d < dim; ++d) {
    // The truncation normalizer does not depend on l.
    grad[3 + d] = -(params.length_scales[d] - prior.length_loc) /
                  (prior.length_scale * prior.length_scale);
  }
  return grad;
}

double prior_median_mean(const ProcessPrior& prior) { return prior.mean_loc; }

KernelParams prior_median_params(const ProcessPrior& prior, Index dim) {
  KernelParams params;
  params.mean = prior.mean_loc;
  params.noise_std = half_normal_median(prior.noise_scale);
  params.signal_std = half_normal_median(prior.signal_scale);
  params.length_scales = Vector::Constant(
      dim, truncated_normal_median(prior.length_loc, prior.length_scale,
                                   prior.length_bound));
  return params;
}

HyperDraw sample_hyper_prior(const ProcessPrior& prior, Index dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  HyperDraw draw;
  draw.mu = prior.mean_loc + prior.mean_scale * normal(rng);
  draw.params.mean = draw.mu;
  draw.params.noise_std = std::abs(prior.noise_scale * normal(rng));
  draw.params.signal_std = std::abs(prior.signal_scale * normal(rng));
  draw.params.length_scales = Vector(dim);
  for (Index d = 0; d < dim; ++d) {
    draw.params.length_scales[d] = truncated_normal_sample(
        rng, prior.length_loc, prior.length_scale, prior.length_bound);
  }
  return draw;
}

Index unconstrained_dim(Index dim) { return 3 + dim; }

Vector transform_to_unconstrained(double mu, const KernelParams& params,
                                  double length_bound) {
  const Index dim = params.length_scales.size();
  Vector u(3 + dim);
  u[0] = mu;
  if (!(params.noise_std > 0.0) || !(params.signal_std > 0.0)) {
    throw InvalidInput("stds must be positive for the log transform");
  }
  u[1] = std::log(params.noise_std);
  u[2] = std::log(params.signal_std);
  for (Index d = 0; d < dim; ++d) {
    const double excess = params.length_scales[d] - length_bound;
    if (!(excess > 0.0)) {
      throw InvalidInput("length scale must exceed its lower bound");
    }
    u[3 + d] = std::log(excess);
  }
  return u;
}

void transform_to_constrained(const Vector& u, double length_bound, double& mu,
                              KernelParams& params) {
  if (u.size() < 3) {
    throw InvalidInput("unconstrained hyper vector too short");
  }
  if (!u.allFinite()) {
    throw InvalidInput("unconstrained hyper vector must be finite");
  }
  mu = u[0];
  params.mean = mu;
  params.noise_std = std::exp(u[1]);
  params.signal_std = std::exp(u[2]);
  const Index dim = u.size() - 3;
  params.length_scales = Vector(dim);
  for (Index d = 0; d < dim; ++d) {
    params.length_scales[d] = length_bound + std::exp(u[3 + d]);
  }
}

double transform_log_jacobian(const Vector& u) {
  // d sigma / d u = sigma = e^u and d l / d u = e^u, so each transformed
  // coordinate contributes its own unconstrained value.
  return u.tail(u.size() - 1).sum();
}

}  // namespace lggp
