#ifndef LGGP_MODEL_HPP
#define LGGP_MODEL_HPP

#include <vector>

#include "lggp/common.hpp"
#include "lggp/gp.hpp"
#include "lggp/priors.hpp"

namespace lggp {

// Strictly positive observations on a grid.
struct Dataset {
  InputGrid grid;
  Vector y;

  void validate() const;
  Index size() const { return y.size(); }
};

// Log-shape and log-rate values at the K observation locations.
struct LatentState {
  Vector alpha;
  Vector beta;
};

// sum_k [ a_k beta_k - lgamma(a_k) + (a_k - 1) log y_k - b_k y_k ],
// a_k = exp(alpha_k), b_k = exp(beta_k). Rate parameterization: the gamma
// density is b^a y^{a-1} exp(-b y) / Gamma(a).
double gamma_loglik(const Dataset& data, const LatentState& state);

struct GammaGrad {
  Vector d_alpha;
  Vector d_beta;
};

// d/d alpha_k = a_k (beta_k - digamma(a_k) + log y_k)
// d/d beta_k  = a_k - b_k y_k
GammaGrad gamma_loglik_grad(const Dataset& data, const LatentState& state);

// Gaussian marginal log-density of `values` under mean mu * 1 and covariance
// Sigma_SE(theta) [+ sigma_e^2 I] [+ extra_cov], with analytic gradients in
// constrained coordinates.
struct GpTermResult {
  double value = 0.0;
  Vector d_values;  // -C^{-1} r; empty unless requested
  double d_mu = 0.0;
  Vector d_theta;  // (d/d sigma_e, d/d sigma_s, d/d l_1..l_D); empty unless requested
  double jitter = 0.0;
};

GpTermResult gp_gaussian_term(const InputGrid& grid,
                              const std::vector<Matrix>& sqdist,
                              const Vector& values, double mu,
                              const KernelParams& params,
                              const Matrix* extra_cov, bool include_noise,
                              bool want_values_grad, bool want_hyper_grad);

// Per-dimension squared-distance matrices, shared by all gradient passes.
std::vector<Matrix> squared_distances(const InputGrid& grid);

// Eq.-(22)-style surrogate posterior for one process: Gaussian marginal of
// the linearization mean under Sigma_SE(theta) + P_block (no noise diagonal),
// plus the hyperparameter prior.
double surrogate_logpost(const InputGrid& grid, const Vector& m_block,
                         const Matrix& p_block, double mu,
                         const KernelParams& params, const ProcessPrior& prior);

struct EvalResult {
  double value = 0.0;
  Vector grad;  // empty unless requested
};

// Full hierarchical model over the packed unconstrained parameter vector
//
//   [ alpha (K) | beta (K) | u_alpha (3 + D) | u_beta (3 + D) ]
//
// with u = (mu, log sigma_e, log sigma_s, log(l_d - B) ...) per process,
// giving 2K + 2D + 6 coordinates in total.
class LggpModel {
 public:
  LggpModel(Dataset data, HyperPriorSpec spec);

  const Dataset& data() const { return data_; }
  const HyperPriorSpec& spec() const { return spec_; }
  Index n_points() const { return data_.size(); }
  Index dim() const { return data_.grid.dim(); }
  Index packed_dim() const { return 2 * n_points() + 2 * (3 + dim()); }

  struct Unpacked {
    LatentState latent;
    double mu_alpha;
    double mu_beta;
    KernelParams theta_alpha;
    KernelParams theta_beta;
  };

  Unpacked unpack(const Vector& packed) const;
  Vector pack(const Unpacked& params) const;

  // Log joint posterior (likelihood + latent GP priors + hyperpriors) in
  // constrained quantities; no reparameterization terms.
  double joint_logpost(const LatentState& state, double mu_alpha,
                       const KernelParams& theta_alpha, double mu_beta,
                       const KernelParams& theta_beta) const;

  double joint_logpost(const Vector& packed) const;

  // kappa-tempered blend over packed coordinates:
  //   kappa * (gamma lik + latent GP priors)
  //   + (1 - kappa) * (surrogate marginals of m_alpha, m_beta)
  //   + hyperpriors (weight 1 at every kappa).
  // At kappa = 1 this takes the joint_logpost code path bit for bit.
  double tempered_logpost(const Vector& packed, double kappa,
                          const Vector& m_alpha, const Matrix& p_alpha,
                          const Vector& m_beta, const Matrix& p_beta) const;

  // Sampler-facing targets over unconstrained coordinates; these add the
  // log-Jacobian of the transform (weight 1) on top of the ops above.
  EvalResult joint_target(const Vector& packed, bool want_grad) const;

  EvalResult tempered_target(const Vector& packed, double kappa,
                             const Vector& m_alpha, const Matrix& p_alpha,
                             const Vector& m_beta, const Matrix& p_beta,
                             bool want_grad) const;

  // Surrogate hyperparameter target for one process over the (3 + D)-dim
  // unconstrained vector u.
  EvalResult surrogate_target(const Vector& u, const Vector& m_block,
                              const Matrix& p_block, const ProcessPrior& prior,
                              bool want_grad) const;

  Index hyper_offset_alpha() const { return 2 * n_points(); }
  Index hyper_offset_beta() const { return 2 * n_points() + 3 + dim(); }

 private:
  Dataset data_;
  HyperPriorSpec spec_;
  std::vector<Matrix> sqdist_;
};

}  // namespace lggp

#endif
