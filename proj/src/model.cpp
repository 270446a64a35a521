#include "lggp/model.hpp"

#include <cmath>

#include "lggp/stats.hpp"

namespace lggp {

void Dataset::validate() const {
  if (grid.size() < 1) {
    throw InvalidInput("dataset needs at least one observation location");
  }
  if (y.size() != grid.size()) {
    throw InvalidInput("observation count does not match grid size");
  }
  for (Index k = 0; k < y.size(); ++k) {
    if (!(y[k] > 0.0) || !std::isfinite(y[k])) {
      throw InvalidInput("observations must be strictly positive and finite (row " +
                         std::to_string(k) + ")");
    }
  }
}

double gamma_loglik(const Dataset& data, const LatentState& state) {
  data.validate();
  const Index n = data.size();
  if (state.alpha.size() != n || state.beta.size() != n) {
    throw InvalidInput("latent state length does not match dataset");
  }
  double total = 0.0;
  for (Index k = 0; k < n; ++k) {
    const double a = std::exp(state.alpha[k]);
    const double b = std::exp(state.beta[k]);
    total += a * state.beta[k] - std::lgamma(a) +
             (a - 1.0) * std::log(data.y[k]) - b * data.y[k];
  }
  return total;
}

GammaGrad gamma_loglik_grad(const Dataset& data, const LatentState& state) {
  data.validate();
  const Index n = data.size();
  if (state.alpha.size() != n || state.beta.size() != n) {
    throw InvalidInput("latent state length does not match dataset");
  }
  GammaGrad grad;
  grad.d_alpha = Vector(n);
  grad.d_beta = Vector(n);
  for (Index k = 0; k < n; ++k) {
    const double a = std::exp(state.alpha[k]);
    const double b = std::exp(state.beta[k]);
    grad.d_alpha[k] =
        a * (state.beta[k] - digamma(a) + std::log(data.y[k]));
    grad.d_beta[k] = a - b * data.y[k];
  }
  return grad;
}

std::vector<Matrix> squared_distances(const InputGrid& grid) {
  const Index n = grid.size();
  const Index dim = grid.dim();
  std::vector<Matrix> sqdist(static_cast<std::size_t>(dim));
  for (Index d = 0; d < dim; ++d) {
    Matrix& m = sqdist[static_cast<std::size_t>(d)];
    m.resize(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        const double delta = grid.points(i, d) - grid.points(j, d);
        m(i, j) = delta * delta;
      }
    }
  }
  return sqdist;
}

GpTermResult gp_gaussian_term(const InputGrid& grid,
                              const std::vector<Matrix>& sqdist,
                              const Vector& values, double mu,
                              const KernelParams& params,
                              const Matrix* extra_cov, bool include_noise,
                              bool want_values_grad, bool want_hyper_grad) {
  const Index n = grid.size();
  const Index dim = grid.dim();
  if (values.size() != n) {
    throw InvalidInput("gp term value length does not match grid");
  }
  const Matrix kernel = se_covariance(grid, grid, params);
  Matrix cov = kernel;
  if (include_noise) {
    cov.diagonal().array() += params.noise_std * params.noise_std;
  }
  if (extra_cov != nullptr) {
    if (extra_cov->rows() != n || extra_cov->cols() != n) {
      throw InvalidInput("extra covariance block has wrong shape");
    }
    cov += *extra_cov;
  }
  const auto chol = CholeskyFactor::compute(cov);

  GpTermResult out;
  out.jitter = chol.jitter();
  const Vector resid = values.array() - mu;
  const Vector white = chol.half_solve(resid);
  out.value = -0.5 * static_cast<double>(n) * kLog2Pi - 0.5 * chol.log_det() -
              0.5 * white.squaredNorm();

  if (!want_values_grad && !want_hyper_grad) {
    return out;
  }
  const Vector alpha_vec = chol.solve(resid);  // C^{-1} r
  if (want_values_grad) {
    out.d_values = -alpha_vec;
  }
  if (want_hyper_grad) {
    out.d_mu = alpha_vec.sum();
    out.d_theta = Vector::Zero(2 + dim);
    const Matrix cov_inv = chol.inverse();
    // d/d theta_i = 0.5 a' (dC/dtheta_i) a - 0.5 tr(C^{-1} dC/dtheta_i)
    if (include_noise) {
      // dC/d sigma_e = 2 sigma_e I
      out.d_theta[0] = params.noise_std *
                       (alpha_vec.squaredNorm() - cov_inv.trace());
    }
    {
      // dC/d sigma_s = (2 / sigma_s) * kernel
      const double quad = alpha_vec.dot(kernel * alpha_vec);
      const double trace = (cov_inv.array() * kernel.array()).sum();
      out.d_theta[1] = (quad - trace) / params.signal_std;
    }
    for (Index d = 0; d < dim; ++d) {
      // dC/d l_d = kernel .* sqdist_d / l_d^3
      const double l = params.length_scales[d];
      const Matrix scaled =
          kernel.array() * sqdist[static_cast<std::size_t>(d)].array();
      const double quad = alpha_vec.dot(scaled * alpha_vec);
      const double trace = (cov_inv.array() * scaled.array()).sum();
      out.d_theta[2 + d] = 0.5 * (quad - trace) / (l * l * l);
    }
  }
  return out;
}

double surrogate_logpost(const InputGrid& grid, const Vector& m_block,
                         const Matrix& p_block, double mu,
                         const KernelParams& params,
                         const ProcessPrior& prior) {
  const auto sqdist = squared_distances(grid);
  const auto term = gp_gaussian_term(grid, sqdist, m_block, mu, params,
                                     &p_block, /*include_noise=*/false,
                                     /*want_values_grad=*/false,
                                     /*want_hyper_grad=*/false);
  return term.value + hyperprior_logpdf(prior, mu, params);
}

LggpModel::LggpModel(Dataset data, HyperPriorSpec spec)
    : data_(std::move(data)), spec_(std::move(spec)) {
  data_.validate();
  spec_.validate();
  sqdist_ = squared_distances(data_.grid);
}

LggpModel::Unpacked LggpModel::unpack(const Vector& packed) const {
  if (packed.size() != packed_dim()) {
    throw InvalidInput("packed parameter vector has wrong length");
  }
  const Index n = n_points();
  const Index block = 3 + dim();
  Unpacked out;
  out.latent.alpha = packed.segment(0, n);
  out.latent.beta = packed.segment(n, n);
  transform_to_constrained(packed.segment(2 * n, block),
                           spec_.alpha.length_bound, out.mu_alpha,
                           out.theta_alpha);
  transform_to_constrained(packed.segment(2 * n + block, block),
                           spec_.beta.length_bound, out.mu_beta,
                           out.theta_beta);
  return out;
}

Vector LggpModel::pack(const Unpacked& params) const {
  const Index n = n_points();
  const Index block = 3 + dim();
  Vector packed(packed_dim());
  packed.segment(0, n) = params.latent.alpha;
  packed.segment(n, n) = params.latent.beta;
  packed.segment(2 * n, block) = transform_to_unconstrained(
      params.mu_alpha, params.theta_alpha, spec_.alpha.length_bound);
  packed.segment(2 * n + block, block) = transform_to_unconstrained(
      params.mu_beta, params.theta_beta, spec_.beta.length_bound);
  return packed;
}

double LggpModel::joint_logpost(const LatentState& state, double mu_alpha,
                                const KernelParams& theta_alpha, double mu_beta,
                                const KernelParams& theta_beta) const {
  const double lik = gamma_loglik(data_, state);
  const auto gp_a =
      gp_gaussian_term(data_.grid, sqdist_, state.alpha, mu_alpha, theta_alpha,
                       nullptr, true, false, false);
  const auto gp_b =
      gp_gaussian_term(data_.grid, sqdist_, state.beta, mu_beta, theta_beta,
                       nullptr, true, false, false);
  const double hyper = hyperprior_logpdf(spec_.alpha, mu_alpha, theta_alpha) +
                       hyperprior_logpdf(spec_.beta, mu_beta, theta_beta);
  return ((lik + gp_a.value) + gp_b.value) + hyper;
}

double LggpModel::joint_logpost(const Vector& packed) const {
  const auto p = unpack(packed);
  return joint_logpost(p.latent, p.mu_alpha, p.theta_alpha, p.mu_beta,
                       p.theta_beta);
}

double LggpModel::tempered_logpost(const Vector& packed, double kappa,
                                   const Vector& m_alpha, const Matrix& p_alpha,
                                   const Vector& m_beta,
                                   const Matrix& p_beta) const {
  if (!(kappa >= 0.0 && kappa <= 1.0)) {
    throw InvalidInput("tempering exponent must lie in [0, 1]");
  }
  if (kappa == 1.0) {
    return joint_logpost(packed);
  }
  const auto p = unpack(packed);
  const double hyper =
      hyperprior_logpdf(spec_.alpha, p.mu_alpha, p.theta_alpha) +
      hyperprior_logpdf(spec_.beta, p.mu_beta, p.theta_beta);
  const auto sur_a =
      gp_gaussian_term(data_.grid, sqdist_, m_alpha, p.mu_alpha, p.theta_alpha,
                       &p_alpha, false, false, false);
  const auto sur_b =
      gp_gaussian_term(data_.grid, sqdist_, m_beta, p.mu_beta, p.theta_beta,
                       &p_beta, false, false, false);
  const double surrogate = sur_a.value + sur_b.value;
  if (kappa == 0.0) {
    return surrogate + hyper;
  }
  const double lik = gamma_loglik(data_, p.latent);
  const auto gp_a =
      gp_gaussian_term(data_.grid, sqdist_, p.latent.alpha, p.mu_alpha,
                       p.theta_alpha, nullptr, true, false, false);
  const auto gp_b =
      gp_gaussian_term(data_.grid, sqdist_, p.latent.beta, p.mu_beta,
                       p.theta_beta, nullptr, true, false, false);
  return kappa * ((lik + gp_a.value) + gp_b.value) +
         (1.0 - kappa) * surrogate + hyper;
}

namespace {

// Chain rule from constrained (mu, sigma_e, sigma_s, l_d) derivatives to the
// unconstrained block u = (mu, log sigma_e, log sigma_s, log(l_d - B)), and
// +1 per transformed coordinate for the log-Jacobian of the target.
void accumulate_hyper_block(Eigen::Ref<Vector> grad_block,
                            const Vector& d_constrained,
                            const KernelParams& params, double length_bound) {
  const Index dim = params.length_scales.size();
  grad_block[0] += d_constrained[0];
  grad_block[1] += d_constrained[1] * params.noise_std + 1.0;
  grad_block[2] += d_constrained[2] * params.signal_std + 1.0;
  for (Index d = 0; d < dim; ++d) {
    grad_block[3 + d] +=
        d_constrained[3 + d] * (params.length_scales[d] - length_bound) + 1.0;
  }
}

double block_log_jacobian(const Vector& packed, Index offset, Index block) {
  // mu is untransformed; the remaining coordinates each contribute u itself.
  return packed.segment(offset + 1, block - 1).sum();
}

}  // namespace

EvalResult LggpModel::joint_target(const Vector& packed, bool want_grad) const {
  const auto p = unpack(packed);
  const Index n = n_points();
  const Index block = 3 + dim();

  const double lik = gamma_loglik(data_, p.latent);
  const auto gp_a =
      gp_gaussian_term(data_.grid, sqdist_, p.latent.alpha, p.mu_alpha,
                       p.theta_alpha, nullptr, true, want_grad, want_grad);
  const auto gp_b =
      gp_gaussian_term(data_.grid, sqdist_, p.latent.beta, p.mu_beta,
                       p.theta_beta, nullptr, true, want_grad, want_grad);
  const double hyper =
      hyperprior_logpdf(spec_.alpha, p.mu_alpha, p.theta_alpha) +
      hyperprior_logpdf(spec_.beta, p.mu_beta, p.theta_beta);

  EvalResult out;
  out.value = ((lik + gp_a.value) + gp_b.value) + hyper +
              block_log_jacobian(packed, 2 * n, block) +
              block_log_jacobian(packed, 2 * n + block, block);
  if (!want_grad) {
    return out;
  }

  const auto lik_grad = gamma_loglik_grad(data_, p.latent);
  out.grad = Vector::Zero(packed_dim());
  out.grad.segment(0, n) = lik_grad.d_alpha + gp_a.d_values;
  out.grad.segment(n, n) = lik_grad.d_beta + gp_b.d_values;

  Vector d_alpha_hyper(block);
  d_alpha_hyper[0] = gp_a.d_mu;
  d_alpha_hyper.segment(1, 2 + dim()) = gp_a.d_theta;
  d_alpha_hyper += hyperprior_grad(spec_.alpha, p.mu_alpha, p.theta_alpha);
  accumulate_hyper_block(out.grad.segment(2 * n, block), d_alpha_hyper,
                         p.theta_alpha, spec_.alpha.length_bound);

  Vector d_beta_hyper(block);
  d_beta_hyper[0] = gp_b.d_mu;
  d_beta_hyper.segment(1, 2 + dim()) = gp_b.d_theta;
  d_beta_hyper += hyperprior_grad(spec_.beta, p.mu_beta, p.theta_beta);
  accumulate_hyper_block(out.grad.segment(2 * n + block, block), d_beta_hyper,
                         p.theta_beta, spec_.beta.length_bound);
  return out;
}

EvalResult LggpModel::tempered_target(const Vector& packed, double kappa,
                                      const Vector& m_alpha,
                                      const Matrix& p_alpha,
                                      const Vector& m_beta,
                                      const Matrix& p_beta,
                                      bool want_grad) const {
  if (!(kappa >= 0.0 && kappa <= 1.0)) {
    throw InvalidInput("tempering exponent must lie in [0, 1]");
  }
  if (kappa == 1.0) {
    return joint_target(packed, want_grad);
  }
  const auto p = unpack(packed);
  const Index n = n_points();
  const Index block = 3 + dim();

  const auto sur_a =
      gp_gaussian_term(data_.grid, sqdist_, m_alpha, p.mu_alpha, p.theta_alpha,
                       &p_alpha, false, false, want_grad);
  const auto sur_b =
      gp_gaussian_term(data_.grid, sqdist_, m_beta, p.mu_beta, p.theta_beta,
                       &p_beta, false, false, want_grad);
  const double hyper =
      hyperprior_logpdf(spec_.alpha, p.mu_alpha, p.theta_alpha) +
      hyperprior_logpdf(spec_.beta, p.mu_beta, p.theta_beta);

  double lik = 0.0;
  GpTermResult gp_a;
  GpTermResult gp_b;
  if (kappa > 0.0) {
    lik = gamma_loglik(data_, p.latent);
    gp_a = gp_gaussian_term(data_.grid, sqdist_, p.latent.alpha, p.mu_alpha,
                            p.theta_alpha, nullptr, true, want_grad, want_grad);
    gp_b = gp_gaussian_term(data_.grid, sqdist_, p.latent.beta, p.mu_beta,
                            p.theta_beta, nullptr, true, want_grad, want_grad);
  }

  EvalResult out;
  const double surrogate = sur_a.value + sur_b.value;
  const double joint_bundle =
      kappa > 0.0 ? ((lik + gp_a.value) + gp_b.value) : 0.0;
  out.value = kappa * joint_bundle + (1.0 - kappa) * surrogate + hyper +
              block_log_jacobian(packed, 2 * n, block) +
              block_log_jacobian(packed, 2 * n + block, block);
  if (!want_grad) {
    return out;
  }

  out.grad = Vector::Zero(packed_dim());
  Vector d_alpha_hyper = Vector::Zero(block);
  Vector d_beta_hyper = Vector::Zero(block);
  if (kappa > 0.0) {
    const auto lik_grad = gamma_loglik_grad(data_, p.latent);
    out.grad.segment(0, n) = kappa * (lik_grad.d_alpha + gp_a.d_values);
    out.grad.segment(n, n) = kappa * (lik_grad.d_beta + gp_b.d_values);
    d_alpha_hyper[0] += kappa * gp_a.d_mu;
    d_alpha_hyper.segment(1, 2 + dim()) += kappa * gp_a.d_theta;
    d_beta_hyper[0] += kappa * gp_b.d_mu;
    d_beta_hyper.segment(1, 2 + dim()) += kappa * gp_b.d_theta;
  }
  d_alpha_hyper[0] += (1.0 - kappa) * sur_a.d_mu;
  d_alpha_hyper.segment(1, 2 + dim()) += (1.0 - kappa) * sur_a.d_theta;
  d_beta_hyper[0] += (1.0 - kappa) * sur_b.d_mu;
  d_beta_hyper.segment(1, 2 + dim()) += (1.0 - kappa) * sur_b.d_theta;
  d_alpha_hyper += hyperprior_grad(spec_.alpha, p.mu_alpha, p.theta_alpha);
  d_beta_hyper += hyperprior_grad(spec_.beta, p.mu_beta, p.theta_beta);

  accumulate_hyper_block(out.grad.segment(2 * n, block), d_alpha_hyper,
                         p.theta_alpha, spec_.alpha.length_bound);
  accumulate_hyper_block(out.grad.segment(2 * n + block, block), d_beta_hyper,
                         p.theta_beta, spec_.beta.length_bound);
  return out;
}

EvalResult LggpModel::surrogate_target(const Vector& u, const Vector& m_block,
                                       const Matrix& p_block,
                                       const ProcessPrior& prior,
                                       bool want_grad) const {
  const Index block = 3 + dim();
  if (u.size() != block) {
    throw InvalidInput("surrogate hyper vector has wrong length");
  }
  double mu;
  KernelParams params;
  transform_to_constrained(u, prior.length_bound, mu, params);

  const auto term =
      gp_gaussian_term(data_.grid, sqdist_, m_block, mu, params, &p_block,
                       false, false, want_grad);
  EvalResult out;
  out.value = term.value + hyperprior_logpdf(prior, mu, params) +
              u.segment(1, block - 1).sum();
  if (!want_grad) {
    return out;
  }
  Vector d_constrained(block);
  d_constrained[0] = term.d_mu;
  d_constrained.segment(1, 2 + dim()) = term.d_theta;
  d_constrained += hyperprior_grad(prior, mu, params);
  out.grad = Vector::Zero(block);
  accumulate_hyper_block(out.grad, d_constrained, params, prior.length_bound);
  return out;
}

}  // namespace lggp
