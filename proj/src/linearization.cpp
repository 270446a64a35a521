#include "lggp/linearization.hpp"

#include <cmath>
#include <limits>

namespace lggp {

namespace {

constexpr int kMaxPriorDrawRetries = 20;

void draw_observations(Ensemble& ensemble, Rng& rng) {
  const Index n = ensemble.alpha.rows();
  const Index j_count = ensemble.alpha.cols();
  ensemble.y.resize(n, j_count);
  for (Index j = 0; j < j_count; ++j) {
    for (Index k = 0; k < n; ++k) {
      const double shape = std::exp(ensemble.alpha(k, j));
      const double scale = std::exp(-ensemble.beta(k, j));
      std::gamma_distribution<double> gamma(shape, scale);
      ensemble.y(k, j) =
          std::max(gamma(rng), std::numeric_limits<double>::min());
    }
  }
}

}  // namespace

PlInit init_prior_moments(const HyperPriorSpec& spec, const InputGrid& grid,
                          Index n_draws, Rng& rng) {
  if (n_draws < 2) {
    throw InvalidInput("ensemble size must be at least 2");
  }
  spec.validate();
  const Index n = grid.size();
  const Index dim = grid.dim();

  PlInit out;
  out.moments.iteration = 0;
  out.moments.m = Vector(2 * n);
  out.moments.m.head(n).setConstant(spec.alpha.mean_loc);
  out.moments.m.tail(n).setConstant(spec.beta.mean_loc);

  out.ensemble.alpha.resize(n, n_draws);
  out.ensemble.beta.resize(n, n_draws);
  Matrix cov_accum = Matrix::Zero(2 * n, 2 * n);
  Vector stacked(2 * n);
  for (Index j = 0; j < n_draws; ++j) {
    int attempts = 0;
    for (;;) {
      try {
        const HyperDraw alpha_draw = sample_hyper_prior(spec.alpha, dim, rng);
        const HyperDraw beta_draw = sample_hyper_prior(spec.beta, dim, rng);
        out.ensemble.alpha.col(j) =
            sample_gp_realization(grid, alpha_draw.params, rng);
        out.ensemble.beta.col(j) =
            sample_gp_realization(grid, beta_draw.params, rng);
        break;
      } catch (const NumericalError&) {
        if (++attempts >= kMaxPriorDrawRetries) {
          throw NumericalError(
              "prior GP draw failed repeatedly; priors may be degenerate");
        }
      }
    }
    stacked.head(n) = out.ensemble.alpha.col(j);
    stacked.tail(n) = out.ensemble.beta.col(j);
    const Vector dev = stacked - out.moments.m;
    cov_accum.selfadjointView<Eigen::Lower>().rankUpdate(dev);
  }
  cov_accum = cov_accum.selfadjointView<Eigen::Lower>();
  out.moments.p = cov_accum / static_cast<double>(n_draws);
  out.moments.p = 0.5 * (out.moments.p + out.moments.p.transpose()).eval();
  draw_observations(out.ensemble, rng);
  return out;
}

Ensemble simulate_ensemble(const MomentState& moments, Index n_draws,
                           Rng& rng) {
  if (n_draws < 2) {
    throw InvalidInput("ensemble size must be at least 2");
  }
  if (moments.m.size() % 2 != 0) {
    throw InvalidInput("moment state length must be even");
  }
  const Index n = moments.m.size() / 2;
  const auto chol = CholeskyFactor::compute(moments.p);
  std::normal_distribution<double> normal(0.0, 1.0);

  Ensemble ensemble;
  ensemble.alpha.resize(n, n_draws);
  ensemble.beta.resize(n, n_draws);
  Vector xi(2 * n);
  for (Index j = 0; j < n_draws; ++j) {
    for (Index i = 0; i < xi.size(); ++i) {
      xi[i] = normal(rng);
    }
    const Vector z = moments.m + chol.matrix_lower() * xi;
    ensemble.alpha.col(j) = z.head(n);
    ensemble.beta.col(j) = z.tail(n);
  }
  draw_observations(ensemble, rng);
  return ensemble;
}

MomentEstimates mc_moment_estimates(const Ensemble& ensemble,
                                    const Vector& m_prev) {
  const Index n = ensemble.alpha.rows();
  const Index j_count = ensemble.n_draws();
  if (j_count < 2) {
    throw InvalidInput("ensemble size must be at least 2");
  }
  if (m_prev.size() != 2 * n) {
    throw InvalidInput("previous mean has wrong length");
  }
  const double inv_j = 1.0 / static_cast<double>(j_count);

  MomentEstimates est;
  est.mu_plus = ensemble.y.rowwise().mean();

  Matrix dev_y = ensemble.y.colwise() - est.mu_plus;
  est.p_yy = (dev_y * dev_y.transpose()) * inv_j;
  est.p_yy = 0.5 * (est.p_yy + est.p_yy.transpose()).eval();

  Matrix dev_z(2 * n, j_count);
  dev_z.topRows(n) = ensemble.alpha.colwise() - m_prev.head(n);
  dev_z.bottomRows(n) = ensemble.beta.colwise() - m_prev.tail(n);
  est.p_xy = (dev_z * dev_y.transpose()) * inv_j;
  return est;
}

SlrParams slr_from_moments(const MomentEstimates& est,
                           const MomentState& moments_prev) {
  const auto chol = CholeskyFactor::compute(moments_prev.p);
  SlrParams slr;
  // A = P_xy' P^{-1}  via  A' = P^{-1} P_xy.
  slr.a = chol.solve(est.p_xy).transpose();
  slr.b = est.mu_plus - slr.a * moments_prev.m;
  slr.lambda = est.p_yy - slr.a * moments_prev.p * slr.a.transpose();
  slr.lambda = 0.5 * (slr.lambda + slr.lambda.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Matrix> eigs(slr.lambda,
                                             Eigen::EigenvaluesOnly);
  if (eigs.info() != Eigen::Success) {
    throw NumericalError("eigenvalue floor of Lambda failed");
  }
  const double min_eig = eigs.eigenvalues().minCoeff();
  if (min_eig < 0.0) {
    slr.lambda_floor = -min_eig + 1e-12 * std::abs(slr.lambda.trace());
    slr.lambda.diagonal().array() += slr.lambda_floor;
  }
  return slr;
}

MomentState pl_update(const MomentState& prior, const SlrParams& slr,
                      const Vector& y, double* s_jitter) {
  const Index n = y.size();
  if (slr.a.rows() != n || slr.a.cols() != prior.m.size()) {
    throw InvalidInput("regression matrix has wrong shape");
  }
  const Vector mu = slr.a * prior.m + slr.b;
  Matrix s = slr.a * prior.p * slr.a.transpose() + slr.lambda;
  s = 0.5 * (s + s.transpose()).eval();
  const auto chol = CholeskyFactor::compute(s);
  if (s_jitter != nullptr) {
    *s_jitter = chol.jitter();
  }

  // With U = L^{-1} A P0:  m = m0 + U' L^{-1} (y - mu),  P = P0 - U' U.
  const Matrix cross = slr.a * prior.p;  // K x 2K
  const Matrix u = chol.matrix_lower()
                       .triangularView<Eigen::Lower>()
                       .solve(cross);
  MomentState next;
  next.iteration = prior.iteration + 1;
  next.m = prior.m + u.transpose() * chol.half_solve(y - mu);
  next.p = prior.p - u.transpose() * u;
  next.p = 0.5 * (next.p + next.p.transpose()).eval();
  return next;
}

PlResult iterate_pl_from(const MomentState& init, const Vector& y,
                         const MomentBackend& backend,
                         const PlOptions& options) {
  if (options.max_iterations < 1) {
    throw InvalidInput("posterior linearization needs at least one iteration");
  }
  PlResult result;
  MomentState prev = init;
  for (int t = 1; t <= options.max_iterations; ++t) {
    const MomentEstimates est = backend(t, prev);
    const SlrParams slr = slr_from_moments(est, prev);
    double s_jitter = 0.0;
    MomentState next = pl_update(init, slr, y, &s_jitter);
    next.iteration = t;

    PlIterationRecord record;
    record.iteration = t;
    record.m = next.m;
    record.p_diag = next.p.diagonal();
    record.lambda_floor = slr.lambda_floor;
    record.jitter_s = s_jitter;
    record.jitter_p = CholeskyFactor::compute(next.p).jitter();
    result.history.push_back(std::move(record));

    const double shift = (next.m - prev.m).lpNorm<Eigen::Infinity>();
    prev = std::move(next);
    if (options.early_stop && shift < options.tol) {
      break;
    }
  }
  result.moments = std::move(prev);
  return result;
}

PlResult iterate_pl(const HyperPriorSpec& spec, const Dataset& data,
                    Index n_draws, Rng& rng, const PlOptions& options) {
  data.validate();
  PlInit init = init_prior_moments(spec, data.grid, n_draws, rng);
  Ensemble ensemble = std::move(init.ensemble);
  auto backend = [&](int iteration, const MomentState& prev) {
    if (iteration > 1) {
      ensemble = simulate_ensemble(prev, n_draws, rng);
    }
    return mc_moment_estimates(ensemble, prev.m);
  };
  return iterate_pl_from(init.moments, data.y, backend, options);
}

MomentSplit split_blocks(const MomentState& state) {
  if (state.m.size() % 2 != 0 || state.m.size() == 0) {
    throw InvalidInput("moment state length must be even and positive");
  }
  const Index n = state.m.size() / 2;
  MomentSplit split;
  split.m_alpha = state.m.head(n);
  split.m_beta = state.m.tail(n);
  split.p_alpha = state.p.topLeftCorner(n, n);
  split.p_beta = state.p.bottomRightCorner(n, n);
  split.p_alpha_beta = state.p.topRightCorner(n, n);
  split.p_alpha = 0.5 * (split.p_alpha + split.p_alpha.transpose()).eval();
  split.p_beta = 0.5 * (split.p_beta + split.p_beta.transpose()).eval();
  return split;
}

}  // namespace lggp
