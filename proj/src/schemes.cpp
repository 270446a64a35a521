#include "lggp/schemes.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <utility>

#include "lggp/stats.hpp"

namespace lggp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(const Clock::time_point& start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// RNG stream tags per pipeline stage.
constexpr std::uint64_t kStreamLinearization = 1;
constexpr std::uint64_t kStreamChain = 2;
constexpr std::uint64_t kStreamChainBeta = 3;
constexpr std::uint64_t kStreamPrediction = 4;
constexpr std::uint64_t kStreamTemperBase = 16;

TargetFn make_joint_target(const LggpModel& model, Vector initial) {
  TargetFn target;
  target.dim = model.packed_dim();
  target.initial_position = std::move(initial);
  target.eval = [&model](const Vector& q, bool want_grad) {
    const auto result = model.joint_target(q, want_grad);
    return std::make_pair(result.value, result.grad);
  };
  return target;
}

Vector initial_packed(const LggpModel& model) {
  const Index n = model.n_points();
  const Index dim = model.dim();
  LggpModel::Unpacked init;
  init.latent.alpha = Vector::Constant(n, model.spec().alpha.mean_loc);
  init.latent.beta = Vector::Constant(n, model.spec().beta.mean_loc);
  init.mu_alpha = prior_median_mean(model.spec().alpha);
  init.mu_beta = prior_median_mean(model.spec().beta);
  init.theta_alpha = prior_median_params(model.spec().alpha, dim);
  init.theta_beta = prior_median_params(model.spec().beta, dim);
  return model.pack(init);
}

// Constrained hyperparameter matrix from a block of unconstrained columns:
// (mu, log sigma_e, log sigma_s, log(l_d - B) ...).
Matrix constrain_hyper_block(const Matrix& draws, Index offset, Index dim,
                             double length_bound) {
  Matrix out(draws.rows(), 3 + dim);
  out.col(0) = draws.col(offset);
  out.col(1) = draws.col(offset + 1).array().exp();
  out.col(2) = draws.col(offset + 2).array().exp();
  for (Index d = 0; d < dim; ++d) {
    out.col(3 + d) = draws.col(offset + 3 + d).array().exp() + length_bound;
  }
  return out;
}

KernelParams hyper_row_to_params(const Eigen::RowVectorXd& row, Index dim) {
  KernelParams params;
  params.mean = row[0];
  params.noise_std = row[1];
  params.signal_std = row[2];
  params.length_scales = row.segment(3, dim).transpose();
  return params;
}

KernelParams hyper_chain_mean(const Matrix& chain, Index dim) {
  const Eigen::RowVectorXd mean = chain.colwise().mean();
  return hyper_row_to_params(mean, dim);
}

std::vector<Index> thin_indices(Index available, Index wanted) {
  if (wanted >= available || wanted <= 0) {
    wanted = available;
  }
  std::vector<Index> idx(static_cast<std::size_t>(wanted));
  for (Index i = 0; i < wanted; ++i) {
    idx[static_cast<std::size_t>(i)] = (i * available) / wanted;
  }
  return idx;
}

Matrix gamma_observation_draws(const Matrix& alpha, const Matrix& beta,
                               Rng& rng) {
  Matrix y(alpha.rows(), alpha.cols());
  for (Index i = 0; i < alpha.rows(); ++i) {
    for (Index k = 0; k < alpha.cols(); ++k) {
      const double shape = std::exp(alpha(i, k));
      const double scale = std::exp(-beta(i, k));
      std::gamma_distribution<double> gamma(shape, scale);
      y(i, k) = std::max(gamma(rng), std::numeric_limits<double>::min());
    }
  }
  return y;
}

void attach_prediction(InferenceResult& result, const Dataset& data,
                       const FitOptions& options) {
  const auto t0 = Clock::now();
  Rng rng = derive_rng(options.seed, kStreamPrediction);
  const LatentPrediction latents = predict_latent(
      result, data, data.grid, options.n_predict_draws, rng);
  const DataPrediction prediction = predict_data(latents, rng);
  result.predictive_summary = prediction.summary;
  result.timings.prediction = seconds_since(t0);
}

}  // namespace

HmcConfig long_chain_config() {
  HmcConfig config;
  config.n_samples = 20000;
  config.n_warmup = 10000;
  config.target_accept = 0.99;
  return config;
}

HmcConfig short_chain_config() {
  HmcConfig config;
  config.n_samples = 1000;
  config.n_warmup = 1200;
  config.target_accept = 0.99;
  return config;
}

void TemperSchedule::validate() const {
  if (steps.size() < 2) {
    throw InvalidInput("tempering schedule needs at least two steps");
  }
  if (steps.front().kappa != 0.0 || steps.back().kappa != 1.0) {
    throw InvalidInput("tempering schedule must run from 0 to 1 exactly");
  }
  for (std::size_t i = 1; i < steps.size(); ++i) {
    if (!(steps[i].kappa > steps[i - 1].kappa)) {
      throw InvalidInput("tempering sequence must be strictly increasing");
    }
  }
  for (const auto& step : steps) {
    if (step.n_samples < 1 || step.n_warmup < 0) {
      throw InvalidInput("tempering step sample counts out of range");
    }
  }
}

TemperSchedule TemperSchedule::default_schedule() {
  TemperSchedule schedule;
  schedule.steps = {{0.0, 1, 100}, {0.5, 1, 100}, {1.0, 1000, 1000}};
  return schedule;
}

QuantileSummary summarize_draws(const Matrix& draws) {
  const Index cols = draws.cols();
  const Index rows = draws.rows();
  QuantileSummary out;
  out.mean = Vector(cols);
  out.sd = Vector(cols);
  out.q05 = Vector(cols);
  out.q50 = Vector(cols);
  out.q95 = Vector(cols);
  for (Index c = 0; c < cols; ++c) {
    const Vector col = draws.col(c);
    out.mean[c] = col.mean();
    out.sd[c] = rows > 1
                    ? std::sqrt((col.array() - out.mean[c]).square().sum() /
                                static_cast<double>(rows - 1))
                    : 0.0;
    out.q05[c] = empirical_quantile(col, 0.05);
    out.q50[c] = empirical_quantile(col, 0.50);
    out.q95[c] = empirical_quantile(col, 0.95);
  }
  return out;
}

std::vector<std::string> hyper_column_names(Index dim) {
  std::vector<std::string> names = {"mu", "sigma_e", "sigma_s"};
  for (Index d = 0; d < dim; ++d) {
    names.push_back(dim == 1 ? "l" : "l_" + std::to_string(d + 1));
  }
  return names;
}

InferenceResult fit_direct_hmc(const Dataset& data, const HyperPriorSpec& spec,
                               const FitOptions& options,
                               const std::string& mode_tag) {
  const LggpModel model(data, spec);
  const Index n = model.n_points();
  const Index dim = model.dim();

  InferenceResult result;
  result.mode = mode_tag;
  result.grid = data.grid;
  result.n_points = n;
  result.dim = dim;
  result.seed = options.seed;

  const TargetFn target = make_joint_target(model, initial_packed(model));
  Rng rng = derive_rng(options.seed, kStreamChain);
  const Chain chain = run_chain(target, options.hmc, rng);

  result.alpha_draws = chain.draws.leftCols(n);
  result.beta_draws = chain.draws.middleCols(n, n);
  result.hyper_alpha_chain = constrain_hyper_block(
      chain.draws, model.hyper_offset_alpha(), dim, spec.alpha.length_bound);
  result.hyper_beta_chain = constrain_hyper_block(
      chain.draws, model.hyper_offset_beta(), dim, spec.beta.length_bound);
  result.alpha_summary = summarize_draws(result.alpha_draws);
  result.beta_summary = summarize_draws(result.beta_draws);
  result.divergences = chain.divergences;
  result.timings.warmup = chain.warmup_seconds;
  result.timings.sampling = chain.sampling_seconds;

  attach_prediction(result, data, options);
  return result;
}

InferenceResult fit_pl_approx(const Dataset& data, const HyperPriorSpec& spec,
                              const FitOptions& options) {
  const LggpModel model(data, spec);
  const Index n = model.n_points();
  const Index dim = model.dim();

  InferenceResult result;
  result.mode = "pl";
  result.grid = data.grid;
  result.n_points = n;
  result.dim = dim;
  result.seed = options.seed;

  const auto t_pl = Clock::now();
  Rng rng_pl = derive_rng(options.seed, kStreamLinearization);
  PlResult pl =
      iterate_pl(spec, data, options.ensemble_size, rng_pl, options.pl);
  result.timings.linearization = seconds_since(t_pl);
  result.has_moments = true;
  result.moments = pl.moments;
  result.pl_history = std::move(pl.history);

  const MomentSplit split = split_blocks(result.moments);

  // Independent NUTS runs over the two surrogate hyperparameter posteriors.
  auto run_surrogate = [&](const Vector& m_block, const Matrix& p_block,
                           const ProcessPrior& prior, std::uint64_t stream) {
    TargetFn target;
    target.dim = unconstrained_dim(dim);
    target.initial_position = transform_to_unconstrained(
        prior_median_mean(prior), prior_median_params(prior, dim),
        prior.length_bound);
    target.eval = [&, m_block, p_block](const Vector& u, bool want_grad) {
      const auto eval =
          model.surrogate_target(u, m_block, p_block, prior, want_grad);
      return std::make_pair(eval.value, eval.grad);
    };
    Rng rng = derive_rng(options.seed, stream);
    return run_chain(target, options.hmc, rng);
  };

  const Chain chain_alpha =
      run_surrogate(split.m_alpha, split.p_alpha, spec.alpha, kStreamChain);
  const Chain chain_beta =
      run_surrogate(split.m_beta, split.p_beta, spec.beta, kStreamChainBeta);

  result.hyper_alpha_chain = constrain_hyper_block(chain_alpha.draws, 0, dim,
                                                   spec.alpha.length_bound);
  result.hyper_beta_chain = constrain_hyper_block(chain_beta.draws, 0, dim,
                                                  spec.beta.length_bound);
  result.divergences = chain_alpha.divergences + chain_beta.divergences;
  result.timings.warmup =
      chain_alpha.warmup_seconds + chain_beta.warmup_seconds;
  result.timings.sampling =
      chain_alpha.sampling_seconds + chain_beta.sampling_seconds;

  // Latent posterior is the Gaussian N(m, P); its marginal quantiles are
  // exact rather than sampled.
  const double z95 = normal_quantile(0.95);
  auto gaussian_summary = [&](const Vector& mean, const Matrix& cov) {
    QuantileSummary summary;
    summary.mean = mean;
    summary.sd = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    summary.q05 = mean - z95 * summary.sd;
    summary.q50 = mean;
    summary.q95 = mean + z95 * summary.sd;
    return summary;
  };
  result.alpha_summary = gaussian_summary(split.m_alpha, split.p_alpha);
  result.beta_summary = gaussian_summary(split.m_beta, split.p_beta);

  attach_prediction(result, data, options);
  return result;
}

InferenceResult fit_pl_tempered(const Dataset& data, const HyperPriorSpec& spec,
                                const FitOptions& options) {
  options.schedule.validate();
  const LggpModel model(data, spec);
  const Index n = model.n_points();
  const Index dim = model.dim();

  InferenceResult result;
  result.mode = "pl-tempered";
  result.grid = data.grid;
  result.n_points = n;
  result.dim = dim;
  result.seed = options.seed;

  const auto t_pl = Clock::now();
  Rng rng_pl = derive_rng(options.seed, kStreamLinearization);
  PlResult pl =
      iterate_pl(spec, data, options.ensemble_size, rng_pl, options.pl);
  result.timings.linearization = seconds_since(t_pl);
  result.has_moments = true;
  result.moments = pl.moments;
  result.pl_history = std::move(pl.history);

  const MomentSplit split = split_blocks(result.moments);

  // First tempering step starts from the linearization mean for the latents
  // and the prior medians for the hyperparameters.
  LggpModel::Unpacked init;
  init.latent.alpha = split.m_alpha;
  init.latent.beta = split.m_beta;
  init.mu_alpha = prior_median_mean(spec.alpha);
  init.mu_beta = prior_median_mean(spec.beta);
  init.theta_alpha = prior_median_params(spec.alpha, dim);
  init.theta_beta = prior_median_params(spec.beta, dim);
  Vector state = model.pack(init);

  Chain final_chain;
  for (std::size_t step = 0; step < options.schedule.steps.size(); ++step) {
    const TemperStep& temper = options.schedule.steps[step];
    TargetFn target;
    target.dim = model.packed_dim();
    target.initial_position = state;
    target.eval = [&model, &split, kappa = temper.kappa](const Vector& q,
                                                         bool want_grad) {
      const auto eval =
          model.tempered_target(q, kappa, split.m_alpha, split.p_alpha,
                                split.m_beta, split.p_beta, want_grad);
      return std::make_pair(eval.value, eval.grad);
    };

    HmcConfig config = options.hmc;
    config.n_samples = temper.n_samples;
    config.n_warmup = temper.n_warmup;
    Rng rng = derive_rng(options.seed, kStreamTemperBase + step);
    Chain chain = run_chain(target, config, rng);
    state = chain.draws.row(chain.draws.rows() - 1);

    const bool final_step = step + 1 == options.schedule.steps.size();
    result.timings.warmup += chain.warmup_seconds;
    if (final_step) {
      result.timings.sampling += chain.sampling_seconds;
      result.divergences = chain.divergences;
      final_chain = std::move(chain);
    } else {
      // Intermediate steps only hand their last state forward.
      result.timings.warmup += chain.sampling_seconds;
    }
  }

  result.alpha_draws = final_chain.draws.leftCols(n);
  result.beta_draws = final_chain.draws.middleCols(n, n);
  result.hyper_alpha_chain =
      constrain_hyper_block(final_chain.draws, model.hyper_offset_alpha(), dim,
                            spec.alpha.length_bound);
  result.hyper_beta_chain =
      constrain_hyper_block(final_chain.draws, model.hyper_offset_beta(), dim,
                            spec.beta.length_bound);
  result.alpha_summary = summarize_draws(result.alpha_draws);
  result.beta_summary = summarize_draws(result.beta_draws);

  attach_prediction(result, data, options);
  return result;
}

LatentPrediction predict_latent(const InferenceResult& result,
                                const Dataset& train_data,
                                const InputGrid& test_grid, Index n_draws,
                                Rng& rng) {
  const Index n_test = test_grid.size();
  const Index dim = train_data.grid.dim();
  LatentPrediction out;
  if (n_test == 0) {
    out.alpha = Matrix(0, 0);
    out.beta = Matrix(0, 0);
    return out;
  }
  if (test_grid.dim() != dim) {
    throw InvalidInput("test grid dimension does not match training grid");
  }

  if (!result.has_moments && result.alpha_draws.rows() == 0) {
    throw InvalidInput("result carries neither draws nor moments");
  }

  if (result.alpha_draws.rows() > 0) {
    // Sample-based modes: one conditional GP per retained draw with that
    // draw's own hyperparameters.
    const auto idx = thin_indices(result.alpha_draws.rows(), n_draws);
    const Index count = static_cast<Index>(idx.size());
    out.alpha.resize(count, n_test);
    out.beta.resize(count, n_test);
    for (Index i = 0; i < count; ++i) {
      const Index row = idx[static_cast<std::size_t>(i)];
      const KernelParams theta_alpha =
          hyper_row_to_params(result.hyper_alpha_chain.row(row), dim);
      const KernelParams theta_beta =
          hyper_row_to_params(result.hyper_beta_chain.row(row), dim);
      const auto pred_alpha =
          gp_predict(train_data.grid, test_grid,
                     result.alpha_draws.row(row).transpose(), theta_alpha);
      const auto pred_beta =
          gp_predict(train_data.grid, test_grid,
                     result.beta_draws.row(row).transpose(), theta_beta);
      out.alpha.row(i) = sample_gaussian(pred_alpha.mean, pred_alpha.cov, rng);
      out.beta.row(i) = sample_gaussian(pred_beta.mean, pred_beta.cov, rng);
    }
    return out;
  }

  // Approximate mode: posterior-mean hyperparameters, so the conditioning
  // matrices and predictive covariances are computed once.
  const MomentSplit split = split_blocks(result.moments);
  const KernelParams theta_alpha =
      hyper_chain_mean(result.hyper_alpha_chain, dim);
  const KernelParams theta_beta = hyper_chain_mean(result.hyper_beta_chain, dim);

  struct Precomputed {
    Matrix gain;       // K* x K, Sigma(x*, x) (Sigma(x, x) + s^2 I)^{-1}
    Matrix transform;  // K* x K*, factor of the predictive covariance
    double mu;
  };
  auto precompute = [&](const KernelParams& params) {
    Precomputed pre;
    pre.mu = params.mean;
    const Matrix k_train = add_noise_diag(
        se_covariance(train_data.grid, train_data.grid, params),
        params.noise_std);
    const auto chol = CholeskyFactor::compute(k_train);
    const Matrix k_cross = se_covariance(test_grid, train_data.grid, params);
    pre.gain = chol.solve(k_cross.transpose()).transpose();
    Matrix pred_cov = se_covariance(test_grid, test_grid, params) -
                      pre.gain * k_cross.transpose();
    pred_cov = 0.5 * (pred_cov + pred_cov.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> eigs(pred_cov);
    if (eigs.info() != Eigen::Success) {
      throw NumericalError("predictive covariance factorization failed");
    }
    pre.transform = eigs.eigenvectors() *
                    eigs.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    return pre;
  };
  const Precomputed pre_alpha = precompute(theta_alpha);
  const Precomputed pre_beta = precompute(theta_beta);

  const auto chol_joint = CholeskyFactor::compute(result.moments.p);
  const Index n_train = train_data.grid.size();
  if (n_draws <= 0) {
    throw InvalidInput("prediction needs a positive draw count");
  }
  out.alpha.resize(n_draws, n_test);
  out.beta.resize(n_draws, n_test);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector xi(2 * n_train);
  Vector eta(n_test);
  for (Index i = 0; i < n_draws; ++i) {
    for (Index k = 0; k < xi.size(); ++k) {
      xi[k] = normal(rng);
    }
    const Vector z = result.moments.m + chol_joint.matrix_lower() * xi;
    for (Index k = 0; k < n_test; ++k) {
      eta[k] = normal(rng);
    }
    out.alpha.row(i) =
        (pre_alpha.gain * (z.head(n_train).array() - pre_alpha.mu).matrix())
            .array() +
        pre_alpha.mu + (pre_alpha.transform * eta).array();
    for (Index k = 0; k < n_test; ++k) {
      eta[k] = normal(rng);
    }
    out.beta.row(i) =
        (pre_beta.gain * (z.tail(n_train).array() - pre_beta.mu).matrix())
            .array() +
        pre_beta.mu + (pre_beta.transform * eta).array();
  }
  return out;
}

DataPrediction predict_data(const LatentPrediction& latents, Rng& rng) {
  if (latents.alpha.rows() != latents.beta.rows() ||
      latents.alpha.cols() != latents.beta.cols()) {
    throw InvalidInput("latent prediction draw matrices must be conformable");
  }
  DataPrediction out;
  out.y = gamma_observation_draws(latents.alpha, latents.beta, rng);
  out.summary = summarize_draws(out.y);
  return out;
}

SimulationResult simulate_lggp(const InputGrid& grid,
                               const KernelParams& theta_alpha,
                               const KernelParams& theta_beta, Rng& rng) {
  SimulationResult out;
  out.truth.alpha = sample_gp_realization(grid, theta_alpha, rng);
  out.truth.beta = sample_gp_realization(grid, theta_beta, rng);
  out.data = simulate_from_latents(grid, out.truth, rng);
  return out;
}

Dataset simulate_from_latents(const InputGrid& grid, const LatentState& truth,
                              Rng& rng) {
  if (truth.alpha.size() != grid.size() || truth.beta.size() != grid.size()) {
    throw InvalidInput("latent truth length does not match grid");
  }
  Dataset data;
  data.grid = grid;
  data.y = Vector(grid.size());
  for (Index k = 0; k < grid.size(); ++k) {
    const double shape = std::exp(truth.alpha[k]);
    const double scale = std::exp(-truth.beta[k]);
    std::gamma_distribution<double> gamma(shape, scale);
    data.y[k] = std::max(gamma(rng), std::numeric_limits<double>::min());
  }
  data.validate();
  return data;
}

}  // namespace lggp
