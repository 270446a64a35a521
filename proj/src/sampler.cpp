#include "lggp/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace lggp {

namespace {

constexpr double kMaxEnergyError = 1000.0;

double kinetic_energy(const Vector& p, const Vector& inv_mass_diag) {
  return 0.5 * (p.array().square() * inv_mass_diag.array()).sum();
}

double log_add_exp(double a, double b) {
  const double hi = std::max(a, b);
  if (hi == -std::numeric_limits<double>::infinity()) {
    return hi;
  }
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

void HmcConfig::validate() const {
  if (n_samples < 1) {
    throw InvalidInput("n_samples must be >= 1");
  }
  if (n_warmup < 0) {
    throw InvalidInput("n_warmup must be >= 0");
  }
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw InvalidInput("target_accept must lie in (0, 1)");
  }
  if (max_tree_depth < 1 || max_tree_depth > 15) {
    throw InvalidInput("max_tree_depth must lie in [1, 15]");
  }
  if (!(initial_step_size > 0.0)) {
    throw InvalidInput("initial_step_size must be positive");
  }
}

LeapfrogResult leapfrog(const TargetFn& target, const PhasePoint& start,
                        double step_size, const Vector& inv_mass_diag) {
  LeapfrogResult out;
  Vector p_half = start.p + 0.5 * step_size * start.grad;
  out.point.q =
      start.q.array() + step_size * p_half.array() * inv_mass_diag.array();
  auto [logp, grad] = target.eval(out.point.q, true);
  out.point.logp = logp;
  out.point.grad = std::move(grad);
  if (!std::isfinite(logp) || !out.point.grad.allFinite()) {
    out.finite = false;
    out.point.p = p_half;
    return out;
  }
  out.point.p = p_half + 0.5 * step_size * out.point.grad;
  return out;
}

DualAveraging::DualAveraging(double initial_step, double target_accept)
    : target_(target_accept),
      mu_(std::log(10.0 * initial_step)),
      step_(initial_step),
      averaged_step_(initial_step) {}

void DualAveraging::restart(double initial_step) {
  mu_ = std::log(10.0 * initial_step);
  step_ = initial_step;
  averaged_step_ = initial_step;
  h_bar_ = 0.0;
  iteration_ = 0;
}

void DualAveraging::update(double accept_stat) {
  ++iteration_;
  const double m = static_cast<double>(iteration_);
  const double eta = 1.0 / (m + kT0);
  h_bar_ = (1.0 - eta) * h_bar_ + eta * (target_ - accept_stat);
  const double log_step = mu_ - std::sqrt(m) / kGamma * h_bar_;
  const double weight = std::pow(m, -kKappa);
  const double log_avg =
      weight * log_step + (1.0 - weight) * std::log(averaged_step_);
  step_ = std::exp(log_step);
  averaged_step_ = std::exp(log_avg);
}

namespace {

struct Subtree {
  PhasePoint first;  // boundary nearest the expansion origin
  PhasePoint last;   // state at the expanding end
  PhasePoint proposal;
  double log_sum_weight = -std::numeric_limits<double>::infinity();
  double sum_accept = 0.0;
  long n_states = 0;
  bool turning = false;
  bool divergent = false;
};

bool uturn(const Vector& q_plus, const Vector& q_minus, const Vector& p_plus,
           const Vector& p_minus, const Vector& inv_mass_diag) {
  const Vector delta = q_plus - q_minus;
  const double forward =
      (delta.array() * inv_mass_diag.array() * p_plus.array()).sum();
  const double backward =
      (delta.array() * inv_mass_diag.array() * p_minus.array()).sum();
  return forward < 0.0 || backward < 0.0;
}

// Builds a balanced subtree of 2^depth leapfrog steps extending from `from`
// in `direction`; multinomial sampling of the proposal within the subtree.
Subtree build_tree(const TargetFn& target, const PhasePoint& from,
                   double step_size, int direction,
                   const Vector& inv_mass_diag, int depth, double h0,
                   Rng& rng) {
  if (depth == 0) {
    Subtree leaf;
    const auto step =
        leapfrog(target, from, direction * step_size, inv_mass_diag);
    leaf.first = step.point;
    leaf.last = step.point;
    leaf.proposal = step.point;
    leaf.n_states = 1;
    if (!step.finite) {
      leaf.divergent = true;
      return leaf;
    }
    const double h =
        -step.point.logp + kinetic_energy(step.point.p, inv_mass_diag);
    const double energy_error = h - h0;
    if (!std::isfinite(h) || energy_error > kMaxEnergyError) {
      leaf.divergent = true;
      return leaf;
    }
    leaf.log_sum_weight = -energy_error;
    leaf.sum_accept = std::min(1.0, std::exp(-energy_error));
    return leaf;
  }

  Subtree inner = build_tree(target, from, step_size, direction, inv_mass_diag,
                             depth - 1, h0, rng);
  if (inner.turning || inner.divergent) {
    return inner;
  }
  Subtree outer = build_tree(target, inner.last, step_size, direction,
                             inv_mass_diag, depth - 1, h0, rng);

  Subtree merged;
  merged.first = inner.first;
  merged.last = outer.last;
  merged.log_sum_weight = log_add_exp(inner.log_sum_weight, outer.log_sum_weight);
  merged.sum_accept = inner.sum_accept + outer.sum_accept;
  merged.n_states = inner.n_states + outer.n_states;
  merged.divergent = outer.divergent;
  if (merged.divergent) {
    merged.proposal = inner.proposal;
    return merged;
  }
  merged.turning = outer.turning;
  merged.proposal = inner.proposal;
  if (!merged.turning) {
    // Multinomial choice between the two halves.
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double accept_outer =
        std::exp(outer.log_sum_weight - merged.log_sum_weight);
    merged.proposal =
        (unif(rng) < accept_outer) ? outer.proposal : inner.proposal;
    // U-turn across this subtree's own boundary states.
    if (direction > 0) {
      merged.turning = uturn(merged.last.q, merged.first.q, merged.last.p,
                             merged.first.p, inv_mass_diag);
    } else {
      merged.turning = uturn(merged.first.q, merged.last.q, merged.first.p,
                             merged.last.p, inv_mass_diag);
    }
  }
  return merged;
}

}  // namespace

PhasePoint nuts_draw(const TargetFn& target, const PhasePoint& current,
                     double step_size, const Vector& inv_mass_diag, Rng& rng,
                     int max_tree_depth, NutsStats& stats) {
  std::normal_distribution<double> normal(0.0, 1.0);
  PhasePoint state = current;
  state.p = Vector(target.dim);
  for (Index i = 0; i < target.dim; ++i) {
    // p ~ N(0, M) with M = diag(1 / inv_mass)
    state.p[i] = normal(rng) / std::sqrt(inv_mass_diag[i]);
  }
  const double h0 = -state.logp + kinetic_energy(state.p, inv_mass_diag);

  PhasePoint forward = state;
  PhasePoint backward = state;
  PhasePoint sample = state;
  double log_sum_weight = 0.0;  // weight of the initial state
  double sum_accept = 0.0;
  long n_states = 0;
  stats = NutsStats{};
  stats.energy = h0;

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int depth = 0;
  while (depth < max_tree_depth) {
    const int direction = (unif(rng) < 0.5) ? 1 : -1;
    PhasePoint& edge = (direction > 0) ? forward : backward;
    Subtree subtree = build_tree(target, edge, step_size, direction,
                                 inv_mass_diag, depth, h0, rng);
    sum_accept += subtree.sum_accept;
    n_states += subtree.n_states;
    if (subtree.divergent) {
      stats.divergent = true;
      break;
    }
    if (subtree.turning) {
      break;
    }
    edge = subtree.last;
    // Biased progressive sampling favors the fresh half of the trajectory.
    const double accept_new =
        std::exp(subtree.log_sum_weight - log_sum_weight);
    if (unif(rng) < accept_new) {
      sample = subtree.proposal;
    }
    log_sum_weight = log_add_exp(log_sum_weight, subtree.log_sum_weight);
    ++depth;
    if (uturn(forward.q, backward.q, forward.p, backward.p, inv_mass_diag)) {
      break;
    }
  }
  stats.tree_depth = depth;
  stats.accept_stat =
      (n_states > 0) ? sum_accept / static_cast<double>(n_states) : 0.0;
  return sample;
}

namespace {

double find_reasonable_step_size(const TargetFn& target,
                                 const PhasePoint& start, double step_size,
                                 const Vector& inv_mass_diag, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  PhasePoint point = start;
  point.p = Vector(target.dim);
  for (Index i = 0; i < target.dim; ++i) {
    point.p[i] = normal(rng) / std::sqrt(inv_mass_diag[i]);
  }
  const double h0 = -point.logp + kinetic_energy(point.p, inv_mass_diag);

  auto accept_prob = [&](double eps) {
    const auto step = leapfrog(target, point, eps, inv_mass_diag);
    if (!step.finite) {
      return 0.0;
    }
    const double h =
        -step.point.logp + kinetic_energy(step.point.p, inv_mass_diag);
    return std::min(1.0, std::exp(h0 - h));
  };

  double eps = step_size;
  const double direction = (accept_prob(eps) > 0.5) ? 1.0 : -1.0;
  for (int iter = 0; iter < 50; ++iter) {
    const double prob = accept_prob(eps);
    if (direction > 0.0 ? prob <= 0.5 : prob >= 0.5) {
      break;
    }
    eps *= (direction > 0.0) ? 2.0 : 0.5;
  }
  return eps;
}

}  // namespace

Chain run_chain(const TargetFn& target, const HmcConfig& config, Rng& rng) {
  config.validate();
  if (target.initial_position.size() != target.dim) {
    throw InvalidInput("target initial position has wrong dimension");
  }
  const auto t_start = std::chrono::steady_clock::now();

  PhasePoint state;
  state.q = target.initial_position;
  {
    auto [logp, grad] = target.eval(state.q, true);
    if (!std::isfinite(logp) || !grad.allFinite()) {
      throw InvalidInput("log density not finite at the initial position");
    }
    state.logp = logp;
    state.grad = std::move(grad);
  }

  Chain chain;
  chain.inv_mass_diag = Vector::Ones(target.dim);
  chain.draws.resize(config.n_samples, target.dim);
  chain.accept_stats.reserve(config.n_samples);

  // Mass adaptation needs enough warmup draws for a usable variance window.
  const bool adapt_mass = config.mass_mode == MassMatrixMode::kDiagonalAdapted &&
                          config.n_warmup >= 200;
  const int window_begin = config.n_warmup / 4;
  const int window_end = config.n_warmup / 2;

  double eps = find_reasonable_step_size(target, state, config.initial_step_size,
                                         chain.inv_mass_diag, rng);
  DualAveraging adapt(eps, config.target_accept);

  Vector welford_mean = Vector::Zero(target.dim);
  Vector welford_m2 = Vector::Zero(target.dim);
  long welford_n = 0;

  NutsStats stats;
  for (int m = 0; m < config.n_warmup; ++m) {
    state = nuts_draw(target, state, adapt.current(), chain.inv_mass_diag, rng,
                      config.max_tree_depth, stats);
    adapt.update(stats.accept_stat);
    chain.step_sizes.push_back(adapt.current());
    if (adapt_mass && m >= window_begin && m < window_end) {
      ++welford_n;
      const Vector delta = state.q - welford_mean;
      welford_mean += delta / static_cast<double>(welford_n);
      welford_m2.array() += delta.array() * (state.q - welford_mean).array();
    }
    if (adapt_mass && m + 1 == window_end && welford_n > 1) {
      const double n = static_cast<double>(welford_n);
      Vector variance = welford_m2 / (n - 1.0);
      // Shrink toward a small diagonal, as in Stan's windowed adaptation.
      variance = (n / (n + 5.0)) * variance.array() + (5.0 / (n + 5.0)) * 1e-3;
      chain.inv_mass_diag = variance;
      eps = find_reasonable_step_size(target, state, adapt.current(),
                                      chain.inv_mass_diag, rng);
      adapt.restart(eps);
    }
  }
  const double frozen =
      (config.n_warmup > 0) ? adapt.averaged() : config.initial_step_size;
  chain.final_step_size = frozen;
  chain.step_sizes.push_back(frozen);
  const auto t_warm = std::chrono::steady_clock::now();
  chain.warmup_seconds = std::chrono::duration<double>(t_warm - t_start).count();

  for (int m = 0; m < config.n_samples; ++m) {
    state = nuts_draw(target, state, frozen, chain.inv_mass_diag, rng,
                      config.max_tree_depth, stats);
    chain.draws.row(m) = state.q;
    chain.accept_stats.push_back(stats.accept_stat);
    if (stats.divergent) {
      ++chain.divergences;
    }
  }

  const auto t_end = std::chrono::steady_clock::now();
  chain.sampling_seconds = std::chrono::duration<double>(t_end - t_warm).count();
  chain.wall_seconds = std::chrono::duration<double>(t_end - t_start).count();
  return chain;
}

double effective_sample_size(const Vector& series) {
  const Index n = series.size();
  if (n < 4) {
    return static_cast<double>(n);
  }
  const double mean = series.mean();
  const Vector centered = series.array() - mean;
  const double var0 = centered.squaredNorm() / static_cast<double>(n);
  if (var0 <= 0.0) {
    return static_cast<double>(n);
  }
  auto autocov = [&](Index lag) {
    double acc = 0.0;
    for (Index t = 0; t + lag < n; ++t) {
      acc += centered[t] * centered[t + lag];
    }
    return acc / static_cast<double>(n);
  };
  // Geyer initial monotone positive sequence over pairs of lags.
  double rho_sum = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (Index lag = 1; lag + 1 < n; lag += 2) {
    const double pair = (autocov(lag) + autocov(lag + 1)) / var0;
    if (pair <= 0.0) {
      break;
    }
    const double capped = std::min(pair, prev_pair);
    rho_sum += capped;
    prev_pair = capped;
    if (lag > 1000) {
      break;
    }
  }
  const double ess = static_cast<double>(n) / (1.0 + 2.0 * rho_sum);
  return std::min(ess, static_cast<double>(n));
}

}  // namespace lggp
