#ifndef LGGP_GP_HPP
#define LGGP_GP_HPP

#include <vector>

#include "lggp/common.hpp"

namespace lggp {

// Measurement locations, one row per point. Coordinates are assumed to be
// normalized (dimensionless); K = rows, D = cols.
struct InputGrid {
  Matrix points;  // K x D

  InputGrid() = default;
  explicit InputGrid(Matrix pts);

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }

  static InputGrid uniform_1d(Index k, double lo = 0.0, double hi = 1.0);
};

// Per-process GP hyperparameters: constant mean, independent noise std,
// signal std, and one length scale per input dimension.
struct KernelParams {
  double mean = 0.0;
  double noise_std = 0.0;
  double signal_std = 1.0;
  Vector length_scales;  // size D, all > 0

  void validate(Index dim) const;
};

// Squared-exponential cross-covariance, evaluated in the per-dimension
// product form: sigma_s^2 * prod_d exp(-(a_id - b_jd)^2 / (2 l_d^2)).
// No noise term is added.
Matrix se_covariance(const InputGrid& grid_a, const InputGrid& grid_b,
                     const KernelParams& params);

// cov + sigma_e^2 * I.
Matrix add_noise_diag(Matrix cov, double noise_std);

// Relative jitter escalation schedule, as multiples of mean(diag).
inline const std::vector<double>& default_jitter_schedule() {
  static const std::vector<double> schedule = {0.0, 1e-10, 1e-8, 1e-6, 1e-4};
  return schedule;
}

// Symmetric covariance matrix plus its lower Cholesky factor of
// cov + jitter * I, for the smallest jitter in the schedule that succeeds.
class CholeskyFactor {
 public:
  // Throws NumericalError (carrying a minimum-eigenvalue estimate) when the
  // schedule is exhausted.
  static CholeskyFactor compute(
      const Matrix& cov,
      const std::vector<double>& jitter_schedule = default_jitter_schedule());

  const Matrix& matrix_lower() const { return lower_; }
  double jitter() const { return jitter_; }
  Index size() const { return lower_.rows(); }

  double log_det() const;                 // of cov + jitter I
  Vector solve(const Vector& rhs) const;  // (cov + jitter I)^{-1} rhs
  Matrix solve(const Matrix& rhs) const;
  Vector half_solve(const Vector& rhs) const;  // L^{-1} rhs
  Matrix inverse() const;

 private:
  Matrix lower_;
  double jitter_ = 0.0;
};

// log N(x | mean, cov) through the Cholesky factor.
double gaussian_logpdf(const Vector& x, const Vector& mean,
                       const CholeskyFactor& chol);

double gaussian_logpdf(const Vector& x, const Vector& mean, const Matrix& cov);

struct GpPrediction {
  Vector mean;
  Matrix cov;
};

// Conditional GP at test locations given latent values on the training grid.
// The training covariance is the SE kernel plus the noise diagonal; the
// predictive covariance diagonal is clamped at zero after subtraction.
GpPrediction gp_predict(const InputGrid& train_grid, const InputGrid& test_grid,
                        const Vector& latent_values, const KernelParams& params);

// mu * 1 + chol(SE + sigma_e^2 I) * xi with the mean taken from params.
Vector sample_gp_realization(const InputGrid& grid, const KernelParams& params,
                             Rng& rng);

// Draw from N(mean, cov). Falls back to an eigendecomposition with
// eigenvalues clamped at zero when the factorization schedule fails, so
// degenerate (semidefinite) covariances are handled.
Vector sample_gaussian(const Vector& mean, const Matrix& cov, Rng& rng);

}  // namespace lggp

#endif
