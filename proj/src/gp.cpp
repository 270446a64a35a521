#include "lggp/gp.hpp"

#include <cmath>
#include <limits>

namespace lggp {

InputGrid::InputGrid(Matrix pts) : points(std::move(pts)) {
  if (points.cols() < 1) {
    throw InvalidInput("grid needs D >= 1 dimensions");
  }
  // Zero rows are allowed so prediction grids may be empty.
  if (!points.allFinite()) {
    throw InvalidInput("grid coordinates must be finite");
  }
}

InputGrid InputGrid::uniform_1d(Index k, double lo, double hi) {
  Matrix pts(k, 1);
  pts.col(0) = Vector::LinSpaced(k, lo, hi);
  return InputGrid(std::move(pts));
}

void KernelParams::validate(Index dim) const {
  if (length_scales.size() != dim) {
    throw InvalidInput("length scale count does not match grid dimension");
  }
  if (!(noise_std > 0.0) || !std::isfinite(noise_std)) {
    throw InvalidInput("noise std must be positive and finite");
  }
  if (!(signal_std > 0.0) || !std::isfinite(signal_std)) {
    throw InvalidInput("signal std must be positive and finite");
  }
  for (Index d = 0; d < dim; ++d) {
    if (!(length_scales[d] > 0.0) || !std::isfinite(length_scales[d])) {
      throw InvalidInput("length scales must be positive and finite");
    }
  }
  if (!std::isfinite(mean)) {
    throw InvalidInput("mean must be finite");
  }
}

Matrix se_covariance(const InputGrid& grid_a, const InputGrid& grid_b,
                     const KernelParams& params) {
  if (grid_a.dim() != grid_b.dim()) {
    throw InvalidInput("grids differ in dimension");
  }
  params.validate(grid_a.dim());
  const Index na = grid_a.size();
  const Index nb = grid_b.size();
  const Index dim = grid_a.dim();
  const double sig2 = params.signal_std * params.signal_std;
  Matrix cov(na, nb);
  for (Index i = 0; i < na; ++i) {
    for (Index j = 0; j < nb; ++j) {
      double value = sig2;
      for (Index d = 0; d < dim; ++d) {
        const double delta = grid_a.points(i, d) - grid_b.points(j, d);
        const double l = params.length_scales[d];
        value *= std::exp(-0.5 * delta * delta / (l * l));
      }
      cov(i, j) = value;
    }
  }
  return cov;
}

Matrix add_noise_diag(Matrix cov, double noise_std) {
  if (cov.rows() != cov.cols()) {
    throw InvalidInput("noise diagonal requires a square matrix");
  }
  if (noise_std < 0.0) {
    throw InvalidInput("noise std must be nonnegative");
  }
  cov.diagonal().array() += noise_std * noise_std;
  return cov;
}

CholeskyFactor CholeskyFactor::compute(const Matrix& cov,
                                       const std::vector<double>& schedule) {
  if (cov.rows() != cov.cols()) {
    throw InvalidInput("Cholesky requires a square matrix");
  }
  const double scale = cov.diagonal().mean();
  CholeskyFactor result;
  for (double relative : schedule) {
    const double jitter = relative * scale;
    Matrix attempt = cov;
    attempt.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(attempt);
    if (llt.info() == Eigen::Success) {
      result.lower_ = llt.matrixL();
      result.jitter_ = jitter;
      return result;
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eigs(cov, Eigen::EigenvaluesOnly);
  const double min_eig = eigs.info() == Eigen::Success
                             ? eigs.eigenvalues().minCoeff()
                             : std::numeric_limits<double>::quiet_NaN();
  throw NumericalError("Cholesky failed after exhausting the jitter schedule",
                       min_eig);
}

double CholeskyFactor::log_det() const {
  return 2.0 * lower_.diagonal().array().log().sum();
}

Vector CholeskyFactor::solve(const Vector& rhs) const {
  Vector half = lower_.triangularView<Eigen::Lower>().solve(rhs);
  return lower_.transpose().triangularView<Eigen::Upper>().solve(half);
}

Matrix CholeskyFactor::solve(const Matrix& rhs) const {
  Matrix half = lower_.triangularView<Eigen::Lower>().solve(rhs);
  return lower_.transpose().triangularView<Eigen::Upper>().solve(half);
}

Vector CholeskyFactor::half_solve(const Vector& rhs) const {
  return lower_.triangularView<Eigen::Lower>().solve(rhs);
}

Matrix CholeskyFactor::inverse() const {
  return solve(Matrix::Identity(lower_.rows(), lower_.cols()));
}

double gaussian_logpdf(const Vector& x, const Vector& mean,
                       const CholeskyFactor& chol) {
  if (x.size() != mean.size() || x.size() != chol.size()) {
    throw InvalidInput("gaussian_logpdf dimension mismatch");
  }
  const Vector white = chol.half_solve(x - mean);
  return -0.5 * static_cast<double>(x.size()) * kLog2Pi - 0.5 * chol.log_det() -
         0.5 * white.squaredNorm();
}

double gaussian_logpdf(const Vector& x, const Vector& mean, const Matrix& cov) {
  return gaussian_logpdf(x, mean, CholeskyFactor::compute(cov));
}

Vector sample_gp_realization(const InputGrid& grid, const KernelParams& params,
                             Rng& rng) {
  const Matrix cov =
      add_noise_diag(se_covariance(grid, grid, params), params.noise_std);
  const auto chol = CholeskyFactor::compute(cov);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector xi(grid.size());
  for (Index i = 0; i < xi.size(); ++i) {
    xi[i] = normal(rng);
  }
  return (chol.matrix_lower() * xi).array() + params.mean;
}

Vector sample_gaussian(const Vector& mean, const Matrix& cov, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector xi(mean.size());
  for (Index i = 0; i < xi.size(); ++i) {
    xi[i] = normal(rng);
  }
  try {
    const auto chol = CholeskyFactor::compute(cov);
    return mean + chol.matrix_lower() * xi;
  } catch (const NumericalError&) {
    Eigen::SelfAdjointEigenSolver<Matrix> eigs(cov);
    if (eigs.info() != Eigen::Success) {
      throw NumericalError("Gaussian sampling failed for a degenerate covariance");
    }
    const Vector scale = eigs.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return mean + eigs.eigenvectors() * scale.asDiagonal() * xi;
  }
}

GpPrediction gp_predict(const InputGrid& train_grid, const InputGrid& test_grid,
                        const Vector& latent_values,
                        const KernelParams& params) {
  if (latent_values.size() != train_grid.size()) {
    throw InvalidInput("latent values length must equal training grid size");
  }
  GpPrediction out;
  if (test_grid.points.rows() == 0) {
    out.mean = Vector(0);
    out.cov = Matrix(0, 0);
    return out;
  }
  const Matrix k_train =
      add_noise_diag(se_covariance(train_grid, train_grid, params),
                     params.noise_std);
  const auto chol = CholeskyFactor::compute(k_train);
  const Matrix k_cross = se_covariance(test_grid, train_grid, params);
  const Vector centered = latent_values.array() - params.mean;
  out.mean = (k_cross * chol.solve(centered)).array() + params.mean;
  const Matrix k_test = se_covariance(test_grid, test_grid, params);
  out.cov = k_test - k_cross * chol.solve(k_cross.transpose());
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  for (Index i = 0; i < out.cov.rows(); ++i) {
    if (out.cov(i, i) < 0.0) {
      out.cov(i, i) = 0.0;
    }
  }
  return out;
}

}  // namespace lggp
