#include "lggp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lggp {

double digamma(double x) {
  if (!(x > 0.0)) {
    throw InvalidInput("digamma requires x > 0");
  }
  double result = 0.0;
  while (x < 6.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  // Asymptotic expansion: log x - 1/(2x) - sum B_{2n} / (2n x^{2n}).
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double series = inv2 * (1.0 / 12.0 -
                  inv2 * (1.0 / 120.0 -
                  inv2 * (1.0 / 252.0 -
                  inv2 * (1.0 / 240.0 -
                  inv2 * (1.0 / 132.0 -
                  inv2 * (691.0 / 32760.0 -
                  inv2 * (1.0 / 12.0)))))));
  result += std::log(x) - 0.5 * inv - series;
  return result;
}

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double normal_quantile(double p) {
  // AS 241 algorithm PPND16.
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw InvalidInput("normal_quantile requires p in [0, 1]");
  }
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
              4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
              2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
              5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -value : value;
}

double normal_logpdf(double x, double mean, double sd) {
  if (!(sd > 0.0)) {
    throw InvalidInput("normal_logpdf requires sd > 0");
  }
  const double z = (x - mean) / sd;
  return -0.5 * kLog2Pi - std::log(sd) - 0.5 * z * z;
}

double half_normal_logpdf(double x, double sigma) {
  if (!(sigma > 0.0)) {
    throw InvalidInput("half_normal_logpdf requires sigma > 0");
  }
  if (x < 0.0) {
    return -std::numeric_limits<double>::infinity();
  }
  return std::log(2.0) + normal_logpdf(x, 0.0, sigma);
}

double half_normal_median(double sigma) {
  return sigma * normal_quantile(0.75);
}

double truncated_normal_logpdf(double x, double mean, double sd, double lower) {
  if (x < lower) {
    return -std::numeric_limits<double>::infinity();
  }
  const double z_lower = (lower - mean) / sd;
  // log of the upper-tail mass 1 - Phi(z_lower), via erfc.
  const double log_tail =
      std::log(0.5) + std::log(std::erfc(z_lower / std::sqrt(2.0)));
  return normal_logpdf(x, mean, sd) - log_tail;
}

double truncated_normal_median(double mean, double sd, double lower) {
  const double cdf_lower = normal_cdf((lower - mean) / sd);
  return mean + sd * normal_quantile(0.5 * (1.0 + cdf_lower));
}

double truncated_normal_sample(Rng& rng, double mean, double sd, double lower) {
  const double cdf_lower = normal_cdf((lower - mean) / sd);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = cdf_lower + (1.0 - cdf_lower) * unif(rng);
  u = std::min(u, std::nextafter(1.0, 0.0));
  return mean + sd * normal_quantile(u);
}

double empirical_quantile(std::vector<double> values, double p) {
  if (values.empty()) {
    throw InvalidInput("empirical_quantile of empty sample");
  }
  if (!(p >= 0.0 && p <= 1.0)) {
    throw InvalidInput("quantile probability outside [0, 1]");
  }
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  std::nth_element(values.begin(), values.begin() + static_cast<long>(lo),
                   values.end());
  const double v_lo = values[lo];
  std::nth_element(values.begin(), values.begin() + static_cast<long>(hi),
                   values.end());
  const double v_hi = values[hi];
  const double frac = pos - static_cast<double>(lo);
  return v_lo + frac * (v_hi - v_lo);
}

double empirical_quantile(const Vector& values, double p) {
  return empirical_quantile(
      std::vector<double>(values.data(), values.data() + values.size()), p);
}

}  // namespace lggp
