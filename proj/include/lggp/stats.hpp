#ifndef LGGP_STATS_HPP
#define LGGP_STATS_HPP

#include <vector>

#include "lggp/common.hpp"

namespace lggp {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Digamma via downward recurrence onto x >= 6 plus the asymptotic series.
// Relative accuracy better than 1e-12 on [1e-6, 1e6].
double digamma(double x);

// Standard normal cdf, evaluated through erfc for tail accuracy.
double normal_cdf(double z);

// Inverse standard normal cdf (Wichura's AS 241, double precision).
double normal_quantile(double p);

// log N(x | mean, sd^2)
double normal_logpdf(double x, double mean, double sd);

// Half-normal on [0, inf) with scale sigma: log 2 + log N(x | 0, sigma^2).
double half_normal_logpdf(double x, double sigma);

double half_normal_median(double sigma);

// Normal truncated to [lower, inf), renormalized. -inf below the bound.
double truncated_normal_logpdf(double x, double mean, double sd, double lower);

double truncated_normal_median(double mean, double sd, double lower);

// Inverse-cdf draw from the [lower, inf) truncation of N(mean, sd^2).
double truncated_normal_sample(Rng& rng, double mean, double sd, double lower);

// Equal-tailed empirical quantile with linear interpolation between order
// statistics. `p` in [0, 1]; the input is copied and partially sorted.
double empirical_quantile(std::vector<double> values, double p);

double empirical_quantile(const Vector& values, double p);

}  // namespace lggp

#endif
