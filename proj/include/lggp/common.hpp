#ifndef LGGP_COMMON_HPP
#define LGGP_COMMON_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace lggp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Invalid arguments, shape mismatches, domain violations.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Linear-algebra breakdowns that survive the jitter schedule.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double min_eigenvalue_estimate)
      : std::runtime_error(what), min_eigenvalue(min_eigenvalue_estimate) {}
  explicit NumericalError(const std::string& what)
      : std::runtime_error(what), min_eigenvalue(0.0) {}
  double min_eigenvalue;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"),
        line_number(line) {}
  long line_number;
};

using Rng = std::mt19937_64;

// Derives an independent engine from a master seed and a stream tag, so
// that distinct pipeline stages never share a raw seed.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{seed, stream ^ 0x9e3779b97f4a7c15ull};
  return Rng(seq);
}

}  // namespace lggp

#endif
