#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace qvfgm {

/// Random engine used throughout the library. Every sampler takes one by
/// reference; callers that need parallel work derive sub-streams.
using Rng = std::mt19937_64;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.14159265358979323846264338327950288;

/// Argument outside the support or parameter space of a family.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numeric routine (quadrature, CDF table, enumeration) could not reach its
/// tolerance within its configured budget.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested a finite variance where the family gives an infinite one.
class InfiniteVarianceError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Deterministic sub-stream: the same (seed, stream) pair always yields the
/// same engine state, independent of how many other streams exist.
inline Rng substream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32), 0x9e3779b9u};
  return Rng(seq);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Uniform on the open interval (0, 1).
inline double uniform_open(Rng& rng) {
  double u;
  do {
    u = uniform01(rng);
  } while (u <= 0.0);
  return u;
}

inline double std_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

/// log of a Gamma(shape, 1) variate, accurate for small shapes where the
/// variate itself would underflow to zero.
inline double log_gamma_variate(double shape, Rng& rng) {
  if (shape >= 1.0) {
    return std::log(std::gamma_distribution<double>(shape, 1.0)(rng));
  }
  const double g = std::gamma_distribution<double>(shape + 1.0, 1.0)(rng);
  return std::log(g) + std::log(uniform_open(rng)) / shape;
}

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

inline bool is_nonneg_integer(double x) {
  return x >= 0.0 && std::isfinite(x) && std::floor(x) == x;
}

}  // namespace qvfgm
