#pragma once

// The six natural exponential families with quadratic variance function, in
// mean parameterisation. Each family supplies the canonical map theta(w), the
// cumulant M(theta(w)), the log-Jacobian log|theta'(w)|, the link carrier b
// and the conjugate normaliser h. All densities are returned on the log scale.
//
//   W ~ h(s,c) exp{theta(w) s - c M(theta(w))} |J(w)|            (anchor / node)
//   S ~ b(s,c) exp{theta(w) s - c M(theta(w))}                    (link given W)

#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "qvfgm/common.hpp"
#include "qvfgm/gsst.hpp"

namespace qvfgm {

enum class FamilyKind { Normal, Gamma, InverseGamma, Beta, InverseBeta, GSSt };

inline constexpr std::array<FamilyKind, 6> kAllFamilies = {
    FamilyKind::Normal, FamilyKind::Gamma,       FamilyKind::InverseGamma,
    FamilyKind::Beta,   FamilyKind::InverseBeta, FamilyKind::GSSt};

struct VarianceCoefficients {
  double nu0;
  double nu1;
  double nu2;
};

struct CanonicalMaps {
  double theta;
  double m_theta;
  double log_jacobian;
};

enum class LinkSupport { Real, PositiveReal, NonnegInteger };

inline constexpr VarianceCoefficients variance_coefficients(FamilyKind f) {
  switch (f) {
    case FamilyKind::Normal: return {1.0, 0.0, 0.0};
    case FamilyKind::Gamma: return {0.0, 1.0, 0.0};
    case FamilyKind::InverseGamma: return {0.0, 0.0, 1.0};
    case FamilyKind::Beta: return {0.0, 1.0, -1.0};
    case FamilyKind::InverseBeta: return {0.0, 1.0, 1.0};
    case FamilyKind::GSSt: return {1.0, 0.0, 1.0};
  }
  return {0.0, 0.0, 0.0};
}

inline constexpr LinkSupport link_support(FamilyKind f) {
  switch (f) {
    case FamilyKind::Normal:
    case FamilyKind::GSSt: return LinkSupport::Real;
    case FamilyKind::InverseGamma: return LinkSupport::PositiveReal;
    default: return LinkSupport::NonnegInteger;
  }
}

/// Beta and inverse beta links are binomial / negative binomial, so their edge
/// intensities are trial counts.
inline constexpr bool integer_intensity(FamilyKind f) {
  return f == FamilyKind::Beta || f == FamilyKind::InverseBeta;
}

inline std::string_view to_string(FamilyKind f) {
  switch (f) {
    case FamilyKind::Normal: return "normal";
    case FamilyKind::Gamma: return "gamma";
    case FamilyKind::InverseGamma: return "inverse-gamma";
    case FamilyKind::Beta: return "beta";
    case FamilyKind::InverseBeta: return "inverse-beta";
    case FamilyKind::GSSt: return "gsst";
  }
  return "?";
}

inline std::optional<FamilyKind> parse_family(std::string_view name) {
  for (FamilyKind f : kAllFamilies) {
    if (name == to_string(f)) return f;
  }
  if (name == "inverse_gamma" || name == "igamma" || name == "invgamma") return FamilyKind::InverseGamma;
  if (name == "inverse_beta" || name == "ibeta" || name == "invbeta") return FamilyKind::InverseBeta;
  return std::nullopt;
}

/// Membership of the mean-parameter space M.
inline bool in_mean_space(FamilyKind f, double mu) {
  if (!std::isfinite(mu)) return false;
  switch (f) {
    case FamilyKind::Normal:
    case FamilyKind::GSSt: return true;
    case FamilyKind::Beta: return mu > 0.0 && mu < 1.0;
    default: return mu > 0.0;
  }
}

/// Admissible conjugate hyperparameters (s, c) for the W-level law.
inline bool admissible(FamilyKind f, double s, double c) {
  if (!std::isfinite(s) || !std::isfinite(c) || !(c > 0.0)) return false;
  switch (f) {
    case FamilyKind::Normal:
    case FamilyKind::GSSt: return true;
    case FamilyKind::Beta: return s > 0.0 && s < c;
    default: return s > 0.0;
  }
}

inline bool in_link_support(FamilyKind f, double s) {
  switch (link_support(f)) {
    case LinkSupport::Real: return std::isfinite(s);
    case LinkSupport::PositiveReal: return s > 0.0 && std::isfinite(s);
    case LinkSupport::NonnegInteger: return is_nonneg_integer(s);
  }
  return false;
}

namespace detail {

inline void require_mean(FamilyKind f, double mu) {
  if (!in_mean_space(f, mu)) {
    throw DomainError(std::string(to_string(f)) + ": value " + std::to_string(mu) +
                      " outside the mean parameter space");
  }
}

inline void require_admissible(FamilyKind f, double s, double c) {
  if (!admissible(f, s, c)) {
    throw DomainError(std::string(to_string(f)) + ": inadmissible hyperparameters (s=" +
                      std::to_string(s) + ", c=" + std::to_string(c) + ")");
  }
}

inline void require_intensity(FamilyKind f, double c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw DomainError(std::string(to_string(f)) + ": edge intensity must be positive");
  }
  if (integer_intensity(f) && std::floor(c) != c) {
    throw DomainError(std::string(to_string(f)) + ": edge intensity must be an integer");
  }
}

}  // namespace detail

/// V(mu) = nu0 + nu1 mu + nu2 mu^2.
inline double variance_function(FamilyKind f, double mu) {
  detail::require_mean(f, mu);
  const auto v = variance_coefficients(f);
  return v.nu0 + mu * (v.nu1 + v.nu2 * mu);
}

inline CanonicalMaps canonical_maps(FamilyKind f, double w) {
  detail::require_mean(f, w);
  switch (f) {
    case FamilyKind::Normal: return {w, 0.5 * w * w, 0.0};
    case FamilyKind::Gamma: return {std::log(w), w, -std::log(w)};
    // theta = -1/w has derivative 1/w^2; with it the anchor law is
    // IGa(c + 1, s), whose mean s/c matches the other five families.
    case FamilyKind::InverseGamma: return {-1.0 / w, std::log(w), -2.0 * std::log(w)};
    case FamilyKind::Beta: {
      const double l1m = std::log1p(-w);
      return {std::log(w) - l1m, -l1m, -std::log(w) - l1m};
    }
    case FamilyKind::InverseBeta: {
      const double lp1 = std::log1p(w);
      return {std::log(w) - lp1, lp1, -std::log(w) - lp1};
    }
    case FamilyKind::GSSt: {
      const double l = std::log1p(w * w);
      return {std::atan(w), 0.5 * l, -l};
    }
  }
  return {0.0, 0.0, 0.0};
}

/// log b(s, c), the link carrier. Support violations are domain errors.
inline double log_b(FamilyKind f, double s, double c) {
  detail::require_intensity(f, c);
  if (!in_link_support(f, s)) {
    throw DomainError(std::string(to_string(f)) + ": link value outside support");
  }
  switch (f) {
    case FamilyKind::Normal: return -0.5 * std::log(2.0 * kPi * c) - s * s / (2.0 * c);
    case FamilyKind::Gamma: return s * std::log(c) - std::lgamma(s + 1.0);
    case FamilyKind::InverseGamma: return (c - 1.0) * std::log(s) - std::lgamma(c);
    case FamilyKind::Beta:
      if (s > c) throw DomainError("beta: link value exceeds the trial count");
      return std::lgamma(c + 1.0) - std::lgamma(s + 1.0) - std::lgamma(c - s + 1.0);
    case FamilyKind::InverseBeta: return std::lgamma(c + s) - std::lgamma(s + 1.0) - std::lgamma(c);
    case FamilyKind::GSSt:
      // 2^{c-2} |Gamma((c + i s)/2)|^2 / (pi Gamma(c)), written through the
      // reciprocal product  |Gamma((c+is)/2)|^2 = Gamma(c/2)^2 / prod(...).
      return (c - 2.0) * std::log(2.0) - std::lgamma(c) + 2.0 * std::lgamma(0.5 * c) - std::log(kPi) -
             gsst::log_secant_product(s, c);
  }
  return kNegInf;
}

/// log h(s, c), the normaliser of the W-level law.
inline double log_h(FamilyKind f, double s, double c) {
  detail::require_admissible(f, s, c);
  switch (f) {
    case FamilyKind::Normal: return 0.5 * std::log(c / (2.0 * kPi)) - s * s / (2.0 * c);
    case FamilyKind::Gamma: return s * std::log(c) - std::lgamma(s);
    case FamilyKind::InverseGamma: return (c + 1.0) * std::log(s) - std::lgamma(c + 1.0);
    case FamilyKind::Beta: return std::lgamma(c) - std::lgamma(s) - std::lgamma(c - s);
    case FamilyKind::InverseBeta: return std::lgamma(s + c + 1.0) - std::lgamma(s) - std::lgamma(c + 1.0);
    case FamilyKind::GSSt: return -gsst::Cache::instance().log_normalizer(s, c);
  }
  return kNegInf;
}

/// log f(w | s, c). Serves the anchor, the node level (with s*, c*) and the
/// conjugate anchor conditional.
inline double log_w_density(FamilyKind f, double w, double s, double c) {
  const auto m = canonical_maps(f, w);
  return log_h(f, s, c) + m.theta * s - c * m.m_theta + m.log_jacobian;
}

/// log f(s | theta(w), c). A zero intensity is the point mass at zero.
inline double log_link_density(FamilyKind f, double s, double w, double c) {
  if (c == 0.0) return s == 0.0 ? 0.0 : kNegInf;
  const auto m = canonical_maps(f, w);
  return log_b(f, s, c) + m.theta * s - c * m.m_theta;
}

inline double sample_w(FamilyKind f, double s, double c, Rng& rng) {
  detail::require_admissible(f, s, c);
  switch (f) {
    case FamilyKind::Normal: return s / c + std_normal(rng) / std::sqrt(c);
    case FamilyKind::Gamma: {
      const double x = std::exp(log_gamma_variate(s, rng) - std::log(c));
      return x > 0.0 ? x : std::numeric_limits<double>::min();
    }
    case FamilyKind::InverseGamma:
      return std::exp(std::log(s) - log_gamma_variate(c + 1.0, rng));
    case FamilyKind::Beta: {
      const double lx = log_gamma_variate(s, rng);
      const double ly = log_gamma_variate(c - s, rng);
      double w = 1.0 / (1.0 + std::exp(ly - lx));
      if (w <= 0.0) w = std::numeric_limits<double>::min();
      if (w >= 1.0) w = std::nextafter(1.0, 0.0);
      return w;
    }
    case FamilyKind::InverseBeta: {
      const double w = std::exp(log_gamma_variate(s, rng) - log_gamma_variate(c + 1.0, rng));
      return w > 0.0 ? w : std::numeric_limits<double>::min();
    }
    case FamilyKind::GSSt: return gsst::Cache::instance().table(s, c)->sample(rng);
  }
  return 0.0;
}

/// Link draw given the anchor: N(c w, var c), Po(c w), Ga(c, rate 1/w),
/// Bin(c, w), NB(c, 1/(w+1)) or GHS(c w, c(1+w^2)).
inline double sample_link(FamilyKind f, double w, double c, Rng& rng) {
  detail::require_mean(f, w);
  if (c == 0.0) return 0.0;
  detail::require_intensity(f, c);
  switch (f) {
    case FamilyKind::Normal: return c * w + std::sqrt(c) * std_normal(rng);
    case FamilyKind::Gamma:
      return static_cast<double>(std::poisson_distribution<long long>(c * w)(rng));
    case FamilyKind::InverseGamma: {
      const double x = std::exp(log_gamma_variate(c, rng) + std::log(w));
      return x > 0.0 ? x : std::numeric_limits<double>::min();
    }
    case FamilyKind::Beta:
      return static_cast<double>(std::binomial_distribution<long long>(static_cast<long long>(c), w)(rng));
    case FamilyKind::InverseBeta:
      return static_cast<double>(
          std::negative_binomial_distribution<long long>(static_cast<long long>(c), 1.0 / (w + 1.0))(rng));
    case FamilyKind::GSSt: return gsst::sample_ghs(w, c, rng);
  }
  return 0.0;
}

}  // namespace qvfgm
