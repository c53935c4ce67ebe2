#pragma once

// Numerics for the generalised scaled student (GSSt) family and its
// generalised hyperbolic secant (GHS) links. Neither has a closed-form
// normalising constant that is cheap to evaluate, so this header carries the
// quadrature, the inverse-CDF tables and the series sampler.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <utility>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "qvfgm/common.hpp"

namespace qvfgm::gsst {

/// sum_{l>=0} log(1 + s^2/(c+2l)^2), the log of the reciprocal infinite
/// product in the GHS carrier. Summed explicitly for l < L and closed by the
/// midpoint-rule integral of the remaining terms.
inline double log_secant_product(double s, double c) {
  const double s2 = s * s;
  if (s2 == 0.0) return 0.0;
  const double as = std::abs(s);
  std::size_t terms = 10000;
  terms = std::max<std::size_t>(terms, static_cast<std::size_t>(std::ceil(100.0 * as)));
  terms = std::min<std::size_t>(terms, 50'000'000);
  double sum = 0.0;
  // Kahan summation; the terms decay like 1/l^2 and there are many of them.
  double comp = 0.0;
  for (std::size_t l = 0; l < terms; ++l) {
    const double u = c + 2.0 * static_cast<double>(l);
    const double y = std::log1p(s2 / (u * u)) - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  // (1/2) int_U^inf log(1 + s^2/u^2) du with U = c + 2L - 1.
  const double big_u = c + 2.0 * static_cast<double>(terms) - 1.0;
  const double tail =
      0.5 * (kPi * as - big_u * std::log1p(s2 / (big_u * big_u)) - 2.0 * as * std::atan(big_u / as));
  return sum + tail;
}

/// log of  int_{-pi/2}^{pi/2} cos(t)^c exp(s t) dt, the GSSt normaliser in
/// angle coordinates (t = atan w).
inline double log_angle_integral(double s, double c) {
  const double mode = std::atan2(s, c);
  auto logf = [s, c](double t) { return c * std::log(std::cos(t)) + s * t; };
  const double peak = logf(mode);
  auto f = [&](double t) {
    const double v = std::cos(t);
    if (v <= 0.0) return 0.0;
    return std::exp(c * std::log(v) + s * t - peak);
  };
  boost::math::quadrature::tanh_sinh<double> integrator;
  double err_lo = 0.0, err_hi = 0.0;
  const double lo = integrator.integrate(f, -kPi / 2.0, mode, 1e-13, &err_lo);
  const double hi = integrator.integrate(f, mode, kPi / 2.0, 1e-13, &err_hi);
  const double total = lo + hi;
  if (!(total > 0.0) || !std::isfinite(total) || (err_lo + err_hi) > 1e-8 * total) {
    throw ConvergenceError("GSSt normaliser quadrature did not converge");
  }
  return peak + std::log(total);
}

/// Inverse-CDF table for the GSSt W-level law, built in angle coordinates
/// where the density cos(t)^c exp(s t) is log-concave on (-pi/2, pi/2).
class AngleTable {
 public:
  AngleTable(double s, double c) : s_(s), c_(c) {
    const double log_norm = log_angle_integral(s, c);
    const double mode = std::atan2(s, c);
    const double peak = logf(mode);
    constexpr double kDrop = 40.0;
    lo_ = edge(mode, -kPi / 2.0, peak - kDrop);
    hi_ = edge(mode, kPi / 2.0, peak - kDrop);
    for (std::size_t cells = 4096; cells <= 65536; cells *= 2) {
      build(cells, peak);
      const double grid_log_norm = peak + std::log(cum_.back());
      if (std::abs(grid_log_norm - log_norm) < 1e-5) return;
    }
    throw ConvergenceError("GSSt inverse-CDF grid failed its normalisation tolerance");
  }

  /// Draw t, then map back to w = tan(t).
  double sample(Rng& rng) const {
    const double target = uniform01(rng) * cum_.back();
    auto it = std::upper_bound(cum_.begin(), cum_.end(), target);
    std::size_t i = static_cast<std::size_t>(std::distance(cum_.begin(), it));
    i = std::clamp<std::size_t>(i, 1, cum_.size() - 1) - 1;
    // Density is linear across the cell: solve the trapezoid area for x.
    const double need = target - cum_[i];
    const double d0 = dens_[i], d1 = dens_[i + 1];
    const double slope = (d1 - d0) / step_;
    double x;
    if (std::abs(slope) * step_ < 1e-12 * std::max(d0, 1e-300)) {
      x = d0 > 0.0 ? need / d0 : 0.5 * step_;
    } else {
      const double disc = std::max(0.0, d0 * d0 + 2.0 * slope * need);
      x = (std::sqrt(disc) - d0) / slope;
    }
    x = std::clamp(x, 0.0, step_);
    return std::tan(lo_ + step_ * static_cast<double>(i) + x);
  }

 private:
  double logf(double t) const { return c_ * std::log(std::cos(t)) + s_ * t; }

  // Bisect toward the support edge for the point where logf drops to level.
  double edge(double mode, double bound, double level) const {
    double inside = mode, outside = bound;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (inside + outside);
      if (mid == inside || mid == outside) break;
      const double v = std::cos(mid) > 0.0 ? logf(mid) : kNegInf;
      (v > level ? inside : outside) = mid;
    }
    return outside;
  }

  void build(std::size_t cells, double peak) {
    step_ = (hi_ - lo_) / static_cast<double>(cells);
    dens_.assign(cells + 1, 0.0);
    cum_.assign(cells + 1, 0.0);
    for (std::size_t i = 0; i <= cells; ++i) {
      const double t = lo_ + step_ * static_cast<double>(i);
      dens_[i] = std::cos(t) > 0.0 ? std::exp(logf(t) - peak) : 0.0;
      if (i > 0) cum_[i] = cum_[i - 1] + 0.5 * step_ * (dens_[i - 1] + dens_[i]);
    }
  }

  double s_, c_;
  double lo_ = 0.0, hi_ = 0.0, step_ = 0.0;
  std::vector<double> dens_, cum_;
};

/// Process-wide cache of normalisers and tables keyed by (s, c). Reads take a
/// shared lock; a miss computes outside the lock and inserts under a unique
/// lock. Bounded: once full, misses are computed but not stored.
class Cache {
 public:
  static Cache& instance() {
    static Cache cache;
    return cache;
  }

  double log_normalizer(double s, double c) {
    const Key key{s, c};
    {
      std::shared_lock lock(mutex_);
      if (auto it = norms_.find(key); it != norms_.end()) return it->second;
    }
    const double value = log_angle_integral(s, c);
    std::unique_lock lock(mutex_);
    if (norms_.size() < kCapacity) norms_.emplace(key, value);
    return value;
  }

  std::shared_ptr<const AngleTable> table(double s, double c) {
    const Key key{s, c};
    {
      std::shared_lock lock(mutex_);
      if (auto it = tables_.find(key); it != tables_.end()) return it->second;
    }
    auto value = std::make_shared<const AngleTable>(s, c);
    std::unique_lock lock(mutex_);
    if (tables_.size() < kCapacity) tables_.emplace(key, value);
    return value;
  }

 private:
  using Key = std::pair<double, double>;
  static constexpr std::size_t kCapacity = 4096;
  std::shared_mutex mutex_;
  std::map<Key, double> norms_;
  std::map<Key, std::shared_ptr<const AngleTable>> tables_;
};

/// GHS link draw with mean c*w and variance c*(1 + w^2).
///
/// The characteristic function (cos th / cos(th + i u))^c factorises over the
/// poles lambda_k = (2k-1) pi / 2, so the variate is a series of independent
/// gamma differences  sum_k [G_k/(lambda_k - th) - G'_k/(lambda_k + th)],
/// G ~ Gamma(c, 1). The first kTerms are drawn exactly; the remainder is
/// replaced by a normal with its exact mean and variance.
inline double sample_ghs(double w, double c, Rng& rng) {
  constexpr int kTerms = 200;
  const double theta = std::atan(w);
  std::gamma_distribution<double> gamma(c, 1.0);
  double x = 0.0, head_mean = 0.0, head_var = 0.0;
  for (int k = 1; k <= kTerms; ++k) {
    const double lambda = (2.0 * k - 1.0) * kPi / 2.0;
    const double a = 1.0 / (lambda - theta), b = 1.0 / (lambda + theta);
    x += gamma(rng) * a - gamma(rng) * b;
    head_mean += a - b;
    head_var += a * a + b * b;
  }
  const double rest_mean = c * (w - head_mean);
  const double rest_var = std::max(0.0, c * ((1.0 + w * w) - head_var));
  return x + rest_mean + std::sqrt(rest_var) * std_normal(rng);
}

}  // namespace qvfgm::gsst
