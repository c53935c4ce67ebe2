#pragma once

// Independent oracles. Densities here come from Boost.Math's standard
// distributions and the moment / correlation targets are re-derived locally;
// nothing below calls the family density code or the moment formulas it
// checks. Only the sampler and conditional under test are invoked.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/inverse_gamma.hpp>
#include <boost/math/distributions/negative_binomial.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "qvfgm/common.hpp"
#include "qvfgm/family.hpp"
#include "qvfgm/inference.hpp"
#include "qvfgm/model.hpp"

namespace qvfgm::verify {

struct OracleReport {
  std::string check_name;
  double target_value = 0.0;
  double estimate = 0.0;
  double mc_standard_error = 0.0;
  /// Absolute tolerance for deterministic checks; 0 means the SE rule applies.
  double tolerance = 0.0;
  double se_multiplier = 3.0;
  bool pass = false;
};

inline OracleReport se_report(std::string name, double target, double estimate, double se, double k) {
  OracleReport r{std::move(name), target, estimate, se, 0.0, k, false};
  r.pass = std::abs(estimate - target) <= k * se;
  return r;
}

inline OracleReport tolerance_report(std::string name, double target, double estimate, double tol) {
  OracleReport r{std::move(name), target, estimate, 0.0, tol, 0.0, false};
  r.pass = std::abs(estimate - target) <= tol;
  return r;
}

inline bool all_pass(const std::vector<OracleReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.pass; });
}

/// 3 standard errors, widened to 4 once a bundle holds more than 20 checks.
inline double se_multiplier(std::size_t simultaneous) { return simultaneous > 20 ? 4.0 : 3.0; }

namespace oracle {

namespace bm = boost::math;

/// Node / anchor density through the named standard distribution.
inline double log_node_density(FamilyKind f, double y, double s, double c) {
  switch (f) {
    case FamilyKind::Normal: return std::log(bm::pdf(bm::normal_distribution<>(s / c, 1.0 / std::sqrt(c)), y));
    case FamilyKind::Gamma: return std::log(bm::pdf(bm::gamma_distribution<>(s, 1.0 / c), y));
    case FamilyKind::InverseGamma: return std::log(bm::pdf(bm::inverse_gamma_distribution<>(c + 1.0, s), y));
    case FamilyKind::Beta: return std::log(bm::pdf(bm::beta_distribution<>(s, c - s), y));
    case FamilyKind::InverseBeta: {
      // Beta prime(s, c + 1) via x = y / (1 + y).
      const double x = y / (1.0 + y);
      return std::log(bm::pdf(bm::beta_distribution<>(s, c + 1.0), x)) - 2.0 * std::log1p(y);
    }
    case FamilyKind::GSSt: break;
  }
  throw DomainError("no standard-distribution oracle for gsst");
}

inline double log_link_density(FamilyKind f, double s, double w, double c) {
  if (c == 0.0) return s == 0.0 ? 0.0 : kNegInf;
  switch (f) {
    case FamilyKind::Normal: return std::log(bm::pdf(bm::normal_distribution<>(c * w, std::sqrt(c)), s));
    case FamilyKind::Gamma: return std::log(bm::pdf(bm::poisson_distribution<>(c * w), s));
    case FamilyKind::InverseGamma: return std::log(bm::pdf(bm::gamma_distribution<>(c, w), s));
    case FamilyKind::Beta:
      if (s > c) return kNegInf;
      return std::log(bm::pdf(bm::binomial_distribution<>(c, w), s));
    case FamilyKind::InverseBeta: return std::log(bm::pdf(bm::negative_binomial_distribution<>(c, 1.0 / (w + 1.0)), s));
    case FamilyKind::GSSt: break;
  }
  throw DomainError("no standard-distribution oracle for gsst");
}

inline double log_priors(const PriorConfig& prior, FamilyKind f, const ModelParams& params) {
  double lp = std::log(bm::pdf(bm::gamma_distribution<>(prior.ac, 1.0 / prior.bc), params.c0));
  switch (prior.s0_kind) {
    case S0PriorKind::Normal:
      lp += std::log(bm::pdf(bm::normal_distribution<>(prior.mu_s, 1.0 / std::sqrt(prior.tau_s)), params.s0));
      break;
    case S0PriorKind::Gamma: lp += std::log(bm::pdf(bm::gamma_distribution<>(prior.a_s, 1.0 / prior.b_s), params.s0)); break;
    case S0PriorKind::UniformBelowC0: lp += -std::log(params.c0); break;
  }
  for (int j = 0; j < params.nodes(); ++j) {
    for (int k = j + 1; k < params.nodes(); ++k) {
      const double c = params.edge_intensity(j, k);
      lp += integer_intensity(f) ? std::log(bm::pdf(bm::poisson_distribution<>(prior.d0), c))
                                 : std::log(bm::pdf(bm::gamma_distribution<>(prior.a0, 1.0 / prior.b0), c));
    }
  }
  return lp;
}

/// Joint log density of data, latents and parameters, assembled term by term.
inline double log_joint(const PriorConfig& prior, const ModelParams& params, const Dataset& data,
                        const std::vector<ReplicateLatents>& latents) {
  const auto f = params.family;
  const int p = params.nodes();
  double total = log_priors(prior, f, params);
  for (int i = 0; i < data.replicates(); ++i) {
    const auto& lat = latents[static_cast<std::size_t>(i)];
    total += oracle::log_node_density(f, lat.w, params.s0, params.c0);
    for (int j = 0; j < p; ++j) {
      double s_star = params.s0, c_star = params.c0;
      for (int k = 0; k < p; ++k) {
        if (k == j) continue;
        s_star += lat.links(j, k);
        c_star += params.edge_intensity(j, k);
        if (k > j) total += oracle::log_link_density(f, lat.links(j, k), lat.w, params.edge_intensity(j, k));
      }
      total += oracle::log_node_density(f, data.y(i, j), s_star, c_star);
    }
  }
  return total;
}

}  // namespace oracle

/// Empirical node means and variances against s0/c0 and V(s0/c0)/(c0 - nu2).
inline std::vector<OracleReport> mc_moment_check(const ModelParams& params, int replicates, std::uint64_t seed) {
  if (params.family == FamilyKind::GSSt) throw DomainError("mc_moment_check needs an exact-sampler family");
  if (replicates < 10000) throw std::invalid_argument("mc_moment_check needs at least 1e4 replicates");
  // Local table of (nu0, nu1, nu2).
  double nu0 = 0, nu1 = 0, nu2 = 0;
  switch (params.family) {
    case FamilyKind::Normal: nu0 = 1; break;
    case FamilyKind::Gamma: nu1 = 1; break;
    case FamilyKind::InverseGamma: nu2 = 1; break;
    case FamilyKind::Beta: nu1 = 1, nu2 = -1; break;
    case FamilyKind::InverseBeta: nu1 = 1, nu2 = 1; break;
    case FamilyKind::GSSt: break;
  }
  const double mu = params.s0 / params.c0;
  const double var_target = (nu0 + nu1 * mu + nu2 * mu * mu) / (params.c0 - nu2);
  const auto sim = simulate(params, replicates, seed);
  const int p = params.nodes();
  const double k = se_multiplier(static_cast<std::size_t>(2 * p));
  const double n = static_cast<double>(replicates);
  std::vector<OracleReport> reports;
  for (int j = 0; j < p; ++j) {
    const Eigen::VectorXd col = sim.data.y.col(j);
    const double m = col.mean();
    const Eigen::ArrayXd d = col.array() - m;
    const double m2 = d.square().mean();
    const double m4 = d.square().square().mean();
    const double var = m2 * n / (n - 1.0);
    const std::string node = sim.data.node_names[static_cast<std::size_t>(j)];
    reports.push_back(se_report("mean[" + node + "]", mu, m, std::sqrt(m2 / n), k));
    reports.push_back(se_report("variance[" + node + "]", var_target, var, std::sqrt(std::max(0.0, m4 - m2 * m2) / n), k));
  }
  return reports;
}

/// Correlation implied by the intensities, re-derived locally.
inline double correlation_target(const ModelParams& params, int j, int k) {
  const auto& c = params.edge_intensity;
  double rj = 0.0, rk = 0.0;
  for (int l = 0; l < params.nodes(); ++l) {
    if (l != j) rj += c(j, l);
    if (l != k) rk += c(k, l);
  }
  return (params.c0 * c(j, k) + rj * rk) / ((params.c0 + rj) * (params.c0 + rk));
}

/// Empirical Pearson correlations; the pass rule is applied on the Fisher z
/// scale with standard error 1/sqrt(n - 3).
inline std::vector<OracleReport> mc_correlation_check(const ModelParams& params, int replicates, std::uint64_t seed) {
  if (replicates < 10) throw std::invalid_argument("mc_correlation_check needs more replicates");
  const auto sim = simulate(params, replicates, seed);
  const int p = params.nodes();
  const auto pairs = edge_pairs(p);
  const double k = se_multiplier(pairs.size());
  const double z_se = 1.0 / std::sqrt(static_cast<double>(replicates) - 3.0);
  const Eigen::MatrixXd centered = sim.data.y.rowwise() - sim.data.y.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered;
  std::vector<OracleReport> reports;
  for (auto [j, l] : pairs) {
    const double r = cov(j, l) / std::sqrt(cov(j, j) * cov(l, l));
    const double rho = correlation_target(params, j, l);
    OracleReport rep;
    rep.check_name = "corr[" + sim.data.node_names[static_cast<std::size_t>(j)] + "," +
                     sim.data.node_names[static_cast<std::size_t>(l)] + "]";
    rep.target_value = rho;
    rep.estimate = r;
    rep.mc_standard_error = (1.0 - rho * rho) * z_se;
    rep.se_multiplier = k;
    rep.pass = std::abs(std::atanh(r) - std::atanh(rho)) <= k * z_se;
    reports.push_back(rep);
  }
  return reports;
}

/// Numeric integral (continuous) or sum (discrete) of the W-level density and
/// of the link density at (w, c); both must equal one.
inline std::vector<OracleReport> density_normalization_check(FamilyKind f, double s, double c, double w,
                                                             double link_c) {
  using namespace boost::math::quadrature;
  std::vector<OracleReport> reports;
  auto wdens = [&](double x) {
    if (!in_mean_space(f, x)) return 0.0;
    return std::exp(log_w_density(f, x, s, c));
  };
  const double centre = f == FamilyKind::Beta ? 0.5 : s / c;
  double integral = 0.0;
  if (f == FamilyKind::Beta) {
    integral = tanh_sinh<double>().integrate(wdens, 0.0, 1.0);
  } else if (f == FamilyKind::Normal || f == FamilyKind::GSSt) {
    exp_sinh<double> half;
    integral = half.integrate([&](double t) { return wdens(centre + t); }, 0.0, std::numeric_limits<double>::infinity()) +
               half.integrate([&](double t) { return wdens(centre - t); }, 0.0, std::numeric_limits<double>::infinity());
  } else {
    integral = tanh_sinh<double>().integrate(wdens, 0.0, centre) +
               exp_sinh<double>().integrate(wdens, centre, std::numeric_limits<double>::infinity());
  }
  reports.push_back(tolerance_report("w-density-normalization[" + std::string(to_string(f)) + "]", 1.0, integral, 1e-6));

  double link_total = 0.0;
  auto ldens = [&](double x) { return std::exp(log_link_density(f, x, w, link_c)); };
  switch (link_support(f)) {
    case LinkSupport::NonnegInteger: {
      const double mean_link = link_c * w;
      for (double x = 0.0;; x += 1.0) {
        if (f == FamilyKind::Beta && x > link_c) break;
        const double v = ldens(x);
        link_total += v;
        if (x > mean_link && v < 1e-12 * link_total * 1e-3) break;
        if (x > 1e7) break;
      }
      break;
    }
    case LinkSupport::PositiveReal: {
      const double m = link_c * w;
      link_total = tanh_sinh<double>().integrate(ldens, 0.0, m) +
                   exp_sinh<double>().integrate(ldens, m, std::numeric_limits<double>::infinity());
      break;
    }
    case LinkSupport::Real: {
      const double m = link_c * w;
      exp_sinh<double> half;
      link_total = half.integrate([&](double t) { return ldens(m + t); }, 0.0, std::numeric_limits<double>::infinity()) +
                   half.integrate([&](double t) { return ldens(m - t); }, 0.0, std::numeric_limits<double>::infinity());
      break;
    }
  }
  reports.push_back(tolerance_report("link-density-normalization[" + std::string(to_string(f)) + "]", 1.0, link_total, 1e-8));
  return reports;
}

struct SmallInstanceSpec {
  int replicates = 2;
  int nodes = 3;
};

/// Random admissible parameters for a small instance.
inline ModelParams random_small_params(FamilyKind f, int p, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ModelParams params;
  params.family = f;
  params.c0 = 2.0 + 4.0 * u(rng);
  switch (f) {
    case FamilyKind::Normal: params.s0 = params.c0 * (2.0 * u(rng) - 1.0); break;
    case FamilyKind::Beta: params.s0 = params.c0 * (0.2 + 0.6 * u(rng)); break;
    default: params.s0 = params.c0 * (0.3 + 1.5 * u(rng)); break;
  }
  params.edge_intensity = Eigen::MatrixXd::Zero(p, p);
  for (auto [j, k] : edge_pairs(p)) {
    const double c = integer_intensity(f) ? std::floor(1.0 + 4.0 * u(rng)) : 0.5 + 2.5 * u(rng);
    set_edge(params.edge_intensity, j, k, c);
  }
  return params;
}

/// Joint-versus-conditional identities on a random small instance:
///  * s0, c0, c_jk: conditional log differences equal joint log differences,
///  * links: discrete links match brute-force normalised joint mass (TV),
///    normal links match the quadratic extracted from the joint, gamma links
///    (sampled by MH) match joint differences,
///  * anchors: the conjugate anchor law matches joint differences in w_i.
inline std::vector<OracleReport> conditional_consistency_check(FamilyKind f, SmallInstanceSpec spec,
                                                               std::uint64_t seed) {
  if (f == FamilyKind::GSSt) throw DomainError("conditional checks are not defined for gsst");
  if (spec.replicates < 1 || spec.replicates > 3 || spec.nodes < 2 || spec.nodes > 3) {
    throw std::invalid_argument("conditional_consistency_check needs n <= 3 and 2 <= p <= 3");
  }
  constexpr double kTol = 1e-8;
  Rng rng = substream(seed, 0);
  const ModelParams truth = random_small_params(f, spec.nodes, rng);
  const auto sim = simulate(truth, spec.replicates, seed, 1);
  const PriorConfig prior = PriorConfig::defaults(f);
  const GibbsSampler sampler(sim.data, f, prior);
  ChainState st = sampler.make_state(truth, sim.latents);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<OracleReport> reports;

  auto joint = [&](const ModelParams& params, const std::vector<ReplicateLatents>& lat) {
    return oracle::log_joint(prior, params, sim.data, lat);
  };
  const double base = joint(st.params, st.latents);

  // s0
  {
    ModelParams alt = st.params;
    alt.s0 = f == FamilyKind::Beta ? alt.c0 * (0.2 + 0.6 * u(rng))
                                   : (f == FamilyKind::Normal ? alt.s0 + 0.7 : alt.s0 * (0.6 + 0.8 * u(rng)));
    reports.push_back(tolerance_report("s0-conditional", joint(alt, st.latents) - base,
                                       sampler.log_full_conditional_s0(st, alt.s0) -
                                           sampler.log_full_conditional_s0(st, st.params.s0),
                                       kTol));
  }
  // c0
  {
    ModelParams alt = st.params;
    alt.c0 = st.params.c0 * (1.1 + 0.5 * u(rng));
    reports.push_back(tolerance_report("c0-conditional", joint(alt, st.latents) - base,
                                       sampler.log_full_conditional_c0(st, alt.c0) -
                                           sampler.log_full_conditional_c0(st, st.params.c0),
                                       kTol));
  }
  // c_jk
  for (auto [j, k] : edge_pairs(spec.nodes)) {
    ModelParams alt = st.params;
    const double c = st.params.edge_intensity(j, k);
    const double next = integer_intensity(f) ? c + 1.0 : c * (0.5 + u(rng));
    set_edge(alt.edge_intensity, j, k, next);
    reports.push_back(tolerance_report(edge_name(j, k) + "-conditional", joint(alt, st.latents) - base,
                                       sampler.log_full_conditional_cjk(st, j, k, next) -
                                           sampler.log_full_conditional_cjk(st, j, k, c),
                                       kTol));
  }
  // links
  for (int i = 0; i < spec.replicates; ++i) {
    for (auto [j, k] : edge_pairs(spec.nodes)) {
      const std::string tag = "link[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "," +
                              std::to_string(k + 1) + "]";
      auto with_link = [&](double s) {
        auto lat = st.latents;
        lat[static_cast<std::size_t>(i)].links(j, k) = s;
        lat[static_cast<std::size_t>(i)].links(k, j) = s;
        return joint(st.params, lat);
      };
      if (link_support(f) == LinkSupport::NonnegInteger) {
        const auto pmf = sampler.link_conditional_pmf(st, i, j, k);
        const double c = st.params.edge_intensity(j, k);
        const std::size_t upper =
            f == FamilyKind::Beta ? static_cast<std::size_t>(c) : std::max<std::size_t>(200, pmf.size() + 50);
        std::vector<double> lw;
        double top = kNegInf;
        for (std::size_t s = 0; s <= upper; ++s) {
          lw.push_back(with_link(static_cast<double>(s)));
          top = std::max(top, lw.back());
        }
        double z = 0.0;
        for (double v : lw) z += std::exp(v - top);
        double tv = 0.0;
        for (std::size_t s = 0; s < lw.size(); ++s) {
          const double brute = std::exp(lw[s] - top) / z;
          const double impl = s < pmf.size() ? pmf[s] : 0.0;
          tv += std::abs(brute - impl);
        }
        for (std::size_t s = lw.size(); s < pmf.size(); ++s) tv += pmf[s];
        reports.push_back(tolerance_report(tag + "-enumeration-tv", 0.0, 0.5 * tv, 1e-10));
      } else if (f == FamilyKind::Normal) {
        const auto [m, v] = sampler.normal_link_conditional(st, i, j, k);
        const double f0 = with_link(m), fp = with_link(m + 1.0), fm = with_link(m - 1.0);
        const double a = 0.5 * (fp + fm - 2.0 * f0);
        const double b = 0.5 * (fp - fm);
        const double var = -0.5 / a;
        const double mean = m + b * var;
        reports.push_back(tolerance_report(tag + "-gaussian-mean", mean, m, kTol * std::max(1.0, std::abs(m))));
        reports.push_back(tolerance_report(tag + "-gaussian-variance", var, v, kTol * std::max(1.0, v)));
      } else {
        const double s = st.latents[static_cast<std::size_t>(i)].links(j, k);
        const double alt = s * (0.5 + u(rng));
        reports.push_back(tolerance_report(tag + "-conditional", with_link(alt) - with_link(s),
                                           sampler.log_link_conditional(st, i, j, k, alt) -
                                               sampler.log_link_conditional(st, i, j, k, s),
                                           kTol));
      }
    }
  }
  // anchors
  for (int i = 0; i < spec.replicates; ++i) {
    const auto& lat = st.latents[static_cast<std::size_t>(i)];
    double s_i = st.params.s0, c_i = st.params.c0;
    for (auto [j, k] : edge_pairs(spec.nodes)) {
      s_i += lat.links(j, k);
      c_i += st.params.edge_intensity(j, k);
    }
    double w_alt = lat.w;
    switch (f) {
      case FamilyKind::Normal: w_alt = lat.w + 0.3; break;
      case FamilyKind::Beta: w_alt = 0.1 + 0.8 * u(rng); break;
      default: w_alt = lat.w * (0.7 + 0.6 * u(rng)); break;
    }
    auto alt = st.latents;
    alt[static_cast<std::size_t>(i)].w = w_alt;
    reports.push_back(tolerance_report("anchor[" + std::to_string(i + 1) + "]-conjugate", joint(st.params, alt) - base,
                                       log_w_density(f, w_alt, s_i, c_i) - log_w_density(f, lat.w, s_i, c_i), kTol));
  }
  return reports;
}

}  // namespace qvfgm::verify
