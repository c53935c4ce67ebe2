#pragma once

// Posterior inference by data augmentation: the anchors W_i and links S_ijk
// are treated as observed and refreshed from their full conditionals, while
// s0, c0 and the edge intensities move by random-walk Metropolis-Hastings.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "qvfgm/common.hpp"
#include "qvfgm/diagnostics.hpp"
#include "qvfgm/family.hpp"
#include "qvfgm/model.hpp"

namespace qvfgm {

enum class S0PriorKind { Normal, Gamma, UniformBelowC0 };

struct PriorConfig {
  double a0 = 1.0;  // Ga(a0, b0) on continuous c_jk
  double b0 = 1.0;
  double d0 = 5.0;  // Po(d0) on integer c_jk
  double ac = 0.01;  // Ga(ac, bc) on c0
  double bc = 0.01;
  S0PriorKind s0_kind = S0PriorKind::Gamma;
  double mu_s = 0.0;  // N(mu_s, precision tau_s)
  double tau_s = 0.01;
  double a_s = 0.01;  // Ga(a_s, b_s)
  double b_s = 0.01;

  static PriorConfig defaults(FamilyKind f) {
    PriorConfig p;
    switch (f) {
      case FamilyKind::Normal:
      case FamilyKind::GSSt: p.s0_kind = S0PriorKind::Normal; break;
      case FamilyKind::Beta: p.s0_kind = S0PriorKind::UniformBelowC0; break;
      default: p.s0_kind = S0PriorKind::Gamma; break;
    }
    return p;
  }

  static S0PriorKind s0_kind_for(FamilyKind f) { return defaults(f).s0_kind; }

  void validate(FamilyKind f) const {
    auto pos = [](double x) { return x > 0.0 && std::isfinite(x); };
    if (!pos(a0) || !pos(b0) || !pos(d0) || !pos(ac) || !pos(bc) || !pos(tau_s) || !pos(a_s) || !pos(b_s)) {
      throw std::invalid_argument("prior constants must be strictly positive");
    }
    if (s0_kind != s0_kind_for(f)) {
      throw std::invalid_argument("s0 prior form does not match family " + std::string(to_string(f)));
    }
  }
};

struct MCMCConfig {
  int iterations = 105000;
  int burn_in = 15000;
  int thinning = 40;
  int chains = 2;
  std::uint64_t seed = 1;
  double step_s0 = 0.1;
  double step_c0 = 0.1;
  double step_edge = 0.3;
  double step_link = 0.5;
  double enum_tail_tol = 1e-12;
  std::size_t enum_cap = 1'000'000;
  int adapt_window = -1;  // < 0: adapt for the whole burn-in
  double target_accept = 0.44;
  bool keep_latents = true;
  /// Extra joint moves after each scan: (c_jk, links) rescaling for
  /// continuous links and (s0, c0) rescaling. Both leave the target intact.
  bool joint_moves = true;

  int adaptation_horizon() const { return adapt_window < 0 ? burn_in : std::min(adapt_window, burn_in); }
  int retained_per_chain() const { return (iterations - burn_in) / thinning; }

  void validate() const {
    if (iterations < 1 || burn_in < 0 || burn_in >= iterations) {
      throw std::invalid_argument("need 0 <= burn_in < iterations");
    }
    if (thinning < 1) throw std::invalid_argument("thinning must be at least 1");
    if (chains < 1) throw std::invalid_argument("chains must be at least 1");
    if (!(step_s0 > 0.0) || !(step_c0 > 0.0) || !(step_edge > 0.0) || !(step_link > 0.0)) {
      throw std::invalid_argument("step sizes must be positive");
    }
    if (!(enum_tail_tol > 0.0) || enum_cap < 1) throw std::invalid_argument("bad enumeration settings");
  }
};

struct AcceptanceCounter {
  long long accepted = 0;
  long long proposed = 0;
  double rate() const { return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed); }
  void record(bool ok) {
    ++proposed;
    if (ok) ++accepted;
  }
};

struct ChainState {
  ModelParams params;
  std::vector<ReplicateLatents> latents;
  /// Row sums of each replicate's link matrix (n x p): s*_ij - s0.
  Eigen::MatrixXd link_sums;
  double log_posterior = kNegInf;

  struct Counters {
    AcceptanceCounter s0, c0, links, joint_edges, joint_anchor, noncentered;
    Eigen::MatrixXd edge_accepted, edge_proposed, link_accepted, link_proposed;
  } acceptance;

  struct Steps {
    double s0 = 0.1, c0 = 0.1, joint_anchor = 0.1;
    Eigen::MatrixXd edge, joint_edge, link, noncentered;  // per pair
  } steps;

  void refresh_sums() {
    const int n = static_cast<int>(latents.size());
    link_sums.resize(n, params.nodes());
    for (int i = 0; i < n; ++i) link_sums.row(i) = latents[static_cast<std::size_t>(i)].links.rowwise().sum().transpose();
  }
};

namespace detail {

inline double log_gamma_density(double x, double shape, double rate) {
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

inline double logit(double x) { return std::log(x) - std::log1p(-x); }
inline double expit(double u) { return 1.0 / (1.0 + std::exp(-u)); }

}  // namespace detail

inline double log_prior_s0(const PriorConfig& prior, double s0, double c0) {
  switch (prior.s0_kind) {
    case S0PriorKind::Normal:
      return 0.5 * std::log(prior.tau_s / (2.0 * kPi)) - 0.5 * prior.tau_s * (s0 - prior.mu_s) * (s0 - prior.mu_s);
    case S0PriorKind::Gamma: return detail::log_gamma_density(s0, prior.a_s, prior.b_s);
    case S0PriorKind::UniformBelowC0: return (s0 > 0.0 && s0 < c0) ? -std::log(c0) : kNegInf;
  }
  return kNegInf;
}

inline double log_prior_c0(const PriorConfig& prior, double c0) {
  return detail::log_gamma_density(c0, prior.ac, prior.bc);
}

inline double log_prior_edge(const PriorConfig& prior, FamilyKind f, double c) {
  if (integer_intensity(f)) {
    if (!is_nonneg_integer(c)) return kNegInf;
    return c * std::log(prior.d0) - prior.d0 - std::lgamma(c + 1.0);
  }
  return detail::log_gamma_density(c, prior.a0, prior.b0);
}

/// Posterior sample arrays for one chain. Edge draws are indexed by the
/// lexicographic pair index of (j, k), j < k.
struct ChainDraws {
  std::vector<double> s0, c0;
  std::vector<std::vector<double>> edges;
  /// Optional per-draw node parameters s*_ij (n x p), for predictive checks.
  std::vector<Eigen::MatrixXd> s_star;
  double accept_s0 = 0.0, accept_c0 = 0.0, accept_links = 0.0;
  std::vector<double> accept_edges;

  bool operator==(const ChainDraws& o) const {
    if (s_star.size() != o.s_star.size()) return false;
    for (std::size_t d = 0; d < s_star.size(); ++d) {
      if (s_star[d].rows() != o.s_star[d].rows() || s_star[d].cols() != o.s_star[d].cols() || s_star[d] != o.s_star[d])
        return false;
    }
    return s0 == o.s0 && c0 == o.c0 && edges == o.edges && accept_s0 == o.accept_s0 && accept_c0 == o.accept_c0 &&
           accept_links == o.accept_links && accept_edges == o.accept_edges;
  }
};

inline std::vector<std::pair<int, int>> edge_pairs(int p) {
  std::vector<std::pair<int, int>> pairs;
  for (int j = 0; j < p; ++j)
    for (int k = j + 1; k < p; ++k) pairs.emplace_back(j, k);
  return pairs;
}

inline std::string edge_name(int j, int k) { return "c_" + std::to_string(j + 1) + "_" + std::to_string(k + 1); }

struct PosteriorSamples {
  FamilyKind family = FamilyKind::Normal;
  std::vector<std::string> node_names;
  int iterations = 0, burn_in = 0, thinning = 1;
  std::uint64_t seed = 0;
  std::vector<ChainDraws> chains;

  int nodes() const { return static_cast<int>(node_names.size()); }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> names{"s0", "c0"};
    for (auto [j, k] : edge_pairs(nodes())) names.push_back(edge_name(j, k));
    return names;
  }

  /// Draws of a named parameter in one chain.
  const std::vector<double>& draws(std::size_t parameter, std::size_t chain) const {
    const auto& c = chains.at(chain);
    if (parameter == 0) return c.s0;
    if (parameter == 1) return c.c0;
    return c.edges.at(parameter - 2);
  }

  std::vector<double> pooled(std::size_t parameter) const {
    std::vector<double> all;
    for (std::size_t c = 0; c < chains.size(); ++c) {
      const auto& d = draws(parameter, c);
      all.insert(all.end(), d.begin(), d.end());
    }
    return all;
  }

  bool operator==(const PosteriorSamples& o) const {
    return family == o.family && node_names == o.node_names && iterations == o.iterations && burn_in == o.burn_in &&
           thinning == o.thinning && seed == o.seed && chains == o.chains;
  }
};

/// Gibbs sampler bound to one dataset, family and prior. Holds the data
/// transforms theta(y_ij) and M(theta(y_ij)) that every conditional reuses.
class GibbsSampler {
 public:
  GibbsSampler(Dataset data, FamilyKind family, PriorConfig prior, MCMCConfig config = {})
      : data_(std::move(data)), family_(family), prior_(prior), config_(config) {
    if (family_ == FamilyKind::GSSt) {
      throw DomainError("posterior inference is not available for the gsst family");
    }
    data_.validate(family_);
    prior_.validate(family_);
    config_.validate();
    const int n = data_.replicates(), p = data_.nodes();
    theta_y_.resize(n, p);
    m_y_.resize(n, p);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) {
        const auto m = canonical_maps(family_, data_.y(i, j));
        theta_y_(i, j) = m.theta;
        m_y_(i, j) = m.m_theta;
      }
    }
    m_y_col_sums_ = m_y_.colwise().sum().transpose();
    theta_y_total_ = theta_y_.sum();
    m_y_total_ = m_y_.sum();
  }

  const Dataset& data() const { return data_; }
  FamilyKind family() const { return family_; }
  const PriorConfig& prior() const { return prior_; }
  const MCMCConfig& config() const { return config_; }

  /// Builds a state from explicit parameters and latents.
  ChainState make_state(ModelParams params, std::vector<ReplicateLatents> latents) const {
    ChainState st;
    params.family = family_;
    st.params = std::move(params);
    st.latents = std::move(latents);
    st.refresh_sums();
    const int p = data_.nodes();
    st.steps.s0 = config_.step_s0;
    st.steps.c0 = config_.step_c0;
    st.steps.edge = Eigen::MatrixXd::Constant(p, p, config_.step_edge);
    st.steps.joint_edge = Eigen::MatrixXd::Constant(p, p, config_.step_edge);
    st.steps.noncentered = Eigen::MatrixXd::Constant(p, p, config_.step_edge);
    st.steps.joint_anchor = config_.step_c0;
    st.steps.link = Eigen::MatrixXd::Constant(p, p, config_.step_link);
    st.acceptance.link_accepted = Eigen::MatrixXd::Zero(p, p);
    st.acceptance.link_proposed = Eigen::MatrixXd::Zero(p, p);
    st.acceptance.edge_accepted = Eigen::MatrixXd::Zero(p, p);
    st.acceptance.edge_proposed = Eigen::MatrixXd::Zero(p, p);
    st.log_posterior = log_joint(st);
    return st;
  }

  /// Starting point: s0, c0 and edges at their prior means, anchors and links
  /// drawn from the model at those values. Chains after the first scale every
  /// positive parameter by exp(+-0.5).
  ChainState initial_state(int chain_index, Rng& rng) const {
    const int n = data_.replicates(), p = data_.nodes();
    ModelParams params;
    params.family = family_;
    params.c0 = prior_.ac / prior_.bc;
    const bool integer = integer_intensity(family_);
    const double edge0 = integer ? std::max(1.0, std::round(prior_.d0)) : prior_.a0 / prior_.b0;
    params.edge_intensity = uniform_intensity(p, edge0);
    auto jitter = [&](double x) {
      if (chain_index == 0) return x;
      return x * std::exp(uniform01(rng) < 0.5 ? -0.5 : 0.5);
    };
    params.c0 = jitter(params.c0);
    switch (prior_.s0_kind) {
      case S0PriorKind::Normal: params.s0 = prior_.mu_s + (chain_index == 0 ? 0.0 : (uniform01(rng) < 0.5 ? -0.5 : 0.5)); break;
      case S0PriorKind::Gamma: params.s0 = jitter(prior_.a_s / prior_.b_s); break;
      case S0PriorKind::UniformBelowC0: params.s0 = params.c0 / 2.0; break;
    }
    for (auto [j, k] : edge_pairs(p)) {
      double c = jitter(edge0);
      if (integer) c = std::max(1.0, std::round(c));
      set_edge(params.edge_intensity, j, k, c);
    }
    std::vector<ReplicateLatents> latents(static_cast<std::size_t>(n));
    for (auto& lat : latents) {
      lat.w = sample_w(family_, params.s0, params.c0, rng);
      lat.links = Eigen::MatrixXd::Zero(p, p);
      for (auto [j, k] : edge_pairs(p)) {
        const double s = sample_link(family_, lat.w, params.edge_intensity(j, k), rng);
        lat.links(j, k) = lat.links(k, j) = s;
      }
    }
    return make_state(std::move(params), std::move(latents));
  }

  /// Extended log-likelihood plus log priors.
  double log_joint(const ChainState& st) const {
    const double lik = log_extended_likelihood(st.params, data_, st.latents);
    if (lik == kNegInf) return kNegInf;
    double lp = log_prior_s0(prior_, st.params.s0, st.params.c0) + log_prior_c0(prior_, st.params.c0);
    for (auto [j, k] : edge_pairs(data_.nodes())) lp += log_prior_edge(prior_, family_, st.params.edge_intensity(j, k));
    return lik + lp;
  }

  // s0 given the rest, up to an additive constant.
  double log_full_conditional_s0(const ChainState& st, double s0) const {
    const double c0 = st.params.c0;
    if (!admissible(family_, s0, c0)) return kNegInf;
    const int n = data_.replicates(), p = data_.nodes();
    const Eigen::VectorXd cs = c_star(st.params);
    double total = 0.0;
    try {
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) {
          const double s = s0 + st.link_sums(i, j);
          if (!admissible(family_, s, cs(j))) return kNegInf;
          total += log_h(family_, s, cs(j));
        }
      }
      total += n * log_h(family_, s0, c0);
    } catch (const DomainError&) {
      return kNegInf;
    }
    double theta_w = 0.0;
    for (const auto& lat : st.latents) theta_w += canonical_maps(family_, lat.w).theta;
    return total + s0 * (theta_y_total_ + theta_w) + log_prior_s0(prior_, s0, c0);
  }

  // c0 given the rest. For beta the Un(0, c0) prior on s0 contributes
  // -log c0 here as well.
  double log_full_conditional_c0(const ChainState& st, double c0) const {
    const double s0 = st.params.s0;
    if (!(c0 > 0.0) || !admissible(family_, s0, c0)) return kNegInf;
    const int n = data_.replicates(), p = data_.nodes();
    const Eigen::VectorXd cs = c_star(st.params).array() - st.params.c0 + c0;
    double total = 0.0;
    try {
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) {
          const double s = s0 + st.link_sums(i, j);
          if (!admissible(family_, s, cs(j))) return kNegInf;
          total += log_h(family_, s, cs(j));
        }
      }
      total += n * log_h(family_, s0, c0);
    } catch (const DomainError&) {
      return kNegInf;
    }
    double m_w = 0.0;
    for (const auto& lat : st.latents) m_w += canonical_maps(family_, lat.w).m_theta;
    double value = total - c0 * (m_y_total_ + m_w) + log_prior_c0(prior_, c0);
    if (prior_.s0_kind == S0PriorKind::UniformBelowC0) value += log_prior_s0(prior_, s0, c0);
    return value;
  }

  // c_jk given the rest.
  double log_full_conditional_cjk(const ChainState& st, int j, int k, double c) const {
    if (j > k) std::swap(j, k);
    const double prior_term = log_prior_edge(prior_, family_, c);
    if (prior_term == kNegInf) return kNegInf;
    const int n = data_.replicates();
    const double old = st.params.edge_intensity(j, k);
    const double cj = st.params.c_star(j) - old + c;
    const double ck = st.params.c_star(k) - old + c;
    double total = 0.0, m_w = 0.0;
    try {
      for (int i = 0; i < n; ++i) {
        const auto& lat = st.latents[static_cast<std::size_t>(i)];
        const double s = lat.links(j, k);
        const double sj = st.params.s0 + st.link_sums(i, j);
        const double sk = st.params.s0 + st.link_sums(i, k);
        if (!admissible(family_, sj, cj) || !admissible(family_, sk, ck)) return kNegInf;
        total += log_h(family_, sj, cj) + log_h(family_, sk, ck);
        if (c == 0.0) {
          if (s != 0.0) return kNegInf;
        } else {
          if (family_ == FamilyKind::Beta && s > c) return kNegInf;
          total += log_b(family_, s, c);
        }
        m_w += canonical_maps(family_, lat.w).m_theta;
      }
    } catch (const DomainError&) {
      return kNegInf;
    }
    return total - c * (m_y_col_sums_(j) + m_y_col_sums_(k) + m_w) + prior_term;
  }

  /// Unnormalised log density of S_ijk = s given everything else.
  double log_link_conditional(const ChainState& st, int i, int j, int k, double s) const {
    const LinkContext ctx = link_context(st, i, j, k);
    return log_link_weight(ctx, s);
  }

  /// Normalised probabilities over {0, 1, ..., K} for discrete links, with K
  /// the trial count (beta) or the point where the geometric tail bound drops
  /// below enum_tail_tol.
  std::vector<double> link_conditional_pmf(const ChainState& st, int i, int j, int k) const {
    if (link_support(family_) != LinkSupport::NonnegInteger) {
      throw std::logic_error("link_conditional_pmf applies to discrete links only");
    }
    return enumerate(link_context(st, i, j, k));
  }

  /// Mean and variance of the Gaussian link conditional (normal family).
  std::pair<double, double> normal_link_conditional(const ChainState& st, int i, int j, int k) const {
    if (family_ != FamilyKind::Normal) throw std::logic_error("normal_link_conditional: normal family only");
    const LinkContext ctx = link_context(st, i, j, k);
    const double precision = 1.0 / ctx.cj + 1.0 / ctx.ck + 1.0 / ctx.c;
    const double linear = ctx.t - ctx.aj / ctx.cj - ctx.ak / ctx.ck;
    return {linear / precision, 1.0 / precision};
  }

  // Replaces S_ijk (and S_ikj) with a draw from its full conditional.
  void sample_link_conditional(ChainState& st, int i, int j, int k, Rng& rng) const {
    if (j > k) std::swap(j, k);
    const LinkContext ctx = link_context(st, i, j, k);
    const double old = st.latents[static_cast<std::size_t>(i)].links(j, k);
    double next = old;
    if (ctx.c == 0.0) {
      next = 0.0;
    } else if (family_ == FamilyKind::Normal) {
      const auto [m, v] = normal_link_conditional(st, i, j, k);
      next = m + std::sqrt(v) * std_normal(rng);
    } else if (link_support(family_) == LinkSupport::NonnegInteger) {
      const auto pmf = enumerate(ctx);
      double u = uniform01(rng), acc = 0.0;
      next = static_cast<double>(pmf.size() - 1);
      for (std::size_t s = 0; s < pmf.size(); ++s) {
        acc += pmf[s];
        if (u < acc) {
          next = static_cast<double>(s);
          break;
        }
      }
    } else {
      // Gamma links: random walk on log s.
      const double proposal = old * std::exp(st.steps.link(j, k) * std_normal(rng));
      const double ratio = log_link_weight(ctx, proposal) - log_link_weight(ctx, old) + std::log(proposal) - std::log(old);
      const bool ok = std::log(uniform_open(rng)) < ratio;
      st.acceptance.links.record(ok);
      st.acceptance.link_proposed(j, k) += 1.0;
      if (ok) st.acceptance.link_accepted(j, k) += 1.0;
      if (ok) next = proposal;
    }
    auto& links = st.latents[static_cast<std::size_t>(i)].links;
    links(j, k) = links(k, j) = next;
    st.link_sums(i, j) += next - old;
    st.link_sums(i, k) += next - old;
  }

  // Exact conjugate draw of W_i with s0 + sum_{j<k} s_ijk and
  // c0 + sum_{j<k} c_jk.
  void sample_w_conditional(ChainState& st, int i, Rng& rng) const {
    const double s = st.params.s0 + 0.5 * st.link_sums.row(i).sum();
    const double c = st.params.c0 + 0.5 * st.params.edge_intensity.sum();
    st.latents[static_cast<std::size_t>(i)].w = sample_w(family_, s, c, rng);
  }

  /// One systematic scan: links, anchors, edges, c0, s0. `iteration` is
  /// 1-based and drives step-size adaptation during burn-in.
  void sweep(ChainState& st, Rng& rng, int iteration = 0) const {
    const int n = data_.replicates(), p = data_.nodes();
    const bool adapt = iteration > 0 && iteration <= config_.adaptation_horizon();
    const double gain = adapt ? std::pow(static_cast<double>(iteration), -0.6) : 0.0;
    const auto pairs = edge_pairs(p);

    const Eigen::MatrixXd acc_before = st.acceptance.link_accepted, prop_before = st.acceptance.link_proposed;
    for (int i = 0; i < n; ++i)
      for (auto [j, k] : pairs) sample_link_conditional(st, i, j, k, rng);
    if (adapt) {
      for (auto [j, k] : pairs) {
        const double proposed = st.acceptance.link_proposed(j, k) - prop_before(j, k);
        if (proposed == 0.0) continue;
        const double rate = (st.acceptance.link_accepted(j, k) - acc_before(j, k)) / proposed;
        st.steps.link(j, k) = adapt_step(st.steps.link(j, k), rate, gain);
      }
    }

    for (int i = 0; i < n; ++i) sample_w_conditional(st, i, rng);

    for (auto [j, k] : pairs) update_edge(st, j, k, rng, gain);
    update_c0(st, rng, gain);
    update_s0(st, rng, gain);

    if (config_.joint_moves) {
      if (scalable_links()) {
        for (auto [j, k] : pairs) update_edge_with_links(st, j, k, rng, gain);
        for (auto [j, k] : pairs) update_edge_noncentered(st, j, k, rng, gain);
      }
      update_anchor_scale(st, rng, gain);
    }

    st.refresh_sums();
    st.log_posterior = log_joint(st);
  }

 private:
  struct LinkContext {
    double aj, ak;  // s*_ij and s*_ik without the link being updated
    double cj, ck;  // c*_j and c*_k
    double c;       // c_jk
    double t;       // theta(y_ij) + theta(y_ik) + theta(w_i)
  };

  Eigen::VectorXd c_star(const ModelParams& params) const {
    return params.c0 + params.edge_intensity.rowwise().sum().array();
  }

  LinkContext link_context(const ChainState& st, int i, int j, int k) const {
    if (j > k) std::swap(j, k);
    const auto& lat = st.latents[static_cast<std::size_t>(i)];
    const double s = lat.links(j, k);
    LinkContext ctx;
    ctx.aj = st.params.s0 + st.link_sums(i, j) - s;
    ctx.ak = st.params.s0 + st.link_sums(i, k) - s;
    ctx.cj = st.params.c_star(j);
    ctx.ck = st.params.c_star(k);
    ctx.c = st.params.edge_intensity(j, k);
    ctx.t = theta_y_(i, j) + theta_y_(i, k) + canonical_maps(family_, lat.w).theta;
    return ctx;
  }

  double log_link_weight(const LinkContext& ctx, double s) const {
    if (ctx.c == 0.0) return s == 0.0 ? 0.0 : kNegInf;
    if (!in_link_support(family_, s)) return kNegInf;
    if (family_ == FamilyKind::Beta && s > ctx.c) return kNegInf;
    const double sj = ctx.aj + s, sk = ctx.ak + s;
    if (!admissible(family_, sj, ctx.cj) || !admissible(family_, sk, ctx.ck)) return kNegInf;
    return log_h(family_, sj, ctx.cj) + log_h(family_, sk, ctx.ck) + log_b(family_, s, ctx.c) + s * ctx.t;
  }

  // The discrete link conditionals are log-concave in s, so once the weights
  // decrease the remaining mass is bounded by a geometric series.
  std::vector<double> enumerate(const LinkContext& ctx) const {
    std::vector<double> logw;
    double lse = kNegInf;
    const bool bounded = family_ == FamilyKind::Beta;
    const double upper = bounded ? ctx.c : std::numeric_limits<double>::infinity();
    const double log_tol = std::log(config_.enum_tail_tol);
    for (std::size_t s = 0;; ++s) {
      if (s >= config_.enum_cap) {
        throw ConvergenceError("link enumeration exceeded " + std::to_string(config_.enum_cap) + " states");
      }
      const double sv = static_cast<double>(s);
      if (sv > upper) break;
      const double lw = log_link_weight(ctx, sv);
      logw.push_back(lw);
      lse = log_sum_exp(lse, lw);
      if (!bounded && s > 0 && lw != kNegInf && logw[s - 1] != kNegInf && lw < logw[s - 1]) {
        const double r = std::exp(lw - logw[s - 1]);
        const double tail = lw + std::log(r) - std::log1p(-r);
        if (tail < lse + log_tol) break;
      }
      if (!bounded && lw == kNegInf && s > 0 && logw[s - 1] == kNegInf && lse != kNegInf) break;
    }
    if (lse == kNegInf) throw ConvergenceError("link conditional has no mass");
    std::vector<double> pmf(logw.size());
    for (std::size_t s = 0; s < logw.size(); ++s) pmf[s] = std::exp(logw[s] - lse);
    return pmf;
  }

  double adapt_step(double step, double rate, double gain) const {
    const double next = step * std::exp(gain * (rate - config_.target_accept));
    return std::clamp(next, 1e-6, 1e3);
  }

  static bool accept(double log_ratio, Rng& rng) {
    if (std::isnan(log_ratio)) return false;
    return log_ratio >= 0.0 || std::log(uniform_open(rng)) < log_ratio;
  }

  void update_edge(ChainState& st, int j, int k, Rng& rng, double gain) const {
    const double current = st.params.edge_intensity(j, k);
    double proposal, correction = 0.0;
    if (integer_intensity(family_)) {
      proposal = current + (uniform01(rng) < 0.5 ? -1.0 : 1.0);
      if (proposal < 0.0) {
        st.acceptance.edge_proposed(j, k) += 1.0;
        return;
      }
    } else {
      proposal = current * std::exp(st.steps.edge(j, k) * std_normal(rng));
      correction = std::log(proposal) - std::log(current);
    }
    const double ratio =
        log_full_conditional_cjk(st, j, k, proposal) - log_full_conditional_cjk(st, j, k, current) + correction;
    const bool ok = accept(ratio, rng);
    st.acceptance.edge_proposed(j, k) += 1.0;
    if (ok) {
      st.acceptance.edge_accepted(j, k) += 1.0;
      set_edge(st.params.edge_intensity, j, k, proposal);
    }
    if (gain > 0.0 && !integer_intensity(family_)) {
      const double alpha = std::isnan(ratio) ? 0.0 : std::min(1.0, std::exp(ratio));
      st.steps.edge(j, k) = adapt_step(st.steps.edge(j, k), alpha, gain);
    }
  }

  bool scalable_links() const { return family_ == FamilyKind::Normal || family_ == FamilyKind::InverseGamma; }

  // Terms of the joint that involve c_jk or its links.
  double edge_block_log_density(const ChainState& st, int j, int k, double c, double factor) const {
    const int n = data_.replicates();
    const double old = st.params.edge_intensity(j, k);
    const double cj = st.params.c_star(j) - old + c;
    const double ck = st.params.c_star(k) - old + c;
    double total = log_prior_edge(prior_, family_, c);
    for (int i = 0; i < n; ++i) {
      const auto& lat = st.latents[static_cast<std::size_t>(i)];
      const double s_old = lat.links(j, k);
      const double s = s_old * factor;
      const double sj = st.params.s0 + st.link_sums(i, j) - s_old + s;
      const double sk = st.params.s0 + st.link_sums(i, k) - s_old + s;
      if (!admissible(family_, sj, cj) || !admissible(family_, sk, ck)) return kNegInf;
      total += log_link_density(family_, s, lat.w, c) + log_w_density(family_, data_.y(i, j), sj, cj) +
               log_w_density(family_, data_.y(i, k), sk, ck);
    }
    return total;
  }

  // c_jk and every S_ijk multiplied by the same factor e^u; the Jacobian of
  // the map is e^{(n + 1) u}.
  void update_edge_with_links(ChainState& st, int j, int k, Rng& rng, double gain) const {
    const int n = data_.replicates();
    const double c = st.params.edge_intensity(j, k);
    const double u = st.steps.joint_edge(j, k) * std_normal(rng);
    const double factor = std::exp(u);
    double ratio = std::numeric_limits<double>::quiet_NaN();
    try {
      ratio = edge_block_log_density(st, j, k, c * factor, factor) - edge_block_log_density(st, j, k, c, 1.0) +
              (n + 1.0) * u;
    } catch (const DomainError&) {
    }
    const bool ok = accept(ratio, rng);
    st.acceptance.joint_edges.record(ok);
    if (ok) {
      set_edge(st.params.edge_intensity, j, k, c * factor);
      for (int i = 0; i < n; ++i) {
        auto& links = st.latents[static_cast<std::size_t>(i)].links;
        const double s_old = links(j, k);
        links(j, k) = links(k, j) = s_old * factor;
        st.link_sums(i, j) += links(j, k) - s_old;
        st.link_sums(i, k) += links(j, k) - s_old;
      }
    }
    if (gain > 0.0) {
      const double alpha = std::isnan(ratio) ? 0.0 : std::min(1.0, std::exp(ratio));
      st.steps.joint_edge(j, k) = adapt_step(st.steps.joint_edge(j, k), alpha, gain);
    }
  }

  // Standardised link value: the link's CDF position (gamma links) or its
  // z-score (normal links). Held fixed by the non-centred edge move.
  struct Standardized {
    double value;
    bool upper;  // gamma links: value is the upper tail probability
  };

  // Ten significant digits are plenty for a proposal map and much cheaper
  // than full precision in the inverse incomplete gamma.
  using FastPolicy = boost::math::policies::policy<boost::math::policies::digits10<10>>;

  Standardized standardize_link(double s, double w, double c) const {
    if (family_ == FamilyKind::Normal) return {(s - c * w) / std::sqrt(c), false};
    const double p = boost::math::gamma_p(c, s / w, FastPolicy());
    if (p <= 0.5) return {p, false};
    return {boost::math::gamma_q(c, s / w, FastPolicy()), true};
  }

  double unstandardize_link(Standardized z, double w, double c) const {
    if (family_ == FamilyKind::Normal) return c * w + std::sqrt(c) * z.value;
    return w * (z.upper ? boost::math::gamma_q_inv(c, z.value, FastPolicy()) : boost::math::gamma_p_inv(c, z.value, FastPolicy()));
  }

  // Non-centred move: c_jk changes while every link keeps its standardised
  // value, so the links follow deterministically and their own density
  // terms cancel against the change of variables. Only the prior and the
  // node terms of j and k remain in the ratio.
  void update_edge_noncentered(ChainState& st, int j, int k, Rng& rng, double gain) const {
    const int n = data_.replicates();
    const double c = st.params.edge_intensity(j, k);
    const double u = st.steps.noncentered(j, k) * std_normal(rng);
    const double c_new = c * std::exp(u);
    const double cj = st.params.c_star(j), ck = st.params.c_star(k);
    const double cj_new = cj - c + c_new, ck_new = ck - c + c_new;
    std::vector<double> proposal(static_cast<std::size_t>(n));
    double ratio = log_prior_edge(prior_, family_, c_new) - log_prior_edge(prior_, family_, c) + u;
    try {
      for (int i = 0; i < n && !std::isnan(ratio); ++i) {
        const auto& lat = st.latents[static_cast<std::size_t>(i)];
        const double s = lat.links(j, k);
        const auto z = standardize_link(s, lat.w, c);
        if (family_ != FamilyKind::Normal && !(z.value > 0.0)) {
          ratio = std::numeric_limits<double>::quiet_NaN();
          break;
        }
        const double s_new = unstandardize_link(z, lat.w, c_new);
        if (!in_link_support(family_, s_new)) {
          ratio = std::numeric_limits<double>::quiet_NaN();
          break;
        }
        proposal[static_cast<std::size_t>(i)] = s_new;
        const double sj = st.params.s0 + st.link_sums(i, j), sk = st.params.s0 + st.link_sums(i, k);
        const double sj_new = sj - s + s_new, sk_new = sk - s + s_new;
        if (!admissible(family_, sj_new, cj_new) || !admissible(family_, sk_new, ck_new)) {
          ratio = kNegInf;
          break;
        }
        ratio += log_w_density(family_, data_.y(i, j), sj_new, cj_new) - log_w_density(family_, data_.y(i, j), sj, cj) +
                 log_w_density(family_, data_.y(i, k), sk_new, ck_new) - log_w_density(family_, data_.y(i, k), sk, ck);
      }
    } catch (const std::exception&) {
      ratio = std::numeric_limits<double>::quiet_NaN();
    }
    const bool ok = accept(ratio, rng);
    st.acceptance.noncentered.record(ok);
    if (ok) {
      set_edge(st.params.edge_intensity, j, k, c_new);
      for (int i = 0; i < n; ++i) {
        auto& links = st.latents[static_cast<std::size_t>(i)].links;
        const double s_old = links(j, k);
        links(j, k) = links(k, j) = proposal[static_cast<std::size_t>(i)];
        st.link_sums(i, j) += links(j, k) - s_old;
        st.link_sums(i, k) += links(j, k) - s_old;
      }
    }
    if (gain > 0.0) {
      const double alpha = std::isnan(ratio) ? 0.0 : std::min(1.0, std::exp(ratio));
      st.steps.noncentered(j, k) = adapt_step(st.steps.noncentered(j, k), alpha, gain);
    }
  }

  // (s0, c0) -> (s0 e^u, c0 e^u): keeps s0 / c0 and the beta constraint
  // s0 < c0; Jacobian e^{2u}.
  void update_anchor_scale(ChainState& st, Rng& rng, double gain) const {
    const double u = st.steps.joint_anchor * std_normal(rng);
    const double s0 = st.params.s0, c0 = st.params.c0;
    const double before = log_joint(st);
    st.params.s0 = s0 * std::exp(u);
    st.params.c0 = c0 * std::exp(u);
    const double ratio = log_joint(st) - before + 2.0 * u;
    const bool ok = accept(ratio, rng);
    st.acceptance.joint_anchor.record(ok);
    if (!ok) {
      st.params.s0 = s0;
      st.params.c0 = c0;
    }
    if (gain > 0.0) {
      st.steps.joint_anchor =
          adapt_step(st.steps.joint_anchor, std::isnan(ratio) ? 0.0 : std::min(1.0, std::exp(ratio)), gain);
    }
  }

  void update_c0(ChainState& st, Rng& rng, double gain) const {
    const double current = st.params.c0;
    const double proposal = current * std::exp(st.steps.c0 * std_normal(rng));
    const double ratio = log_full_conditional_c0(st, proposal) - log_full_conditional_c0(st, current) +
                         std::log(proposal) - std::log(current);
    const bool ok = accept(ratio, rng);
    st.acceptance.c0.record(ok);
    if (ok) st.params.c0 = proposal;
    if (gain > 0.0) st.steps.c0 = adapt_step(st.steps.c0, std::isnan(ratio) ? 0.0 : std::min(1.0, std::exp(ratio)), gain);
  }

  void update_s0(ChainState& st, Rng& rng, double gain) const {
    const double current = st.params.s0;
    const double z = st.steps.s0 * std_normal(rng);
    double proposal = current, correction = 0.0;
    switch (prior_.s0_kind) {
      case S0PriorKind::Normal: proposal = current + z; break;
      case S0PriorKind::Gamma:
        proposal = current * std::exp(z);
        correction = std::log(proposal) - std::log(current);
        break;
      case S0PriorKind::UniformBelowC0: {
        const double c0 = st.params.c0;
        const double r = current / c0;
        const double r_new = detail::expit(detail::logit(r) + z);
        proposal = c0 * r_new;
        correction = std::log(r_new) + std::log1p(-r_new) - std::log(r) - std::log1p(-r);
        break;
      }
    }
    const double ratio = log_full_conditional_s0(st, proposal) - log_full_conditional_s0(st, current) + correction;
    const bool ok = accept(ratio, rng);
    st.acceptance.s0.record(ok);
    if (ok) st.params.s0 = proposal;
    if (gain > 0.0) st.steps.s0 = adapt_step(st.steps.s0, std::isnan(ratio) ? 0.0 : std::min(1.0, std::exp(ratio)), gain);
  }

  Dataset data_;
  FamilyKind family_;
  PriorConfig prior_;
  MCMCConfig config_;
  Eigen::MatrixXd theta_y_, m_y_;
  Eigen::VectorXd m_y_col_sums_;
  double theta_y_total_ = 0.0, m_y_total_ = 0.0;
};

// Free-function forms of the conditionals, for callers holding a state and a
// dataset but no sampler.
inline double log_full_conditional_s0(const ChainState& st, const Dataset& data, const PriorConfig& prior, double s0) {
  return GibbsSampler(data, st.params.family, prior).log_full_conditional_s0(st, s0);
}
inline double log_full_conditional_c0(const ChainState& st, const Dataset& data, const PriorConfig& prior, double c0) {
  return GibbsSampler(data, st.params.family, prior).log_full_conditional_c0(st, c0);
}
inline double log_full_conditional_cjk(const ChainState& st, const Dataset& data, const PriorConfig& prior, int j,
                                       int k, double c) {
  return GibbsSampler(data, st.params.family, prior).log_full_conditional_cjk(st, j, k, c);
}

class ChainFailure : public std::runtime_error {
 public:
  ChainFailure(int chain, int iteration, const std::string& what)
      : std::runtime_error("chain " + std::to_string(chain + 1) + " failed at iteration " + std::to_string(iteration) +
                           ": " + what),
        chain_(chain),
        iteration_(iteration) {}
  int chain() const { return chain_; }
  int iteration() const { return iteration_; }

 private:
  int chain_, iteration_;
};

/// Runs one chain to completion and returns its retained draws.
inline ChainDraws run_chain(const GibbsSampler& sampler, int chain_index) {
  const auto& cfg = sampler.config();
  Rng rng = substream(cfg.seed, static_cast<std::uint64_t>(chain_index) + 1);
  ChainState st = sampler.initial_state(chain_index, rng);
  const int p = sampler.data().nodes();
  const auto pairs = edge_pairs(p);
  ChainDraws out;
  out.edges.resize(pairs.size());
  int it = 0;
  try {
    for (it = 1; it <= cfg.iterations; ++it) {
      sampler.sweep(st, rng, it);
      if (st.log_posterior == kNegInf) throw ConvergenceError("state left the support");
      if (it > cfg.burn_in && (it - cfg.burn_in) % cfg.thinning == 0) {
        out.s0.push_back(st.params.s0);
        out.c0.push_back(st.params.c0);
        for (std::size_t e = 0; e < pairs.size(); ++e) {
          out.edges[e].push_back(st.params.edge_intensity(pairs[e].first, pairs[e].second));
        }
        if (cfg.keep_latents) out.s_star.push_back(st.link_sums.array() + st.params.s0);
      }
    }
  } catch (const std::exception& e) {
    throw ChainFailure(chain_index, it, e.what());
  }
  out.accept_s0 = st.acceptance.s0.rate();
  out.accept_c0 = st.acceptance.c0.rate();
  out.accept_links = st.acceptance.links.rate();
  for (auto [j, k] : pairs) {
    const double prop = st.acceptance.edge_proposed(j, k);
    out.accept_edges.push_back(prop == 0.0 ? 0.0 : st.acceptance.edge_accepted(j, k) / prop);
  }
  return out;
}

/// Independent chains, one thread each; identical (data, prior, config)
/// always reproduce identical samples.
inline PosteriorSamples run_chains(const Dataset& data, FamilyKind family, const PriorConfig& prior,
                                   const MCMCConfig& config) {
  const GibbsSampler sampler(data, family, prior, config);
  PosteriorSamples samples;
  samples.family = family;
  samples.node_names = data.node_names.empty() ? default_node_names(data.nodes()) : data.node_names;
  samples.iterations = config.iterations;
  samples.burn_in = config.burn_in;
  samples.thinning = config.thinning;
  samples.seed = config.seed;
  samples.chains.resize(static_cast<std::size_t>(config.chains));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(config.chains));
  std::vector<std::thread> pool;
  for (int c = 0; c < config.chains; ++c) {
    pool.emplace_back([&, c] {
      try {
        samples.chains[static_cast<std::size_t>(c)] = run_chain(sampler, c);
      } catch (...) {
        errors[static_cast<std::size_t>(c)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return samples;
}

struct ParameterSummary {
  std::string name;
  double mean = 0.0, sd = 0.0, q025 = 0.0, q975 = 0.0;
  double psrf = std::numeric_limits<double>::quiet_NaN();
};

/// Pooled-chain posterior summaries; PSRF is reported when there are at least
/// two chains with four or more draws each.
inline std::vector<ParameterSummary> summarize(const PosteriorSamples& samples) {
  std::vector<ParameterSummary> out;
  const auto names = samples.parameter_names();
  for (std::size_t idx = 0; idx < names.size(); ++idx) {
    const auto pooled = samples.pooled(idx);
    if (pooled.empty()) throw std::invalid_argument("summarize: no draws");
    ParameterSummary s;
    s.name = names[idx];
    s.mean = mean(pooled);
    s.sd = std::sqrt(sample_variance(pooled));
    s.q025 = quantile(pooled, 0.025);
    s.q975 = quantile(pooled, 0.975);
    if (samples.chains.size() >= 2) {
      std::vector<std::vector<double>> per_chain;
      bool enough = true;
      for (std::size_t c = 0; c < samples.chains.size(); ++c) {
        per_chain.push_back(samples.draws(idx, c));
        enough = enough && per_chain.back().size() >= 4;
      }
      if (enough) s.psrf = split_psrf(per_chain);
    }
    out.push_back(s);
  }
  return out;
}

struct MseResult {
  double posterior_mean = 0.0;
  std::vector<double> per_draw;
};

/// Squared-error average between a predictive draw and the data.
inline double mean_squared_error(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& observed) {
  return (predicted - observed).array().square().mean();
}

/// Posterior expected MSE: for every retained draw, Y^F_ij ~ f(y | s*_ij, c*_j)
/// under that draw, averaged over draws. Needs the retained s* latents.
inline MseResult predictive_mse(const PosteriorSamples& samples, const Dataset& data, std::uint64_t seed) {
  const int n = data.replicates(), p = data.nodes();
  const auto pairs = edge_pairs(p);
  MseResult out;
  std::uint64_t stream = 0;
  for (const auto& chain : samples.chains) {
    if (chain.s_star.size() != chain.c0.size()) {
      throw std::invalid_argument("predictive_mse needs retained latents (keep_latents)");
    }
    for (std::size_t d = 0; d < chain.c0.size(); ++d) {
      const auto& s_star = chain.s_star[d];
      if (s_star.rows() != n || s_star.cols() != p) throw std::invalid_argument("predictive_mse: shape mismatch");
      Eigen::VectorXd c_star = Eigen::VectorXd::Constant(p, chain.c0[d]);
      for (std::size_t e = 0; e < pairs.size(); ++e) {
        c_star(pairs[e].first) += chain.edges[e][d];
        c_star(pairs[e].second) += chain.edges[e][d];
      }
      Rng rng = substream(seed, stream++);
      Eigen::MatrixXd yf(n, p);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) yf(i, j) = sample_w(samples.family, s_star(i, j), c_star(j), rng);
      out.per_draw.push_back(mean_squared_error(yf, data.y));
    }
  }
  if (out.per_draw.empty()) throw std::invalid_argument("predictive_mse: no draws");
  out.posterior_mean = mean(out.per_draw);
  return out;
}

}  // namespace qvfgm
