#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include <boost/math/distributions/gamma.hpp>

#include "qvfgm/inference.hpp"
#include "qvfgm/verify.hpp"

using namespace qvfgm;

namespace {

const std::vector<FamilyKind> kInferable = {FamilyKind::Normal, FamilyKind::Gamma, FamilyKind::InverseGamma,
                                            FamilyKind::Beta, FamilyKind::InverseBeta};

struct Instance {
  ModelParams truth;
  Simulation sim;
  PriorConfig prior;
};

Instance small_instance(FamilyKind f, int n, int p, std::uint64_t seed) {
  Rng rng = substream(seed, 99);
  Instance inst;
  inst.truth = verify::random_small_params(f, p, rng);
  inst.sim = simulate(inst.truth, n, seed, 1);
  inst.prior = PriorConfig::defaults(f);
  return inst;
}

MCMCConfig short_config(int iterations, int burn_in, int thinning, int chains, std::uint64_t seed) {
  MCMCConfig c;
  c.iterations = iterations;
  c.burn_in = burn_in;
  c.thinning = thinning;
  c.chains = chains;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Config, Validation) {
  MCMCConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.retained_per_chain(), (105000 - 15000) / 40);
  c.burn_in = c.iterations;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = MCMCConfig{};
  c.step_edge = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  PriorConfig p = PriorConfig::defaults(FamilyKind::Beta);
  EXPECT_EQ(p.s0_kind, S0PriorKind::UniformBelowC0);
  EXPECT_THROW(p.validate(FamilyKind::Gamma), std::invalid_argument);
  p.a0 = 0.0;
  EXPECT_THROW(p.validate(FamilyKind::Beta), std::invalid_argument);
}

TEST(Sampler, RejectsGsst) {
  Dataset d;
  d.y = Eigen::MatrixXd::Ones(3, 2);
  EXPECT_THROW(GibbsSampler(d, FamilyKind::GSSt, PriorConfig::defaults(FamilyKind::GSSt)), DomainError);
}

// Conditional differences equal joint differences, with the joint assembled
// independently from standard distributions.
TEST(Conditionals, DifferencesMatchJoint) {
  for (auto f : kInferable) {
    const auto inst = small_instance(f, 3, 3, 21);
    const GibbsSampler sampler(inst.sim.data, f, inst.prior);
    const auto st = sampler.make_state(inst.truth, inst.sim.latents);
    auto joint = [&](const ModelParams& p) { return verify::oracle::log_joint(inst.prior, p, inst.sim.data, inst.sim.latents); };

    auto p2 = inst.truth;
    p2.s0 = f == FamilyKind::Beta ? inst.truth.s0 * 0.9 : inst.truth.s0 * 1.1 + 0.05;
    EXPECT_NEAR(sampler.log_full_conditional_s0(st, p2.s0) - sampler.log_full_conditional_s0(st, inst.truth.s0),
                joint(p2) - joint(inst.truth), 1e-8)
        << to_string(f);

    p2 = inst.truth;
    p2.c0 = inst.truth.c0 * 1.3;
    EXPECT_NEAR(sampler.log_full_conditional_c0(st, p2.c0) - sampler.log_full_conditional_c0(st, inst.truth.c0),
                joint(p2) - joint(inst.truth), 1e-8)
        << to_string(f);

    for (auto [j, k] : edge_pairs(3)) {
      p2 = inst.truth;
      const double c_new = inst.truth.edge_intensity(j, k) + (integer_intensity(f) ? 1.0 : 0.37);
      set_edge(p2.edge_intensity, j, k, c_new);
      EXPECT_NEAR(sampler.log_full_conditional_cjk(st, j, k, c_new) -
                      sampler.log_full_conditional_cjk(st, j, k, inst.truth.edge_intensity(j, k)),
                  joint(p2) - joint(inst.truth), 1e-8)
          << to_string(f);
    }
  }
}

TEST(Conditionals, FreeFunctionsAgree) {
  const auto inst = small_instance(FamilyKind::Gamma, 2, 3, 4);
  const GibbsSampler sampler(inst.sim.data, FamilyKind::Gamma, inst.prior);
  const auto st = sampler.make_state(inst.truth, inst.sim.latents);
  EXPECT_EQ(log_full_conditional_s0(st, inst.sim.data, inst.prior, 1.7), sampler.log_full_conditional_s0(st, 1.7));
  EXPECT_EQ(log_full_conditional_c0(st, inst.sim.data, inst.prior, 2.1), sampler.log_full_conditional_c0(st, 2.1));
  EXPECT_EQ(log_full_conditional_cjk(st, inst.sim.data, inst.prior, 0, 2, 0.8),
            sampler.log_full_conditional_cjk(st, 0, 2, 0.8));
}

TEST(Conditionals, SupportBoundaries) {
  const auto inst = small_instance(FamilyKind::Beta, 2, 3, 5);
  const GibbsSampler sampler(inst.sim.data, FamilyKind::Beta, inst.prior);
  const auto st = sampler.make_state(inst.truth, inst.sim.latents);
  EXPECT_EQ(sampler.log_full_conditional_s0(st, inst.truth.c0), kNegInf);
  EXPECT_EQ(sampler.log_full_conditional_s0(st, inst.truth.c0 + 1.0), kNegInf);
  EXPECT_EQ(sampler.log_full_conditional_c0(st, 0.0), kNegInf);
  EXPECT_EQ(sampler.log_full_conditional_c0(st, inst.truth.s0 * 0.99), kNegInf);
  double max_link = 0.0;
  for (const auto& lat : inst.sim.latents) max_link = std::max(max_link, lat.links(0, 1));
  if (max_link > 0.0) {
    EXPECT_EQ(sampler.log_full_conditional_cjk(st, 0, 1, max_link - 1.0), kNegInf);
  }
  EXPECT_EQ(sampler.log_full_conditional_cjk(st, 0, 1, 2.5), kNegInf);
}

TEST(Links, BetaSingleTrialIsTwoPoint) {
  auto inst = small_instance(FamilyKind::Beta, 1, 2, 8);
  set_edge(inst.truth.edge_intensity, 0, 1, 1.0);
  inst.sim.latents[0].links = Eigen::MatrixXd::Zero(2, 2);
  const GibbsSampler sampler(inst.sim.data, FamilyKind::Beta, inst.prior);
  const auto st = sampler.make_state(inst.truth, inst.sim.latents);
  const auto pmf = sampler.link_conditional_pmf(st, 0, 0, 1);
  ASSERT_EQ(pmf.size(), 2u);
  EXPECT_NEAR(pmf[0] + pmf[1], 1.0, 1e-15);
}

// Brute-force normalisation over {0..200} for a tiny gamma instance.
TEST(Links, PoissonEnumerationMatchesBruteForce) {
  const auto inst = small_instance(FamilyKind::Gamma, 1, 2, 12);
  const GibbsSampler sampler(inst.sim.data, FamilyKind::Gamma, inst.prior);
  auto st = sampler.make_state(inst.truth, inst.sim.latents);
  const auto pmf = sampler.link_conditional_pmf(st, 0, 0, 1);
  std::vector<double> brute(201);
  for (int s = 0; s <= 200; ++s) {
    auto lat = inst.sim.latents;
    lat[0].links(0, 1) = lat[0].links(1, 0) = s;
    brute[s] = verify::oracle::log_joint(inst.prior, inst.truth, inst.sim.data, lat);
  }
  const double mx = *std::max_element(brute.begin(), brute.end());
  double z = 0.0;
  for (auto& b : brute) z += (b = std::exp(b - mx));
  double tv = 0.0;
  for (std::size_t s = 0; s < brute.size(); ++s) tv += std::abs(brute[s] / z - (s < pmf.size() ? pmf[s] : 0.0));
  EXPECT_LT(0.5 * tv, 1e-10);
}

// The log link conditional of the normal family is exactly quadratic; its
// coefficients give the mean and variance of the completed square.
TEST(Links, NormalCompletedSquare) {
  const auto inst = small_instance(FamilyKind::Normal, 2, 3, 13);
  const GibbsSampler sampler(inst.sim.data, FamilyKind::Normal, inst.prior);
  auto st = sampler.make_state(inst.truth, inst.sim.latents);
  auto g = [&](double s) { return sampler.log_link_conditional(st, 1, 0, 2, s); };
  const double a = (g(1.0) - 2 * g(0.0) + g(-1.0)) / 2.0;
  const double b = (g(1.0) - g(-1.0)) / 2.0;
  const auto [mean, var] = sampler.normal_link_conditional(st, 1, 0, 2);
  EXPECT_NEAR(var, -1.0 / (2 * a), 1e-10);
  EXPECT_NEAR(mean, -b / (2 * a), 1e-10);
  EXPECT_NEAR(g(3.7) - g(0.0), a * 3.7 * 3.7 + b * 3.7, 1e-9);

  Rng rng(14);
  const int n = 40000;
  double m = 0.0, m2 = 0.0;
  for (int r = 0; r < n; ++r) {
    sampler.sample_link_conditional(st, 1, 0, 2, rng);
    const double s = st.latents[1].links(0, 2);
    EXPECT_EQ(s, st.latents[1].links(2, 0));
    m += s;
    m2 += s * s;
  }
  m /= n;
  m2 = m2 / n - m * m;
  EXPECT_NEAR(m, mean, 4 * std::sqrt(var / n));
  EXPECT_NEAR(m2 / var, 1.0, 0.03);
}

// Frozen rest, 1e5 conjugate anchor draws, CDF discrepancy below 0.01.
TEST(Anchor, ConjugateDrawMatchesClosedForm) {
  const auto inst = small_instance(FamilyKind::Gamma, 2, 3, 15);
  const GibbsSampler sampler(inst.sim.data, FamilyKind::Gamma, inst.prior);
  auto st = sampler.make_state(inst.truth, inst.sim.latents);
  double s = inst.truth.s0, c = inst.truth.c0;
  for (auto [j, k] : edge_pairs(3)) {
    s += inst.sim.latents[0].links(j, k);
    c += inst.truth.edge_intensity(j, k);
  }
  const boost::math::gamma_distribution<> ref(s, 1.0 / c);
  Rng rng(16);
  std::vector<double> draws(100000);
  for (auto& d : draws) {
    sampler.sample_w_conditional(st, 0, rng);
    d = st.latents[0].w;
  }
  std::sort(draws.begin(), draws.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < draws.size(); i += 97) {
    ks = std::max(ks, std::abs(boost::math::cdf(ref, draws[i]) - (i + 0.5) / draws.size()));
  }
  EXPECT_LT(ks, 0.01);
}

TEST(Anchor, NoEdgesReducesToPrior) {
  auto inst = small_instance(FamilyKind::Gamma, 1, 2, 17);
  set_edge(inst.truth.edge_intensity, 0, 1, 0.0);
  inst.sim.latents[0].links.setZero();
  const GibbsSampler sampler(inst.sim.data, FamilyKind::Gamma, inst.prior);
  auto st = sampler.make_state(inst.truth, inst.sim.latents);
  Rng a(3), b(3);
  sampler.sample_w_conditional(st, 0, a);
  EXPECT_EQ(st.latents[0].w, sample_w(FamilyKind::Gamma, inst.truth.s0, inst.truth.c0, b));
}

TEST(Sweep, CachedPosteriorAndSupport) {
  for (auto f : kInferable) {
    const auto inst = small_instance(f, 3, 3, 31);
    const GibbsSampler sampler(inst.sim.data, f, inst.prior, short_config(200, 100, 1, 1, 1));
    Rng rng(32);
    auto st = sampler.initial_state(0, rng);
    for (int it = 1; it <= 200; ++it) {
      sampler.sweep(st, rng, it);
      ASSERT_GT(st.log_posterior, kNegInf) << to_string(f);
      ASSERT_NEAR(st.log_posterior, sampler.log_joint(st), 1e-8);
      ASSERT_GT(log_extended_likelihood(st.params, inst.sim.data, st.latents), kNegInf);
    }
  }
}

TEST(Sweep, TinyStepsFreezeParameters) {
  const auto inst = small_instance(FamilyKind::InverseGamma, 3, 3, 33);
  auto cfg = short_config(50, 0, 1, 1, 1);
  cfg.step_s0 = cfg.step_c0 = cfg.step_edge = 1e-14;
  const GibbsSampler sampler(inst.sim.data, FamilyKind::InverseGamma, inst.prior, cfg);
  auto st = sampler.make_state(inst.truth, inst.sim.latents);
  const auto before = st.latents;
  Rng rng(34);
  for (int it = 0; it < 50; ++it) sampler.sweep(st, rng, 0);
  EXPECT_NEAR(st.params.s0, inst.truth.s0, 1e-10);
  EXPECT_NEAR(st.params.c0, inst.truth.c0, 1e-10);
  EXPECT_LT((st.params.edge_intensity - inst.truth.edge_intensity).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NE(st.latents[0].w, before[0].w);
}

// Started at the simulated truth, the chain stays in the bulk.
TEST(Sweep, InvarianceSmoke) {
  const auto truth = five_region_params();
  const auto sim = simulate(truth, 100, 35);
  const auto prior = PriorConfig::defaults(FamilyKind::InverseGamma);
  const GibbsSampler sampler(sim.data, FamilyKind::InverseGamma, prior, short_config(1000, 500, 1, 1, 1));
  auto st = sampler.make_state(truth, sim.latents);
  Rng rng(36);
  // The log joint itself swings by thousands once small-shape links sit near
  // zero, so only finiteness and the anchor mean are tracked.
  double w_total = 0.0;
  int w_count = 0;
  for (int it = 1; it <= 1000; ++it) {
    sampler.sweep(st, rng, it);
    ASSERT_TRUE(std::isfinite(st.log_posterior)) << it;
    for (const auto& lat : st.latents) w_total += lat.w, ++w_count;
  }
  EXPECT_NEAR(w_total / w_count, 0.6, 0.03);
  EXPECT_LT(std::abs(st.params.s0 / st.params.c0 - 0.6), 0.1);
}

TEST(Chains, ReproducibleAndSized) {
  const auto inst = small_instance(FamilyKind::Gamma, 20, 3, 41);
  const auto cfg = short_config(300, 100, 7, 2, 5);
  const auto a = run_chains(inst.sim.data, FamilyKind::Gamma, inst.prior, cfg);
  const auto b = run_chains(inst.sim.data, FamilyKind::Gamma, inst.prior, cfg);
  EXPECT_TRUE(a == b);
  for (const auto& ch : a.chains) {
    EXPECT_EQ(ch.s0.size(), static_cast<std::size_t>((300 - 100) / 7));
    EXPECT_EQ(ch.edges.size(), 3u);
    EXPECT_EQ(ch.s_star.size(), ch.s0.size());
  }
  EXPECT_FALSE(a.chains[0] == a.chains[1]);
  auto other = cfg;
  other.seed = 6;
  EXPECT_FALSE(run_chains(inst.sim.data, FamilyKind::Gamma, inst.prior, other) == a);
}

TEST(Chains, EnumerationCapIsReported) {
  const auto inst = small_instance(FamilyKind::Gamma, 3, 2, 43);
  auto cfg = short_config(10, 0, 1, 1, 1);
  cfg.enum_cap = 1;
  EXPECT_THROW(run_chains(inst.sim.data, FamilyKind::Gamma, inst.prior, cfg), ChainFailure);
}

// Adapted random-walk blocks on the five-region design.
TEST(Chains, AcceptanceRatesInRange) {
  const auto sim = simulate(five_region_params(), 500, 44);
  const auto samples =
      run_chains(sim.data, FamilyKind::InverseGamma, PriorConfig::defaults(FamilyKind::InverseGamma), short_config(600, 400, 10, 1, 2));
  const auto& ch = samples.chains[0];
  for (double r : {ch.accept_s0, ch.accept_c0, ch.accept_links}) {
    EXPECT_GT(r, 0.1);
    EXPECT_LT(r, 0.6);
  }
  for (double r : ch.accept_edges) {
    EXPECT_GT(r, 0.1);
    EXPECT_LT(r, 0.6);
  }
}

TEST(Summaries, ConstantChain) {
  PosteriorSamples s;
  s.node_names = {"A", "B"};
  ChainDraws c;
  c.s0.assign(10, 2.0);
  c.c0.assign(10, 3.0);
  c.edges = {std::vector<double>(10, 0.5)};
  s.chains = {c, c};
  const auto rows = summarize(s);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[2].name, "c_1_2");
  EXPECT_EQ(rows[0].mean, 2.0);
  EXPECT_EQ(rows[0].sd, 0.0);
  EXPECT_EQ(rows[1].q025, 3.0);
  EXPECT_EQ(rows[1].q975, 3.0);
  EXPECT_EQ(rows[2].psrf, 1.0);
}

TEST(Summaries, ChainOrderInvariant) {
  PosteriorSamples s;
  s.node_names = {"A", "B"};
  Rng rng(50);
  for (int c = 0; c < 2; ++c) {
    ChainDraws d;
    for (int i = 0; i < 100; ++i) {
      d.s0.push_back(std_normal(rng));
      d.c0.push_back(uniform01(rng));
    }
    d.edges = {d.c0};
    s.chains.push_back(d);
  }
  auto r = s;
  std::swap(r.chains[0], r.chains[1]);
  const auto a = summarize(s), b = summarize(r);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i].mean, b[i].mean, 1e-14);
    EXPECT_EQ(a[i].q025, b[i].q025);
    EXPECT_EQ(a[i].q975, b[i].q975);
  }
}

TEST(Mse, HandArithmetic) {
  Eigen::MatrixXd a(1, 2), b(1, 2);
  a << 1.0, 2.0;
  b << 0.0, 4.0;
  EXPECT_DOUBLE_EQ(mean_squared_error(a, b), (1.0 + 4.0) / 2.0);
  EXPECT_EQ(mean_squared_error(a, a), 0.0);
}

// With an enormous c0 the predictive collapses onto s*/c* = y.
TEST(Mse, DegeneratePredictive) {
  Dataset d;
  d.y.resize(1, 2);
  d.y << 0.3, -1.2;
  d.node_names = {"A", "B"};
  PosteriorSamples s;
  s.family = FamilyKind::Normal;
  s.node_names = d.node_names;
  ChainDraws c;
  c.s0 = {0.0};
  c.c0 = {1e12};
  c.edges = {{0.0}};
  c.s_star = {d.y * 1e12};
  s.chains = {c};
  EXPECT_LT(predictive_mse(s, d, 1).posterior_mean, 1e-10);
  s.chains[0].s_star.clear();
  EXPECT_THROW(predictive_mse(s, d, 1), std::invalid_argument);
}
