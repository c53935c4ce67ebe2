#include <cmath>

#include <gtest/gtest.h>

#include "qvfgm/model.hpp"
#include "qvfgm/verify.hpp"

using namespace qvfgm;

namespace {

ModelParams triangle(FamilyKind f, double s0, double c0, double c12, double c13, double c23) {
  ModelParams p;
  p.family = f;
  p.s0 = s0;
  p.c0 = c0;
  p.edge_intensity = uniform_intensity(3, 0.0);
  set_edge(p.edge_intensity, 0, 1, c12);
  set_edge(p.edge_intensity, 0, 2, c13);
  set_edge(p.edge_intensity, 1, 2, c23);
  return p;
}

}  // namespace

TEST(ModelParams, Validation) {
  auto p = triangle(FamilyKind::Beta, 1.0, 2.0, 1.0, 2.0, 3.0);
  EXPECT_NO_THROW(p.validate());
  set_edge(p.edge_intensity, 0, 1, 1.5);
  EXPECT_THROW(p.validate(), DomainError);
  p = triangle(FamilyKind::Gamma, 1.0, 2.0, 1.0, 2.0, 3.0);
  p.edge_intensity(0, 1) = 4.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = triangle(FamilyKind::Gamma, 1.0, 2.0, -1.0, 2.0, 3.0);
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = triangle(FamilyKind::Beta, 3.0, 2.0, 1.0, 1.0, 1.0);
  EXPECT_THROW(p.validate(), DomainError);
}

TEST(MarginalMoments, Examples) {
  auto m = marginal_moments(triangle(FamilyKind::Normal, 0.0, 1.0, 1.0, 1.0, 1.0));
  EXPECT_DOUBLE_EQ(m.mean, 0.0);
  EXPECT_DOUBLE_EQ(m.variance, 1.0);
  m = marginal_moments(five_region_params());
  EXPECT_NEAR(m.mean, 0.6, 1e-15);
  EXPECT_NEAR(m.variance, 0.04, 1e-15);
}

TEST(MarginalMoments, InfiniteVariance) {
  EXPECT_THROW(marginal_moments(triangle(FamilyKind::InverseGamma, 1.0, 1.0, 1, 1, 1)), InfiniteVarianceError);
  EXPECT_THROW(marginal_moments(triangle(FamilyKind::GSSt, 1.0, 0.5, 1, 1, 1)), InfiniteVarianceError);
  EXPECT_NO_THROW(marginal_moments(triangle(FamilyKind::Beta, 0.5, 1.0, 1, 1, 1)));
}

TEST(Correlation, TwoNodeClosedForm) {
  ModelParams p;
  p.family = FamilyKind::Gamma;
  p.s0 = 2.0;
  p.c0 = 3.0;
  p.edge_intensity = uniform_intensity(2, 1.7);
  EXPECT_NEAR(pairwise_correlation(p, 0, 1), 1.7 / (3.0 + 1.7), 1e-15);
}

TEST(Correlation, MissingEdgeFactorises) {
  const auto p = triangle(FamilyKind::Normal, 0.0, 2.0, 0.0, 1.3, 0.6);
  EXPECT_NEAR(pairwise_correlation(p, 0, 1), pairwise_correlation(p, 0, 2) * pairwise_correlation(p, 1, 2), 1e-15);
}

TEST(Correlation, EqualTriangle) {
  const double e2 = std::exp(2.0);
  const auto p = triangle(FamilyKind::InverseGamma, 6.0, 10.0, e2, e2, e2);
  EXPECT_NEAR(pairwise_correlation(p, 0, 1), 0.476, 5e-4);
  EXPECT_NEAR(pairwise_correlation(p, 0, 1), (10 * e2 + 4 * e2 * e2) / std::pow(10 + 2 * e2, 2), 1e-14);
}

TEST(Correlation, Errors) {
  const auto p = triangle(FamilyKind::Normal, 0.0, 2.0, 1.0, 1.0, 1.0);
  EXPECT_THROW(pairwise_correlation(p, 1, 1), std::out_of_range);
  EXPECT_THROW(pairwise_correlation(p, 0, 3), std::out_of_range);
}

TEST(Correlation, MatrixSymmetricUnitDiagonal) {
  const auto r = correlation_matrix(five_region_params());
  EXPECT_TRUE(r.isApprox(r.transpose(), 0.0));
  for (int j = 0; j < 5; ++j) EXPECT_EQ(r(j, j), 1.0);
}

TEST(Precision, MatchesGenericInverse) {
  for (auto p : {triangle(FamilyKind::Normal, 0.0, 2.0, 0.0, 1.3, 0.6), triangle(FamilyKind::Gamma, 1.0, 5.0, 2.0, 0.4, 1.1),
                 triangle(FamilyKind::InverseGamma, 6.0, 10.0, 7.0, 0.1, 7.0)}) {
    const auto chk = precision_check_3x3(p);
    const Eigen::Matrix3d r = correlation_matrix(p);
    const Eigen::Matrix3d ref = p.c0 * r.inverse();
    EXPECT_LT((chk.precision - ref).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(chk.determinant_factor, r.determinant(), 1e-14);
  }
}

TEST(Precision, MissingEdgeGivesZeroEntry) {
  const auto p = triangle(FamilyKind::Normal, 0.0, 2.0, 0.0, 1.3, 0.6);
  const Eigen::Matrix3d inv = correlation_matrix(p).inverse();
  EXPECT_LT(std::abs(inv(0, 1)), 1e-12);
  EXPECT_LT(std::abs(precision_check_3x3(p).precision(0, 1)), 1e-12);
}

TEST(Precision, Errors) {
  ModelParams p;
  p.family = FamilyKind::Normal;
  p.c0 = 1.0;
  p.edge_intensity = uniform_intensity(4, 1.0);
  EXPECT_THROW(precision_check_3x3(p), std::invalid_argument);
  // Intensities overwhelming c0 push the correlations to one.
  EXPECT_THROW(precision_check_3x3(triangle(FamilyKind::Normal, 0.0, 1e-9, 1e9, 1e9, 1e9)), DomainError);
}

TEST(Simulate, DeterministicAcrossThreadCounts) {
  const auto p = five_region_params();
  const auto a = simulate(p, 257, 17, 1);
  const auto b = simulate(p, 257, 17, 4);
  EXPECT_EQ(a.data.y, b.data.y);
  for (std::size_t i = 0; i < a.latents.size(); ++i) {
    EXPECT_EQ(a.latents[i].w, b.latents[i].w);
    EXPECT_EQ(a.latents[i].links, b.latents[i].links);
  }
  EXPECT_NE(simulate(p, 257, 18, 1).data.y, a.data.y);
}

TEST(Simulate, LinksRespectStructure) {
  auto p = triangle(FamilyKind::Beta, 1.0, 3.0, 0.0, 2.0, 4.0);
  const auto sim = simulate(p, 200, 3);
  for (const auto& lat : sim.latents) {
    EXPECT_EQ(lat.links(0, 1), 0.0);
    EXPECT_LE(lat.links(0, 2), 2.0);
    EXPECT_LE(lat.links(1, 2), 4.0);
    EXPECT_EQ(lat.links, lat.links.transpose());
  }
  EXPECT_NO_THROW(sim.data.validate(FamilyKind::Beta));
}

TEST(ExtendedLikelihood, MatchesOracleJoint) {
  for (auto f : {FamilyKind::Normal, FamilyKind::Gamma, FamilyKind::InverseGamma, FamilyKind::Beta, FamilyKind::InverseBeta}) {
    Rng rng(7);
    const auto p = verify::random_small_params(f, 3, rng);
    const auto sim = simulate(p, 3, 7);
    const PriorConfig prior = PriorConfig::defaults(f);
    const double ref = verify::oracle::log_joint(prior, p, sim.data, sim.latents) - verify::oracle::log_priors(prior, f, p);
    EXPECT_NEAR(log_extended_likelihood(p, sim.data, sim.latents), ref, 1e-9) << to_string(f);
  }
}

TEST(ExtendedLikelihood, SupportViolations) {
  auto p = triangle(FamilyKind::Gamma, 2.0, 3.0, 1.0, 0.0, 1.0);
  auto sim = simulate(p, 2, 1);
  EXPECT_GT(log_extended_likelihood(p, sim.data, sim.latents), kNegInf);
  auto bad = sim.latents;
  bad[0].links(0, 2) = bad[0].links(2, 0) = 1.0;  // link on a zero-intensity edge
  EXPECT_EQ(log_extended_likelihood(p, sim.data, bad), kNegInf);
  bad = sim.latents;
  bad[1].links(0, 1) = bad[1].links(1, 0) = 0.5;  // non-integer Poisson link
  EXPECT_EQ(log_extended_likelihood(p, sim.data, bad), kNegInf);
  bad = sim.latents;
  bad[0].w = -1.0;
  EXPECT_EQ(log_extended_likelihood(p, sim.data, bad), kNegInf);
}

TEST(FiveRegion, Parameters) {
  const auto p = five_region_params();
  EXPECT_EQ(p.family, FamilyKind::InverseGamma);
  EXPECT_EQ(p.nodes(), 5);
  int small = 0;
  for (int j = 0; j < 5; ++j)
    for (int k = j + 1; k < 5; ++k) small += p.edge_intensity(j, k) < 1.0;
  EXPECT_EQ(small, 3);
  EXPECT_EQ(p.edge_intensity(0, 2), std::exp(-2.0));
  EXPECT_EQ(p.edge_intensity(0, 1), std::exp(2.0));
}
