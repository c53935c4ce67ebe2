#include <cmath>

#include <gtest/gtest.h>

#include "qvfgm/verify.hpp"

using namespace qvfgm;
using namespace qvfgm::verify;

namespace {

ModelParams params(FamilyKind f, double s0, double c0, int p, double edge) {
  ModelParams m;
  m.family = f;
  m.s0 = s0;
  m.c0 = c0;
  m.edge_intensity = uniform_intensity(p, edge);
  return m;
}

}  // namespace

TEST(Reports, PassRules) {
  EXPECT_TRUE(se_report("x", 1.0, 1.29, 0.1, 3.0).pass);
  EXPECT_FALSE(se_report("x", 1.0, 1.31, 0.1, 3.0).pass);
  EXPECT_TRUE(tolerance_report("y", 0.0, 1e-9, 1e-8).pass);
  EXPECT_EQ(se_multiplier(20), 3.0);
  EXPECT_EQ(se_multiplier(21), 4.0);
}

TEST(MomentCheck, NormalStandard) {
  const auto reports = mc_moment_check(params(FamilyKind::Normal, 0.0, 1.0, 3, 0.5), 20000, 1);
  ASSERT_EQ(reports.size(), 6u);
  EXPECT_EQ(reports[0].target_value, 0.0);
  EXPECT_EQ(reports[1].target_value, 1.0);
  EXPECT_TRUE(all_pass(reports));
}

TEST(MomentCheck, FiveRegionTargets) {
  const auto reports = mc_moment_check(five_region_params(), 20000, 2);
  EXPECT_NEAR(reports[0].target_value, 0.6, 1e-15);
  EXPECT_NEAR(reports[1].target_value, 0.04, 1e-15);
  EXPECT_TRUE(all_pass(reports));
}

TEST(MomentCheck, TargetsIgnoreEdges) {
  const auto a = mc_moment_check(params(FamilyKind::Gamma, 2.0, 4.0, 2, 0.0), 10000, 3);
  const auto b = mc_moment_check(params(FamilyKind::Gamma, 2.0, 4.0, 2, 3.0), 10000, 3);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].target_value, b[i].target_value);
}

TEST(MomentCheck, Preconditions) {
  EXPECT_THROW(mc_moment_check(params(FamilyKind::Normal, 0, 1, 2, 1), 100, 1), std::invalid_argument);
  EXPECT_THROW(mc_moment_check(params(FamilyKind::GSSt, 0, 3, 2, 1), 10000, 1), DomainError);
}

TEST(CorrelationCheck, Examples) {
  auto two = params(FamilyKind::Gamma, 2.0, 3.0, 2, 1.5);
  auto r = mc_correlation_check(two, 20000, 4);
  EXPECT_NEAR(r[0].target_value, 1.5 / 4.5, 1e-15);
  EXPECT_TRUE(all_pass(r));

  auto tri = params(FamilyKind::Normal, 0.0, 2.0, 3, 1.0);
  set_edge(tri.edge_intensity, 0, 1, 0.0);
  r = mc_correlation_check(tri, 20000, 5);
  EXPECT_NEAR(r[0].target_value, r[1].target_value * r[2].target_value, 1e-15);
  EXPECT_TRUE(all_pass(r));

  const auto eq = params(FamilyKind::InverseGamma, 6.0, 10.0, 3, std::exp(2.0));
  EXPECT_NEAR(correlation_target(eq, 0, 1), 0.476, 5e-4);
}

TEST(ConditionalCheck, GammaTiny) {
  const auto r = conditional_consistency_check(FamilyKind::Gamma, {1, 2}, 7);
  EXPECT_FALSE(r.empty());
  EXPECT_TRUE(all_pass(r));
}

TEST(ConditionalCheck, AllFamilies) {
  for (auto f : {FamilyKind::Normal, FamilyKind::Gamma, FamilyKind::InverseGamma, FamilyKind::Beta, FamilyKind::InverseBeta}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      for (const auto& r : conditional_consistency_check(f, {}, seed)) EXPECT_TRUE(r.pass) << to_string(f) << " " << r.check_name;
    }
  }
}

TEST(ConditionalCheck, Preconditions) {
  EXPECT_THROW(conditional_consistency_check(FamilyKind::GSSt, {}, 1), DomainError);
  EXPECT_THROW(conditional_consistency_check(FamilyKind::Gamma, {4, 3}, 1), std::invalid_argument);
}

TEST(ConditionalCheck, DegenerateBetaDataRejectedAtIngestion) {
  Dataset d;
  d.y = Eigen::MatrixXd::Zero(2, 2);
  EXPECT_THROW(d.validate(FamilyKind::Beta), DomainError);
}

TEST(Normalisation, AllFamilies) {
  for (auto f : kAllFamilies) {
    const double s = f == FamilyKind::Beta ? 1.2 : 2.0;
    const double w = f == FamilyKind::Beta ? 0.4 : 0.9;
    for (const auto& r : density_normalization_check(f, s, 3.0, w, integer_intensity(f) ? 5.0 : 2.2)) {
      EXPECT_TRUE(r.pass) << r.check_name << " " << r.estimate;
    }
  }
}

TEST(Determinism, SameSeedSameReports) {
  const auto a = mc_correlation_check(five_region_params(), 10000, 9);
  const auto b = mc_correlation_check(five_region_params(), 10000, 9);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].estimate, b[i].estimate);
}
