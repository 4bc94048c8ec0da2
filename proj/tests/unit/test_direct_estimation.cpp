#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sae/direct_estimation.hpp"
#include "sae/error.hpp"

using namespace sae;
using sae::testing::record;
using sae::testing::square;

namespace {

std::vector<IndividualRecord> two_cluster_example() {
  return {record("A", "ca", 1, 1), record("A", "ca", 1, 1), record("A", "cb", 1, 0),
          record("A", "cb", 1, 0)};
}

std::vector<IndividualRecord> random_region(std::mt19937_64& rng, std::size_t max_n = 12) {
  std::uniform_int_distribution<std::size_t> size(1, max_n);
  std::uniform_int_distribution<int> clusters(1, 4);
  std::uniform_real_distribution<double> w(0.05, 20.0);
  std::bernoulli_distribution y(0.3);
  const std::size_t n = size(rng);
  std::vector<IndividualRecord> out;
  for (std::size_t k = 0; k < n; ++k)
    out.push_back(record("A", "c" + std::to_string(clusters(rng)), w(rng), y(rng)));
  return out;
}

}  // namespace

TEST(DirectPrevalence, EqualWeights) {
  std::vector<IndividualRecord> r{record("A", "c", 1, 1), record("A", "c", 1, 0),
                                  record("A", "c", 1, 1), record("A", "c", 1, 0)};
  EXPECT_DOUBLE_EQ(direct_prevalence(r), 0.5);
}

TEST(DirectPrevalence, UnequalWeights) {
  std::vector<IndividualRecord> r{record("A", "c", 1, 1), record("A", "c", 3, 0)};
  EXPECT_DOUBLE_EQ(direct_prevalence(r), 0.25);
}

TEST(DirectPrevalence, AllZeroAndEmpty) {
  std::vector<IndividualRecord> r{record("A", "c", 2, 0), record("A", "d", 1, 0)};
  EXPECT_EQ(direct_prevalence(r), 0.0);
  EXPECT_THROW(direct_prevalence({}), ValidationError);
}

TEST(DirectVariance, TwoClusterWorkedExample) {
  auto r = two_cluster_example();
  const double p = direct_prevalence(r);
  EXPECT_EQ(p, 0.5);
  auto v = direct_variance(r, p);
  ASSERT_TRUE(v);
  EXPECT_EQ(*v, 0.25);
}

TEST(DirectVariance, NoBetweenClusterVariation) {
  std::vector<IndividualRecord> r{record("A", "ca", 1, 1), record("A", "ca", 2, 1),
                                  record("A", "cb", 3, 1)};
  auto v = direct_variance(r, direct_prevalence(r));
  ASSERT_TRUE(v);
  EXPECT_EQ(*v, 0.0);
}

TEST(DirectVariance, SingleClusterIsUndefined) {
  std::vector<IndividualRecord> r{record("A", "c", 1, 1), record("A", "c", 1, 0)};
  EXPECT_FALSE(direct_variance(r, 0.5));
  auto e = estimate_region("A", r);
  EXPECT_EQ(e.degenerate, Degeneracy::single_cluster);
  EXPECT_TRUE(std::isnan(e.var_p));
  EXPECT_TRUE(std::isnan(e.logit_y));
  EXPECT_FALSE(e.usable());
}

TEST(DirectVariance, StrataGetOwnFactors) {
  // Stratum s1: clusters a,b; stratum s2: clusters c,d.
  std::vector<IndividualRecord> r{record("A", "a", 1, 1), record("A", "b", 1, 0),
                                  record("A", "c", 2, 1), record("A", "d", 2, 1)};
  r[0].stratum = r[1].stratum = "s1";
  r[2].stratum = r[3].stratum = "s2";
  const double p = direct_prevalence(r);  // 5/6
  const double W = 6.0;
  const double za = 1 * (1 - p), zb = -p, zc = 2 * (1 - p), zd = 2 * (1 - p);
  const double s1 = 2.0 * ((za * za + zb * zb) - (za + zb) * (za + zb) / 2.0);
  const double s2 = 2.0 * ((zc * zc + zd * zd) - (zc + zd) * (zc + zd) / 2.0);
  auto v = direct_variance(r, p);
  ASSERT_TRUE(v);
  EXPECT_NEAR(*v, (s1 + s2) / (W * W), 1e-15);
}

TEST(LogitTransform, Examples) {
  auto a = logit_transform(0.5, 0.01);
  ASSERT_TRUE(a);
  EXPECT_EQ(a->logit_y, 0.0);
  EXPECT_DOUBLE_EQ(a->var_logit, 0.16);
  auto b = logit_transform(0.5, 0.0);
  ASSERT_TRUE(b);
  EXPECT_EQ(b->logit_y, 0.0);
  EXPECT_EQ(b->var_logit, 0.0);
  EXPECT_FALSE(logit_transform(0.0, 0.0));
  EXPECT_FALSE(logit_transform(1.0, 0.0));
}

TEST(EstimateRegion, DegeneracyFlags) {
  std::vector<IndividualRecord> zeros{record("Z", "a", 1, 0), record("Z", "b", 1, 0)};
  std::vector<IndividualRecord> ones{record("O", "a", 1, 1), record("O", "b", 1, 1)};
  auto z = estimate_region("Z", zeros);
  auto o = estimate_region("O", ones);
  EXPECT_EQ(z.degenerate, Degeneracy::all_zero);
  EXPECT_EQ(o.degenerate, Degeneracy::all_one);
  EXPECT_EQ(z.var_p, 0.0);
  EXPECT_TRUE(std::isnan(z.logit_y) && std::isnan(z.var_logit));
  EXPECT_TRUE(std::isnan(o.logit_y) && std::isnan(o.var_logit));
}

TEST(EstimateAll, TwoRegionsFromExamples) {
  SurveyDataset ds;
  ds.records = two_cluster_example();
  ds.records.push_back(record("B", "cc", 1, 1));
  ds.records.push_back(record("B", "cd", 3, 0));
  ds.regions = {square("A", 0, 0), square("B", 1, 0)};
  auto est = estimate_all(ds);
  ASSERT_EQ(est.size(), 2u);
  EXPECT_EQ(est[0].region_id, "A");
  EXPECT_EQ(est[0].p_hat, 0.5);
  EXPECT_EQ(est[0].var_p, 0.25);
  EXPECT_EQ(est[0].n, 4u);
  EXPECT_EQ(est[0].m_clusters, 2u);
  EXPECT_EQ(est[1].p_hat, 0.25);
  // z = (0.75, -0.75), W = 4: 2 * 1.125 / 16
  EXPECT_DOUBLE_EQ(est[1].var_p, 2.0 * 1.125 / 16.0);
}

TEST(EstimateAll, AllOneRegionDoesNotAffectOthers) {
  SurveyDataset ds;
  ds.records = two_cluster_example();
  ds.records.push_back(record("B", "cc", 1, 1));
  ds.records.push_back(record("B", "cd", 3, 1));
  ds.regions = {square("A", 0, 0), square("B", 1, 0)};
  auto est = estimate_all(ds);
  EXPECT_EQ(est[0].degenerate, Degeneracy::none);
  EXPECT_EQ(est[1].degenerate, Degeneracy::all_one);
}

TEST(DirectProperties, OracleAndWeightScaleInvariance) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int trial = 0; trial < 2000; ++trial) {
    auto r = random_region(rng);
    const double p = direct_prevalence(r);
    EXPECT_NEAR(p, sae::testing::brute_weighted_mean(r), 1e-12);
    const auto v = direct_variance(r, p);

    auto scaled = r;
    const double c = scale(rng);
    for (auto& x : scaled) x.weight *= c;
    const double ps = direct_prevalence(scaled);
    EXPECT_NEAR(ps, p, 1e-12);
    const auto vs = direct_variance(scaled, ps);
    ASSERT_EQ(v.has_value(), vs.has_value());
    if (v) {
      EXPECT_NEAR(*vs, *v, 1e-12 * std::max(1.0, *v));
      EXPECT_NEAR(*v, sae::testing::brute_cluster_variance(r, p), 1e-12);
    }
  }
}

TEST(DirectProperties, ZeroVarianceIffResidualTotalsVanish) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 2000; ++trial) {
    auto r = random_region(rng);
    const double p = direct_prevalence(r);
    auto v = direct_variance(r, p);
    if (!v) continue;
    std::map<std::string, double> z;
    for (const auto& x : r) z[x.cluster_id] += x.weight * (x.outcome - p);
    bool all_zero = true;
    for (auto& [_, t] : z) all_zero = all_zero && std::abs(t) < 1e-12;
    EXPECT_EQ(*v < 1e-24, all_zero);
  }
}

TEST(DirectProperties, DeltaMethodIdentity) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 2000; ++trial) {
    auto e = estimate_region("A", random_region(rng));
    if (!e.usable()) continue;
    const double q = e.p_hat * (1 - e.p_hat);
    EXPECT_NEAR(e.var_logit * q * q, e.var_p, 1e-12);
  }
}

TEST(DirectCsv, RoundTripWithNA) {
  SurveyDataset ds;
  ds.records = two_cluster_example();
  ds.records.push_back(record("B", "cc", 1, 0));
  ds.records.push_back(record("C", "cz", 1, 1));
  ds.records.push_back(record("C", "cz", 2.5, 0));
  ds.regions = {square("A", 0, 0), square("B", 1, 0), square("C", 2, 0)};
  auto est = estimate_all(ds);
  std::ostringstream os;
  write_direct_csv(os, est);
  EXPECT_NE(os.str().find(",NA,"), std::string::npos);
  std::istringstream is(os.str());
  auto back = read_direct_csv(is);
  ASSERT_EQ(back.size(), est.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    EXPECT_EQ(back[i].region_id, est[i].region_id);
    EXPECT_EQ(back[i].degenerate, est[i].degenerate);
    EXPECT_EQ(back[i].n, est[i].n);
    EXPECT_EQ(back[i].p_hat, est[i].p_hat);
    EXPECT_EQ(std::isnan(back[i].var_p), std::isnan(est[i].var_p));
    if (!std::isnan(est[i].var_p)) EXPECT_EQ(back[i].var_p, est[i].var_p);
  }
}
