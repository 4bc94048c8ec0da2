#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "sae/diagnostics.hpp"

using namespace sae;

namespace {

std::vector<double> normals(std::size_t n, std::uint64_t seed, double shift = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> out(n);
  for (auto& x : out) x = shift + z(rng);
  return out;
}

std::vector<double> ar1(std::size_t n, double rho, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> out(n);
  double x = z(rng) / std::sqrt(1 - rho * rho);
  for (auto& v : out) {
    x = rho * x + z(rng);
    v = x;
  }
  return out;
}

}  // namespace

TEST(SplitRhat, IidChainsNearOne) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto a = normals(2000, 2 * s + 1), b = normals(2000, 2 * s + 2);
    const double r = split_rhat({a, b});
    EXPECT_GE(r, 0.99);
    EXPECT_LE(r, 1.02);
  }
}

TEST(SplitRhat, DisjointConstantChainsFlagged) {
  std::vector<double> a(1000, 0.0), b(1000, 10.0);
  const auto d = diagnose({a, b});
  EXPECT_TRUE(std::isinf(d.rhat) || d.rhat > 1.05);
  EXPECT_FALSE(d.converged());
}

TEST(SplitRhat, ShiftedChainsFlagged) {
  auto a = normals(1000, 1), b = normals(1000, 2, 3.0);
  EXPECT_GT(split_rhat({a, b}), 1.5);
}

TEST(SplitRhat, AllDrawsIdentical) {
  std::vector<double> a(800, 4.2), b(800, 4.2);
  const auto d = diagnose({a, b});
  EXPECT_TRUE(d.constant);
  EXPECT_TRUE(std::isnan(d.rhat));
  EXPECT_FALSE(d.converged());
}

TEST(SplitRhat, DriftWithinChainDetectedBySplit) {
  std::vector<double> a(1000), b(1000);
  for (std::size_t i = 0; i < 1000; ++i) {
    a[i] = static_cast<double>(i) / 100.0;
    b[i] = static_cast<double>(i) / 100.0 + 0.001;
  }
  EXPECT_GT(split_rhat({a, b}), 1.05);
}

TEST(EffectiveSampleSize, IidCloseToDrawCount) {
  auto a = normals(4000, 5), b = normals(4000, 6);
  const double ess = effective_sample_size({a, b});
  EXPECT_GT(ess, 6500);
  EXPECT_LT(ess, 9500);
}

TEST(EffectiveSampleSize, Ar1MatchesTheory) {
  // Integrated autocorrelation time of AR(1) is (1 + rho) / (1 - rho).
  const double rho = 0.8;
  std::vector<std::vector<double>> chains;
  for (std::uint64_t s = 0; s < 4; ++s) chains.push_back(ar1(20000, rho, 100 + s));
  std::vector<ChainView> views(chains.begin(), chains.end());
  const double expected = 80000.0 * (1 - rho) / (1 + rho);
  EXPECT_NEAR(effective_sample_size(views), expected, 0.2 * expected);
}

TEST(EffectiveSampleSize, AntitheticBoundedByLogCap) {
  std::vector<double> a(1000), b(1000);
  for (std::size_t i = 0; i < 1000; ++i) a[i] = b[i] = (i % 2 ? 1.0 : -1.0) + 1e-3 * static_cast<double>(i % 7);
  const double ess = effective_sample_size({a, b});
  EXPECT_TRUE(std::isfinite(ess));
  EXPECT_LE(ess, 2000.0 * std::log10(2000.0) + 1e-9);
}

TEST(Diagnose, ConvergedRule) {
  ScalarDiagnostics d;
  d.rhat = 1.01;
  d.ess = 150;
  EXPECT_TRUE(d.converged());
  d.ess = 99;
  EXPECT_FALSE(d.converged());
  d.ess = 150;
  d.rhat = 1.06;
  EXPECT_FALSE(d.converged());
}
