#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "postval/distribution_metrics.hpp"

using namespace postval;

namespace {

Vector normal_draws(std::size_t n, double mu, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(mu, sd);
  Vector v(n);
  for (double& x : v) x = g(rng);
  return v;
}

double log_normal_pdf(double x, double mu) { return -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * (x - mu) * (x - mu); }

}  // namespace

TEST(Wasserstein1d, IdenticalAndShift) {
  const Vector a = normal_draws(50, 0, 1, 1);
  EXPECT_EQ(wasserstein_1d(a, a), 0.0);
  Vector b = a;
  for (double& x : b) x += 2.5;
  EXPECT_NEAR(wasserstein_1d(a, b), 2.5, 1e-12);
}

TEST(Wasserstein1d, SortedDifferenceExample) {
  EXPECT_EQ(wasserstein_1d(Vector{0, 0, 0, 0}, Vector{0, 0, 0, 4}), 1.0);
}

TEST(Wasserstein1d, EqualSizesMatchOracle) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + rng() % 40;
    const Vector a = normal_draws(n, 0, 1, rng()), b = normal_draws(n, 0.5, 2, rng());
    EXPECT_NEAR(wasserstein_1d(a, b), oracle::w1_sorted(a, b), 1e-12);
  }
}

TEST(Wasserstein1d, UnequalSizesViaReplication) {
  // Repeating every sample m times (and the other set n times) leaves both
  // empirical laws unchanged and makes the sizes equal.
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng() % 9, m = 1 + rng() % 9;
    const Vector a = normal_draws(n, 0, 1, rng()), b = normal_draws(m, 1, 1, rng());
    Vector ra, rb;
    for (double x : a) ra.insert(ra.end(), m, x);
    for (double x : b) rb.insert(rb.end(), n, x);
    EXPECT_NEAR(wasserstein_1d(a, b), oracle::w1_sorted(ra, rb), 1e-12);
  }
}

TEST(Wasserstein1d, SymmetricAndTriangle) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 200; ++t) {
    const Vector a = normal_draws(1 + rng() % 20, 0, 1, rng());
    const Vector b = normal_draws(1 + rng() % 20, 1, 1, rng());
    const Vector c = normal_draws(1 + rng() % 20, -1, 2, rng());
    EXPECT_NEAR(wasserstein_1d(a, b), wasserstein_1d(b, a), 1e-12);
    EXPECT_LE(wasserstein_1d(a, c), wasserstein_1d(a, b) + wasserstein_1d(b, c) + 1e-12);
  }
}

TEST(Wasserstein1d, EmptyInput) { EXPECT_THROW(wasserstein_1d(Vector{}, Vector{1.0}), InvalidArgument); }

TEST(MarginalWasserstein, ShiftOnOneAxis) {
  const PosteriorSamples a(std::vector<Vector>{{0, 0}, {1, 2}, {3, -1}});
  const PosteriorSamples b(std::vector<Vector>{{1, 0}, {2, 2}, {4, -1}});
  EXPECT_EQ(marginal_wasserstein(a, a), 0.0);
  EXPECT_NEAR(marginal_wasserstein(a, b, MarginalAggregate::Mean), 0.5, 1e-12);
  EXPECT_NEAR(marginal_wasserstein(a, b, MarginalAggregate::Max), 1.0, 1e-12);
  EXPECT_THROW(marginal_wasserstein(a, PosteriorSamples::univariate({0.0})), InvalidArgument);
}

TEST(Mmd, IdenticalIsZero) {
  const PosteriorSamples a(std::vector<Vector>{{0, 0}, {1, 2}, {3, -1}});
  EXPECT_EQ(mmd2(a, a, KernelSpec{1.0}), 0.0);
}

TEST(Mmd, FarApartApproachesTwo) {
  const PosteriorSamples a(std::vector<Vector>(5, Vector{0.0}));
  const PosteriorSamples b(std::vector<Vector>(7, Vector{1000.0}));
  EXPECT_NEAR(mmd2(a, b, KernelSpec{1.0}), 2.0, 1e-6);
}

TEST(Mmd, MatchesNaiveDoubleSum) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    oracle::Points a(5, Vector(2)), b(5, Vector(2));
    for (auto& p : a)
      for (double& v : p) v = g(rng);
    for (auto& p : b)
      for (double& v : p) v = g(rng) + 0.5;
    const double sigma = 0.5 + static_cast<double>(t % 3);
    EXPECT_NEAR(mmd2(PosteriorSamples(a), PosteriorSamples(b), KernelSpec{sigma}), oracle::mmd2_biased(a, b, sigma),
                1e-10);
  }
}

TEST(Mmd, UnbiasedNeedsTwoPoints) {
  const PosteriorSamples a = PosteriorSamples::univariate({0.0});
  const PosteriorSamples b = PosteriorSamples::univariate({0.0, 1.0});
  EXPECT_THROW(mmd2(a, b, KernelSpec{1.0}, MmdEstimator::Unbiased), InvalidArgument);
  EXPECT_NO_THROW(mmd2(b, b, KernelSpec{1.0}, MmdEstimator::Unbiased));
}

TEST(Mmd, MedianHeuristicAndSymmetry) {
  const PosteriorSamples a = PosteriorSamples::univariate({0.0, 1.0, 2.0});
  const PosteriorSamples b = PosteriorSamples::univariate({0.5, 4.0});
  EXPECT_GT(median_heuristic_bandwidth(a, b), 0.0);
  EXPECT_NEAR(mmd(a, b), mmd(b, a), 1e-12);
  EXPECT_EQ(mmd(a, a), 0.0);
}

TEST(KlDiscretized, IdenticalHistograms) {
  const auto p = PosteriorSamples::univariate({0.1, 0.2, 0.7});
  DiscretizationSpec spec{{4}, {0.0}, {1.0}};
  EXPECT_NEAR(kl_discretized(p, p, spec).value, 0.0, 1e-9);
}

TEST(KlDiscretized, TwoBinClosedForm) {
  const auto p = PosteriorSamples::univariate({0.25, 0.75});
  const auto q = PosteriorSamples::univariate({0.25, 0.75, 0.75, 0.75});
  DiscretizationSpec spec{{2}, {0.0}, {1.0}};
  const double expected = 0.5 * std::log(0.5 / 0.25) + 0.5 * std::log(0.5 / 0.75);
  EXPECT_NEAR(kl_discretized(p, q, spec).value, expected, 1e-9);
  EXPECT_NEAR(expected, 0.1438, 1e-4);
}

TEST(KlDiscretized, EmptyQBinIsFiniteAndCounted) {
  const auto p = PosteriorSamples::univariate({0.25, 0.75});
  const auto q = PosteriorSamples::univariate({0.25});
  DiscretizationSpec spec{{2}, {0.0}, {1.0}};
  const auto r = kl_discretized(p, q, spec);
  EXPECT_TRUE(std::isfinite(r.value));
  EXPECT_EQ(r.smoothed_cells, 1u);
}

TEST(KlDiscretized, AllOutOfRangeIsError) {
  const auto p = PosteriorSamples::univariate({5.0, 6.0});
  DiscretizationSpec spec{{2}, {0.0}, {1.0}};
  EXPECT_THROW(kl_discretized(p, p, spec), InvalidArgument);
}

TEST(KlDiscretized, NonNegative) {
  std::mt19937_64 rng(6);
  DiscretizationSpec spec{{8, 8}, {-3.0, -3.0}, {3.0, 3.0}};
  for (int t = 0; t < 100; ++t) {
    std::vector<Vector> a, b;
    std::normal_distribution<double> g(0.0, 1.0);
    for (int i = 0; i < 40; ++i) a.push_back({g(rng), g(rng)});
    for (int i = 0; i < 30; ++i) b.push_back({g(rng) + 0.3, g(rng)});
    EXPECT_GE(kl_discretized(PosteriorSamples(a), PosteriorSamples(b), spec).value, 0.0);
  }
}

TEST(KsTwoSample, Examples) {
  const Vector a{3, 1, 2};
  EXPECT_EQ(ks_two_sample(a, a).statistic, 0.0);
  EXPECT_EQ(ks_two_sample(Vector{0, 1, 2}, Vector{5, 6}).statistic, 1.0);
  EXPECT_NEAR(ks_two_sample(Vector{1, 2, 3}, Vector{2, 3, 4}).statistic, 1.0 / 3.0, 1e-12);
  EXPECT_THROW(ks_two_sample(Vector{}, a), InvalidArgument);
}

TEST(KsTwoSample, MatchesEcdfOracleWithTies) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 300; ++t) {
    Vector a(1 + rng() % 30), b(1 + rng() % 30);
    for (double& x : a) x = static_cast<double>(rng() % 10);
    for (double& x : b) x = static_cast<double>(rng() % 12) * 0.9;
    const auto r = ks_two_sample(a, b);
    EXPECT_NEAR(r.statistic, oracle::ks_ecdf(a, b), 1e-12);
    EXPECT_GE(r.p_value, 0.0);
    EXPECT_LE(r.p_value, 1.0);
  }
}

TEST(KsTwoSample, InvariantUnderMonotoneTransform) {
  const Vector a = normal_draws(40, 0, 1, 8), b = normal_draws(30, 0.4, 1, 9);
  Vector ea, eb;
  for (double x : a) ea.push_back(std::exp(x));
  for (double x : b) eb.push_back(std::exp(x));
  EXPECT_EQ(ks_two_sample(a, b).statistic, ks_two_sample(ea, eb).statistic);
}

TEST(KsTwoSample, PValueSeries) {
  EXPECT_EQ(kolmogorov_sf(0.0), 1.0);
  EXPECT_NEAR(kolmogorov_sf(1.36), 0.0494, 5e-4);  // classic 5% critical value
}

TEST(CrossEntropy, Arithmetic) {
  EXPECT_EQ(cross_entropy(Vector{-1, -1, -1}), 1.0);
  try {
    cross_entropy(Vector{-1, std::numeric_limits<double>::infinity()});
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("index 1"), std::string::npos);
  }
}

TEST(CrossEntropy, StandardNormalEntropy) {
  const Vector ref = normal_draws(100000, 0, 1, 10);
  Vector logq;
  for (double x : ref) logq.push_back(log_normal_pdf(x, 0.0));
  EXPECT_NEAR(cross_entropy(logq), 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e), 0.02);
}

TEST(CrossEntropy, MismatchedDensityScoresHigher) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Vector ref = normal_draws(2000, 0, 1, 100 + seed);
    Vector matched, shifted;
    for (double x : ref) {
      matched.push_back(log_normal_pdf(x, 0.0));
      shifted.push_back(log_normal_pdf(x, 0.5));
    }
    EXPECT_GT(cross_entropy(shifted), cross_entropy(matched));
  }
}
