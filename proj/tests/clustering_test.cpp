#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "postval/clustering.hpp"

using namespace postval;

namespace {

PosteriorSamples blobs(const std::vector<Vector>& centers, std::size_t per, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spread);
  std::vector<Vector> pts;
  for (const auto& c : centers)
    for (std::size_t i = 0; i < per; ++i) {
      Vector p = c;
      for (double& v : p) v += noise(rng);
      pts.push_back(p);
    }
  return PosteriorSamples(pts);
}

Vector linspace(double a, double b, std::size_t n) {
  Vector v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

}  // namespace

TEST(Dbscan, ThreeBlobs) {
  const auto s = blobs({{0, 0}, {10, 0}, {0, 10}}, 100, 0.1, 1);
  const auto l = dbscan(s, {0.5, 5});
  EXPECT_EQ(l.num_clusters, 3);
  EXPECT_EQ(l.noise_count(), 0u);
  EXPECT_EQ(l.labels, oracle::dbscan(s.points(), 0.5, 5));
}

TEST(Dbscan, IdenticalPointsFormOneCluster) {
  const PosteriorSamples s(std::vector<Vector>(30, Vector{1.5, -2.0}));
  const auto l = dbscan(s, {0.1, 30});
  EXPECT_EQ(l.num_clusters, 1);
  EXPECT_EQ(l.noise_count(), 0u);
}

TEST(Dbscan, DistantPointsAreNoise) {
  const PosteriorSamples s(std::vector<Vector>{{0, 0}, {100, 0}, {0, 100}});
  const auto l = dbscan(s, {1.0, 5});
  EXPECT_EQ(l.num_clusters, 0);
  EXPECT_EQ(l.labels, (std::vector<int>{-1, -1, -1}));
}

TEST(Dbscan, RejectsBadParams) {
  const PosteriorSamples s(std::vector<Vector>{{0.0}});
  EXPECT_THROW(dbscan(s, {0.0, 5}), InvalidArgument);
  EXPECT_THROW(dbscan(s, {1.0, 0}), InvalidArgument);
}

TEST(Dbscan, MatchesBruteForceAcrossDimensions) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t d = 1 + trial % 5;  // d = 4, 5 take the non-grid path
    const std::size_t n = 20 + rng() % 200;
    std::uniform_real_distribution<double> u(0.0, 3.0);
    std::vector<Vector> pts(n, Vector(d));
    for (auto& p : pts)
      for (double& v : p) v = u(rng);
    // Snap some coordinates to a lattice so exact-eps distances occur.
    for (std::size_t i = 0; i < n; i += 3)
      for (double& v : pts[i]) v = std::round(v * 4.0) / 4.0;
    const double eps = 0.25 + 0.05 * static_cast<double>(trial % 4);
    const std::size_t min_samples = 1 + rng() % 8;
    const PosteriorSamples s(pts);
    EXPECT_EQ(dbscan(s, {eps, min_samples}).labels, oracle::dbscan(pts, eps, min_samples)) << "trial " << trial;
  }
}

TEST(Dbscan, TranslationInvariant) {
  const auto s = blobs({{0, 0}, {1, 1}}, 80, 0.3, 3);
  auto shifted = s.points();
  for (auto& p : shifted) {
    p[0] += 0.5;  // exactly representable shifts keep distances bit-identical
    p[1] -= 2.0;
  }
  EXPECT_EQ(dbscan(s, {0.2, 4}).labels, dbscan(PosteriorSamples(shifted), {0.2, 4}).labels);
}

TEST(Dbscan, PermutationChangesOnlyLabelsAndTiedBorders) {
  const auto s = blobs({{0, 0}, {0.9, 0}}, 100, 0.25, 4);
  auto pts = s.points();
  std::vector<std::size_t> perm(pts.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(9));
  std::vector<Vector> permuted;
  for (std::size_t i : perm) permuted.push_back(pts[i]);
  const auto a = dbscan(s, {0.15, 6});
  const auto b = dbscan(PosteriorSamples(permuted), {0.15, 6});
  // Core points partition identically; a border point reachable from two
  // clusters may switch sides because ties follow index order.
  std::vector<std::size_t> nb(pts.size(), 0);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j) nb[i] += oracle::euclid(pts[i], pts[j]) <= 0.15;
  std::vector<int> core_a, core_b;
  for (std::size_t k = 0; k < perm.size(); ++k) {
    const std::size_t i = perm[k];
    EXPECT_EQ(a.labels[i] == -1, b.labels[k] == -1);
    if (nb[i] >= 6) {
      core_a.push_back(a.labels[i]);
      core_b.push_back(b.labels[k]);
    }
  }
  EXPECT_TRUE(oracle::same_partition(core_a, core_b));
  EXPECT_EQ(a.num_clusters, b.num_clusters);
}

TEST(Dip, TwoPoints) {
  const Vector x{0.0, 1.0};
  EXPECT_EQ(dip_statistic(x), 0.25);
}

TEST(Dip, UniformGrid) {
  const Vector x = linspace(0.0, 1.0, 200);
  const double d = dip_statistic(x);
  EXPECT_LE(d, 0.01);
  // Independent reference implementation value.
  EXPECT_NEAR(d, 0.0025000000000000710, 1e-12);
}

TEST(Dip, SeparatedBimodal) {
  Vector x = linspace(-0.01, 0.01, 100);
  const Vector hi = linspace(9.99, 10.01, 100);
  x.insert(x.end(), hi.begin(), hi.end());
  const double d = dip_statistic(x);
  EXPECT_GT(d, 0.2);
  EXPECT_NEAR(d, 0.2495, 1e-12);
}

TEST(Dip, MatchesReferenceValues) {
  // Values from an independent implementation of the dip.
  const std::vector<std::pair<Vector, double>> cases = {
      {{0.1, 0.3, 0.35, 0.9, 1.4, 1.45, 1.5, 3.0}, 0.13942307692307693},
      {{-0.992, -0.891, -0.455, -0.274, 0.001, 0.06, 0.299, 1.34, 2.535, 2.69, 2.754, 2.985, 3.053, 3.178, 3.245},
       0.13572441168131555},
      {{-1.901, -1.842, -1.344, -1.29, -1.267, -0.458, -0.235, 0.695, 2.742, 3.731, 3.907, 3.976, 4.057, 4.078,
        4.136},
       0.1445904356060606},
      {{-1.53, -0.979, -0.809, -0.808, -0.478, -0.033, 0.884, 1.061, 4.387, 4.708, 4.944, 5.032, 5.038, 5.055,
        5.679},
       0.14989578051940733},
      {{-1.547, -1.199, -0.641, 0.075, 0.119, 0.762, 0.859, 2.0, 5.662, 5.906, 5.967, 6.288, 6.334, 6.341, 6.719},
       0.14433347204882788},
  };
  for (const auto& [x, expected] : cases) EXPECT_NEAR(dip_statistic(x), expected, 1e-12);
}

TEST(Dip, BoundsAndAffineInvariance) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng() % 60;
    std::normal_distribution<double> g(0.0, 1.0);
    Vector x(n);
    for (double& v : x) v = g(rng) + (rng() % 2 ? 3.0 : 0.0);
    std::sort(x.begin(), x.end());
    const double d = dip_statistic(x);
    EXPECT_GE(d, 1.0 / (2.0 * static_cast<double>(n)) - 1e-15);
    EXPECT_LE(d, 0.5);
    Vector y = x;
    for (double& v : y) v = 2.5 * v - 7.0;
    EXPECT_NEAR(dip_statistic(y), d, 1e-9);
  }
}

TEST(Dip, RejectsTinyOrUnsortedInput) {
  EXPECT_THROW(dip_statistic(Vector{1.0}), InvalidArgument);
  EXPECT_THROW(dip_statistic(Vector{2.0, 1.0}), InvalidArgument);
}

TEST(Unidip, NarrowPeakIsOneCluster) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.5, 0.01);
  Vector x(500);
  for (double& v : x) v = g(rng);
  const auto l = unidip(PosteriorSamples::univariate(x), {0.05, 1000, 3});
  EXPECT_EQ(l.num_clusters, 1);
}

TEST(Unidip, TwoPeaks) {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> a(0.2, 0.02), b(0.8, 0.02);
  Vector x;
  for (int i = 0; i < 250; ++i) x.push_back(a(rng));
  for (int i = 0; i < 250; ++i) x.push_back(b(rng));
  const auto l = unidip(PosteriorSamples::univariate(x), {0.05, 1000, 3});
  ASSERT_EQ(l.num_clusters, 2);
  // Each peak lands in its own cluster.
  EXPECT_NE(l.labels[0], l.labels[499]);
  EXPECT_NE(l.labels[0], -1);
  EXPECT_NE(l.labels[499], -1);
}

TEST(Unidip, ShippedDefaultAlpha) { EXPECT_EQ(UnidipParams{}.alpha, 0.05); }

TEST(Unidip, RejectsMultivariate) {
  const PosteriorSamples s(std::vector<Vector>{{0, 0}, {1, 1}});
  EXPECT_THROW(unidip(s, {}), InvalidArgument);
}

TEST(ExtractModes, SymmetricCluster) {
  const PosteriorSamples s(std::vector<Vector>{{0, 0}, {2, 2}, {0, 2}, {2, 0}});
  const ClusterLabeling l{{0, 0, 0, 0}, 1};
  const auto m = extract_modes(s, l, CenterRule::Mean);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].center, (Vector{1.0, 1.0}));
  EXPECT_EQ(m[0].relative_mass, 1.0);
}

TEST(ExtractModes, MassesSortedDescending) {
  std::vector<Vector> pts;
  std::vector<int> labels;
  for (int i = 0; i < 25; ++i) {
    pts.push_back({5.0});
    labels.push_back(0);
  }
  for (int i = 0; i < 75; ++i) {
    pts.push_back({0.0});
    labels.push_back(1);
  }
  const auto m = extract_modes(PosteriorSamples(pts), {labels, 2}, CenterRule::Median);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].relative_mass, 0.75);
  EXPECT_EQ(m[1].relative_mass, 0.25);
  EXPECT_EQ(m.cluster_of, (std::vector<int>{1, 0}));
}

TEST(ExtractModes, UnbiasedVariance) {
  const auto m = extract_modes(PosteriorSamples::univariate({0.0, 2.0}), {{0, 0}, 1}, CenterRule::Mean);
  EXPECT_EQ(m[0].center, Vector{1.0});
  EXPECT_EQ(*m[0].covariance, Vector{2.0});
}

TEST(ExtractModes, NoiseInDenominatorAndEmptyLabeling) {
  const auto s = PosteriorSamples::univariate({0.0, 0.1, 0.2, 9.0});
  const auto m = extract_modes(s, {{0, 0, 0, -1}, 1}, CenterRule::Mean);
  EXPECT_EQ(m[0].relative_mass, 0.75);
  EXPECT_TRUE(extract_modes(s, {{-1, -1, -1, -1}, 0}, CenterRule::Mean).empty());
}

TEST(ExtractModes, SingletonGetsZeroCovarianceAndDiagnostic) {
  const auto m = extract_modes(PosteriorSamples::univariate({0.0, 5.0}), {{0, 1}, 2}, CenterRule::Mean);
  EXPECT_EQ(*m[0].covariance, Vector{0.0});
  EXPECT_EQ(m.diagnostics.size(), 2u);
}

TEST(BootstrapConfidence, IdenticalReclusteringScoresOne) {
  const auto s = blobs({{0, 0}, {5, 5}}, 50, 0.1, 8);
  const auto l = dbscan(s, {0.5, 5});
  std::vector<std::size_t> identity(s.size());
  std::iota(identity.begin(), identity.end(), 0);
  for (double v : cluster_iou(l, identity, l)) EXPECT_EQ(v, 1.0);
}

TEST(BootstrapConfidence, SeparatedClustersAreConfident) {
  const DbscanParams p{0.2, 20};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = blobs({{0, 0}, {20, 0}}, 500, 0.03, 100 + seed);
    const auto l = dbscan(s, p);
    ASSERT_EQ(l.num_clusters, 2);
    for (double c : bootstrap_confidence(s, l, p, 2, seed)) {
      EXPECT_GE(c, 0.9);
      EXPECT_LE(c, 1.0);
    }
  }
}

TEST(BootstrapConfidence, DeterministicGivenSeed) {
  const auto s = blobs({{0, 0}, {0.6, 0}}, 200, 0.15, 12);
  const DbscanParams p{0.1, 8};
  EXPECT_EQ(bootstrap_confidence(s, p, 3, 42), bootstrap_confidence(s, p, 3, 42));
}
