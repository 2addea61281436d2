#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "postval/localization.hpp"

using namespace postval;

namespace {

Mode mode_at(Vector c, std::optional<Vector> cov = std::nullopt) {
  Mode m;
  m.center = std::move(c);
  m.covariance = std::move(cov);
  m.relative_mass = 1.0;
  return m;
}

}  // namespace

TEST(CentroidDistance, Euclidean) { EXPECT_EQ(centroid_distance(Vector{0, 0}, Vector{3, 4}), 5.0); }

TEST(CentroidDistance, AngularWraparound) {
  DistanceSpec spec;
  spec.periodic = {{0, 360.0}};
  EXPECT_NEAR(centroid_distance(Vector{10.0}, Vector{350.0}, spec), 20.0, 1e-12);
  EXPECT_NEAR(centroid_distance(Vector{-10.0}, Vector{710.0}, spec), 0.0, 1e-12);
}

TEST(CentroidDistance, SelectedDimensionOnly) {
  DistanceSpec spec;
  spec.periodic = {{0, 360.0}};
  spec.dimensions = {0};
  EXPECT_NEAR(centroid_distance(Vector{5.0, 100.0}, Vector{355.0, -100.0}, spec), 10.0, 1e-12);
}

TEST(CentroidDistance, OtherExponents) {
  DistanceSpec l1;
  l1.p = 1.0;
  EXPECT_EQ(centroid_distance(Vector{0, 0}, Vector{3, 4}, l1), 7.0);
  DistanceSpec linf;
  linf.p = std::numeric_limits<double>::infinity();
  EXPECT_EQ(centroid_distance(Vector{0, 0}, Vector{3, 4}, linf), 4.0);
}

TEST(CentroidDistance, CosineOnPeriodicAxis) {
  DistanceSpec spec;
  spec.metric = CentroidMetric::Cosine;
  spec.periodic = {{0, 360.0}};
  EXPECT_NEAR(centroid_distance(Vector{0.0}, Vector{180.0}, spec), 2.0, 1e-12);
  EXPECT_NEAR(centroid_distance(Vector{0.0}, Vector{90.0}, spec), 1.0, 1e-12);
  DistanceSpec bad;
  bad.metric = CentroidMetric::Cosine;
  EXPECT_THROW(centroid_distance(Vector{0.0}, Vector{1.0}, bad), InvalidArgument);
}

TEST(CentroidDistance, DimensionMismatch) {
  EXPECT_THROW(centroid_distance(Vector{0.0}, Vector{1.0, 2.0}), InvalidArgument);
}

TEST(CentroidDistance, MetricProperties) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int t = 0; t < 500; ++t) {
    Vector a(3), b(3), c(3);
    for (auto* v : {&a, &b, &c})
      for (double& x : *v) x = u(rng);
    DistanceSpec spec;
    spec.p = 1.0 + static_cast<double>(t % 4);
    const double ab = centroid_distance(a, b, spec), ba = centroid_distance(b, a, spec);
    EXPECT_EQ(ab, ba);
    EXPECT_GE(ab, 0.0);
    EXPECT_EQ(centroid_distance(a, a, spec), 0.0);
    EXPECT_LE(centroid_distance(a, c, spec), ab + centroid_distance(b, c, spec) + 1e-12);
  }
}

TEST(Mahalanobis, IdentityIsEuclidean) {
  EXPECT_NEAR(mahalanobis_distance(mode_at({0, 0}, Vector{1, 0, 0, 1}), {3, 4}), 5.0, 1e-7);
}

TEST(Mahalanobis, DiagonalScaling) {
  EXPECT_NEAR(mahalanobis_distance(mode_at({0, 0}, Vector{4, 0, 0, 1}), {2, 0}), 1.0, 1e-7);
}

TEST(Mahalanobis, ScaledIdentity) {
  const double c = 6.25;
  EXPECT_NEAR(mahalanobis_distance(mode_at({1, 1, 1}, Vector{c, 0, 0, 0, c, 0, 0, 0, c}), {2, 3, 4}),
              std::sqrt(14.0) / std::sqrt(c), 1e-7);
}

TEST(Mahalanobis, MatchesExplicitInverse) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const int d = 1 + t % 4;
    Eigen::MatrixXd a(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) a(r, c) = g(rng);
    const Eigen::MatrixXd sigma = a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(d, d);
    Vector cov(static_cast<std::size_t>(d * d)), mu(static_cast<std::size_t>(d)), x(static_cast<std::size_t>(d));
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) cov[static_cast<std::size_t>(r * d + c)] = sigma(r, c);
    Eigen::VectorXd diff(d);
    for (int k = 0; k < d; ++k) {
      mu[static_cast<std::size_t>(k)] = g(rng);
      x[static_cast<std::size_t>(k)] = g(rng);
      diff(k) = x[static_cast<std::size_t>(k)] - mu[static_cast<std::size_t>(k)];
    }
    // The regularized matrix is what the implementation inverts.
    const Eigen::MatrixXd reg = sigma + 1e-9 * sigma.trace() / d * Eigen::MatrixXd::Identity(d, d);
    const double expected = std::sqrt(diff.dot(reg.inverse() * diff));
    EXPECT_NEAR(mahalanobis_distance(mode_at(mu, cov), x), expected, 1e-9 * std::max(1.0, expected));
  }
}

TEST(Mahalanobis, SingularCovarianceNamesMode) {
  Mode m = mode_at({0, 0}, Vector{0, 0, 0, 0});
  m.label = "lesion-3";
  try {
    mahalanobis_distance(m, {1, 1}, m.name(0));
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("lesion-3"), std::string::npos);
  }
}

TEST(Mahalanobis, MissingCovariance) { EXPECT_THROW(mahalanobis_distance(mode_at({0}), {1}), InvalidArgument); }

TEST(ChiSquare, QuantileMatchesBisection) {
  EXPECT_NEAR(chi_square_quantile(0.95, 2.0), oracle::chi2_quantile(0.95, 2.0), 1e-10);
  EXPECT_NEAR(chi_square_quantile(0.95, 2.0), 5.991464547107979, 1e-9);
  for (double dof : {1.0, 3.0, 7.0})
    for (double level : {0.5, 0.9, 0.99})
      EXPECT_NEAR(chi_square_quantile(level, dof), oracle::chi2_quantile(level, dof), 1e-9);
}

TEST(ConfidenceEllipsoid, CenterAlwaysInside) {
  const Mode m = mode_at({1, 2}, Vector{0.3, 0.1, 0.1, 0.2});
  for (double level : {0.01, 0.5, 0.95, 0.999}) EXPECT_TRUE(point_in_confidence_ellipsoid(m, {1, 2}, level));
}

TEST(ConfidenceEllipsoid, OutsideAtDistanceThree) {
  const Mode m = mode_at({0, 0}, Vector{1, 0, 0, 1});
  EXPECT_FALSE(point_in_confidence_ellipsoid(m, {3, 0}, 0.95));
  EXPECT_TRUE(point_in_confidence_ellipsoid(m, {2, 0}, 0.95));
}

TEST(ConfidenceEllipsoid, MonotoneInLevel) {
  const Mode m = mode_at({0, 0}, Vector{1, 0.2, 0.2, 0.5});
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int t = 0; t < 200; ++t) {
    const Vector x{g(rng), g(rng)};
    bool inside = false;
    for (double level = 0.05; level < 1.0; level += 0.05) {
      const bool now = point_in_confidence_ellipsoid(m, x, level);
      if (inside) {
        EXPECT_TRUE(now);
      }
      inside = now;
    }
  }
}

TEST(ConfidenceEllipsoid, RejectsBadLevel) {
  const Mode m = mode_at({0}, Vector{1});
  EXPECT_THROW(point_in_confidence_ellipsoid(m, {0}, 1.0), InvalidArgument);
  EXPECT_THROW(point_in_confidence_ellipsoid(m, {0}, 0.0), InvalidArgument);
}

TEST(Criterion, ScoresAndAdmissibility) {
  const Mode p = mode_at({0, 0}, Vector{1, 0, 0, 1});
  const Mode r = mode_at({3, 0});
  const auto c = LocalizationCriterion::centroid(3.0);
  EXPECT_EQ(c.score(p, r), 3.0);
  EXPECT_TRUE(c.admissible(3.0));
  EXPECT_FALSE(c.admissible(3.0001));
  const auto e = LocalizationCriterion::ellipsoid(0.95);
  EXPECT_EQ(e.score(p, r), 1.0);
  EXPECT_FALSE(e.admissible(1.0));
  EXPECT_EQ(e.score(p, mode_at({1, 0})), 0.0);
  const auto m = LocalizationCriterion::mahalanobis(2.0);
  EXPECT_NEAR(m.score(p, r), 3.0, 1e-7);
}

TEST(Criterion, DistributionDistanceUsesSupports) {
  Mode p = mode_at({0.0});
  Mode r = mode_at({1.0});
  p.support = std::make_shared<const PosteriorSamples>(PosteriorSamples::univariate({0, 1, 2, 3}));
  r.support = std::make_shared<const PosteriorSamples>(PosteriorSamples::univariate({1, 2, 3, 4}));
  const auto w = LocalizationCriterion::distribution(DistributionDistanceKind::Wasserstein1d, 2.0);
  EXPECT_NEAR(w.score(p, r), 1.0, 1e-12);
  const auto ks = LocalizationCriterion::distribution(DistributionDistanceKind::KolmogorovSmirnov, 0.5);
  EXPECT_NEAR(ks.score(p, r), 0.25, 1e-12);
  EXPECT_THROW(w.score(p, mode_at({1.0})), InvalidArgument);
}
