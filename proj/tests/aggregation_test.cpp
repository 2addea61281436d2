#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "postval/aggregation.hpp"

using namespace postval;

TEST(Aggregate, HierarchicalMeans) {
  const auto r = aggregate_hierarchical({{1, 3}, {5}}, {});
  EXPECT_EQ(r.per_case_values, (Vector{2, 5}));
  EXPECT_EQ(r.location.value, 3.5);
}

TEST(Aggregate, FlatDiffersFromHierarchical) {
  const std::vector<Vector> v{{1, 3}, {5}};
  EXPECT_EQ(aggregate_flat(v, Location::Mean), 3.0);
  EXPECT_NE(aggregate_flat(v, Location::Mean), aggregate_hierarchical(v, {}).location.value);
}

TEST(Aggregate, SingleValueSpreadUndefined) {
  const auto r = aggregate_hierarchical({{4.2}}, {});
  EXPECT_EQ(r.location.value, 4.2);
  EXPECT_EQ(r.spread.value, 0.0);
  EXPECT_TRUE(r.spread.has(flag::kUndefined));
}

TEST(Aggregate, EmptyCasesExcluded) {
  const auto r = aggregate_hierarchical({{}, {1.0}, {}, {3.0}}, {});
  EXPECT_EQ(r.excluded_cases, 2u);
  EXPECT_EQ(r.used_cases, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(r.location.value, 2.0);
  EXPECT_THROW(aggregate_hierarchical({{}, {}}, {}), InvalidArgument);
}

TEST(Aggregate, StdAndIqr) {
  const std::vector<Vector> v{{1}, {2}, {3}, {4}};
  EXPECT_NEAR(aggregate_hierarchical(v, {}).spread.value, std::sqrt(5.0 / 3.0), 1e-12);
  AggregationSpec iqr{Location::Median, Location::Median, Spread::Iqr};
  const auto r = aggregate_hierarchical(v, iqr);
  EXPECT_EQ(r.location.value, 2.5);
  EXPECT_EQ(r.spread.value, 3.25 - 1.75);
  AggregationSpec none{Location::Mean, Location::Mean, Spread::None};
  EXPECT_TRUE(aggregate_hierarchical(v, none).spread.has(flag::kUndefined));
}

TEST(Aggregate, LinearQuantiles) {
  EXPECT_EQ(quantile({1, 2, 3, 4, 5}, 0.25), 2.0);
  EXPECT_EQ(quantile({10, 0}, 0.5), 5.0);
  EXPECT_EQ(quantile({7}, 0.9), 7.0);
}

TEST(Aggregate, PermutationInvariant) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<Vector> v(1 + rng() % 8);
    for (auto& c : v) {
      c.resize(1 + rng() % 5);
      for (double& x : c) x = u(rng);
    }
    auto w = v;
    std::shuffle(w.begin(), w.end(), rng);
    for (auto& c : w) std::shuffle(c.begin(), c.end(), rng);
    for (auto loc : {Location::Mean, Location::Median})
      for (auto spr : {Spread::Std, Spread::Iqr}) {
        const AggregationSpec s{loc, loc, spr};
        const auto a = aggregate_hierarchical(v, s), b = aggregate_hierarchical(w, s);
        EXPECT_EQ(a.location, b.location);
        EXPECT_EQ(a.spread, b.spread);
      }
  }
}

TEST(Aggregate, OneValuePerCaseEqualsFlat) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<Vector> v(1 + rng() % 10);
    for (auto& c : v) c = {g(rng)};
    for (auto loc : {Location::Mean, Location::Median})
      EXPECT_EQ(aggregate_hierarchical(v, {loc, loc, Spread::None}).location.value, aggregate_flat(v, loc));
  }
}

TEST(Aggregate, MedianRobustToSingleOutlier) {
  // Five cases of three values; the perturbed value sits in a case whose
  // median is decided by its other two values.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const AggregationSpec spec{Location::Median, Location::Median, Spread::Iqr};
  for (int t = 0; t < 200; ++t) {
    std::vector<Vector> v(5);
    for (auto& c : v) c = {u(rng), u(rng), u(rng)};
    const auto base = aggregate_hierarchical(v, spec);
    const std::size_t c = rng() % 5;
    auto& vals = v[c];
    const std::size_t max_at = static_cast<std::size_t>(std::max_element(vals.begin(), vals.end()) - vals.begin());
    vals[max_at] = 1e12;
    const auto moved = aggregate_hierarchical(v, spec);
    EXPECT_EQ(moved.location.value, base.location.value);
    EXPECT_EQ(moved.spread.value, base.spread.value);
  }
}
