#pragma once
// Distances between predicted and reference posteriors given as samples.
// All logarithms are natural (nats).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "postval/core.hpp"

namespace postval {

// ---------------------------------------------------------------------------
// Wasserstein-1

/// W1 between two empirical distributions by integrating the absolute
/// difference of their quantile functions. Breakpoints are tracked in units
/// of 1/(n*m), so the integration is exact for unweighted samples.
inline double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("wasserstein_1d needs nonempty samples");
  Vector sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const std::uint64_t n = sa.size(), m = sb.size();
  std::uint64_t i = 0, j = 0, cur = 0;
  double total = 0.0;
  while (cur < n * m) {
    const std::uint64_t next = std::min((i + 1) * m, (j + 1) * n);
    total += std::abs(sa[i] - sb[j]) * static_cast<double>(next - cur);
    cur = next;
    if (next == (i + 1) * m) ++i;
    if (next == (j + 1) * n) ++j;
  }
  return total / static_cast<double>(n * m);
}

/// Weighted variant; weights are normalized internally.
inline double wasserstein_1d(std::span<const double> a, std::span<const double> wa,
                             std::span<const double> b, std::span<const double> wb) {
  if (a.empty() || b.empty()) throw InvalidArgument("wasserstein_1d needs nonempty samples");
  if (wa.size() != a.size() || wb.size() != b.size()) throw InvalidArgument("weights length mismatch");
  auto sorted = [](std::span<const double> v, std::span<const double> w) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    std::vector<std::pair<double, double>> out;  // value, mass
    for (std::size_t k : idx) out.emplace_back(v[k], w[k] / total);
    return out;
  };
  const auto qa = sorted(a, wa), qb = sorted(b, wb);
  std::size_t i = 0, j = 0;
  double ca = qa[0].second, cb = qb[0].second, cur = 0.0, total = 0.0;
  while (i < qa.size() && j < qb.size()) {
    const double next = std::min(ca, cb);
    total += std::abs(qa[i].first - qb[j].first) * (next - cur);
    cur = next;
    if (ca <= next) {
      if (++i < qa.size()) ca += qa[i].second;
    }
    if (cb <= next) {
      if (++j < qb.size()) cb += qb[j].second;
    }
  }
  return total;
}

inline double wasserstein_1d(const PosteriorSamples& a, const PosteriorSamples& b, std::size_t axis = 0) {
  if (!a.weighted() && !b.weighted()) return wasserstein_1d(a.coordinate(axis), b.coordinate(axis));
  Vector wa(a.size()), wb(b.size());
  for (std::size_t i = 0; i < wa.size(); ++i) wa[i] = a.weight(i);
  for (std::size_t i = 0; i < wb.size(); ++i) wb[i] = b.weight(i);
  return wasserstein_1d(a.coordinate(axis), wa, b.coordinate(axis), wb);
}

enum class MarginalAggregate { Mean, Max };

/// Per-axis W1, aggregated. A surrogate for the full multivariate distance:
/// distributions with identical marginals score zero.
inline double marginal_wasserstein(const PosteriorSamples& a, const PosteriorSamples& b,
                                   MarginalAggregate aggregate = MarginalAggregate::Mean) {
  if (a.dim() != b.dim()) throw InvalidArgument("marginal_wasserstein: dimension mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.dim(); ++k) {
    const double w = wasserstein_1d(a, b, k);
    acc = aggregate == MarginalAggregate::Mean ? acc + w : std::max(acc, w);
  }
  return aggregate == MarginalAggregate::Mean ? acc / static_cast<double>(a.dim()) : acc;
}

// ---------------------------------------------------------------------------
// Maximum mean discrepancy

struct KernelSpec {
  /// RBF bandwidth sigma in k(x,y) = exp(-|x-y|^2 / (2 sigma^2)); unset means
  /// the median heuristic.
  std::optional<double> bandwidth;
};

enum class MmdEstimator { Biased, Unbiased };

namespace detail {

inline double squared_distance(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
  return s;
}

}  // namespace detail

inline constexpr std::size_t kMedianHeuristicMaxPoints = 2000;

/// Median of the nonzero pairwise distances of the pooled sample. Pools larger
/// than 2000 points are thinned to an evenly strided subset first. Falls back
/// to 1 when every distance is zero.
inline double median_heuristic_bandwidth(const PosteriorSamples& a, const PosteriorSamples& b) {
  std::vector<std::span<const double>> pool;
  for (std::size_t i = 0; i < a.size(); ++i) pool.push_back(a.point(i));
  for (std::size_t i = 0; i < b.size(); ++i) pool.push_back(b.point(i));
  if (pool.size() > kMedianHeuristicMaxPoints) {
    std::vector<std::span<const double>> thin;
    for (std::size_t k = 0; k < kMedianHeuristicMaxPoints; ++k)
      thin.push_back(pool[k * pool.size() / kMedianHeuristicMaxPoints]);
    pool = std::move(thin);
  }
  Vector dists;
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t j = i + 1; j < pool.size(); ++j) {
      const double d2 = detail::squared_distance(pool[i], pool[j]);
      if (d2 > 0.0) dists.push_back(std::sqrt(d2));
    }
  if (dists.empty()) return 1.0;
  const std::size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid), dists.end());
  if (dists.size() % 2 == 1) return dists[mid];
  const double upper = dists[mid];
  const double lower = *std::max_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

/// Squared MMD with an RBF kernel. The biased form is the V-statistic, the
/// unbiased one drops the within-sample diagonals. Sums run row-major in
/// index order.
inline double mmd2(const PosteriorSamples& a, const PosteriorSamples& b, const KernelSpec& kernel = {},
                   MmdEstimator estimator = MmdEstimator::Biased) {
  if (a.dim() != b.dim()) throw InvalidArgument("mmd2: dimension mismatch");
  const std::size_t n = a.size(), m = b.size();
  if (estimator == MmdEstimator::Unbiased && (n < 2 || m < 2))
    throw InvalidArgument("unbiased mmd2 needs at least 2 points per sample");
  const double sigma = kernel.bandwidth ? *kernel.bandwidth : median_heuristic_bandwidth(a, b);
  if (!(sigma > 0.0)) throw InvalidArgument("mmd2 bandwidth must be positive");
  const double gamma = 1.0 / (2.0 * sigma * sigma);
  auto k = [&](std::span<const double> x, std::span<const double> y) {
    return std::exp(-gamma * detail::squared_distance(x, y));
  };
  const bool unbiased = estimator == MmdEstimator::Unbiased;
  double kxx = 0.0, kyy = 0.0, kxy = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (!unbiased || i != j) kxx += k(a.point(i), a.point(j));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (!unbiased || i != j) kyy += k(b.point(i), b.point(j));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) kxy += k(a.point(i), b.point(j));
  const double dn = static_cast<double>(n), dm = static_cast<double>(m);
  const double xx = unbiased ? kxx / (dn * (dn - 1.0)) : kxx / (dn * dn);
  const double yy = unbiased ? kyy / (dm * (dm - 1.0)) : kyy / (dm * dm);
  return xx + yy - 2.0 * kxy / (dn * dm);
}

/// MMD (square root of the nonnegative part of the biased estimate).
inline double mmd(const PosteriorSamples& a, const PosteriorSamples& b, const KernelSpec& kernel = {}) {
  return std::sqrt(std::max(0.0, mmd2(a, b, kernel, MmdEstimator::Biased)));
}

// ---------------------------------------------------------------------------
// Discretized KL divergence

struct DiscretizationSpec {
  std::vector<std::size_t> bins;  // per dimension
  Vector lower, upper;            // per dimension
  double epsilon = 1e-10;         // added to every q bin mass before renormalizing
};

inline void validate_discretization(const DiscretizationSpec& s, std::size_t dim) {
  if (s.bins.size() != dim || s.lower.size() != dim || s.upper.size() != dim)
    throw InvalidArgument("discretization spec must cover every dimension");
  for (std::size_t k = 0; k < dim; ++k) {
    if (s.bins[k] < 1) throw InvalidArgument("bin count must be at least 1");
    if (!(s.lower[k] < s.upper[k])) throw InvalidArgument("bin range requires lower < upper");
  }
  if (!(s.epsilon > 0.0)) throw InvalidArgument("smoothing epsilon must be positive");
}

/// Probability mass per cell of the product grid; out-of-range coordinates are
/// clamped to the boundary cells. Throws if every sample lies out of range.
inline Vector histogram(const PosteriorSamples& s, const DiscretizationSpec& spec) {
  validate_discretization(spec, s.dim());
  std::size_t cells = 1;
  for (std::size_t b : spec.bins) {
    if (cells > (std::size_t{1} << 26) / b) throw InvalidArgument("discretization grid too large");
    cells *= b;
  }
  Vector mass(cells, 0.0);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::size_t cell = 0;
    bool in_range = true;
    for (std::size_t k = 0; k < s.dim(); ++k) {
      const double v = s.at(i, k);
      in_range &= v >= spec.lower[k] && v <= spec.upper[k];
      const double t = (v - spec.lower[k]) / (spec.upper[k] - spec.lower[k]);
      const auto nb = static_cast<double>(spec.bins[k]);
      const auto idx = static_cast<std::size_t>(std::clamp(std::floor(t * nb), 0.0, nb - 1.0));
      cell = cell * spec.bins[k] + idx;
    }
    inside += in_range;
    mass[cell] += s.weight(i);
  }
  if (inside == 0) throw InvalidArgument("all samples lie outside the discretization range");
  return mass;
}

struct KlResult {
  double value = 0.0;
  /// Cells where q had no mass but p did; their contribution is governed by epsilon.
  std::size_t smoothed_cells = 0;
};

/// KL(p || q) between two histograms; epsilon is added to each q cell and q is
/// renormalized. 0 * ln(0 / q) = 0.
inline KlResult kl_divergence(std::span<const double> p, std::span<const double> q, double epsilon) {
  if (p.size() != q.size()) throw InvalidArgument("histograms differ in size");
  const double p_total = std::accumulate(p.begin(), p.end(), 0.0);
  const double q_total = std::accumulate(q.begin(), q.end(), 0.0) + epsilon * static_cast<double>(q.size());
  KlResult r;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) ++r.smoothed_cells;
    const double pi = p[i] / p_total;
    const double qi = (q[i] + epsilon) / q_total;
    r.value += pi * std::log(pi / qi);
  }
  r.value = std::max(0.0, r.value);
  return r;
}

inline KlResult kl_discretized(const PosteriorSamples& p, const PosteriorSamples& q,
                               const DiscretizationSpec& spec) {
  if (p.dim() != q.dim()) throw InvalidArgument("kl_discretized: dimension mismatch");
  return kl_divergence(histogram(p, spec), histogram(q, spec), spec.epsilon);
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

/// Kolmogorov survival function Q(lambda) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2),
/// truncated once terms drop below 1e-12.
inline double kolmogorov_sf(double lambda) {
  if (lambda <= 1e-3) return 1.0;
  double sum = 0.0;
  for (int k = 1; k < 1000000; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-12) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample KS: sup |ECDF_a - ECDF_b| over all sample points, with the
/// asymptotic p-value.
inline KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("ks_two_sample needs nonempty samples");
  Vector sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double n = static_cast<double>(sa.size()), m = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() || j < sb.size()) {
    double v;
    if (j == sb.size() || (i < sa.size() && sa[i] <= sb[j]))
      v = sa[i];
    else
      v = sb[j];
    while (i < sa.size() && sa[i] == v) ++i;
    while (j < sb.size() && sb[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  KsResult r;
  r.statistic = d;
  r.p_value = kolmogorov_sf(d * std::sqrt(n * m / (n + m)));
  return r;
}

// ---------------------------------------------------------------------------
// Cross entropy

/// -mean(log q(x_ref)) over reference samples, in nats.
inline double cross_entropy(std::span<const double> log_q_at_ref) {
  if (log_q_at_ref.empty()) throw InvalidArgument("cross_entropy needs at least one log-density");
  double s = 0.0;
  for (std::size_t i = 0; i < log_q_at_ref.size(); ++i) {
    if (!std::isfinite(log_q_at_ref[i]))
      throw InvalidArgument("non-finite log-density at index " + std::to_string(i));
    s += log_q_at_ref[i];
  }
  return -s / static_cast<double>(log_q_at_ref.size());
}

}  // namespace postval
