#pragma once
// Mode detection: DBSCAN, Hartigan's dip statistic, UniDip, mode extraction
// and bootstrap-IoU confidence scores.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <variant>
#include <vector>

#include "postval/core.hpp"
#include "postval/random.hpp"

namespace postval {

/// One label per sample, -1 for noise; non-negative labels are 0..num_clusters-1.
struct ClusterLabeling {
  std::vector<int> labels;
  int num_clusters = 0;

  std::size_t noise_count() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), -1));
  }
  std::vector<std::size_t> members(int cluster) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cluster) out.push_back(i);
    return out;
  }
  bool operator==(const ClusterLabeling&) const = default;
};

inline void validate_labeling(const ClusterLabeling& l, std::size_t sample_count) {
  if (l.labels.size() != sample_count) throw InvalidArgument("labeling length differs from sample count");
  std::vector<bool> seen(static_cast<std::size_t>(std::max(l.num_clusters, 0)), false);
  for (int v : l.labels) {
    if (v < -1 || v >= l.num_clusters) throw InvalidArgument("cluster label out of range");
    if (v >= 0) seen[static_cast<std::size_t>(v)] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw InvalidArgument("cluster labels are not contiguous");
}

struct DbscanParams {
  double eps = 0.2;
  std::size_t min_samples = 20;
};

struct UnidipParams {
  double alpha = 0.05;
  std::size_t bootstrap_draws = 1000;
  std::uint64_t seed = 0;  // drives the Monte Carlo null distribution
};

using ClusteringParams = std::variant<DbscanParams, UnidipParams>;

// ---------------------------------------------------------------------------
// DBSCAN

namespace detail {

inline void check_dbscan_params(const DbscanParams& params) {
  if (!(params.eps > 0.0)) throw InvalidArgument("dbscan eps must be positive");
  if (params.min_samples < 1) throw InvalidArgument("dbscan min_samples must be at least 1");
}

/// Region queries over a window of the points sorted along the first axis.
inline ClusterLabeling dbscan_window(const PosteriorSamples& samples, const DbscanParams& params) {
  const std::size_t n = samples.size();
  const std::size_t d = samples.dim();
  const double eps = params.eps;
  const double eps2 = eps * eps;
  const double* x = samples.flat().data();

  // Sorting along the first axis bounds each region query to a window; the
  // distance test itself stays exact.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a * d] < x[b * d]; });
  std::vector<std::size_t> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;

  auto within = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = x[a * d + k] - x[b * d + k];
      s += diff * diff;
      if (s > eps2) return false;
    }
    return true;
  };
  auto for_each_neighbor = [&](std::size_t p, auto&& fn) {
    const double x0 = x[p * d];
    for (std::size_t r = rank[p]; r-- > 0;) {
      const std::size_t q = order[r];
      if (x0 - x[q * d] > eps) break;
      if (within(p, q)) fn(q);
    }
    for (std::size_t r = rank[p] + 1; r < n; ++r) {
      const std::size_t q = order[r];
      if (x[q * d] - x0 > eps) break;
      if (within(p, q)) fn(q);
    }
  };

  std::vector<std::size_t> count(n, 1);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t p = order[r];
    for (std::size_t s = r + 1; s < n; ++s) {
      const std::size_t q = order[s];
      if (x[q * d] - x[p * d] > eps) break;
      if (within(p, q)) {
        ++count[p];
        ++count[q];
      }
    }
  }

  ClusterLabeling out;
  out.labels.assign(n, -1);
  std::vector<std::size_t> queue;
  for (std::size_t i = 0; i < n; ++i) {
    if (out.labels[i] != -1 || count[i] < params.min_samples) continue;
    const int cluster = out.num_clusters++;
    out.labels[i] = cluster;
    queue.assign(1, i);
    for (std::size_t head = 0; head < queue.size(); ++head) {
      for_each_neighbor(queue[head], [&](std::size_t q) {
        if (out.labels[q] != -1) return;
        out.labels[q] = cluster;
        if (count[q] >= params.min_samples) queue.push_back(q);
      });
    }
  }
  return out;
}

/// Grid variant for d <= 3. Cells have diagonal just under eps, so points
/// sharing a cell are always neighbors; full cells are core without counting
/// and core connectivity is resolved per cell pair with union-find.
inline std::optional<ClusterLabeling> dbscan_grid(const PosteriorSamples& samples, const DbscanParams& params) {
  const std::size_t n = samples.size();
  const std::size_t d = samples.dim();
  if (d > 3) return std::nullopt;
  const double eps2 = params.eps * params.eps;
  const double side = params.eps / std::sqrt(static_cast<double>(d)) * (1.0 - 1e-12);
  const double* x = samples.flat().data();

  using Key = std::array<std::int64_t, 3>;
  std::map<Key, std::size_t> cell_index;
  std::vector<Key> cell_key;
  std::vector<std::vector<std::size_t>> cell_points;
  std::vector<std::size_t> cell_of(n);
  for (std::size_t i = 0; i < n; ++i) {
    Key key{0, 0, 0};
    for (std::size_t k = 0; k < d; ++k) {
      const double c = std::floor(x[i * d + k] / side);
      if (std::abs(c) > 1e15) return std::nullopt;
      key[k] = static_cast<std::int64_t>(c);
    }
    auto [it, fresh] = cell_index.try_emplace(key, cell_points.size());
    if (fresh) {
      cell_key.push_back(key);
      cell_points.emplace_back();
    }
    cell_points[it->second].push_back(i);
    cell_of[i] = it->second;
  }

  const auto reach = static_cast<std::int64_t>(std::floor(params.eps / side)) + 1;
  std::vector<std::vector<std::size_t>> near(cell_points.size());
  for (std::size_t c = 0; c < cell_points.size(); ++c) {
    Key lo = cell_key[c];
    Key off{0, 0, 0};
    for (std::size_t k = 0; k < d; ++k) off[k] = -reach;
    while (true) {
      Key probe = lo;
      for (std::size_t k = 0; k < d; ++k) probe[k] += off[k];
      auto it = cell_index.find(probe);
      if (it != cell_index.end()) near[c].push_back(it->second);
      std::size_t k = 0;
      while (k < d && off[k] == reach) off[k++] = -reach;
      if (k == d) break;
      ++off[k];
    }
  }

  auto within = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = x[a * d + k] - x[b * d + k];
      s += diff * diff;
    }
    return s <= eps2;
  };

  std::vector<bool> core(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = cell_of[i];
    std::size_t count = cell_points[c].size();
    if (count < params.min_samples) {
      for (std::size_t nc : near[c]) {
        if (nc == c) continue;
        for (std::size_t q : cell_points[nc]) {
          if (within(i, q) && ++count >= params.min_samples) break;
        }
        if (count >= params.min_samples) break;
      }
    }
    core[i] = count >= params.min_samples;
  }

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  auto unite = [&](std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  };
  std::vector<std::vector<std::size_t>> cell_cores(cell_points.size());
  for (std::size_t c = 0; c < cell_points.size(); ++c) {
    for (std::size_t i : cell_points[c])
      if (core[i]) cell_cores[c].push_back(i);
    for (std::size_t k = 1; k < cell_cores[c].size(); ++k) unite(cell_cores[c][0], cell_cores[c][k]);
  }
  for (std::size_t c = 0; c < cell_points.size(); ++c) {
    if (cell_cores[c].empty()) continue;
    for (std::size_t nc : near[c]) {
      if (nc <= c || cell_cores[nc].empty()) continue;
      if (find(cell_cores[c][0]) == find(cell_cores[nc][0])) continue;
      bool linked = false;
      for (std::size_t a : cell_cores[c]) {
        for (std::size_t b : cell_cores[nc])
          if (within(a, b)) {
            unite(a, b);
            linked = true;
            break;
          }
        if (linked) break;
      }
    }
  }

  // Components are numbered by their smallest core index, matching the
  // index-order expansion of the window variant.
  ClusterLabeling out;
  out.labels.assign(n, -1);
  std::vector<int> root_label(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    const std::size_t r = find(i);
    if (root_label[r] == -1) root_label[r] = out.num_clusters++;
    out.labels[i] = root_label[r];
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    int best = -1;
    for (std::size_t nc : near[cell_of[i]])
      for (std::size_t q : cell_cores[nc])
        if ((best == -1 || out.labels[q] < best) && within(i, q)) best = out.labels[q];
    out.labels[i] = best;
  }
  return out;
}

}  // namespace detail

/// Exact DBSCAN under Euclidean distance. Neighborhoods are closed balls
/// (distance <= eps) that include the point itself. Clusters are numbered in
/// the order of their smallest-index core point, and a border point reachable
/// from several clusters joins the lowest-numbered one.
inline ClusterLabeling dbscan(const PosteriorSamples& samples, const DbscanParams& params) {
  detail::check_dbscan_params(params);
  if (auto grid = detail::dbscan_grid(samples, params)) return std::move(*grid);
  return detail::dbscan_window(samples, params);
}

// ---------------------------------------------------------------------------
// Hartigan's dip

struct DipResult {
  double dip = 0.0;
  std::size_t modal_low = 0;   // index of the lower end of the modal interval
  std::size_t modal_high = 0;  // index of the upper end
};

/// Hartigan & Hartigan's dip of a sorted sample, via the greatest convex
/// minorant / least concave majorant cycling. Result lies in [1/(2n), 1/2].
inline DipResult dip_test_statistic(std::span<const double> sorted) {
  const std::size_t n_sz = sorted.size();
  if (n_sz < 2) throw InvalidArgument("dip statistic needs at least 2 values");
  for (std::size_t i = 1; i < n_sz; ++i)
    if (sorted[i] < sorted[i - 1]) throw InvalidArgument("dip statistic needs sorted input");

  const long n = static_cast<long>(n_sz);
  // One-based views to keep the index arithmetic of the classic algorithm.
  auto x = [&](long i) { return sorted[static_cast<std::size_t>(i - 1)]; };
  std::vector<long> mn(static_cast<std::size_t>(n + 1)), mj(static_cast<std::size_t>(n + 1));
  std::vector<long> gcm(static_cast<std::size_t>(n + 1)), lcm(static_cast<std::size_t>(n + 1));
  auto MN = [&](long i) -> long& { return mn[static_cast<std::size_t>(i)]; };
  auto MJ = [&](long i) -> long& { return mj[static_cast<std::size_t>(i)]; };
  auto GCM = [&](long i) -> long& { return gcm[static_cast<std::size_t>(i)]; };
  auto LCM = [&](long i) -> long& { return lcm[static_cast<std::size_t>(i)]; };

  long low = 1, high = n;
  // Works with 2n * dip until the very end.
  double dip = 1.0;
  if (x(n) == x(1)) return {dip / (2.0 * static_cast<double>(n)), 0, n_sz - 1};

  MN(1) = 1;
  for (long j = 2; j <= n; ++j) {
    MN(j) = j - 1;
    while (true) {
      const long mnj = MN(j);
      const long mnmnj = MN(mnj);
      if (mnj == 1 || (x(j) - x(mnj)) * static_cast<double>(mnj - mnmnj) <
                          (x(mnj) - x(mnmnj)) * static_cast<double>(j - mnj))
        break;
      MN(j) = mnmnj;
    }
  }
  MJ(n) = n;
  for (long k = n - 1; k >= 1; --k) {
    MJ(k) = k + 1;
    while (true) {
      const long mjk = MJ(k);
      const long mjmjk = MJ(mjk);
      if (mjk == n || (x(k) - x(mjk)) * static_cast<double>(mjk - mjmjk) <
                          (x(mjk) - x(mjmjk)) * static_cast<double>(k - mjk))
        break;
      MJ(k) = mjmjk;
    }
  }

  while (true) {
    long ig = 1;
    GCM(1) = high;
    for (long i = high; i > low; i = GCM(ig)) GCM(++ig) = MN(i);
    const long l_gcm = ig;

    long ih = 1;
    LCM(1) = low;
    for (long i = low; i < high; i = LCM(ih)) LCM(++ih) = MJ(i);
    const long l_lcm = ih;

    long double d = 0.0L;
    if (l_gcm != 2 || l_lcm != 2) {
      long ix = l_gcm - 1, iv = 2;
      do {
        long double dx;
        const long gcmix = GCM(ix), lcmiv = LCM(iv);
        if (gcmix > lcmiv) {
          const long gcmi1 = GCM(ix + 1);
          dx = static_cast<long double>(lcmiv - gcmi1 + 1) -
               (static_cast<long double>(x(lcmiv)) - x(gcmi1)) * static_cast<long double>(gcmix - gcmi1) /
                   (x(gcmix) - x(gcmi1));
          ++iv;
          if (dx >= d) {
            d = dx;
            ig = ix + 1;
            ih = iv - 1;
          }
        } else {
          const long lcmiv1 = LCM(iv - 1);
          dx = (static_cast<long double>(x(gcmix)) - x(lcmiv1)) * static_cast<long double>(lcmiv - lcmiv1) /
                   (x(lcmiv) - x(lcmiv1)) -
               static_cast<long double>(gcmix - lcmiv1 - 1);
          --ix;
          if (dx >= d) {
            d = dx;
            ig = ix + 1;
            ih = iv;
          }
        }
        if (ix < 1) ix = 1;
        if (iv > l_lcm) iv = l_lcm;
      } while (GCM(ix) != LCM(iv));
    } else {
      d = 1.0L;
    }
    if (d < dip) break;

    double dip_l = 0.0;
    for (long j = ig; j < l_gcm; ++j) {
      double max_t = 1.0;
      const long jb = GCM(j + 1), je = GCM(j);
      if (je - jb > 1 && x(je) != x(jb)) {
        const double c = static_cast<double>(je - jb) / (x(je) - x(jb));
        for (long jj = jb; jj <= je; ++jj) {
          const double t = static_cast<double>(jj - jb + 1) - (x(jj) - x(jb)) * c;
          max_t = std::max(max_t, t);
        }
      }
      dip_l = std::max(dip_l, max_t);
    }
    double dip_u = 0.0;
    for (long j = ih; j < l_lcm; ++j) {
      double max_t = 1.0;
      const long jb = LCM(j), je = LCM(j + 1);
      if (je - jb > 1 && x(je) != x(jb)) {
        const double c = static_cast<double>(je - jb) / (x(je) - x(jb));
        for (long jj = jb; jj <= je; ++jj) {
          const double t = (x(jj) - x(jb)) * c - static_cast<double>(jj - jb - 1);
          max_t = std::max(max_t, t);
        }
      }
      dip_u = std::max(dip_u, max_t);
    }
    dip = std::max(dip, std::max(dip_l, dip_u));

    // Without this check the cycle can repeat forever.
    if (low == GCM(ig) && high == LCM(ih)) break;
    low = GCM(ig);
    high = LCM(ih);
  }
  return {dip / (2.0 * static_cast<double>(n)), static_cast<std::size_t>(low - 1),
          static_cast<std::size_t>(high - 1)};
}

inline double dip_statistic(std::span<const double> sorted) { return dip_test_statistic(sorted).dip; }

/// Monte Carlo p-values of the dip against the uniform null, cached per size.
class DipNull {
 public:
  DipNull(std::size_t draws, std::uint64_t seed) : draws_(draws), seed_(seed) {
    if (draws_ < 1) throw InvalidArgument("bootstrap_draws must be positive");
  }

  /// Fraction of null dips at least as large as `dip`.
  double p_value(double dip, std::size_t n) {
    if (n < 4) return 1.0;
    const Vector& null = distribution(n);
    const auto below = std::lower_bound(null.begin(), null.end(), dip);
    return static_cast<double>(null.end() - below) / static_cast<double>(null.size());
  }

 private:
  const Vector& distribution(std::size_t n) {
    auto it = cache_.find(n);
    if (it != cache_.end()) return it->second;
    Rng rng(derive_seed(seed_, n));
    std::exponential_distribution<double> expo(1.0);
    Vector u(n), dips(draws_);
    for (std::size_t b = 0; b < draws_; ++b) {
      // Normalized cumulative exponential spacings are sorted uniforms.
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        total += expo(rng);
        u[i] = total;
      }
      total += expo(rng);
      for (double& v : u) v /= total;
      dips[b] = dip_statistic(u);
    }
    std::sort(dips.begin(), dips.end());
    return cache_.emplace(n, std::move(dips)).first->second;
  }

  std::size_t draws_;
  std::uint64_t seed_;
  std::map<std::size_t, Vector> cache_;
};

namespace detail {

struct IndexInterval {
  std::size_t lo, hi;  // inclusive, into the sorted sample
};

inline std::vector<IndexInterval> unidip_recurse(const Vector& x, std::size_t start, std::size_t end,
                                                 bool is_modal, double alpha, DipNull& null) {
  const std::size_t n = end - start;
  if (n < 4) return {{start, end - 1}};
  const std::span<const double> window(x.data() + start, n);
  const DipResult dr = dip_test_statistic(window);
  const std::size_t lo = dr.modal_low + start, hi = dr.modal_high + start;
  if (null.p_value(dr.dip, n) > alpha) {
    if (is_modal) return {{start, end - 1}};
    return {{lo, hi}};
  }
  if (lo == start && hi == end - 1) {
    // The modal interval cannot shrink further; accept the window as one mode.
    return {{start, end - 1}};
  }

  std::vector<IndexInterval> modal = unidip_recurse(x, lo, hi + 1, true, alpha, null);
  std::vector<IndexInterval> out;
  if (lo > start) {
    // Left flank together with the leftmost modal cluster.
    const std::size_t stop = modal.front().hi + 1;
    const std::span<const double> left(x.data() + start, stop - start);
    if (left.size() >= 4 && null.p_value(dip_statistic(left), left.size()) <= alpha) {
      auto l = unidip_recurse(x, start, lo, false, alpha, null);
      out.insert(out.end(), l.begin(), l.end());
    }
  }
  out.insert(out.end(), modal.begin(), modal.end());
  if (hi + 1 < end) {
    const std::size_t from = modal.back().lo;
    const std::span<const double> right(x.data() + from, end - from);
    if (right.size() >= 4 && null.p_value(dip_statistic(right), right.size()) <= alpha) {
      auto r = unidip_recurse(x, hi + 1, end, false, alpha, null);
      out.insert(out.end(), r.begin(), r.end());
    }
  }
  return out;
}

}  // namespace detail

/// UniDip: recursive dip-test isolation of modal intervals in 1-D data.
/// Samples outside every accepted interval are labeled noise.
inline ClusterLabeling unidip(const PosteriorSamples& samples, const UnidipParams& params) {
  if (samples.dim() != 1) throw InvalidArgument("unidip requires univariate samples");
  if (!(params.alpha > 0.0 && params.alpha < 1.0)) throw InvalidArgument("unidip alpha must lie in (0,1)");
  Vector sorted = samples.flat();
  std::sort(sorted.begin(), sorted.end());
  DipNull null(params.bootstrap_draws, params.seed);
  auto intervals = detail::unidip_recurse(sorted, 0, sorted.size(), false, params.alpha, null);

  // Merge overlapping intervals by value.
  std::vector<std::pair<double, double>> ranges;
  for (const auto& iv : intervals) ranges.emplace_back(sorted[iv.lo], sorted[iv.hi]);
  std::sort(ranges.begin(), ranges.end());
  std::vector<std::pair<double, double>> merged;
  for (const auto& r : ranges) {
    if (!merged.empty() && r.first <= merged.back().second)
      merged.back().second = std::max(merged.back().second, r.second);
    else
      merged.push_back(r);
  }

  ClusterLabeling out;
  out.num_clusters = static_cast<int>(merged.size());
  out.labels.assign(samples.size(), -1);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double v = samples.at(i, 0);
    for (std::size_t k = 0; k < merged.size(); ++k) {
      if (v >= merged[k].first && v <= merged[k].second) {
        out.labels[i] = static_cast<int>(k);
        break;
      }
    }
  }
  return out;
}

inline ClusterLabeling cluster(const PosteriorSamples& samples, const ClusteringParams& params) {
  return std::visit(
      [&](const auto& p) -> ClusterLabeling {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, DbscanParams>)
          return dbscan(samples, p);
        else
          return unidip(samples, p);
      },
      params);
}

// ---------------------------------------------------------------------------
// Mode extraction

enum class CenterRule { Mean, Median };

/// Mean for multivariate posteriors, median for univariate ones.
inline CenterRule default_center_rule(std::size_t dim) { return dim == 1 ? CenterRule::Median : CenterRule::Mean; }

namespace detail {

inline double median_of(Vector v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double weighted_median_of(const Vector& v, const Vector& w) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  double acc = 0.0;
  for (std::size_t i : idx) {
    acc += w[i];
    if (acc >= 0.5 * total) return v[i];
  }
  return v[idx.back()];
}

}  // namespace detail

/// One mode per cluster, sorted by descending relative mass (ties by label).
/// Noise samples count in the mass denominator. Covariances are unbiased;
/// singleton clusters get a zero covariance and a diagnostic.
inline ModeSet extract_modes(const PosteriorSamples& samples, const ClusterLabeling& labeling,
                             CenterRule rule) {
  validate_labeling(labeling, samples.size());
  const std::size_t d = samples.dim();
  ModeSet out;
  for (int c = 0; c < labeling.num_clusters; ++c) {
    const std::vector<std::size_t> idx = labeling.members(c);
    // Frequency weights of 1 for unweighted samples keep the arithmetic exact.
    Vector w(idx.size(), 1.0);
    if (samples.weighted())
      for (std::size_t k = 0; k < idx.size(); ++k) w[k] = samples.weight(idx[k]);
    const double v1 = std::accumulate(w.begin(), w.end(), 0.0);
    double v2 = 0.0;
    for (double wk : w) v2 += wk * wk;

    Mode m;
    m.relative_mass = samples.weighted() ? v1 : static_cast<double>(idx.size()) / static_cast<double>(samples.size());
    m.relative_mass = std::clamp(m.relative_mass, 0.0, 1.0);
    Vector mean(d, 0.0);
    for (std::size_t k = 0; k < idx.size(); ++k)
      for (std::size_t a = 0; a < d; ++a) mean[a] += w[k] * samples.at(idx[k], a);
    for (double& v : mean) v /= v1;
    if (rule == CenterRule::Mean) {
      m.center = mean;
    } else {
      m.center.resize(d);
      for (std::size_t a = 0; a < d; ++a) {
        Vector vals(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) vals[k] = samples.at(idx[k], a);
        m.center[a] = samples.weighted() ? detail::weighted_median_of(vals, w) : detail::median_of(vals);
      }
    }
    Vector cov(d * d, 0.0);
    if (idx.size() > 1) {
      const double denom = v1 - v2 / v1;
      for (std::size_t k = 0; k < idx.size(); ++k)
        for (std::size_t a = 0; a < d; ++a)
          for (std::size_t b = 0; b < d; ++b)
            cov[a * d + b] += w[k] * (samples.at(idx[k], a) - mean[a]) * (samples.at(idx[k], b) - mean[b]);
      for (double& v : cov) v /= denom;
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < a; ++b) cov[a * d + b] = cov[b * d + a];
    } else {
      out.diagnostics.push_back("cluster " + std::to_string(c) + " has a single sample; covariance set to zero");
    }
    m.covariance = std::move(cov);
    m.support = std::make_shared<const PosteriorSamples>(samples.subset(idx));
    normalize_mode(m);
    out.modes.push_back(std::move(m));
    out.cluster_of.push_back(c);
  }
  std::vector<std::size_t> order(out.modes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return out.modes[a].relative_mass > out.modes[b].relative_mass;
  });
  ModeSet sorted;
  sorted.diagnostics = std::move(out.diagnostics);
  for (std::size_t i : order) {
    sorted.modes.push_back(std::move(out.modes[i]));
    sorted.cluster_of.push_back(out.cluster_of[i]);
  }
  return sorted;
}

// ---------------------------------------------------------------------------
// Bootstrap IoU confidence

/// Per original cluster: max IoU against the clusters of a reclustered
/// resample. `drawn[i]` is the original index of resampled point i. Sets are
/// compared over the distinct drawn indices only, so an unchanged clustering
/// scores 1 regardless of which points the resample missed.
inline Vector cluster_iou(const ClusterLabeling& original, std::span<const std::size_t> drawn,
                          const ClusterLabeling& relabeled) {
  const std::size_t k_orig = static_cast<std::size_t>(original.num_clusters);
  const std::size_t k_new = static_cast<std::size_t>(relabeled.num_clusters);
  // Label of each original index in the resample (first occurrence; copies of
  // one point are indistinguishable to the clusterer). -2 marks "not drawn".
  std::vector<int> new_label(original.labels.size(), -2);
  for (std::size_t i = 0; i < drawn.size(); ++i)
    if (new_label[drawn[i]] == -2) new_label[drawn[i]] = relabeled.labels[i];

  std::vector<std::size_t> size_orig(k_orig, 0), size_new(k_new, 0), inter(k_orig * k_new, 0);
  for (std::size_t p = 0; p < original.labels.size(); ++p) {
    if (new_label[p] == -2) continue;
    const int a = original.labels[p];
    const int b = new_label[p];
    if (a >= 0) ++size_orig[static_cast<std::size_t>(a)];
    if (b >= 0) ++size_new[static_cast<std::size_t>(b)];
    if (a >= 0 && b >= 0) ++inter[static_cast<std::size_t>(a) * k_new + static_cast<std::size_t>(b)];
  }
  Vector iou(k_orig, 0.0);
  for (std::size_t c = 0; c < k_orig; ++c) {
    for (std::size_t j = 0; j < k_new; ++j) {
      const std::size_t both = inter[c * k_new + j];
      const std::size_t uni = size_orig[c] + size_new[j] - both;
      if (uni > 0) iou[c] = std::max(iou[c], static_cast<double>(both) / static_cast<double>(uni));
    }
  }
  return iou;
}

/// Mean IoU per original cluster over `resamples` bootstrap reclusterings.
inline Vector bootstrap_confidence(const PosteriorSamples& samples, const ClusterLabeling& original,
                                   const ClusteringParams& params, std::size_t resamples,
                                   std::uint64_t rng_seed) {
  if (resamples < 1) throw InvalidArgument("resamples must be positive");
  Vector conf(static_cast<std::size_t>(original.num_clusters), 0.0);
  if (original.num_clusters == 0) return conf;
  Rng rng(rng_seed);
  const std::size_t n = samples.size();
  std::uniform_int_distribution<std::size_t> uniform(0, n - 1);
  std::optional<std::discrete_distribution<std::size_t>> weighted;
  if (samples.weighted()) weighted.emplace(samples.weights()->begin(), samples.weights()->end());
  std::vector<std::size_t> drawn(n);
  for (std::size_t r = 0; r < resamples; ++r) {
    for (auto& i : drawn) i = weighted ? (*weighted)(rng) : uniform(rng);
    Vector flat;
    flat.reserve(n * samples.dim());
    for (std::size_t i : drawn) flat.insert(flat.end(), samples.point(i).begin(), samples.point(i).end());
    const PosteriorSamples resampled(samples.dim(), std::move(flat));
    const Vector iou = cluster_iou(original, drawn, cluster(resampled, params));
    for (std::size_t c = 0; c < conf.size(); ++c) conf[c] += iou[c];
  }
  for (double& c : conf) c /= static_cast<double>(resamples);
  return conf;
}

inline Vector bootstrap_confidence(const PosteriorSamples& samples, const ClusteringParams& params,
                                   std::size_t resamples, std::uint64_t rng_seed) {
  return bootstrap_confidence(samples, cluster(samples, params), params, resamples, rng_seed);
}

/// Copies per-cluster confidences onto the modes extracted from those clusters.
inline void attach_confidence(ModeSet& modes, std::span<const double> per_cluster) {
  for (std::size_t i = 0; i < modes.size(); ++i)
    modes[i].confidence = std::clamp(per_cluster[static_cast<std::size_t>(modes.cluster_of[i])], 0.0, 1.0);
}

}  // namespace postval
