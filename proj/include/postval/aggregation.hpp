#pragma once
// Two-stage aggregation: per-mode values within a case, then across cases.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "postval/core.hpp"

namespace postval {

enum class Location { Mean, Median };
enum class Spread { Std, Iqr, None };

struct AggregationSpec {
  Location within_case = Location::Mean;
  Location across_cases = Location::Mean;
  Spread spread = Spread::Std;
  bool operator==(const AggregationSpec&) const = default;
};

inline std::string_view to_string(Location l) { return l == Location::Mean ? "mean" : "median"; }
inline std::string_view to_string(Spread s) {
  switch (s) {
    case Spread::Std: return "std";
    case Spread::Iqr: return "iqr";
    case Spread::None: return "none";
  }
  return "?";
}
inline std::optional<Location> parse_location(std::string_view s) {
  if (s == "mean") return Location::Mean;
  if (s == "median") return Location::Median;
  return std::nullopt;
}
inline std::optional<Spread> parse_spread(std::string_view s) {
  if (s == "std") return Spread::Std;
  if (s == "iqr") return Spread::Iqr;
  if (s == "none") return Spread::None;
  return std::nullopt;
}

/// Quantile with linear interpolation between order statistics:
/// position q * (n - 1) in the sorted values.
inline double quantile(Vector v, double q) {
  if (v.empty()) throw InvalidArgument("quantile of an empty list");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double mean(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("mean of an empty list");
  Vector sorted(v.begin(), v.end());
  // Summing in sorted order keeps the result independent of input order.
  std::sort(sorted.begin(), sorted.end());
  return std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(v.size());
}

inline double median(std::span<const double> v) { return quantile(Vector(v.begin(), v.end()), 0.5); }

inline double reduce(std::span<const double> v, Location how) { return how == Location::Mean ? mean(v) : median(v); }

struct AggregateResult {
  Scalar location;
  Scalar spread;
  Vector per_case_values;              // one per nonempty case, input order
  std::vector<std::size_t> used_cases; // index of each per-case value
  std::size_t excluded_cases = 0;
};

inline AggregateResult aggregate_hierarchical(const std::vector<Vector>& values, const AggregationSpec& spec) {
  AggregateResult r;
  for (std::size_t c = 0; c < values.size(); ++c) {
    if (values[c].empty()) {
      ++r.excluded_cases;
      continue;
    }
    r.per_case_values.push_back(reduce(values[c], spec.within_case));
    r.used_cases.push_back(c);
  }
  if (r.per_case_values.empty()) throw InvalidArgument("no case has any value to aggregate");
  const Vector& v = r.per_case_values;
  r.location.value = reduce(v, spec.across_cases);
  switch (spec.spread) {
    case Spread::None: r.spread.flags.insert(flag::kUndefined); break;
    case Spread::Iqr: r.spread.value = quantile(v, 0.75) - quantile(v, 0.25); break;
    case Spread::Std:
      if (v.size() < 2) {
        r.spread.value = 0.0;
        r.spread.flags.insert(flag::kUndefined);
      } else {
        const double m = mean(v);
        Vector sq;
        for (double x : v) sq.push_back((x - m) * (x - m));
        r.spread.value = std::sqrt(mean(sq) * static_cast<double>(v.size()) / static_cast<double>(v.size() - 1));
      }
      break;
  }
  return r;
}

/// Single-stage reduction over all values pooled together.
inline double aggregate_flat(const std::vector<Vector>& values, Location how) {
  Vector all;
  for (const Vector& v : values) all.insert(all.end(), v.begin(), v.end());
  return reduce(all, how);
}

}  // namespace postval
