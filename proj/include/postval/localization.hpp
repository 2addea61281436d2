#pragma once
// Localization scores between one predicted and one reference mode.

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "postval/core.hpp"
#include "postval/distribution_metrics.hpp"

namespace postval {

enum class CriterionKind { CentroidDistance, MahalanobisDistance, PointInConfidenceEllipsoid, DistributionDistance };

enum class CentroidMetric { Lp, Cosine };

struct DistanceSpec {
  CentroidMetric metric = CentroidMetric::Lp;
  double p = 2.0;  // Lp exponent, >= 1; infinity gives the max norm
  std::vector<PeriodicDim> periodic;
  /// Dimensions taking part in the distance; empty means all.
  std::vector<std::size_t> dimensions;

  std::optional<double> period_of(std::size_t axis) const {
    for (const PeriodicDim& pd : periodic)
      if (pd.index == axis) return pd.period;
    return std::nullopt;
  }
};

enum class DistributionDistanceKind { MarginalWasserstein, Mmd, KolmogorovSmirnov, Wasserstein1d };

namespace detail {

inline std::vector<std::size_t> selected_axes(const DistanceSpec& spec, std::size_t dim) {
  std::vector<std::size_t> axes = spec.dimensions;
  if (axes.empty())
    for (std::size_t k = 0; k < dim; ++k) axes.push_back(k);
  for (std::size_t k : axes)
    if (k >= dim) throw InvalidArgument("distance dimension " + std::to_string(k) + " out of range");
  return axes;
}

inline double periodic_difference(double a, double b, double period) {
  const double r = std::fmod(std::abs(a - b), period);
  return std::min(r, period - r);
}

inline void require_same_dim(std::size_t a, std::size_t b) {
  if (a != b)
    throw InvalidArgument("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
}

}  // namespace detail

/// Lp distance between centers with periodic wraparound on declared axes.
/// The cosine metric scores each selected axis as 1 - cos(2 pi delta / period)
/// and averages; every selected axis must be periodic.
inline double centroid_distance(const Vector& a, const Vector& b, const DistanceSpec& spec = {}) {
  detail::require_same_dim(a.size(), b.size());
  const auto axes = detail::selected_axes(spec, a.size());
  if (spec.metric == CentroidMetric::Cosine) {
    double acc = 0.0;
    for (std::size_t k : axes) {
      const auto period = spec.period_of(k);
      if (!period) throw InvalidArgument("cosine distance requires periodic axis " + std::to_string(k));
      acc += 1.0 - std::cos(2.0 * std::numbers::pi * (a[k] - b[k]) / *period);
    }
    return acc / static_cast<double>(axes.size());
  }
  if (!(spec.p >= 1.0)) throw InvalidArgument("Lp exponent must be at least 1");
  const bool max_norm = std::isinf(spec.p);
  double acc = 0.0;
  for (std::size_t k : axes) {
    const auto period = spec.period_of(k);
    const double diff = period ? detail::periodic_difference(a[k], b[k], *period) : std::abs(a[k] - b[k]);
    if (max_norm)
      acc = std::max(acc, diff);
    else if (spec.p == 1.0)
      acc += diff;
    else if (spec.p == 2.0)
      acc += diff * diff;
    else
      acc += std::pow(diff, spec.p);
  }
  if (max_norm || spec.p == 1.0) return acc;
  if (spec.p == 2.0) return std::sqrt(acc);
  return std::pow(acc, 1.0 / spec.p);
}

inline double centroid_distance(const Mode& pred, const Mode& ref, const DistanceSpec& spec = {}) {
  return centroid_distance(pred.center, ref.center, spec);
}

/// Mahalanobis distance of `point` from the predicted mode, using the mode
/// covariance plus a ridge of 1e-9 * trace / d on the diagonal.
inline double mahalanobis_distance(const Mode& pred, const Vector& point, const std::string& mode_name = "predicted mode") {
  if (!pred.covariance) throw InvalidArgument(mode_name + " has no covariance");
  detail::require_same_dim(pred.dim(), point.size());
  const auto d = static_cast<Eigen::Index>(pred.dim());
  Eigen::MatrixXd cov = pred.covariance_matrix();
  const double ridge = 1e-9 * cov.trace() / static_cast<double>(d);
  cov.diagonal().array() += ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw InvalidArgument("covariance of " + mode_name + " is singular");
  Eigen::VectorXd diff(d);
  for (Eigen::Index k = 0; k < d; ++k)
    diff(k) = point[static_cast<std::size_t>(k)] - pred.center[static_cast<std::size_t>(k)];
  const Eigen::VectorXd y = llt.matrixL().solve(diff);
  const double q = y.squaredNorm();
  if (!std::isfinite(q)) throw InvalidArgument("covariance of " + mode_name + " is singular");
  return std::sqrt(q);
}

/// Quantile of the chi-square distribution with `dof` degrees of freedom.
inline double chi_square_quantile(double level, double dof) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("confidence level must lie in (0,1)");
  return 2.0 * boost::math::gamma_p_inv(dof / 2.0, level);
}

inline bool point_in_confidence_ellipsoid(const Mode& pred, const Vector& point, double level,
                                          const std::string& mode_name = "predicted mode") {
  const double threshold = chi_square_quantile(level, static_cast<double>(pred.dim()));
  const double m = mahalanobis_distance(pred, point, mode_name);
  return m * m <= threshold;
}

/// Distance between the sample supports of two modes.
inline double distribution_distance(const Mode& pred, const Mode& ref, DistributionDistanceKind kind) {
  if (!pred.support || !ref.support)
    throw InvalidArgument("distribution distance needs per-mode samples on both modes");
  const PosteriorSamples& a = *pred.support;
  const PosteriorSamples& b = *ref.support;
  switch (kind) {
    case DistributionDistanceKind::MarginalWasserstein: return marginal_wasserstein(a, b);
    case DistributionDistanceKind::Mmd: return mmd(a, b);
    case DistributionDistanceKind::KolmogorovSmirnov:
      if (a.dim() != 1 || b.dim() != 1) throw InvalidArgument("KS distance requires univariate modes");
      return ks_two_sample(a.coordinate(0), b.coordinate(0)).statistic;
    case DistributionDistanceKind::Wasserstein1d:
      if (a.dim() != 1 || b.dim() != 1) throw InvalidArgument("1-D Wasserstein requires univariate modes");
      return wasserstein_1d(a, b);
  }
  return 0.0;
}

/// Scores a (pred, ref) pair; smaller is better for every kind. The ellipsoid
/// criterion scores 0 inside and 1 outside.
struct LocalizationCriterion {
  CriterionKind kind = CriterionKind::CentroidDistance;
  DistanceSpec distance;
  double level = 0.95;
  DistributionDistanceKind dist_metric = DistributionDistanceKind::MarginalWasserstein;
  double threshold = 0.2;

  static LocalizationCriterion centroid(double threshold, DistanceSpec spec = {}) {
    LocalizationCriterion c;
    c.kind = CriterionKind::CentroidDistance;
    c.distance = std::move(spec);
    c.threshold = threshold;
    return c;
  }
  static LocalizationCriterion mahalanobis(double threshold) {
    LocalizationCriterion c;
    c.kind = CriterionKind::MahalanobisDistance;
    c.threshold = threshold;
    return c;
  }
  static LocalizationCriterion ellipsoid(double level) {
    LocalizationCriterion c;
    c.kind = CriterionKind::PointInConfidenceEllipsoid;
    c.level = level;
    c.threshold = 0.5;
    return c;
  }
  static LocalizationCriterion distribution(DistributionDistanceKind metric, double threshold) {
    LocalizationCriterion c;
    c.kind = CriterionKind::DistributionDistance;
    c.dist_metric = metric;
    c.threshold = threshold;
    return c;
  }

  void validate() const {
    if (!std::isfinite(threshold) && kind != CriterionKind::PointInConfidenceEllipsoid)
      throw InvalidArgument("localization threshold must be finite");
    if (kind == CriterionKind::PointInConfidenceEllipsoid && !(level > 0.0 && level < 1.0))
      throw InvalidArgument("confidence level must lie in (0,1)");
  }

  double score(const Mode& pred, const Mode& ref, std::size_t pred_index = 0) const {
    switch (kind) {
      case CriterionKind::CentroidDistance: return centroid_distance(pred, ref, distance);
      case CriterionKind::MahalanobisDistance:
        return mahalanobis_distance(pred, ref.center, pred.name(pred_index));
      case CriterionKind::PointInConfidenceEllipsoid:
        return point_in_confidence_ellipsoid(pred, ref.center, level, pred.name(pred_index)) ? 0.0 : 1.0;
      case CriterionKind::DistributionDistance: return distribution_distance(pred, ref, dist_metric);
    }
    return std::numeric_limits<double>::infinity();
  }

  bool admissible(double s) const {
    if (kind == CriterionKind::PointInConfidenceEllipsoid) return s == 0.0;
    return s <= threshold;
  }
};

inline std::string_view to_string(CriterionKind k) {
  switch (k) {
    case CriterionKind::CentroidDistance: return "centroid_distance";
    case CriterionKind::MahalanobisDistance: return "mahalanobis_distance";
    case CriterionKind::PointInConfidenceEllipsoid: return "confidence_ellipsoid";
    case CriterionKind::DistributionDistance: return "distribution_distance";
  }
  return "?";
}

inline std::string_view to_string(DistributionDistanceKind k) {
  switch (k) {
    case DistributionDistanceKind::MarginalWasserstein: return "marginal_wasserstein";
    case DistributionDistanceKind::Mmd: return "mmd";
    case DistributionDistanceKind::KolmogorovSmirnov: return "ks";
    case DistributionDistanceKind::Wasserstein1d: return "wasserstein_1d";
  }
  return "?";
}

}  // namespace postval
