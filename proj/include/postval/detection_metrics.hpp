#pragma once
// Classification metrics and curves over matched modes.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "postval/assignment.hpp"
#include "postval/core.hpp"

namespace postval {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  bool fp_is_upper_bound = false;
  bool operator==(const ConfusionCounts&) const = default;
};

inline ConfusionCounts confusion_from_matches(std::span<const MatchResult> results) {
  ConfusionCounts c;
  for (const MatchResult& r : results) {
    c.tp += r.matches.size();
    c.fp += r.unmatched_pred.size();
    c.fn += r.unmatched_ref.size();
    c.fp_is_upper_bound = c.fp_is_upper_bound || r.fp_upper_bound;
  }
  return c;
}

struct PrfMetrics {
  Scalar precision;
  Scalar recall;
  Scalar f_beta;
};

/// Precision is 1 by convention without predictions; recall and F are
/// undefined without references.
inline PrfMetrics prf_metrics(const ConfusionCounts& c, double beta = 1.0) {
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  PrfMetrics m;
  const auto tp = static_cast<double>(c.tp);
  if (c.tp + c.fp == 0) {
    m.precision.value = 1.0;
    m.precision.flags.insert(flag::kConvention);
  } else {
    m.precision.value = tp / static_cast<double>(c.tp + c.fp);
  }
  if (c.fp_is_upper_bound) m.precision.flags.insert(flag::kUpperBound);
  if (c.tp + c.fn == 0) {
    m.recall.flags.insert(flag::kUndefined);
    m.f_beta.flags.insert(flag::kUndefined);
    if (c.fp == 0) m.precision.flags.insert(flag::kUndefined);
    return m;
  }
  m.recall.value = tp / static_cast<double>(c.tp + c.fn);
  const double p = m.precision.value, r = m.recall.value, b2 = beta * beta;
  m.f_beta.value = (b2 * p + r) > 0.0 ? (1.0 + b2) * p * r / (b2 * p + r) : 0.0;
  if (c.fp_is_upper_bound) m.f_beta.flags.insert(flag::kUpperBound);
  return m;
}

struct ScoredPrediction {
  std::optional<double> confidence;
  bool is_tp = false;
};

/// Matched predictions are TP, unmatched ones FP; surplus and plausible
/// predictions are left out. Cases are pooled in order.
inline std::vector<ScoredPrediction> scored_predictions(std::span<const MatchResult> results) {
  std::vector<ScoredPrediction> out;
  for (const MatchResult& r : results) {
    std::vector<std::pair<std::size_t, bool>> preds;
    for (const Match& m : r.matches) preds.emplace_back(m.pred, true);
    for (std::size_t i : r.unmatched_pred) preds.emplace_back(i, false);
    std::sort(preds.begin(), preds.end());
    for (auto [i, tp] : preds)
      out.push_back({i < r.pred_confidence.size() ? r.pred_confidence[i] : std::nullopt, tp});
  }
  return out;
}

namespace detail {

inline std::vector<std::size_t> rank_by_confidence(std::span<const ScoredPrediction> preds) {
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (!preds[i].confidence)
      throw InvalidArgument("prediction " + std::to_string(i) + " has no confidence score");
  std::vector<std::size_t> idx(preds.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return *preds[a].confidence > *preds[b].confidence; });
  return idx;
}

}  // namespace detail

/// Area under the all-points interpolated precision-recall staircase.
inline double average_precision(std::span<const ScoredPrediction> preds, std::size_t total_positives) {
  if (total_positives == 0) throw InvalidArgument("average precision needs at least one positive");
  const auto order = detail::rank_by_confidence(preds);
  Vector precision(order.size()), recall(order.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    tp += preds[order[k]].is_tp;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(tp) / static_cast<double>(total_positives);
  }
  for (std::size_t k = order.size(); k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (!preds[order[k]].is_tp) continue;
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

struct CurvePoint {
  double threshold = 0.0;
  double recall = 0.0;
  std::optional<double> precision;
  std::optional<double> fppi;
  bool operator==(const CurvePoint&) const = default;
};

namespace detail {

inline CurvePoint make_point(double threshold, std::size_t tp, std::size_t fp, std::size_t refs,
                             std::size_t cases) {
  CurvePoint p;
  p.threshold = threshold;
  p.recall = refs == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(refs);
  p.precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  p.fppi = cases == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(cases);
  return p;
}

}  // namespace detail

/// Recall and FPPI at every distinct confidence, from the highest down.
/// Without any prediction a single point (recall 0, fppi 0) at threshold 1 is returned.
inline std::vector<CurvePoint> froc_curve(std::span<const MatchResult> results) {
  const auto preds = scored_predictions(results);
  std::size_t refs = 0;
  for (const MatchResult& r : results) refs += r.num_refs;
  if (preds.empty()) return {detail::make_point(1.0, 0, 0, refs, results.size())};
  const auto order = detail::rank_by_confidence(preds);
  std::vector<CurvePoint> curve;
  std::size_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const ScoredPrediction& p = preds[order[k]];
    (p.is_tp ? tp : fp) += 1;
    const bool last_of_level = k + 1 == order.size() || *preds[order[k + 1]].confidence != *p.confidence;
    if (last_of_level) curve.push_back(detail::make_point(*p.confidence, tp, fp, refs, results.size()));
  }
  return curve;
}

/// One point per grid value, each from its own set of match results.
inline std::vector<CurvePoint> froc_from_grid(
    const std::vector<std::pair<double, std::vector<MatchResult>>>& grid) {
  if (grid.empty()) throw InvalidArgument("FROC needs confidence scores or a sweep grid");
  std::vector<CurvePoint> curve;
  for (const auto& [value, results] : grid) {
    const ConfusionCounts c = confusion_from_matches(results);
    curve.push_back(detail::make_point(value, c.tp, c.fp, c.tp + c.fn, results.size()));
  }
  return curve;
}

struct CalibrationBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  std::optional<double> mean_confidence;  // unset for empty bins
  std::optional<double> precision;        // unset for empty bins
  bool operator==(const CalibrationBin&) const = default;
};

inline std::vector<CalibrationBin> calibration_curve(std::span<const ScoredPrediction> preds,
                                                     std::size_t num_bins = 10) {
  if (num_bins < 1) throw InvalidArgument("calibration needs at least one bin");
  std::vector<CalibrationBin> bins(num_bins);
  std::vector<double> conf_sum(num_bins, 0.0);
  std::vector<std::size_t> tp(num_bins, 0);
  const auto nb = static_cast<double>(num_bins);
  for (std::size_t b = 0; b < num_bins; ++b) {
    bins[b].lower = static_cast<double>(b) / nb;
    bins[b].upper = static_cast<double>(b + 1) / nb;
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!preds[i].confidence) throw InvalidArgument("prediction " + std::to_string(i) + " has no confidence score");
    const double c = *preds[i].confidence;
    if (!(c >= 0.0 && c <= 1.0)) throw InvalidArgument("confidence must lie in [0,1]");
    const auto b = std::min(static_cast<std::size_t>(std::floor(c * nb)), num_bins - 1);
    ++bins[b].count;
    conf_sum[b] += c;
    tp[b] += preds[i].is_tp;
  }
  for (std::size_t b = 0; b < num_bins; ++b) {
    if (bins[b].count == 0) continue;
    const auto n = static_cast<double>(bins[b].count);
    bins[b].mean_confidence = conf_sum[b] / n;
    bins[b].precision = static_cast<double>(tp[b]) / n;
  }
  return bins;
}

// ---------------------------------------------------------------------------
// Metric@Target

struct SweepPoint {
  double operating_point = 0.0;
  std::map<std::string, double> metrics;
};

struct TargetResult {
  std::size_t index = 0;
  double operating_point = 0.0;
  double target_achieved = 0.0;
  Scalar reported;
  bool target_unmet = false;
};

/// True for metrics where larger values are better.
inline bool higher_is_better(const std::string& metric) {
  if (metric == "recall" || metric == "precision" || metric == "f1" || metric == "f_beta" || metric == "ap")
    return true;
  if (metric == "fppi") return false;
  throw InvalidArgument("unknown metric name '" + metric + "'");
}

/// Report `report_metric` at the operating point where `target_metric` meets
/// `target_value` (>= for higher-is-better metrics, <= for FPPI). Among
/// qualifying points the best report value wins; if none qualifies, the point
/// closest to the target is returned with the target_unmet flag.
inline TargetResult metric_at_target(std::span<const SweepPoint> sweep, const std::string& target_metric,
                                     double target_value, const std::string& report_metric) {
  const bool target_up = higher_is_better(target_metric);
  const bool report_up = higher_is_better(report_metric);
  if (sweep.empty()) throw InvalidArgument("metric_at_target needs a nonempty sweep");
  for (const SweepPoint& p : sweep)
    if (!p.metrics.count(target_metric) || !p.metrics.count(report_metric))
      throw InvalidArgument("sweep point lacks '" + target_metric + "' or '" + report_metric + "'");
  auto better_report = [&](double a, double b) { return report_up ? a > b : a < b; };
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    const double t = sweep[i].metrics.at(target_metric);
    if (!(target_up ? t >= target_value : t <= target_value)) continue;
    if (!best || better_report(sweep[i].metrics.at(report_metric), sweep[*best].metrics.at(report_metric)))
      best = i;
  }
  TargetResult r;
  if (!best) {
    r.target_unmet = true;
    for (std::size_t i = 0; i < sweep.size(); ++i) {
      if (!best) {
        best = i;
        continue;
      }
      const double gap = std::abs(sweep[i].metrics.at(target_metric) - target_value);
      const double best_gap = std::abs(sweep[*best].metrics.at(target_metric) - target_value);
      if (gap < best_gap || (gap == best_gap && better_report(sweep[i].metrics.at(report_metric),
                                                              sweep[*best].metrics.at(report_metric))))
        best = i;
    }
  }
  r.index = *best;
  r.operating_point = sweep[*best].operating_point;
  r.target_achieved = sweep[*best].metrics.at(target_metric);
  r.reported.value = sweep[*best].metrics.at(report_metric);
  if (r.target_unmet) r.reported.flags.insert(flag::kTargetUnmet);
  return r;
}

// ---------------------------------------------------------------------------
// Resimulation

/// Maps a solution-space point to observable space; `params` carries
/// per-case quantities such as the exponent of the toy problem.
using ForwardModel = std::function<Vector(const Vector& x, const std::map<std::string, double>& params)>;

class ForwardRegistry {
 public:
  void add(const std::string& name, ForwardModel model) { models_[name] = std::move(model); }
  bool contains(const std::string& name) const { return models_.count(name) > 0; }
  const ForwardModel& get(const std::string& name) const {
    auto it = models_.find(name);
    if (it == models_.end()) throw InvalidArgument("no forward model registered under '" + name + "'");
    return it->second;
  }

  /// Registry preloaded with the complex power map x -> x^n on (re, im) pairs.
  static ForwardRegistry with_builtins();

 private:
  std::map<std::string, ForwardModel> models_;
};

inline Vector complex_power_forward(const Vector& x, const std::map<std::string, double>& params) {
  if (x.size() != 2) throw InvalidArgument("complex_power expects a 2-D (re, im) point");
  auto it = params.find("n");
  if (it == params.end()) throw InvalidArgument("complex_power needs parameter 'n'");
  const auto n = static_cast<long>(std::llround(it->second));
  double re = 1.0, im = 0.0;
  for (long k = 0; k < n; ++k) {
    const double r = re * x[0] - im * x[1];
    im = re * x[1] + im * x[0];
    re = r;
  }
  return {re, im};
}

inline ForwardRegistry ForwardRegistry::with_builtins() {
  ForwardRegistry r;
  r.add("complex_power", complex_power_forward);
  return r;
}

struct ResimulationSpec {
  double tolerance = 0.05;
  /// Scale the tolerance by the observation norm.
  bool relative = true;
};

/// Plausible iff the forward-simulated center lies within tolerance of the
/// observation (Euclidean distance in observable space).
inline bool resimulation_fp_check(const Mode& pred, const ForwardModel& forward, const Observation& obs,
                                  const ResimulationSpec& spec = {}) {
  const Vector y = forward(pred.center, obs.params);
  if (y.size() != obs.y.size()) throw InvalidArgument("forward model output has the wrong dimension");
  double d2 = 0.0, norm2 = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    d2 += (y[k] - obs.y[k]) * (y[k] - obs.y[k]);
    norm2 += obs.y[k] * obs.y[k];
  }
  const double tol = spec.relative ? spec.tolerance * std::sqrt(norm2) : spec.tolerance;
  return std::sqrt(d2) <= tol;
}

/// Moves plausible FP candidates to `plausible_pred` and clears the
/// upper-bound flag, since every remaining FP has been checked.
inline void apply_resimulation(MatchResult& r, std::span<const Mode> preds, const ForwardModel& forward,
                               const Observation& obs, const ResimulationSpec& spec = {}) {
  std::vector<std::size_t> still_fp;
  for (std::size_t i : r.unmatched_pred) {
    if (resimulation_fp_check(preds[i], forward, obs, spec))
      r.plausible_pred.push_back(i);
    else
      still_fp.push_back(i);
  }
  r.unmatched_pred = std::move(still_fp);
  r.fp_upper_bound = false;
}

}  // namespace postval
