#pragma once
// End-to-end evaluation of a dataset: mode detection, localization,
// assignment, metrics and aggregation.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "postval/aggregation.hpp"
#include "postval/assignment.hpp"
#include "postval/clustering.hpp"
#include "postval/core.hpp"
#include "postval/dataset.hpp"
#include "postval/detection_metrics.hpp"
#include "postval/distribution_metrics.hpp"
#include "postval/localization.hpp"
#include "postval/random.hpp"
#include "postval/recommender.hpp"
#include "postval/report.hpp"

namespace postval {

/// Raised when a run asks for something its fingerprint or inputs cannot support.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct TargetSpec {
  std::string metric = "recall";
  double value = 0.95;
  std::string report = "precision";
};

/// Hyperparameter grid for mode detection; each value yields one operating point.
struct SweepSpec {
  std::string parameter;  // "min_samples", "eps" or "alpha"
  Vector values;
};

struct PipelineConfig {
  Fingerprint fingerprint;
  ClusteringParams clustering = DbscanParams{};
  std::optional<CenterRule> center_rule;
  std::size_t bootstrap_resamples = 2;  // 0 disables confidence scores
  LocalizationCriterion criterion = LocalizationCriterion::centroid(0.2);
  AssignmentStrategy strategy = AssignmentStrategy::GreedyByScore;
  std::vector<std::string> metrics;  // resolved names; see resolve_metrics
  AggregationSpec aggregation;
  double beta = 1.0;
  std::size_t calibration_bins = 10;
  std::optional<SweepSpec> sweep;
  std::optional<TargetSpec> target;
  bool resimulation = false;
  std::string forward_model = "complex_power";
  ResimulationSpec resimulation_spec;
  std::optional<DiscretizationSpec> discretization;
  KernelSpec kernel;
  std::uint64_t seed = 0;
  std::string config_hash;
};

inline const std::set<std::string>& distribution_metric_names() {
  static const std::set<std::string> names = {"cross_entropy", "kl_discretized", "ks",
                                              "wasserstein_1d", "marginal_wasserstein", "mmd"};
  return names;
}

inline const std::set<std::string>& detection_metric_names() {
  static const std::set<std::string> names = {"recall",    "precision",   "f_beta",
                                              "ap",        "froc",        "fppi",
                                              "calibration", "matched_mode_distance", "metric_at_target",
                                              "resimulation_check"};
  return names;
}

/// Metric names from a plan, in plan order.
inline std::vector<std::string> plan_metric_names(const MetricPlan& plan) {
  std::vector<std::string> out;
  for (const auto& m : plan.distribution_metrics) out.push_back(m.name);
  if (plan.detection)
    for (const auto& m : plan.detection->metrics) out.push_back(m.name);
  return out;
}

/// Rejects requested metrics the fingerprint cannot support, citing the
/// fingerprint item responsible.
inline void check_metric_request(const PipelineConfig& cfg) {
  const Fingerprint& fp = cfg.fingerprint;
  const Granularity g = fp.reference_granularity;
  auto fail = [](const std::string& metric, const std::string& why) {
    throw ConfigError("metric '" + metric + "' is not valid for this fingerprint: " + why);
  };
  if (cfg.metrics.empty()) throw ConfigError("metric list is empty");
  for (const std::string& m : cfg.metrics) {
    const bool dist = distribution_metric_names().count(m) > 0;
    const bool det = detection_metric_names().count(m) > 0;
    if (!dist && !det) throw ConfigError("unknown metric '" + m + "'");
    if (dist && !is_posterior(g)) fail(m, "P1 reference is a mode list, not a posterior");
    if (det && !has_modes(g)) fail(m, "P1 reference is a posterior without labeled modes");
    if ((m == "ap" || m == "froc" || m == "calibration") && !fp.confidence_score && !(m == "froc" && cfg.sweep))
      fail(m, "P3 confidence score is unavailable");
    if ((m == "precision" || m == "f_beta") && g == Granularity::NonExhaustiveModes && !fp.resimulation)
      fail(m, "P1 reference is non-exhaustive and P2 resimulation is unavailable, so FP counts are only bounds");
    if (m == "resimulation_check" && !fp.resimulation) fail(m, "P2 resimulation is unavailable");
    if (m == "cross_entropy" && !fp.prediction_density) fail(m, "P4 prediction density is unavailable");
    if (m == "kl_discretized" && !fp.natural_discretization) fail(m, "P5 natural discretization is unavailable");
    if ((m == "ks" || m == "wasserstein_1d") && !fp.univariate) fail(m, "P6 solution space is not univariate");
    if (m == "kl_discretized" && !cfg.discretization) fail(m, "no discretization grid configured");
    if (m == "metric_at_target" && !cfg.target) fail(m, "no target configured");
  }
  if (cfg.strategy == AssignmentStrategy::GreedyByScore && !fp.confidence_score && has_modes(g))
    throw ConfigError("assignment 'greedy_by_score' needs confidence scores (P3 is unavailable)");
  if (cfg.resimulation && !fp.resimulation)
    throw ConfigError("resimulation requested but P2 resimulation is unavailable");
}

struct CaseOutcome {
  ModeSet modes;
  std::optional<MatchResult> match;
  Vector matched_distances;
  std::map<std::string, double> distribution_values;
};

struct EvaluationResult {
  MetricReport report;
  std::vector<CaseOutcome> cases;
};

namespace detail {

inline bool wants(const PipelineConfig& cfg, const std::string& name) {
  return std::find(cfg.metrics.begin(), cfg.metrics.end(), name) != cfg.metrics.end();
}

inline bool wants_detection(const PipelineConfig& cfg) {
  return std::any_of(cfg.metrics.begin(), cfg.metrics.end(),
                     [](const std::string& m) { return detection_metric_names().count(m) > 0; });
}

inline bool resimulate(const PipelineConfig& cfg) { return cfg.resimulation || wants(cfg, "resimulation_check"); }

inline DistanceSpec case_distance_spec(const DistanceSpec& base, const ValidationCase& c) {
  DistanceSpec spec = base;
  for (const PeriodicDim& p : c.periodic)
    if (!spec.period_of(p.index)) spec.periodic.push_back(p);
  return spec;
}

inline ModeSet detect_modes(const ValidationCase& c, const PipelineConfig& cfg, const ClusteringParams& params,
                            std::size_t index) {
  const ClusterLabeling labels = cluster(c.prediction, params);
  ModeSet modes = extract_modes(c.prediction, labels, cfg.center_rule.value_or(default_center_rule(c.dim())));
  if (cfg.bootstrap_resamples > 0 && !modes.empty()) {
    const Vector conf =
        bootstrap_confidence(c.prediction, labels, params, cfg.bootstrap_resamples, derive_seed(cfg.seed, index, 1));
    attach_confidence(modes, conf);
  }
  return modes;
}

inline MatchResult match_case(const ValidationCase& c, const ModeSet& modes, const PipelineConfig& cfg,
                              const ForwardRegistry& registry) {
  LocalizationCriterion criterion = cfg.criterion;
  criterion.distance = case_distance_spec(cfg.criterion.distance, c);
  MatchResult r = assign(modes.modes, c.reference.modes, criterion, cfg.strategy);
  const bool resim = resimulate(cfg);
  r.fp_upper_bound = fp_is_upper_bound(c.reference.granularity, resim);
  if (resim) {
    if (!c.observation) throw ConfigError("case '" + c.id + "': resimulation needs an observation");
    apply_resimulation(r, modes.modes, registry.get(cfg.forward_model), *c.observation, cfg.resimulation_spec);
  }
  return r;
}

inline ClusteringParams with_sweep_value(ClusteringParams params, const std::string& name, double v) {
  if (auto* db = std::get_if<DbscanParams>(&params)) {
    if (name == "min_samples") {
      db->min_samples = static_cast<std::size_t>(std::llround(v));
      return params;
    }
    if (name == "eps") {
      db->eps = v;
      return params;
    }
  }
  if (auto* ud = std::get_if<UnidipParams>(&params); ud && name == "alpha") {
    ud->alpha = v;
    return params;
  }
  throw ConfigError("sweep parameter '" + name + "' does not apply to the configured mode detection");
}

inline std::map<std::string, double> point_metrics(const CurvePoint& p) {
  std::map<std::string, double> m{{"recall", p.recall}};
  if (p.precision) m["precision"] = *p.precision;
  if (p.fppi) m["fppi"] = *p.fppi;
  if (p.precision) {
    const double s = *p.precision + p.recall;
    m["f1"] = s > 0.0 ? 2.0 * *p.precision * p.recall / s : 0.0;
  }
  return m;
}

inline double distribution_value(const std::string& name, const ValidationCase& c, const PipelineConfig& cfg) {
  const PosteriorSamples& ref = *c.reference.samples;
  const PosteriorSamples& pred = c.prediction;
  if (name == "cross_entropy") {
    if (!c.prediction_log_density)
      throw ConfigError("case '" + c.id + "': cross_entropy needs prediction log-densities");
    return cross_entropy(*c.prediction_log_density);
  }
  if (name == "kl_discretized") return kl_discretized(ref, pred, *cfg.discretization).value;
  if (name == "ks") return ks_two_sample(ref.coordinate(0), pred.coordinate(0)).statistic;
  if (name == "wasserstein_1d") return wasserstein_1d(ref, pred);
  if (name == "marginal_wasserstein") return marginal_wasserstein(ref, pred);
  if (name == "mmd") return mmd(ref, pred, cfg.kernel);
  throw ConfigError("unknown distribution metric '" + name + "'");
}

}  // namespace detail

inline EvaluationResult evaluate_dataset(const std::vector<ValidationCase>& cases, const PipelineConfig& cfg,
                                         const ForwardRegistry& registry = ForwardRegistry::with_builtins()) {
  check_metric_request(cfg);
  if (cases.empty()) throw ConfigError("dataset has no cases");
  if (detail::resimulate(cfg) && !registry.contains(cfg.forward_model))
    throw ConfigError("resimulation needs forward model '" + cfg.forward_model + "', which is not registered");

  EvaluationResult out;
  MetricReport& rep = out.report;
  rep.provenance = {cfg.config_hash, cfg.seed, kToolVersion};

  // Consistency diagnostics escalate when they undermine a requested metric.
  for (const ValidationCase& c : cases) {
    for (const Diagnostic& d : check_case_consistency(c, cfg.fingerprint)) {
      const bool fatal = d.property == "P1" || (d.property == "P2" && detail::resimulate(cfg)) ||
                         (d.property == "P4" && detail::wants(cfg, "cross_entropy")) ||
                         (d.property == "P6" && (detail::wants(cfg, "ks") || detail::wants(cfg, "wasserstein_1d")));
      if (fatal) throw ConfigError("case '" + c.id + "': " + d.property + ": " + d.message);
      rep.diagnostics.push_back({c.id, d.property + ": " + d.message});
    }
  }

  const bool detection = detail::wants_detection(cfg);
  std::vector<MatchResult> results;
  out.cases.resize(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const ValidationCase& c = cases[i];
    CaseOutcome& oc = out.cases[i];
    if (detection) {
      oc.modes = detail::detect_modes(c, cfg, cfg.clustering, i);
      for (const std::string& msg : oc.modes.diagnostics) rep.diagnostics.push_back({c.id, msg});
      oc.match = detail::match_case(c, oc.modes, cfg, registry);
      // Matched-mode error is always an Lp distance, even under other criteria.
      DistanceSpec spec = detail::case_distance_spec(cfg.criterion.distance, c);
      spec.metric = CentroidMetric::Lp;
      for (const Match& m : oc.match->matches)
        oc.matched_distances.push_back(
            centroid_distance(oc.modes[m.pred].center, c.reference.modes[m.ref].center, spec));
      results.push_back(*oc.match);
    }
    for (const std::string& name : cfg.metrics)
      if (distribution_metric_names().count(name)) oc.distribution_values[name] = detail::distribution_value(name, c, cfg);
  }

  // Distribution metrics: one value per case, aggregated across cases.
  for (const std::string& name : cfg.metrics) {
    if (!distribution_metric_names().count(name)) continue;
    std::vector<Vector> per_case;
    for (const CaseOutcome& oc : out.cases) per_case.push_back({oc.distribution_values.at(name)});
    const AggregateResult agg = aggregate_hierarchical(per_case, cfg.aggregation);
    rep.scalars[name] = agg.location;
    if (cfg.aggregation.spread != Spread::None) rep.scalars[name + "_spread"] = agg.spread;
  }
  if (detail::wants(cfg, "kl_discretized")) {
    std::size_t smoothed = 0;
    for (const ValidationCase& c : cases)
      smoothed += kl_discretized(*c.reference.samples, c.prediction, *cfg.discretization).smoothed_cells;
    if (smoothed > 0) {
      rep.scalars["kl_discretized"].flags.insert(flag::kSmoothed);
      rep.diagnostics.push_back({"", "kl_discretized: " + std::to_string(smoothed) +
                                         " cells with empty prediction mass were smoothed"});
    }
  }

  if (!detection) return out;

  const ConfusionCounts counts = confusion_from_matches(results);
  const PrfMetrics prf = prf_metrics(counts, cfg.beta);
  std::size_t total_refs = 0;
  for (const MatchResult& r : results) total_refs += r.num_refs;
  rep.scalars["tp"].value = static_cast<double>(counts.tp);
  rep.scalars["fp"].value = static_cast<double>(counts.fp);
  rep.scalars["fn"].value = static_cast<double>(counts.fn);
  if (counts.fp_is_upper_bound) rep.scalars["fp"].flags.insert(flag::kUpperBound);
  if (detail::wants(cfg, "recall")) rep.scalars["recall"] = prf.recall;
  if (detail::wants(cfg, "precision")) rep.scalars["precision"] = prf.precision;
  if (detail::wants(cfg, "f_beta")) rep.scalars["f_beta"] = prf.f_beta;
  if (detail::wants(cfg, "fppi") || detail::wants(cfg, "froc")) {
    Scalar& s = rep.scalars["fppi"];
    s.value = static_cast<double>(counts.fp) / static_cast<double>(cases.size());
    if (counts.fp_is_upper_bound) s.flags.insert(flag::kUpperBound);
  }
  if (detail::resimulate(cfg)) {
    std::size_t plausible = 0;
    for (const MatchResult& r : results) plausible += r.plausible_pred.size();
    rep.scalars["resimulated_plausible"].value = static_cast<double>(plausible);
  }

  const bool scored = cfg.fingerprint.confidence_score && cfg.bootstrap_resamples > 0;
  if (detail::wants(cfg, "ap")) {
    Scalar& s = rep.scalars["ap"];
    if (total_refs == 0) {
      s.flags.insert(flag::kUndefined);
    } else {
      s.value = average_precision(scored_predictions(results), total_refs);
    }
    if (counts.fp_is_upper_bound) s.flags.insert(flag::kUpperBound);
  }
  if (scored && (detail::wants(cfg, "froc") || detail::wants(cfg, "metric_at_target"))) {
    rep.curves["froc"] = froc_curve(results);
    rep.curves["pr"] = rep.curves["froc"];
  }
  if (detail::wants(cfg, "calibration"))
    rep.calibration = calibration_curve(scored_predictions(results), cfg.calibration_bins);

  if (detail::wants(cfg, "matched_mode_distance")) {
    std::vector<Vector> per_case;
    for (const CaseOutcome& oc : out.cases) per_case.push_back(oc.matched_distances);
    bool any = std::any_of(per_case.begin(), per_case.end(), [](const Vector& v) { return !v.empty(); });
    if (any) {
      const AggregateResult agg = aggregate_hierarchical(per_case, cfg.aggregation);
      rep.scalars["matched_mode_distance"] = agg.location;
      if (cfg.aggregation.spread != Spread::None) rep.scalars["matched_mode_distance_spread"] = agg.spread;
      if (agg.excluded_cases > 0)
        rep.diagnostics.push_back({"", "matched_mode_distance: " + std::to_string(agg.excluded_cases) +
                                           " cases without matched modes excluded"});
    } else {
      rep.scalars["matched_mode_distance"].flags.insert(flag::kUndefined);
      rep.diagnostics.push_back({"", "matched_mode_distance: no case has a matched mode"});
    }
  }

  std::vector<SweepPoint> sweep_points;
  if (cfg.sweep) {
    std::vector<std::pair<double, std::vector<MatchResult>>> grid;
    for (double v : cfg.sweep->values) {
      const ClusteringParams params = detail::with_sweep_value(cfg.clustering, cfg.sweep->parameter, v);
      std::vector<MatchResult> rs;
      for (std::size_t i = 0; i < cases.size(); ++i)
        rs.push_back(detail::match_case(cases[i], detail::detect_modes(cases[i], cfg, params, i), cfg, registry));
      grid.emplace_back(v, std::move(rs));
    }
    rep.curves["froc_sweep"] = froc_from_grid(grid);
    for (const CurvePoint& p : rep.curves["froc_sweep"]) sweep_points.push_back({p.threshold, detail::point_metrics(p)});
  } else if (rep.curves.count("froc")) {
    for (const CurvePoint& p : rep.curves["froc"]) sweep_points.push_back({p.threshold, detail::point_metrics(p)});
  }
  if (detail::wants(cfg, "metric_at_target")) {
    if (sweep_points.empty())
      throw ConfigError("metric_at_target needs an operating-point sweep or confidence scores");
    const TargetResult t = metric_at_target(sweep_points, cfg.target->metric, cfg.target->value, cfg.target->report);
    Scalar s = t.reported;
    if (counts.fp_is_upper_bound && (cfg.target->report == "precision" || cfg.target->report == "fppi"))
      s.flags.insert(flag::kUpperBound);
    rep.scalars["metric_at_target"] = s;
    rep.scalars["metric_at_target_operating_point"].value = t.operating_point;
    rep.scalars["metric_at_target_achieved"].value = t.target_achieved;
    if (t.target_unmet) rep.scalars["metric_at_target_achieved"].flags.insert(flag::kTargetUnmet);
  }
  return out;
}

}  // namespace postval
