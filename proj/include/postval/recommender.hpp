#pragma once
// Metric recommendation: an ordered rule table evaluated against a fingerprint.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "postval/assignment.hpp"
#include "postval/core.hpp"
#include "postval/localization.hpp"

namespace postval {

struct RecommendOptions {
  /// Solution space too large for a histogram grid.
  bool high_dimensional = false;
  /// The run declares a sweep over operating points.
  bool operating_point_sweep = false;
};

struct MetricItem {
  std::string name;
  std::string rule;
  std::map<std::string, std::string> params;
  std::set<std::string> flags;
};

struct DetectionPlan {
  std::vector<std::string> localization;  // candidates, preferred first
  std::vector<std::string> assignment;    // candidates, preferred first
  std::vector<MetricItem> metrics;

  bool has_metric(const std::string& name) const {
    return std::any_of(metrics.begin(), metrics.end(), [&](const MetricItem& m) { return m.name == name; });
  }
};

struct PlanNote {
  std::string rule;
  std::string text;
  bool inferred = false;
};

struct MetricPlan {
  std::vector<MetricItem> distribution_metrics;
  std::optional<DetectionPlan> detection;
  /// Metrics ruled out for this fingerprint, with the rule id that did so.
  std::map<std::string, std::string> excluded;
  std::vector<PlanNote> notes;

  bool has_distribution_metric(const std::string& name) const {
    return std::any_of(distribution_metrics.begin(), distribution_metrics.end(),
                       [&](const MetricItem& m) { return m.name == name; });
  }
  bool has_metric(const std::string& name) const {
    return has_distribution_metric(name) || (detection && detection->has_metric(name));
  }
  bool empty() const {
    return distribution_metrics.empty() && (!detection || detection->metrics.empty());
  }
};

struct Rule {
  std::string id;
  std::function<bool(const Fingerprint&, const RecommendOptions&)> applies;
  std::function<void(MetricPlan&, const std::string& id)> apply;
  std::string note;
  bool inferred = false;
};

namespace detail {

inline bool uses_s1(const Fingerprint& f) { return is_posterior(f.reference_granularity); }
inline bool uses_s2(const Fingerprint& f) { return has_modes(f.reference_granularity); }

inline void add_dist(MetricPlan& p, const std::string& id, const std::string& name,
                     std::map<std::string, std::string> params = {}) {
  if (!p.has_distribution_metric(name)) p.distribution_metrics.push_back({name, id, std::move(params), {}});
}

inline DetectionPlan& det(MetricPlan& p) {
  if (!p.detection) p.detection.emplace();
  return *p.detection;
}

inline void add_det(MetricPlan& p, const std::string& id, const std::string& name,
                    std::set<std::string> flags = {}) {
  DetectionPlan& d = det(p);
  for (MetricItem& m : d.metrics)
    if (m.name == name) {
      m.flags.insert(flags.begin(), flags.end());
      return;
    }
  d.metrics.push_back({name, id, {}, std::move(flags)});
}

inline void add_unique(std::vector<std::string>& v, std::string_view s) {
  if (std::find(v.begin(), v.end(), s) == v.end()) v.emplace_back(s);
}

inline bool fp_exact(const Fingerprint& f) {
  return f.reference_granularity != Granularity::NonExhaustiveModes || f.resimulation;
}

}  // namespace detail

inline const std::vector<Rule>& rule_table() {
  using F = const Fingerprint&;
  using O = const RecommendOptions&;
  using P = MetricPlan&;
  using Id = const std::string&;
  static const std::vector<Rule> rules = {
      // Distribution-based metrics for posterior references.
      {"S1.cross_entropy", [](F f, O) { return detail::uses_s1(f) && f.prediction_density; },
       [](P p, Id id) { detail::add_dist(p, id, "cross_entropy"); },
       "Predicted density available and reference given as samples: cross entropy applies without "
       "hyperparameters."},
      {"S1.kl", [](F f, O o) { return detail::uses_s1(f) && f.natural_discretization && !o.high_dimensional; },
       [](P p, Id id) { detail::add_dist(p, id, "kl_discretized"); },
       "A natural discretization scale exists: discrete KL divergence on that grid."},
      {"S1.univariate", [](F f, O) { return detail::uses_s1(f) && f.univariate; },
       [](P p, Id id) {
         detail::add_dist(p, id, "ks");
         detail::add_dist(p, id, "wasserstein_1d");
       },
       "Univariate solution space: KS statistic and 1-D Wasserstein distance."},
      {"S1.multivariate", [](F f, O) { return detail::uses_s1(f) && !f.univariate; },
       [](P p, Id id) {
         detail::add_dist(p, id, "marginal_wasserstein", {{"aggregate", "mean"}});
         detail::add_dist(p, id, "mmd", {{"kernel", "rbf"}, {"bandwidth", "median_heuristic"}});
       },
       "Multivariate samples: Wasserstein over 1-D marginals (a surrogate, distinct distributions can "
       "share marginals) and MMD (kernel-bandwidth sensitive).",
       true},

      // Localization criterion.
      {"S2.localization.uncertainty", [](F f, O) { return detail::uses_s2(f) && f.accurate_uncertainty; },
       [](P p, Id) {
         auto& d = detail::det(p);
         detail::add_unique(d.localization, to_string(CriterionKind::MahalanobisDistance));
         detail::add_unique(d.localization, to_string(CriterionKind::PointInConfidenceEllipsoid));
       },
       "Accurate uncertainty required: use the predicted mode covariance, either as a continuous "
       "Mahalanobis distance or as a binary point-in-confidence-ellipsoid test."},
      {"S2.localization.distribution",
       [](F f, O) {
         return f.reference_granularity == Granularity::PosteriorLabeledModes && f.accurate_uncertainty;
       },
       [](P p, Id) {
         detail::add_unique(detail::det(p).localization, to_string(CriterionKind::DistributionDistance));
       },
       "Reference modes come with their own samples: a distribution distance per mode also compares "
       "shapes."},
      {"S2.localization.centroid", [](F f, O) { return detail::uses_s2(f) && !f.accurate_uncertainty; },
       [](P p, Id) { detail::add_unique(detail::det(p).localization, to_string(CriterionKind::CentroidDistance)); },
       "No uncertainty requirement: collapse modes to their centers and use a centroid distance."},

      // Assignment strategy.
      {"S2.assignment.score", [](F f, O) { return detail::uses_s2(f) && f.confidence_score; },
       [](P p, Id) {
         detail::add_unique(detail::det(p).assignment, to_string(AssignmentStrategy::GreedyByScore));
       },
       "Confidence scores available: greedy matching by score, so confident but wrong modes are "
       "penalized."},
      {"S2.assignment.no_score", [](F f, O) { return detail::uses_s2(f) && !f.confidence_score; },
       [](P p, Id) {
         auto& d = detail::det(p);
         detail::add_unique(d.assignment, to_string(AssignmentStrategy::GreedyByLocalization));
         detail::add_unique(d.assignment, to_string(AssignmentStrategy::Hungarian));
         detail::add_unique(d.assignment, to_string(AssignmentStrategy::Threshold));
       },
       "No confidence scores: greedy by localization is simple and matches closest modes first; "
       "Hungarian minimizes total distance but can be optimistic; a fixed threshold suits counting "
       "applications."},

      // Classification metrics.
      {"S2.metrics.recall", [](F f, O) { return detail::uses_s2(f); },
       [](P p, Id id) {
         detail::add_det(p, id, "recall");
         detail::add_det(p, id, "matched_mode_distance");
       },
       "Recall over reference modes, plus the localization error of matched modes aggregated per "
       "posterior before aggregating over the dataset."},
      {"S2.metrics.precision", [](F f, O) { return detail::uses_s2(f) && detail::fp_exact(f); },
       [](P p, Id id) {
         detail::add_det(p, id, "precision");
         detail::add_det(p, id, "f_beta");
       },
       "False positives are countable (complete reference or resimulation): Precision and F-beta."},
      {"S2.metrics.resimulation",
       [](F f, O) { return detail::uses_s2(f) && f.resimulation && f.reference_granularity == Granularity::NonExhaustiveModes; },
       [](P p, Id id) {
         detail::add_det(p, id, "resimulation_check");
         detail::add_det(p, id, "fppi");
       },
       "Incomplete reference but a forward model exists: unmatched modes are resimulated and only "
       "implausible ones count as FP."},
      {"S2.metrics.upper_bound", [](F f, O) { return detail::uses_s2(f) && !detail::fp_exact(f); },
       [](P p, Id id) {
         detail::add_det(p, id, "fppi", {flag::kUpperBound});
         p.excluded["precision"] = id;
         p.excluded["f_beta"] = id;
       },
       "Incomplete reference and no resimulation: FP counts are only upper bounds, so report Recall "
       "with the FPPI upper bound instead of Precision."},
      {"S2.metrics.ranking", [](F f, O) { return detail::uses_s2(f) && f.confidence_score; },
       [](P p, Id id) {
         detail::add_det(p, id, "ap");
         detail::add_det(p, id, "froc");
         detail::add_det(p, id, "fppi");
       },
       "Confidence scores available: multi-threshold metrics (AP, FROC/FPPI) avoid fixing a score "
       "threshold."},
      {"S2.metrics.ranking_bound",
       [](F f, O) { return detail::uses_s2(f) && f.confidence_score && !detail::fp_exact(f); },
       [](P p, Id id) {
         detail::add_det(p, id, "ap", {flag::kUpperBound});
         detail::add_det(p, id, "froc", {flag::kUpperBound});
       },
       "AP and FROC inherit the FP upper bound of an incomplete reference.", true},
      {"S2.metrics.calibration",
       [](F f, O) { return detail::uses_s2(f) && f.accurate_uncertainty && f.confidence_score; },
       [](P p, Id id) { detail::add_det(p, id, "calibration"); },
       "Accurate uncertainty required: check the calibration curve of the confidence scores."},
      {"S2.metrics.target", [](F f, O o) { return detail::uses_s2(f) && o.operating_point_sweep; },
       [](P p, Id id) { detail::add_det(p, id, "metric_at_target"); },
       "An operating-point sweep is declared: report Metric@(TargetMetric = TargetValue)."},
  };
  return rules;
}

inline MetricPlan recommend(const Fingerprint& fp, const RecommendOptions& options = {}) {
  MetricPlan plan;
  for (const Rule& r : rule_table()) {
    if (!r.applies(fp, options)) continue;
    r.apply(plan, r.id);
    plan.notes.push_back({r.id, r.note, r.inferred});
  }
  if (fp.accurate_uncertainty && !fp.confidence_score && has_modes(fp.reference_granularity))
    plan.notes.push_back({"S2.metrics.calibration", "Calibration would need confidence scores; none available.", false});
  return plan;
}

/// Names recommended and excluded at the same time.
inline std::vector<std::string> plan_conflicts(const MetricPlan& plan) {
  std::vector<std::string> out;
  for (const auto& [name, rule] : plan.excluded)
    if (plan.has_metric(name)) out.push_back(name);
  return out;
}

inline nlohmann::json metric_item_to_json(const MetricItem& m) {
  nlohmann::json j{{"name", m.name}, {"rule", m.rule}};
  if (!m.params.empty()) j["params"] = m.params;
  if (!m.flags.empty()) j["flags"] = m.flags;
  return j;
}

inline nlohmann::json plan_to_json(const MetricPlan& plan) {
  nlohmann::json j;
  j["distribution_metrics"] = nlohmann::json::array();
  for (const auto& m : plan.distribution_metrics) j["distribution_metrics"].push_back(metric_item_to_json(m));
  if (plan.detection) {
    nlohmann::json d;
    d["localization"] = plan.detection->localization;
    d["assignment"] = plan.detection->assignment;
    d["metrics"] = nlohmann::json::array();
    for (const auto& m : plan.detection->metrics) d["metrics"].push_back(metric_item_to_json(m));
    j["detection"] = d;
  } else {
    j["detection"] = nullptr;
  }
  j["excluded"] = plan.excluded;
  j["notes"] = nlohmann::json::array();
  for (const auto& n : plan.notes) {
    nlohmann::json note{{"rule", n.rule}, {"text", n.text}};
    if (n.inferred) note["inferred_from_text"] = true;
    j["notes"].push_back(note);
  }
  return j;
}

inline std::string plan_to_text(const MetricPlan& plan) {
  std::ostringstream out;
  auto names = [](const std::vector<MetricItem>& items) {
    std::string s;
    for (const auto& m : items) {
      if (!s.empty()) s += ", ";
      s += m.name;
      if (!m.flags.empty()) {
        s += " (";
        bool first = true;
        for (const auto& f : m.flags) {
          s += (first ? "" : ", ") + f;
          first = false;
        }
        s += ")";
      }
    }
    return s.empty() ? std::string("-") : s;
  };
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
    return s;
  };
  out << "distribution metrics: " << names(plan.distribution_metrics) << "\n";
  if (plan.detection) {
    out << "localization: " << join(plan.detection->localization) << "\n";
    out << "assignment: " << join(plan.detection->assignment) << "\n";
    out << "classification metrics: " << names(plan.detection->metrics) << "\n";
  }
  for (const auto& [name, rule] : plan.excluded) out << "not recommended: " << name << " [" << rule << "]\n";
  out << "rationale:\n";
  for (const auto& n : plan.notes)
    out << "  [" << n.rule << "] " << n.text << (n.inferred ? " (inferred from text)" : "") << "\n";
  return out.str();
}

}  // namespace postval
