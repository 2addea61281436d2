#pragma once
// Run configuration documents and their mapping onto pipeline settings.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "postval/dataset.hpp"
#include "postval/pipeline.hpp"
#include "postval/recommender.hpp"

namespace postval {

struct RunConfig {
  std::string dataset;  // resolved path
  std::string output = "out";
  PipelineConfig pipeline;
  /// Informational notes produced while resolving "auto" metrics.
  std::vector<std::string> notes;
};

namespace detail {

inline void check_keys(const Json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ParseError("config field '" + where + "': expected an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ParseError("config field '" + where + "': unknown key '" + key + "'");
}

template <typename T>
T get_field(const Json& j, const std::string& key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError("config field '" + where + "." + key + "': wrong type");
  }
}

inline std::string resolve_path(const std::string& path, const std::string& base_dir) {
  std::filesystem::path p(path);
  if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
  return p.lexically_normal().string();
}

inline Json read_json_file(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + what + " '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(what + " '" + path + "' is not valid JSON: " + e.what());
  }
}

inline ClusteringParams parse_mode_detection(const Json& j, PipelineConfig& p) {
  check_keys(j, "mode_detection",
             {"algorithm", "eps", "min_samples", "alpha", "bootstrap_draws", "center", "bootstrap_resamples"});
  const std::string algo = get_field<std::string>(j, "algorithm", "mode_detection", "dbscan");
  const std::string center = get_field<std::string>(j, "center", "mode_detection", "auto");
  if (center == "mean")
    p.center_rule = CenterRule::Mean;
  else if (center == "median")
    p.center_rule = CenterRule::Median;
  else if (center != "auto")
    throw ParseError("config field 'mode_detection.center': invalid value '" + center + "'");
  p.bootstrap_resamples = get_field<std::size_t>(j, "bootstrap_resamples", "mode_detection", 2);
  if (algo == "dbscan") {
    DbscanParams d;
    d.eps = get_field<double>(j, "eps", "mode_detection", d.eps);
    d.min_samples = get_field<std::size_t>(j, "min_samples", "mode_detection", d.min_samples);
    detail::check_dbscan_params(d);
    return d;
  }
  if (algo == "unidip") {
    UnidipParams u;
    u.alpha = get_field<double>(j, "alpha", "mode_detection", u.alpha);
    u.bootstrap_draws = get_field<std::size_t>(j, "bootstrap_draws", "mode_detection", u.bootstrap_draws);
    u.seed = p.seed;
    return u;
  }
  throw ParseError("config field 'mode_detection.algorithm': invalid value '" + algo + "'");
}

inline LocalizationCriterion parse_localization(const Json& j) {
  check_keys(j, "localization",
             {"criterion", "threshold", "p", "metric", "periodic", "dimensions", "level", "distribution_metric"});
  LocalizationCriterion c;
  const std::string kind = get_field<std::string>(j, "criterion", "localization", "centroid_distance");
  bool found = false;
  for (auto k : {CriterionKind::CentroidDistance, CriterionKind::MahalanobisDistance,
                 CriterionKind::PointInConfidenceEllipsoid, CriterionKind::DistributionDistance})
    if (to_string(k) == kind) {
      c.kind = k;
      found = true;
    }
  if (!found) throw ParseError("config field 'localization.criterion': invalid value '" + kind + "'");
  c.threshold = get_field<double>(j, "threshold", "localization", c.threshold);
  c.level = get_field<double>(j, "level", "localization", c.level);
  if (j.contains("p")) {
    if (j.at("p").is_string() && j.at("p").get<std::string>() == "inf")
      c.distance.p = std::numeric_limits<double>::infinity();
    else
      c.distance.p = get_field<double>(j, "p", "localization", 2.0);
  }
  const std::string metric = get_field<std::string>(j, "metric", "localization", "lp");
  if (metric == "lp")
    c.distance.metric = CentroidMetric::Lp;
  else if (metric == "cosine")
    c.distance.metric = CentroidMetric::Cosine;
  else
    throw ParseError("config field 'localization.metric': invalid value '" + metric + "'");
  c.distance.dimensions = get_field<std::vector<std::size_t>>(j, "dimensions", "localization", {});
  if (j.contains("periodic")) {
    for (const auto& pd : j.at("periodic")) {
      check_keys(pd, "localization.periodic", {"index", "period"});
      c.distance.periodic.push_back({get_field<std::size_t>(pd, "index", "localization.periodic", 0),
                                     get_field<double>(pd, "period", "localization.periodic", 360.0)});
    }
  }
  const std::string dm = get_field<std::string>(j, "distribution_metric", "localization", "marginal_wasserstein");
  found = false;
  for (auto k : {DistributionDistanceKind::MarginalWasserstein, DistributionDistanceKind::Mmd,
                 DistributionDistanceKind::KolmogorovSmirnov, DistributionDistanceKind::Wasserstein1d})
    if (to_string(k) == dm) {
      c.dist_metric = k;
      found = true;
    }
  if (!found) throw ParseError("config field 'localization.distribution_metric': invalid value '" + dm + "'");
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("config field 'localization': ") + e.what());
  }
  return c;
}

inline Json criterion_to_json(const LocalizationCriterion& c) {
  Json j{{"criterion", std::string(to_string(c.kind))},
         {"threshold", c.threshold},
         {"level", c.level},
         {"metric", c.distance.metric == CentroidMetric::Lp ? "lp" : "cosine"},
         {"dimensions", c.distance.dimensions},
         {"distribution_metric", std::string(to_string(c.dist_metric))}};
  if (std::isinf(c.distance.p))
    j["p"] = "inf";
  else
    j["p"] = c.distance.p;
  j["periodic"] = Json::array();
  for (const PeriodicDim& pd : c.distance.periodic) j["periodic"].push_back({{"index", pd.index}, {"period", pd.period}});
  return j;
}

}  // namespace detail

/// Parses a sweep such as "min_samples=3..500" (ten log-spaced integers),
/// "eps=0.1..0.3:0.05" (fixed step) or "min_samples=5,10,20" (explicit list).
inline SweepSpec parse_sweep_spec(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ParseError("sweep '" + text + "': expected NAME=VALUES");
  SweepSpec s;
  s.parameter = text.substr(0, eq);
  const std::string body = text.substr(eq + 1);
  auto number = [&](const std::string& v) {
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ParseError("sweep '" + text + "': invalid number '" + v + "'");
    }
  };
  const auto range = body.find("..");
  if (range != std::string::npos) {
    const double lo = number(body.substr(0, range));
    std::string rest = body.substr(range + 2);
    const auto colon = rest.find(':');
    if (colon != std::string::npos) {
      const double hi = number(rest.substr(0, colon));
      const double step = number(rest.substr(colon + 1));
      if (!(step > 0.0) || hi < lo) throw ParseError("sweep '" + text + "': need lo <= hi and a positive step");
      for (std::size_t k = 0;; ++k) {
        const double v = lo + static_cast<double>(k) * step;
        if (v > hi + 1e-12 * std::max(1.0, std::abs(hi))) break;
        s.values.push_back(v);
      }
    } else {
      const double hi = number(rest);
      if (!(lo > 0.0) || hi < lo) throw ParseError("sweep '" + text + "': log range needs 0 < lo <= hi");
      constexpr int kPoints = 10;
      const bool integral = lo == std::floor(lo) && hi == std::floor(hi);
      for (int k = 0; k < kPoints; ++k) {
        double v = lo * std::pow(hi / lo, static_cast<double>(k) / (kPoints - 1));
        if (k == kPoints - 1) v = hi;
        if (integral) v = std::round(v);
        if (s.values.empty() || s.values.back() != v) s.values.push_back(v);
      }
    }
  } else {
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) s.values.push_back(number(item));
  }
  if (s.values.empty()) throw ParseError("sweep '" + text + "': no values");
  return s;
}

/// Resolves "auto" metrics through the recommender; metrics whose inputs the
/// config does not provide are dropped with a note.
inline std::vector<std::string> auto_metrics(const PipelineConfig& p, bool high_dimensional,
                                             std::vector<std::string>& notes) {
  RecommendOptions opts;
  opts.high_dimensional = high_dimensional;
  opts.operating_point_sweep = p.sweep.has_value();
  std::vector<std::string> out;
  for (const std::string& m : plan_metric_names(recommend(p.fingerprint, opts))) {
    if (m == "kl_discretized" && !p.discretization) {
      notes.push_back("kl_discretized recommended but no discretization grid configured; skipped");
      continue;
    }
    out.push_back(m);
  }
  return out;
}

inline RunConfig run_config_from_json(const Json& j, const std::string& base_dir = "") {
  detail::check_keys(j, "config",
                     {"dataset", "output", "seed", "fingerprint", "mode_detection", "localization", "assignment",
                      "metrics", "high_dimensional", "aggregation", "sweep", "target", "resimulation", "beta",
                      "calibration_bins", "discretization", "kernel"});
  RunConfig rc;
  PipelineConfig& p = rc.pipeline;
  if (!j.contains("dataset")) throw ParseError("config field 'dataset': missing");
  rc.dataset = detail::resolve_path(detail::get_field<std::string>(j, "dataset", "config", ""), base_dir);
  rc.output = detail::resolve_path(detail::get_field<std::string>(j, "output", "config", "out"), base_dir);
  p.seed = detail::get_field<std::uint64_t>(j, "seed", "config", 0);

  if (!j.contains("fingerprint")) throw ParseError("config field 'fingerprint': missing");
  const Json& fpj = j.at("fingerprint");
  p.fingerprint = fpj.is_string()
                      ? fingerprint_from_json(detail::read_json_file(
                            detail::resolve_path(fpj.get<std::string>(), base_dir), "fingerprint file"))
                      : fingerprint_from_json(fpj);

  p.clustering = detail::parse_mode_detection(j.value("mode_detection", Json::object()), p);
  p.criterion = detail::parse_localization(j.value("localization", Json::object()));
  const std::string strategy = detail::get_field<std::string>(
      j, "assignment", "config",
      std::string(to_string(p.fingerprint.confidence_score ? AssignmentStrategy::GreedyByScore
                                                           : AssignmentStrategy::GreedyByLocalization)));
  auto parsed = parse_assignment_strategy(strategy);
  if (!parsed) throw ParseError("config field 'assignment': invalid value '" + strategy + "'");
  p.strategy = *parsed;

  if (j.contains("aggregation")) {
    const Json& a = j.at("aggregation");
    detail::check_keys(a, "aggregation", {"within_case", "across_cases", "spread"});
    auto loc = [&](const char* key, Location fallback) {
      if (!a.contains(key)) return fallback;
      auto v = parse_location(detail::get_field<std::string>(a, key, "aggregation", ""));
      if (!v) throw ParseError(std::string("config field 'aggregation.") + key + "': invalid value");
      return *v;
    };
    p.aggregation.within_case = loc("within_case", Location::Mean);
    p.aggregation.across_cases = loc("across_cases", Location::Mean);
    if (a.contains("spread")) {
      auto v = parse_spread(detail::get_field<std::string>(a, "spread", "aggregation", ""));
      if (!v) throw ParseError("config field 'aggregation.spread': invalid value");
      p.aggregation.spread = *v;
    }
  }
  if (j.contains("sweep")) {
    const Json& s = j.at("sweep");
    if (s.is_string()) {
      p.sweep = parse_sweep_spec(s.get<std::string>());
    } else {
      detail::check_keys(s, "sweep", {"parameter", "values"});
      p.sweep = SweepSpec{detail::get_field<std::string>(s, "parameter", "sweep", ""),
                          detail::get_field<Vector>(s, "values", "sweep", {})};
      if (p.sweep->values.empty()) throw ParseError("config field 'sweep.values': empty");
    }
  }
  if (j.contains("target")) {
    const Json& t = j.at("target");
    detail::check_keys(t, "target", {"metric", "value", "report"});
    TargetSpec ts;
    ts.metric = detail::get_field<std::string>(t, "metric", "target", ts.metric);
    ts.value = detail::get_field<double>(t, "value", "target", ts.value);
    ts.report = detail::get_field<std::string>(t, "report", "target", ts.report);
    p.target = ts;
  } else if (p.sweep) {
    p.target = TargetSpec{};
  }
  if (j.contains("resimulation")) {
    const Json& r = j.at("resimulation");
    detail::check_keys(r, "resimulation", {"enabled", "model", "tolerance", "relative"});
    p.resimulation = detail::get_field<bool>(r, "enabled", "resimulation", false);
    p.forward_model = detail::get_field<std::string>(r, "model", "resimulation", p.forward_model);
    p.resimulation_spec.tolerance = detail::get_field<double>(r, "tolerance", "resimulation", 0.05);
    p.resimulation_spec.relative = detail::get_field<bool>(r, "relative", "resimulation", true);
  }
  p.beta = detail::get_field<double>(j, "beta", "config", 1.0);
  if (!(p.beta > 0.0)) throw ParseError("config field 'beta': must be positive");
  p.calibration_bins = detail::get_field<std::size_t>(j, "calibration_bins", "config", 10);
  if (p.calibration_bins < 1) throw ParseError("config field 'calibration_bins': must be at least 1");
  if (j.contains("discretization")) {
    const Json& d = j.at("discretization");
    detail::check_keys(d, "discretization", {"bins", "lower", "upper", "epsilon"});
    DiscretizationSpec ds;
    ds.bins = detail::get_field<std::vector<std::size_t>>(d, "bins", "discretization", {});
    ds.lower = detail::get_field<Vector>(d, "lower", "discretization", {});
    ds.upper = detail::get_field<Vector>(d, "upper", "discretization", {});
    ds.epsilon = detail::get_field<double>(d, "epsilon", "discretization", ds.epsilon);
    try {
      validate_discretization(ds, ds.bins.size());
    } catch (const InvalidArgument& e) {
      throw ParseError(std::string("config field 'discretization': ") + e.what());
    }
    p.discretization = ds;
  }
  if (j.contains("kernel")) {
    const Json& k = j.at("kernel");
    detail::check_keys(k, "kernel", {"bandwidth"});
    if (k.contains("bandwidth") && !(k.at("bandwidth").is_string() && k.at("bandwidth") == "median_heuristic")) {
      const double bw = detail::get_field<double>(k, "bandwidth", "kernel", 1.0);
      if (!(bw > 0.0)) throw ParseError("config field 'kernel.bandwidth': must be positive");
      p.kernel.bandwidth = bw;
    }
  }

  const bool high_dim = detail::get_field<bool>(j, "high_dimensional", "config", false);
  const Json metrics = j.value("metrics", Json("auto"));
  if (metrics.is_string() && metrics.get<std::string>() == "auto") {
    p.metrics = auto_metrics(p, high_dim, rc.notes);
  } else if (metrics.is_array()) {
    for (const auto& m : metrics) {
      if (!m.is_string()) throw ParseError("config field 'metrics': expected names");
      p.metrics.push_back(m.get<std::string>());
    }
  } else {
    throw ParseError("config field 'metrics': expected \"auto\" or a list of names");
  }
  if (p.metrics.empty()) throw ParseError("config field 'metrics': no metric left after resolution");
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  const Json j = detail::read_json_file(path, "config file");
  RunConfig rc = run_config_from_json(j, std::filesystem::path(path).parent_path().string());
  if (!std::filesystem::exists(rc.dataset)) throw ParseError("config field 'dataset': no such file '" + rc.dataset + "'");
  return rc;
}

/// Explicit form of the pipeline settings; metrics are always listed by name.
inline Json pipeline_to_json(const PipelineConfig& p) {
  Json j;
  j["seed"] = p.seed;
  j["fingerprint"] = fingerprint_to_json(p.fingerprint);
  Json md;
  if (const auto* d = std::get_if<DbscanParams>(&p.clustering)) {
    md = {{"algorithm", "dbscan"}, {"eps", d->eps}, {"min_samples", d->min_samples}};
  } else {
    const auto& u = std::get<UnidipParams>(p.clustering);
    md = {{"algorithm", "unidip"}, {"alpha", u.alpha}, {"bootstrap_draws", u.bootstrap_draws}};
  }
  md["center"] = !p.center_rule ? "auto" : (*p.center_rule == CenterRule::Mean ? "mean" : "median");
  md["bootstrap_resamples"] = p.bootstrap_resamples;
  j["mode_detection"] = md;
  j["localization"] = detail::criterion_to_json(p.criterion);
  j["assignment"] = std::string(to_string(p.strategy));
  j["metrics"] = p.metrics;
  j["aggregation"] = {{"within_case", std::string(to_string(p.aggregation.within_case))},
                      {"across_cases", std::string(to_string(p.aggregation.across_cases))},
                      {"spread", std::string(to_string(p.aggregation.spread))}};
  if (p.sweep) j["sweep"] = {{"parameter", p.sweep->parameter}, {"values", p.sweep->values}};
  if (p.target) j["target"] = {{"metric", p.target->metric}, {"value", p.target->value}, {"report", p.target->report}};
  j["resimulation"] = {{"enabled", p.resimulation},
                       {"model", p.forward_model},
                       {"tolerance", p.resimulation_spec.tolerance},
                       {"relative", p.resimulation_spec.relative}};
  j["beta"] = p.beta;
  j["calibration_bins"] = p.calibration_bins;
  if (p.discretization)
    j["discretization"] = {{"bins", p.discretization->bins},
                           {"lower", p.discretization->lower},
                           {"upper", p.discretization->upper},
                           {"epsilon", p.discretization->epsilon}};
  if (p.kernel.bandwidth) j["kernel"] = {{"bandwidth", *p.kernel.bandwidth}};
  return j;
}

/// Hash of the explicit pipeline settings, so equivalent configs agree.
inline std::string config_hash(const PipelineConfig& p) { return fnv1a_hex(pipeline_to_json(p).dump()); }

}  // namespace postval
