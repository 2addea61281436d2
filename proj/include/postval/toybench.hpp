#pragma once
// Toy inverse problem w = z^n over the complex plane: ground truth by root
// enumeration, synthetic posteriors, and an end-to-end benchmark run.

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "postval/config.hpp"
#include "postval/core.hpp"
#include "postval/dataset.hpp"
#include "postval/pipeline.hpp"
#include "postval/random.hpp"

namespace postval {

using Complex = std::complex<double>;

struct ToyInstance {
  int n = 1;
  Complex w;
  Complex z;  // the root the instance was generated from
  std::vector<Complex> roots;
  double R = 0.0;
  double Phi = 0.0;
};

/// z^n by repeated multiplication.
inline Complex forward_power(Complex z, int n) {
  Complex out(1.0, 0.0);
  for (int k = 0; k < n; ++k) out *= z;
  return out;
}

/// The n distinct roots R^(1/n) e^{i (Phi + 2 pi k) / n}, k = 0..n-1.
inline std::vector<Complex> enumerate_roots(int n, Complex w) {
  if (n < 1) throw InvalidArgument("root order must be at least 1");
  if (w == Complex(0.0, 0.0)) throw InvalidArgument("w must be nonzero");
  const double r = std::pow(std::abs(w), 1.0 / n);
  const double phi = std::arg(w);
  std::vector<Complex> roots;
  for (int k = 0; k < n; ++k) roots.push_back(std::polar(r, (phi + 2.0 * std::numbers::pi * k) / n));
  if (n == 1) roots[0] = w;
  return roots;
}

inline constexpr double kAnnulusInner = 0.8;
inline constexpr double kAnnulusOuter = 1.2;

/// n uniform on {1,2,3}; z area-uniform on the annulus 0.8 <= |z| <= 1.2.
/// Instance i draws from its own stream derived from (seed, i).
inline ToyInstance sample_instance(std::uint64_t seed, std::size_t index) {
  Rng rng(derive_seed(seed, index, 0));
  std::uniform_int_distribution<int> order(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ToyInstance inst;
  inst.n = order(rng);
  const double r2_lo = kAnnulusInner * kAnnulusInner, r2_hi = kAnnulusOuter * kAnnulusOuter;
  const double radius = std::sqrt(r2_lo + unit(rng) * (r2_hi - r2_lo));
  const double theta = 2.0 * std::numbers::pi * unit(rng);
  inst.z = std::polar(radius, theta);
  inst.w = forward_power(inst.z, inst.n);
  inst.R = std::abs(inst.w);
  inst.Phi = std::arg(inst.w);
  inst.roots = enumerate_roots(inst.n, inst.w);
  return inst;
}

inline std::vector<ToyInstance> sample_instances(std::size_t count, std::uint64_t seed) {
  if (count < 1) throw InvalidArgument("need at least one instance");
  std::vector<ToyInstance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_instance(seed, i));
  return out;
}

enum class Predictor { Multimodal, MeanPoint };

inline std::string_view to_string(Predictor p) { return p == Predictor::Multimodal ? "multimodal" : "mean_point"; }

struct SyntheticPosteriorConfig {
  Predictor predictor = Predictor::Multimodal;
  std::size_t samples_per_posterior = 1024;
  double component_spread = 0.05;
  /// Component k gets weight proportional to (1 + skew)^-k.
  double mode_mass_skew = 0.0;
};

/// Stand-in for a trained model: a Gaussian mixture with one component per
/// root (multimodal) or a single Gaussian at the mean of the roots (mean_point).
inline PosteriorSamples synthesize_posterior(const ToyInstance& inst, const SyntheticPosteriorConfig& cfg,
                                             std::uint64_t rng_seed) {
  if (!(cfg.component_spread > 0.0)) throw InvalidArgument("component_spread must be positive");
  if (cfg.samples_per_posterior < 1) throw InvalidArgument("samples_per_posterior must be at least 1");
  if (!(cfg.mode_mass_skew >= 0.0)) throw InvalidArgument("mode_mass_skew must be nonnegative");
  Rng rng(rng_seed);
  std::normal_distribution<double> noise(0.0, cfg.component_spread);
  std::vector<Complex> centers;
  Vector weights;
  if (cfg.predictor == Predictor::Multimodal) {
    centers = inst.roots;
    for (std::size_t k = 0; k < centers.size(); ++k)
      weights.push_back(std::pow(1.0 + cfg.mode_mass_skew, -static_cast<double>(k)));
  } else {
    Complex mean(0.0, 0.0);
    for (Complex r : inst.roots) mean += r;
    centers = {mean / static_cast<double>(inst.roots.size())};
    weights = {1.0};
  }
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  Vector flat;
  flat.reserve(2 * cfg.samples_per_posterior);
  for (std::size_t i = 0; i < cfg.samples_per_posterior; ++i) {
    const Complex c = centers[centers.size() == 1 ? 0 : pick(rng)];
    flat.push_back(c.real() + noise(rng));
    flat.push_back(c.imag() + noise(rng));
  }
  return PosteriorSamples(2, std::move(flat));
}

/// Validation case for one instance: exhaustive reference (all roots), the
/// observation w and the exponent needed by the forward model.
inline ValidationCase make_toy_case(const ToyInstance& inst, std::size_t index, PosteriorSamples prediction) {
  ValidationCase c;
  c.id = "toy-" + std::to_string(index);
  c.prediction = std::move(prediction);
  c.reference.granularity = Granularity::ExhaustiveModes;
  for (Complex r : inst.roots) {
    Mode m;
    m.center = {r.real(), r.imag()};
    m.relative_mass = 1.0 / static_cast<double>(inst.n);
    c.reference.modes.push_back(std::move(m));
  }
  c.observation = Observation{{inst.w.real(), inst.w.imag()}, {{"n", static_cast<double>(inst.n)}}};
  return c;
}

inline Fingerprint toy_fingerprint() {
  Fingerprint f;
  f.reference_granularity = Granularity::ExhaustiveModes;
  f.resimulation = true;
  f.confidence_score = true;
  return f;
}

struct ToyBenchConfig {
  std::size_t num_cases = 2000;
  std::uint64_t seed = 0;
  SyntheticPosteriorConfig posterior;
  DbscanParams dbscan{0.2, 20};
  double threshold = 0.2;
  std::size_t bootstrap_resamples = 2;
  bool resimulation = false;
  ResimulationSpec resimulation_spec{0.05, true};
  std::optional<SweepSpec> sweep;
  AggregationSpec aggregation;
  double beta = 1.0;
};

/// Pipeline settings used for toy runs; also what an equivalent evaluate
/// config resolves to.
inline PipelineConfig toy_pipeline_config(const ToyBenchConfig& cfg) {
  PipelineConfig p;
  p.fingerprint = toy_fingerprint();
  p.clustering = cfg.dbscan;
  p.center_rule = CenterRule::Mean;
  p.bootstrap_resamples = cfg.bootstrap_resamples;
  p.criterion = LocalizationCriterion::centroid(cfg.threshold);
  p.strategy = AssignmentStrategy::GreedyByScore;
  RecommendOptions opts;
  opts.operating_point_sweep = cfg.sweep.has_value();
  p.metrics = plan_metric_names(recommend(p.fingerprint, opts));
  p.aggregation = cfg.aggregation;
  p.beta = cfg.beta;
  p.sweep = cfg.sweep;
  if (cfg.sweep) p.target = TargetSpec{};
  p.resimulation = cfg.resimulation;
  p.resimulation_spec = cfg.resimulation_spec;
  p.seed = cfg.seed;
  return p;
}

struct ToyRun {
  Predictor predictor = Predictor::Multimodal;
  std::vector<ToyInstance> instances;
  std::vector<ValidationCase> cases;
  EvaluationResult evaluation;
};

inline std::vector<ValidationCase> make_toy_cases(const std::vector<ToyInstance>& instances,
                                                  const SyntheticPosteriorConfig& posterior, std::uint64_t seed) {
  std::vector<ValidationCase> cases;
  cases.reserve(instances.size());
  const std::uint64_t stream = posterior.predictor == Predictor::Multimodal ? 2 : 3;
  for (std::size_t i = 0; i < instances.size(); ++i)
    cases.push_back(make_toy_case(instances[i], i, synthesize_posterior(instances[i], posterior, derive_seed(seed, i, stream))));
  return cases;
}

/// The single-point error of conventional validation: distance between the
/// center of the largest detected mode (or the sample mean when nothing was
/// detected) and the root the instance was generated from.
inline Vector conventional_errors(const ToyRun& run) {
  Vector err;
  for (std::size_t i = 0; i < run.cases.size(); ++i) {
    const ModeSet& modes = run.evaluation.cases[i].modes;
    Vector point(2, 0.0);
    if (!modes.empty()) {
      point = modes[0].center;
    } else {
      const PosteriorSamples& s = run.cases[i].prediction;
      for (std::size_t k = 0; k < s.size(); ++k)
        for (std::size_t a = 0; a < 2; ++a) point[a] += s.at(k, a) / static_cast<double>(s.size());
    }
    err.push_back(std::abs(Complex(point[0], point[1]) - run.instances[i].z));
  }
  return err;
}

inline ToyRun run_toy_predictor(const ToyBenchConfig& cfg, Predictor predictor) {
  ToyRun run;
  run.predictor = predictor;
  run.instances = sample_instances(cfg.num_cases, cfg.seed);
  SyntheticPosteriorConfig posterior = cfg.posterior;
  posterior.predictor = predictor;
  run.cases = make_toy_cases(run.instances, posterior, cfg.seed);
  PipelineConfig pc = toy_pipeline_config(cfg);
  pc.config_hash = config_hash(pc);
  run.evaluation = evaluate_dataset(run.cases, pc);

  const Vector err = conventional_errors(run);
  Vector all, ambiguous;
  for (std::size_t i = 0; i < err.size(); ++i) {
    all.push_back(err[i]);
    if (run.instances[i].n >= 2) ambiguous.push_back(err[i]);
  }
  auto& scalars = run.evaluation.report.scalars;
  scalars["conventional_abs_error"].value = mean(all);
  if (!ambiguous.empty())
    scalars["conventional_abs_error_n23"].value = mean(ambiguous);
  else
    scalars["conventional_abs_error_n23"].flags.insert(flag::kUndefined);
  return run;
}

struct ToyBenchResult {
  ToyRun multimodal;
  ToyRun mean_point;
};

inline ToyBenchResult run_toy_benchmark(const ToyBenchConfig& cfg) {
  return {run_toy_predictor(cfg, Predictor::Multimodal), run_toy_predictor(cfg, Predictor::MeanPoint)};
}

}  // namespace postval
