#pragma once
// Command-line entry points: recommend, evaluate, toybench.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "postval/config.hpp"
#include "postval/dataset.hpp"
#include "postval/pipeline.hpp"
#include "postval/recommender.hpp"
#include "postval/report.hpp"
#include "postval/toybench.hpp"

namespace postval::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitInput = 2;

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

/// Writes report.json plus one CSV per curve, each name prefixed by `stem`.
inline void write_report_files(const std::filesystem::path& dir, const std::string& stem, const MetricReport& r) {
  std::filesystem::create_directories(dir);
  write_text(dir / (stem + "report.json"), report_to_string(r));
  for (const auto& [name, points] : r.curves) {
    std::ofstream out(dir / (stem + name + ".csv"), std::ios::binary);
    write_curve_csv(out, points);
  }
  if (!r.calibration.empty()) {
    std::ofstream out(dir / (stem + "calibration.csv"), std::ios::binary);
    write_calibration_csv(out, r.calibration);
  }
}

inline std::string summarize(const MetricReport& r) {
  std::string s;
  for (const auto& [name, sc] : r.scalars) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", sc.value);
    s += "  " + name + " = " + (std::isnan(sc.value) ? std::string("undefined") : std::string(buf));
    for (const auto& f : sc.flags) s += " [" + f + "]";
    s += "\n";
  }
  return s;
}

inline bool parse_on_off(const std::string& v) {
  if (v == "on") return true;
  if (v == "off") return false;
  throw ParseError("--resimulation expects 'on' or 'off', got '" + v + "'");
}

}  // namespace detail

struct RecommendArgs {
  std::string config;
  std::string out;
  bool all = false;
  bool high_dimensional = false;
  bool sweep = false;
};

inline int cmd_recommend(const RecommendArgs& a, std::ostream& out) {
  RecommendOptions opts{a.high_dimensional, a.sweep};
  if (a.all) {
    nlohmann::json batch = nlohmann::json::array();
    std::size_t nonempty = 0;
    for (const Fingerprint& fp : all_fingerprints()) {
      const MetricPlan plan = recommend(fp, opts);
      nonempty += !plan.empty();
      batch.push_back({{"fingerprint", fingerprint_to_json(fp)}, {"plan", plan_to_json(plan)}});
    }
    if (!a.out.empty()) {
      std::filesystem::create_directories(a.out);
      detail::write_text(std::filesystem::path(a.out) / "plans.json", batch.dump(2) + "\n");
    } else {
      out << batch.dump(2) << "\n";
    }
    out << batch.size() << " plans, " << nonempty << " nonempty\n";
    return kExitOk;
  }
  if (a.config.empty()) throw ParseError("recommend needs --config FINGERPRINT or --all");
  const Fingerprint fp = fingerprint_from_json(postval::detail::read_json_file(a.config, "fingerprint file"));
  const MetricPlan plan = recommend(fp, opts);
  out << plan_to_text(plan);
  const std::string doc = plan_to_json(plan).dump(2) + "\n";
  if (!a.out.empty()) {
    std::filesystem::create_directories(a.out);
    detail::write_text(std::filesystem::path(a.out) / "plan.json", doc);
  } else {
    out << doc;
  }
  return kExitOk;
}

struct EvaluateArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

inline int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  RunConfig rc = load_run_config(a.config);
  if (a.seed) {
    rc.pipeline.seed = *a.seed;
    if (auto* u = std::get_if<UnidipParams>(&rc.pipeline.clustering)) u->seed = *a.seed;
  }
  if (!a.out.empty()) rc.output = a.out;
  rc.pipeline.config_hash = config_hash(rc.pipeline);
  const std::vector<ValidationCase> cases = load_dataset(rc.dataset);
  EvaluationResult res = evaluate_dataset(cases, rc.pipeline);
  for (const std::string& n : rc.notes) res.report.diagnostics.push_back({"", n});
  detail::write_report_files(rc.output, "", res.report);
  out << "evaluated " << cases.size() << " cases\n" << detail::summarize(res.report);
  out << "report written to " << (std::filesystem::path(rc.output) / "report.json").string() << "\n";
  return kExitOk;
}

struct ToybenchArgs {
  std::size_t cases = 2000;
  std::uint64_t seed = 0;
  std::string out = "toybench_out";
  std::string sweep;
  std::string resimulation = "off";
  double spread = 0.05;
  double threshold = 0.2;
  std::size_t samples = 1024;
  bool write_cases = true;
};

inline int cmd_toybench(const ToybenchArgs& a, std::ostream& out) {
  ToyBenchConfig cfg;
  cfg.num_cases = a.cases;
  cfg.seed = a.seed;
  cfg.posterior.component_spread = a.spread;
  cfg.posterior.samples_per_posterior = a.samples;
  cfg.threshold = a.threshold;
  cfg.resimulation = detail::parse_on_off(a.resimulation);
  if (!a.sweep.empty()) cfg.sweep = parse_sweep_spec(a.sweep);
  const std::filesystem::path dir(a.out);
  std::filesystem::create_directories(dir);
  for (Predictor p : {Predictor::Multimodal, Predictor::MeanPoint}) {
    const ToyRun run = run_toy_predictor(cfg, p);
    const std::string stem = std::string(to_string(p)) + "_";
    if (a.write_cases) {
      save_dataset((dir / (stem + "cases.jsonl")).string(), run.cases);
      nlohmann::json conf = pipeline_to_json(toy_pipeline_config(cfg));
      conf["dataset"] = stem + "cases.jsonl";
      conf["output"] = stem + "evaluate";
      detail::write_text(dir / (stem + "config.json"), conf.dump(2) + "\n");
    }
    detail::write_report_files(dir, stem, run.evaluation.report);
    out << to_string(p) << " (" << run.cases.size() << " cases)\n" << detail::summarize(run.evaluation.report);
  }
  out << "artifacts written to " << dir.string() << "\n";
  return kExitOk;
}

/// Parses arguments and dispatches; returns the process exit code.
inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Mode-centric validation of posterior-based inverse-problem solvers", "postval"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  RecommendArgs rec;
  auto* recommend_cmd = app.add_subcommand("recommend", "Recommend metrics for a problem fingerprint");
  recommend_cmd->add_option("--config", rec.config, "Fingerprint file (JSON)");
  recommend_cmd->add_option("--out", rec.out, "Directory for plan.json / plans.json");
  recommend_cmd->add_flag("--all", rec.all, "Emit plans for all 256 fingerprints");
  recommend_cmd->add_flag("--high-dimensional", rec.high_dimensional, "Solution space too large for histograms");
  recommend_cmd->add_flag("--sweep", rec.sweep, "An operating-point sweep is planned");

  EvaluateArgs ev;
  std::uint64_t ev_seed = 0;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate a case file as described by a run config");
  evaluate_cmd->add_option("--config", ev.config, "Run config (JSON)")->required();
  auto* seed_opt = evaluate_cmd->add_option("--seed", ev_seed, "Override the config seed");
  evaluate_cmd->add_option("--out", ev.out, "Output directory (overrides the config)");

  ToybenchArgs tb;
  auto* toy_cmd = app.add_subcommand("toybench", "Run the complex-root toy benchmark");
  toy_cmd->add_option("--cases", tb.cases, "Number of cases")->check(CLI::PositiveNumber);
  toy_cmd->add_option("--seed", tb.seed, "Dataset seed");
  toy_cmd->add_option("--out", tb.out, "Output directory");
  toy_cmd->add_option("--sweep", tb.sweep, "Detection sweep, e.g. min_samples=3..500");
  toy_cmd->add_option("--resimulation", tb.resimulation, "Resolve FPs by resimulation: on or off");
  toy_cmd->add_option("--spread", tb.spread, "Per-axis spread of synthetic posterior components");
  toy_cmd->add_option("--threshold", tb.threshold, "Centroid distance threshold for a match");
  toy_cmd->add_option("--samples", tb.samples, "Samples per posterior");
  bool no_cases = false;
  toy_cmd->add_flag("--no-case-files", no_cases, "Skip writing case files and configs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*recommend_cmd) return cmd_recommend(rec, out);
    if (*evaluate_cmd) {
      if (*seed_opt) ev.seed = ev_seed;
      return cmd_evaluate(ev, out);
    }
    if (*toy_cmd) {
      tb.write_cases = !no_cases;
      return cmd_toybench(tb, out);
    }
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ValidationError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ConfigError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}

}  // namespace postval::cli
