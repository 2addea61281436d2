// Prints the conventional single-point error next to the mode-centric metrics
// for both synthetic predictors of the complex-root toy problem.
#include <cstdio>
#include <cstdlib>

#include "postval/postval.hpp"

int main(int argc, char** argv) {
  postval::ToyBenchConfig cfg;
  cfg.num_cases = argc > 1 ? static_cast<std::size_t>(std::strtoul(argv[1], nullptr, 10)) : 500;
  const auto result = postval::run_toy_benchmark(cfg);

  std::printf("%-11s %10s %10s %10s %8s %8s\n", "predictor", "conv_err", "conv_n23", "recall", "prec", "ap");
  for (const auto* run : {&result.multimodal, &result.mean_point}) {
    const auto& r = run->evaluation.report;
    std::printf("%-11s %10.4f %10.4f %10.4f %8.4f %8.4f\n", std::string(postval::to_string(run->predictor)).c_str(),
                r.at("conventional_abs_error").value, r.at("conventional_abs_error_n23").value, r.at("recall").value,
                r.at("precision").value, r.at("ap").value);
  }
}
