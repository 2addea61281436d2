#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "postval/dataset.hpp"
#include "postval/toybench.hpp"

using namespace postval;

namespace {

const char* kMinimalCase =
    R"({"id":"c1","prediction":{"samples":[[0,0],[0,1],[1,0],[1,1]]},)"
    R"("reference":{"granularity":"modes_exhaustive","modes":[{"center":[0.5,0.5]}]}})";

std::vector<ValidationCase> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_dataset(in);
}

std::string temp_file(const std::string& name, const std::string& body) {
  auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << body;
  return path.string();
}

}  // namespace

TEST(LoadDataset, MinimalFile) {
  const auto path = temp_file("postval_minimal.jsonl", std::string(kMinimalCase) + "\n");
  const auto cases = load_dataset(path);
  ASSERT_EQ(cases.size(), 1u);
  EXPECT_EQ(cases[0].id, "c1");
  EXPECT_EQ(cases[0].dim(), 2u);
  EXPECT_EQ(cases[0].prediction.size(), 4u);
  EXPECT_EQ(cases[0].reference.granularity, Granularity::ExhaustiveModes);
  ASSERT_EQ(cases[0].reference.modes.size(), 1u);
  EXPECT_DOUBLE_EQ(cases[0].reference.modes[0].relative_mass, 1.0);
}

TEST(LoadDataset, LogDensityLengthMismatchNamesCase) {
  const std::string rec =
      R"({"id":"bad-density","prediction":{"samples":[[0.0]],"log_density":[-1,-2,-3]},)"
      R"("reference":{"granularity":"posterior_unlabeled","modes":[],"samples":[[0.0],[1.0]]}})";
  try {
    parse(rec);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("bad-density"), std::string::npos);
  }
}

TEST(LoadDataset, SchemaViolationNamesCaseAndField) {
  const std::string rec =
      R"({"id":"c7","prediction":{"samples":[[0.0]]},"reference":{"granularity":"sometimes","modes":[]}})";
  try {
    parse(rec);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("c7"), std::string::npos);
    EXPECT_NE(msg.find("reference.granularity"), std::string::npos);
  }
}

TEST(LoadDataset, DuplicateIdRejected) {
  const std::string text = std::string(kMinimalCase) + "\n" + kMinimalCase + "\n";
  EXPECT_THROW(parse(text), ValidationError);
}

TEST(LoadDataset, ToyCasesRoundTrip) {
  ToyBenchConfig cfg;
  cfg.num_cases = 12;
  cfg.posterior.samples_per_posterior = 64;
  const auto inst = sample_instances(cfg.num_cases, 5);
  const auto cases = make_toy_cases(inst, cfg.posterior, 5);
  std::ostringstream out;
  write_dataset(out, cases);
  const auto back = parse(out.str());
  ASSERT_EQ(back.size(), cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) EXPECT_EQ(back[i], cases[i]) << "case " << i;
}

TEST(LoadDataset, RepeatedLoadsAreIdentical) {
  const auto path = temp_file("postval_repeat.jsonl", std::string(kMinimalCase) + "\n");
  EXPECT_EQ(load_dataset(path), load_dataset(path));
}

TEST(LoadDataset, MissingFileIsParseError) { EXPECT_THROW(load_dataset("/nonexistent/cases.jsonl"), ParseError); }

TEST(LoadDataset, RandomInvariantViolationsAlwaysError) {
  // Each mutation breaks one type invariant or schema rule of an otherwise valid record.
  const std::vector<std::string> mutations = {
      R"({"prediction":{"samples":[[0,0]]},"reference":{"granularity":"modes_exhaustive","modes":[{"center":[0,0]}]}})",
      R"({"id":"x","prediction":{"samples":[]},"reference":{"granularity":"modes_exhaustive","modes":[{"center":[0,0]}]}})",
      R"({"id":"x","prediction":{"samples":[[0,0],[1]]},"reference":{"granularity":"modes_exhaustive","modes":[{"center":[0,0]}]}})",
      R"({"id":"x","prediction":{"samples":[[0,0]]},"reference":{"granularity":"modes_exhaustive","modes":[]}})",
      R"({"id":"x","prediction":{"samples":[[0,0]]},"reference":{"granularity":"modes_exhaustive","modes":[{"center":[0]}]}})",
      R"({"id":"x","prediction":{"samples":[[0,0]],"weights":[0.5]},"reference":{"granularity":"modes_exhaustive","modes":[{"center":[0,0]}]}})",
      R"({"id":"x","prediction":{"samples":[[0,0],[1,1]],"weights":[0.5,0.6]},"reference":{"granularity":"modes_exhaustive","modes":[{"center":[0,0]}]}})",
      R"({"id":"x","prediction":{"samples":[[0,0]]},"reference":{"granularity":"modes_exhaustive","modes":[{"center":[0,0],"relative_mass":1.5}]}})",
      R"({"id":"x","prediction":{"samples":[[0,0]]},"reference":{"granularity":"modes_exhaustive","modes":[{"center":[0,0],"covariance":[[1,0.5],[0,1]]}]}})",
      R"({"id":"x","prediction":{"samples":[[0,0]]},"reference":{"granularity":"modes_exhaustive","modes":[{"center":[0,0],"covariance":[[1,0],[0,-1]]}]}})",
      R"({"id":"x","prediction":{"samples":[[0,0]]},"reference":{"granularity":"posterior_unlabeled","modes":[]}})",
      R"({"id":"x","prediction":{"samples":[[0,0]]},"reference":{"granularity":"modes_exhaustive","modes":[{"center":[0,0],"confidence":2}]}})",
      R"({"id":"x","prediction":{"samples":[["a",0]]},"reference":{"granularity":"modes_exhaustive","modes":[{"center":[0,0]}]}})",
      R"({"id":"x","prediction":{"samples":[[0,0]]},"reference":{"granularity":"modes_exhaustive","modes":[{"center":[0,0]}]},"dims":{"periodic":[{"index":5,"period":360}]}})",
      R"({"id":"x","prediction":{"samples":[[0,0]]},"reference":{"granularity":"modes_exhaustive","modes":[{"center":[0,0]}]},"dims":{"periodic":[{"index":0,"period":0}]}})",
      R"({"id":"x","prediction":{"samples":[[0,0]]},"reference":{"granularity":"posterior_labeled","modes":[{"center":[0,0]}],"samples":[[0,0]],"sample_labels":[3]}})",
      R"(not json at all)",
  };
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> pick(0, mutations.size() - 1);
  for (int trial = 0; trial < 200; ++trial) {
    // Bury the broken record among valid ones at a random position.
    std::vector<std::string> lines;
    const std::size_t bad = pick(rng), pos = rng() % 4;
    for (std::size_t k = 0; k < 4; ++k) {
      std::string ok = kMinimalCase;
      ok.replace(ok.find("c1"), 2, "ok" + std::to_string(k));
      lines.push_back(k == pos ? mutations[bad] : ok);
    }
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    EXPECT_THROW(parse(text), Error) << "mutation " << bad;
  }
}

TEST(Mode, TinyNegativeEigenvalueClamped) {
  Mode m;
  m.center = {0.0, 0.0};
  m.relative_mass = 1.0;
  m.covariance = Vector{1.0, 1.0, 1.0, 1.0 - 5e-10};
  normalize_mode(m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.covariance_matrix());
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-15);
}

TEST(PosteriorSamples, RejectsBadWeights) {
  EXPECT_THROW(PosteriorSamples(1, {0.0, 1.0}, Vector{0.5, 0.4}), ValidationError);
  EXPECT_THROW(PosteriorSamples(1, {0.0, 1.0}, Vector{1.0, 0.0}), ValidationError);
  EXPECT_NO_THROW(PosteriorSamples(1, {0.0, 1.0}, Vector{0.25, 0.75}));
}

TEST(CaseConsistency, UnivariateClaimOnBivariateCase) {
  auto c = parse(kMinimalCase)[0];
  Fingerprint fp;
  fp.univariate = true;
  const auto d = check_case_consistency(c, fp);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].property, "P6");
  EXPECT_NE(d[0].message.find("univariate claimed but d=2"), std::string::npos);
}

TEST(CaseConsistency, ConsistentCaseHasNoDiagnostics) {
  auto c = parse(kMinimalCase)[0];
  Fingerprint fp;
  fp.reference_granularity = Granularity::ExhaustiveModes;
  EXPECT_TRUE(check_case_consistency(c, fp).empty());
}

TEST(CaseConsistency, DensityClaimWithoutLogDensities) {
  auto c = parse(kMinimalCase)[0];
  Fingerprint fp;
  fp.prediction_density = true;
  const auto d = check_case_consistency(c, fp);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].property, "P4");
  EXPECT_TRUE(check_case_consistency(c, fp, true).empty());
}

TEST(CaseConsistency, GranularityMismatch) {
  auto c = parse(kMinimalCase)[0];
  Fingerprint fp;
  fp.reference_granularity = Granularity::NonExhaustiveModes;
  const auto d = check_case_consistency(c, fp);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].property, "P1");
}

TEST(Fingerprint, EnumerationIsABijection) {
  const auto all = all_fingerprints();
  ASSERT_EQ(all.size(), 256u);
  std::set<std::string> seen;
  for (const auto& f : all) {
    const auto j = fingerprint_to_json(f);
    EXPECT_EQ(fingerprint_from_json(j), f);
    seen.insert(j.dump());
  }
  EXPECT_EQ(seen.size(), 256u);
}

TEST(Fingerprint, BadEnumValueNamesField) {
  auto j = fingerprint_to_json(Fingerprint{});
  j["p3_confidence_score"] = "maybe";
  try {
    fingerprint_from_json(j);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("p3_confidence_score"), std::string::npos);
  }
}
