#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "diloc/experiment.hpp"

namespace diloc {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("diloc_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

TEST(Config, ParsesAndResolves) {
  const ExperimentConfig c = parse_config(nlohmann::json::parse(R"({
    "scenario": "t", "field": "uniform", "sensor_count": 12, "algorithm": "diloc_rel",
    "alpha": 0.4, "seed": 9, "r0": 0.7})"));
  EXPECT_EQ(c.field, FieldSource::Uniform);
  EXPECT_EQ(c.sensor_count, 12);
  EXPECT_EQ(c.algorithm, Mode::DilocRel);
  EXPECT_EQ(c.alpha, 0.4);
  ASSERT_TRUE(c.r0.has_value());
  EXPECT_EQ(*c.r0, 0.7);
  const auto j = config_to_json(c);
  EXPECT_EQ(j["schedule"], "harmonic:4");
  EXPECT_EQ(parse_config(nlohmann::json::parse(j.dump())).seed, 9u);
}

TEST(Config, RejectsUnknownKeysTypesAndRanges) {
  for (const char* text : {R"({"algoritm": "diloc"})", R"({"alpha": "half"})", R"({"algorithm": "dlre", "schedule": "power:0.4"})",
                           R"({"algorithm": "diloc_rel", "alpha": 0})", R"({"link_prob": 1.5})", R"({"field": "grid"})", R"([1, 2])"}) {
    try {
      const ExperimentConfig c = parse_config(nlohmann::json::parse(text));
      validate_config(c);
      ADD_FAILURE() << "accepted " << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::ConfigInvalid) << text;
    }
  }
}

TEST(Config, HashIgnoresSeedAndOutput) {
  ExperimentConfig a = preset("deterministic-fixture");
  ExperimentConfig b = a;
  b.seed = 77;
  b.output_dir = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.alpha = 0.5;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Config, PresetsAndSeeds) {
  const auto names = preset_names();
  EXPECT_GE(names.size(), 5u);
  for (const std::string& n : names) EXPECT_NO_THROW(validate_config(preset(n))) << n;
  EXPECT_THROW(preset("nope"), Error);
  EXPECT_NE(derive_seed(1, 1), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 1), derive_seed(2, 1));
  EXPECT_EQ(derive_seed(5, 3), derive_seed(5, 3));
}

TEST(Trace, HeaderOnlyWithoutIterations) {
  ExperimentConfig c = preset("deterministic-fixture");
  c.max_iters = 0;
  const fs::path dir = scratch("zero");
  run_experiment(c, dir);
  const auto t = lines(dir / "trace.csv");
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0], "iteration,step_norm,oracle_error,messages_total,alpha_t");
  const auto plot = lines(dir / "plot" / "sensor_4_coord_0.csv");
  ASSERT_EQ(plot.size(), 2u);
  EXPECT_EQ(plot[1].rfind("0,", 0), 0u);
}

TEST(Trace, RowPerIterationUntilConvergence) {
  const ExperimentConfig c = preset("deterministic-fixture");
  const fs::path dir = scratch("fixture");
  const RunArtifacts a = run_experiment(c, dir);
  ASSERT_TRUE(a.trace.converged_at.has_value());
  const auto t = lines(dir / "trace.csv");
  EXPECT_EQ(static_cast<long>(t.size()), *a.trace.converged_at + 1);
  EXPECT_EQ(t[1].rfind("1,", 0), 0u);

  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_FALSE(summary.contains("e_l"));
  EXPECT_EQ(summary["messages_per_sensor"], nlohmann::json({3, 3, 3, 3}));
  EXPECT_EQ(summary["ops_per_sensor"], nlohmann::json({5, 5, 5, 5}));
  EXPECT_EQ(summary["converged_at"], *a.trace.converged_at);
  EXPECT_LT(summary["final_oracle_error"].get<double>(), 1e-8);
  for (const char* f : {"config.json", "field.txt", "matrices.txt"}) EXPECT_TRUE(fs::exists(dir / f)) << f;

  // 4 sensors x 2 coordinates, terminal values equal the summary's final state.
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir / "plot")) {
    (void)e;
    ++files;
  }
  EXPECT_EQ(files, 8);
  for (int s = 0; s < 4; ++s) {
    for (int j = 0; j < 2; ++j) {
      const auto p = lines(dir / "plot" / ("sensor_" + std::to_string(4 + s) + "_coord_" + std::to_string(j) + ".csv"));
      const std::string last = p.back();
      EXPECT_EQ(std::stol(last.substr(0, last.find(','))), *a.trace.converged_at);
      EXPECT_EQ(std::stod(last.substr(last.find(',') + 1)), summary["final_state"][static_cast<std::size_t>(s)][static_cast<std::size_t>(j)].get<double>());
    }
  }
}

TEST(Trace, StrideLongerThanRun) {
  ExperimentConfig c = preset("deterministic-fixture");
  c.snapshot_stride = 100000;
  const RunArtifacts a = execute_experiment(c);
  ASSERT_EQ(a.trace.snapshots.size(), 1u);
  EXPECT_EQ(a.trace.snapshots[0].iteration, *a.trace.converged_at);
}

TEST(Replay, ByteIdenticalOutputs) {
  ExperimentConfig c = preset("lf-cn");
  c.max_iters = 2000;
  const fs::path d1 = scratch("replay1"), d2 = scratch("replay2");
  run_experiment(c, d1);
  run_experiment(c, d2);
  for (const char* f : {"trace.csv", "summary.json", "config.json", "matrices.txt"}) EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
  c.seed = 2;
  const fs::path d3 = scratch("replay3");
  run_experiment(c, d3);
  EXPECT_NE(slurp(d1 / "trace.csv"), slurp(d3 / "trace.csv"));
}

TEST(Summary, UnbiasedDlreHasZeroLocalizationError) {
  ExperimentConfig c = preset("lf-cn");
  c.max_iters = 500;
  const auto j = summary_json(execute_experiment(c));
  ASSERT_TRUE(j.contains("e_l"));
  EXPECT_EQ(j["e_l"].get<double>(), 0.0);
  EXPECT_TRUE(j.contains("relative_distance_to_d_star"));
  EXPECT_FALSE(j.contains("messages_per_sensor"));
}

TEST(Summary, BiasedPresetHasPositiveError) {
  ExperimentConfig c = preset("noisy-distances-biased");
  c.max_iters = 200;
  const auto j = summary_json(execute_experiment(c));
  EXPECT_GT(j["e_l"].get<double>(), 0.0);
}

TEST(Presets, AllRunBriefly) {
  for (const std::string& n : preset_names()) {
    ExperimentConfig c = preset(n);
    c.max_iters = std::min(c.max_iters, 300L);
    EXPECT_NO_THROW(execute_experiment(c)) << n;
  }
}

TEST(Replicas, SeparateDirectories) {
  ExperimentConfig c = preset("relaxed-fixture");
  const fs::path dir = scratch("replicas");
  const auto runs = run_replicas(c, 3, dir);
  ASSERT_EQ(runs.size(), 3u);
  for (int k = 0; k < 3; ++k) EXPECT_TRUE(fs::exists(dir / ("replica_" + std::to_string(k)) / "summary.json"));
  EXPECT_NE(runs[0].config.seed, runs[1].config.seed);
}

}  // namespace
}  // namespace diloc
