#pragma once

// Experiment runner behind the `diloc` command line tool: config parsing and
// validation, presets, seeded runs and the trace/summary/plot-data writers.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "diloc/engine.hpp"
#include "diloc/random_env.hpp"

namespace diloc {

enum class FieldSource { Poisson, Uniform, File, Fixture };

struct ExperimentConfig {
  std::string scenario = "custom";
  int dimension = 2;
  FieldSource field = FieldSource::Fixture;
  double gamma = 1.0;
  int sensor_count = 47;
  /// Empty means the default simplex for the dimension.
  std::vector<std::vector<double>> anchors;
  std::string field_file;
  Mode algorithm = Mode::Diloc;
  double alpha = 1.0;
  std::string schedule = "harmonic:4";
  double link_prob = 1.0;
  double channel_noise_var = 0.0;
  /// Divide channel_noise_var by the sensor count M.
  bool channel_noise_var_over_M = false;
  double matrix_fluct_var = 0.0;
  double bias_norm = 0.0;
  double distance_noise_sigma = 0.0;
  int distance_noise_samples = 200;
  double step_tol = 1e-10;
  long max_iters = 100000;
  long snapshot_stride = 10;
  /// Starting triangulation radius; nullopt means gamma^(-1/m) / 2.
  std::optional<double> r0;
  double growth = 1.25;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
};

/// Parses a flat JSON object. Unknown keys, wrong types and out-of-range
/// values throw ConfigInvalid.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Fully resolved config, defaults included.
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);
void validate_config(const ExperimentConfig& config);

/// FNV-1a of the resolved config without `seed` and `output_dir`.
std::string config_hash(const ExperimentConfig& config);

std::vector<std::string> preset_names();
/// Throws ConfigInvalid for unknown names.
ExperimentConfig preset(const std::string& name);

/// Derived independent seed for a named sub-stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct RunArtifacts {
  ExperimentConfig config;
  RunTrace trace;
  int m = 0;
  int M = 0;
  NodeId first_sensor_id = 0;
  int max_triangulation_rounds = 0;
  double spectral_radius_P = 0.0;
  std::optional<double> spectral_radius_J;
  Eigen::MatrixXd exact;
  std::optional<DlreLimit> limit;
  std::optional<double> biased_radius;
};

/// Builds the scenario and runs it in memory.
RunArtifacts execute_experiment(const ExperimentConfig& config);

/// Header `iteration,step_norm[,oracle_error],messages_total,alpha_t` then
/// one row per completed iteration. Throws IoError.
void emit_trace(const RunTrace& trace, const std::filesystem::path& path);
nlohmann::ordered_json summary_json(const RunArtifacts& artifacts);
void emit_summary(const RunArtifacts& artifacts, const std::filesystem::path& path);
/// One `sensor_<id>_coord_<j>.csv` (iteration,value) per sensor and coordinate.
void emit_plot_data(const RunTrace& trace, NodeId first_sensor_id, const std::filesystem::path& dir);

/// Executes and writes trace.csv, summary.json, config.json, field.txt,
/// matrices.txt and plot/ under `out_dir`.
RunArtifacts run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// Runs `replicas` seed-derived copies in parallel, replica k under
/// out_dir/replica_<k>. Returns the artifacts in replica order.
std::vector<RunArtifacts> run_replicas(const ExperimentConfig& config, int replicas, const std::filesystem::path& out_dir);

}  // namespace diloc
