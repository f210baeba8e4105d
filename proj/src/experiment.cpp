#include "diloc/experiment.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <thread>

namespace diloc {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorKind::ConfigInvalid, msg); }

const char* field_name(FieldSource f) {
  switch (f) {
    case FieldSource::Poisson: return "poisson";
    case FieldSource::Uniform: return "uniform";
    case FieldSource::File: return "file";
    case FieldSource::Fixture: return "fixture";
  }
  return "unknown";
}

FieldSource parse_field(const std::string& s) {
  if (s == "poisson") return FieldSource::Poisson;
  if (s == "uniform") return FieldSource::Uniform;
  if (s == "file") return FieldSource::File;
  if (s == "fixture") return FieldSource::Fixture;
  invalid("field must be poisson, uniform, file or fixture");
}

Mode parse_algorithm(const std::string& s) {
  if (s == "diloc") return Mode::Diloc;
  if (s == "diloc_rel") return Mode::DilocRel;
  if (s == "dlre") return Mode::Dlre;
  invalid("algorithm must be diloc, diloc_rel or dlre");
}

double number(const json& v, const std::string& key) {
  if (!v.is_number()) invalid("'" + key + "' must be a number");
  return v.get<double>();
}

long integer(const json& v, const std::string& key) {
  if (!v.is_number_integer()) invalid("'" + key + "' must be an integer");
  return v.get<long>();
}

std::string text(const json& v, const std::string& key) {
  if (!v.is_string()) invalid("'" + key + "' must be a string");
  return v.get<std::string>();
}

Eigen::MatrixXd default_anchors(int m) {
  Eigen::MatrixXd U;
  if (m == 1) {
    U.resize(2, 1);
    U << 0.0, 10.0;
  } else if (m == 2) {
    U.resize(3, 2);
    U << 0.0, 0.0, 10.0, 0.0, 5.0, 9.0;
  } else if (m == 3) {
    U.resize(4, 3);
    U << 0.0, 0.0, 0.0, 10.0, 0.0, 0.0, 5.0, 9.0, 0.0, 5.0, 3.0, 8.0;
  } else {
    invalid("no default anchors for dimension " + std::to_string(m) + "; set 'anchors'");
  }
  return U;
}

Eigen::MatrixXd anchor_matrix(const ExperimentConfig& c) {
  if (c.anchors.empty()) return default_anchors(c.dimension);
  Eigen::MatrixXd U(static_cast<Eigen::Index>(c.anchors.size()), c.dimension);
  for (std::size_t i = 0; i < c.anchors.size(); ++i)
    for (int j = 0; j < c.dimension; ++j) U(static_cast<Eigen::Index>(i), j) = c.anchors[i][static_cast<std::size_t>(j)];
  return U;
}

SensorField build_field(const ExperimentConfig& c) {
  switch (c.field) {
    case FieldSource::Poisson: return generate_poisson_field(c.dimension, c.gamma, anchor_matrix(c), derive_seed(c.seed, 1));
    case FieldSource::Uniform: return generate_uniform_field(c.dimension, c.sensor_count, anchor_matrix(c), derive_seed(c.seed, 1));
    case FieldSource::File: return load_field(c.field_file);
    case FieldSource::Fixture: return seven_node_field();
  }
  invalid("unknown field source");
}

NoiseModel build_noise_model(const ExperimentConfig& c, const SensorField& field, std::span<const TriangulationSet> tris,
                             const SystemMatrices& sys) {
  NoiseModel model;
  if (c.distance_noise_sigma > 0.0) {
    model = noise_from_distance_errors(field, tris, sys, c.distance_noise_sigma, c.distance_noise_samples, derive_seed(c.seed, 5));
  } else {
    model.matrix_fluct_var = c.matrix_fluct_var;
    if (c.bias_norm > 0.0) {
      BiasPair bias = make_bias(sys, c.bias_norm, derive_seed(c.seed, 4));
      model.bias_B = std::move(bias.S_B);
      model.bias_P = std::move(bias.S_P);
    }
  }
  model.link_prob = c.link_prob;
  model.channel_noise_var = c.channel_noise_var_over_M ? c.channel_noise_var / std::max(sys.M, 1) : c.channel_noise_var;
  model.seed = derive_seed(c.seed, 3);
  return model;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

ordered_json matrix_json(const Eigen::MatrixXd& A) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < A.cols(); ++j) row.push_back(A(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

struct PresetEntry {
  const char* name;
  std::function<ExperimentConfig()> make;
};

ExperimentConfig base(const char* name) {
  ExperimentConfig c;
  c.scenario = name;
  return c;
}

const std::vector<PresetEntry>& presets() {
  static const std::vector<PresetEntry> table = {
      {"deterministic-fixture",
       [] {
         ExperimentConfig c = base("deterministic-fixture");
         c.field = FieldSource::Fixture;
         c.r0 = 0.5;
         c.snapshot_stride = 1;
         return c;
       }},
      {"relaxed-fixture",
       [] {
         ExperimentConfig c = base("relaxed-fixture");
         c.field = FieldSource::Fixture;
         c.algorithm = Mode::DilocRel;
         c.alpha = 0.5;
         c.r0 = 0.5;
         return c;
       }},
      {"deterministic-random",
       [] {
         ExperimentConfig c = base("deterministic-random");
         c.field = FieldSource::Uniform;
         c.sensor_count = 47;
         return c;
       }},
      {"lf-cn",
       [] {
         ExperimentConfig c = base("lf-cn");
         c.field = FieldSource::Uniform;
         c.sensor_count = 47;
         c.algorithm = Mode::Dlre;
         c.schedule = "harmonic:4";
         c.link_prob = 0.9;
         c.channel_noise_var = 1.0;
         c.channel_noise_var_over_M = true;
         c.max_iters = 100000;
         c.snapshot_stride = 100;
         return c;
       }},
      {"noisy-distances",
       [] {
         ExperimentConfig c = base("noisy-distances");
         c.field = FieldSource::Uniform;
         c.sensor_count = 47;
         c.algorithm = Mode::Dlre;
         c.schedule = "power:0.55";
         c.matrix_fluct_var = 0.1;
         c.max_iters = 100000;
         c.snapshot_stride = 100;
         return c;
       }},
      {"noisy-distances-biased",
       [] {
         ExperimentConfig c = base("noisy-distances-biased");
         c.field = FieldSource::Uniform;
         c.sensor_count = 47;
         c.algorithm = Mode::Dlre;
         c.schedule = "power:0.55";
         c.matrix_fluct_var = 0.1;
         c.bias_norm = 0.01;
         c.max_iters = 100000;
         c.snapshot_stride = 100;
         return c;
       }},
      {"all-random",
       [] {
         ExperimentConfig c = base("all-random");
         c.field = FieldSource::Uniform;
         c.sensor_count = 47;
         c.algorithm = Mode::Dlre;
         c.schedule = "power:0.55";
         c.link_prob = 0.9;
         c.channel_noise_var = 1.0;
         c.channel_noise_var_over_M = true;
         c.matrix_fluct_var = 0.1;
         c.max_iters = 100000;
         c.snapshot_stride = 100;
         return c;
       }},
  };
  return table;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) invalid("config must be a JSON object");
  ExperimentConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "scenario") c.scenario = text(v, key);
    else if (key == "dimension") c.dimension = static_cast<int>(integer(v, key));
    else if (key == "field") c.field = parse_field(text(v, key));
    else if (key == "gamma") c.gamma = number(v, key);
    else if (key == "sensor_count") c.sensor_count = static_cast<int>(integer(v, key));
    else if (key == "anchors") {
      if (!v.is_array()) invalid("'anchors' must be an array of coordinate arrays");
      c.anchors.clear();
      for (const auto& row : v) {
        if (!row.is_array()) invalid("'anchors' must be an array of coordinate arrays");
        std::vector<double> coords;
        for (const auto& x : row) coords.push_back(number(x, key));
        c.anchors.push_back(std::move(coords));
      }
    } else if (key == "field_file") c.field_file = text(v, key);
    else if (key == "algorithm") c.algorithm = parse_algorithm(text(v, key));
    else if (key == "alpha") c.alpha = number(v, key);
    else if (key == "schedule") c.schedule = text(v, key);
    else if (key == "link_prob") c.link_prob = number(v, key);
    else if (key == "channel_noise_var") c.channel_noise_var = number(v, key);
    else if (key == "channel_noise_var_over_M") {
      if (!v.is_boolean()) invalid("'channel_noise_var_over_M' must be a boolean");
      c.channel_noise_var_over_M = v.get<bool>();
    } else if (key == "matrix_fluct_var") c.matrix_fluct_var = number(v, key);
    else if (key == "bias_norm") c.bias_norm = number(v, key);
    else if (key == "distance_noise_sigma") c.distance_noise_sigma = number(v, key);
    else if (key == "distance_noise_samples") c.distance_noise_samples = static_cast<int>(integer(v, key));
    else if (key == "step_tol") c.step_tol = number(v, key);
    else if (key == "max_iters") c.max_iters = integer(v, key);
    else if (key == "snapshot_stride") c.snapshot_stride = integer(v, key);
    else if (key == "r0") {
      if (v.is_null()) c.r0.reset();
      else c.r0 = number(v, key);
    } else if (key == "growth") c.growth = number(v, key);
    else if (key == "seed") {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) invalid("'seed' must be a nonnegative integer");
      c.seed = v.get<std::uint64_t>();
    } else if (key == "output_dir") c.output_dir = text(v, key);
    else invalid("unknown key '" + key + "'");
  }
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    invalid(std::string("parse error: ") + e.what());
  }
  return parse_config(j);
}

void validate_config(const ExperimentConfig& c) {
  if (c.dimension < 1 || c.dimension > kMaxDimension) invalid("dimension out of range");
  if (!c.anchors.empty()) {
    if (c.anchors.size() != static_cast<std::size_t>(c.dimension + 1)) invalid("'anchors' must list m+1 points");
    for (const auto& row : c.anchors)
      if (row.size() != static_cast<std::size_t>(c.dimension)) invalid("every anchor needs m coordinates");
  }
  if (c.field == FieldSource::Poisson && !(c.gamma > 0.0)) invalid("'gamma' must be positive");
  if (c.field == FieldSource::Uniform && c.sensor_count < 0) invalid("'sensor_count' must be nonnegative");
  if (c.field == FieldSource::File && c.field_file.empty()) invalid("'field_file' is required for file fields");
  if (c.field == FieldSource::Fixture && c.dimension != 2) invalid("the fixture field is planar");
  if (c.algorithm == Mode::DilocRel && !(c.alpha > 0.0 && c.alpha <= 1.0)) invalid("'alpha' must lie in (0, 1]");
  if (c.algorithm == Mode::Dlre) {
    try {
      make_weight_schedule(c.schedule);
    } catch (const Error& e) {
      invalid(std::string("'schedule': ") + e.what());
    }
  }
  if (!(c.link_prob > 0.0 && c.link_prob <= 1.0)) invalid("'link_prob' must lie in (0, 1]");
  if (!(c.channel_noise_var >= 0.0)) invalid("'channel_noise_var' must be nonnegative");
  if (!(c.matrix_fluct_var >= 0.0)) invalid("'matrix_fluct_var' must be nonnegative");
  if (!(c.bias_norm >= 0.0)) invalid("'bias_norm' must be nonnegative");
  if (!(c.distance_noise_sigma >= 0.0)) invalid("'distance_noise_sigma' must be nonnegative");
  if (c.distance_noise_sigma > 0.0 && (c.bias_norm > 0.0 || c.matrix_fluct_var > 0.0)) {
    invalid("'distance_noise_sigma' derives bias and fluctuation; do not combine with 'bias_norm' or 'matrix_fluct_var'");
  }
  if (c.distance_noise_samples < 2) invalid("'distance_noise_samples' must be at least 2");
  if (c.algorithm != Mode::Dlre &&
      (c.link_prob != 1.0 || c.channel_noise_var != 0.0 || c.matrix_fluct_var != 0.0 || c.bias_norm != 0.0 ||
       c.distance_noise_sigma != 0.0)) {
    invalid("noise settings require algorithm 'dlre'");
  }
  if (!(c.step_tol > 0.0)) invalid("'step_tol' must be positive");
  if (c.max_iters < 0) invalid("'max_iters' must be nonnegative");
  if (c.snapshot_stride < 1) invalid("'snapshot_stride' must be at least 1");
  if (c.r0 && !(*c.r0 > 0.0)) invalid("'r0' must be positive");
  if (!(c.growth > 1.0)) invalid("'growth' must exceed 1");
  if (c.output_dir.empty()) invalid("'output_dir' must not be empty");
}

ordered_json config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["scenario"] = c.scenario;
  j["dimension"] = c.dimension;
  j["field"] = field_name(c.field);
  j["gamma"] = c.gamma;
  j["sensor_count"] = c.sensor_count;
  ordered_json anchors = ordered_json::array();
  for (const auto& row : c.anchors) anchors.push_back(row);
  if (c.anchors.empty()) anchors = matrix_json(default_anchors(c.dimension));
  j["anchors"] = anchors;
  j["field_file"] = c.field_file;
  j["algorithm"] = to_string(c.algorithm);
  j["alpha"] = c.alpha;
  j["schedule"] = c.schedule;
  j["link_prob"] = c.link_prob;
  j["channel_noise_var"] = c.channel_noise_var;
  j["channel_noise_var_over_M"] = c.channel_noise_var_over_M;
  j["matrix_fluct_var"] = c.matrix_fluct_var;
  j["bias_norm"] = c.bias_norm;
  j["distance_noise_sigma"] = c.distance_noise_sigma;
  j["distance_noise_samples"] = c.distance_noise_samples;
  j["step_tol"] = c.step_tol;
  j["max_iters"] = c.max_iters;
  j["snapshot_stride"] = c.snapshot_stride;
  j["r0"] = c.r0 ? ordered_json(*c.r0) : ordered_json(nullptr);
  j["growth"] = c.growth;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  return j;
}

std::string config_hash(const ExperimentConfig& config) {
  ordered_json j = config_to_json(config);
  j.erase("seed");
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& p : presets()) names.emplace_back(p.name);
  return names;
}

ExperimentConfig preset(const std::string& name) {
  for (const auto& p : presets())
    if (name == p.name) return p.make();
  invalid("unknown preset '" + name + "'");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed ^ (stream * 0x9e3779b97f4a7c15ULL);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RunArtifacts execute_experiment(const ExperimentConfig& config) {
  validate_config(config);
  RunArtifacts a;
  a.config = config;
  const SensorField field = build_field(config);
  if (field.dimension() != config.dimension) invalid("field file dimension differs from config 'dimension'");
  const double r0 = config.r0.value_or(default_initial_radius(field));
  const std::vector<TriangulationSet> tris = triangulate_all(field, r0, config.growth);
  for (const auto& t : tris) a.max_triangulation_rounds = std::max(a.max_triangulation_rounds, t.rounds);
  const SystemMatrices sys = build_system_matrices(field, tris);
  const AnchorBlock anchors = anchor_block(field);
  a.m = sys.m;
  a.M = sys.M;
  a.first_sensor_id = field.first_sensor_id();
  a.exact = exact_locations_oracle(sys, anchors);
  a.spectral_radius_P = spectral_radius(sys.P).value;
  const IterationState initial = random_initial_state(anchors, sys.M, derive_seed(config.seed, 2));

  if (config.algorithm == Mode::Dlre) {
    const NoiseModel model = build_noise_model(config, field, tris, sys);
    validate_noise_model(model, sys);
    a.limit = dlre_limit(sys, anchors, model);
    a.biased_radius = biased_spectral_radius(sys, model);
    DlreRunOptions opts;
    opts.max_iters = config.max_iters;
    opts.snapshot_stride = config.snapshot_stride;
    opts.oracle = a.exact;
    opts.seed = config.seed;
    a.trace = run_dlre(initial, sys, anchors, model, make_weight_schedule(config.schedule), opts);
  } else {
    RunOptions opts;
    opts.mode = config.algorithm;
    opts.alpha = config.alpha;
    opts.step_tol = config.step_tol;
    opts.max_iters = config.max_iters;
    opts.snapshot_stride = config.snapshot_stride;
    opts.oracle = a.exact;
    opts.seed = config.seed;
    a.trace = run_to_convergence(initial, sys, anchors, opts);
    if (config.algorithm == Mode::DilocRel) a.spectral_radius_J = a.trace.reference_rate;
  }
  return a;
}

void emit_trace(const RunTrace& trace, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  const bool oracle = trace.has_oracle;
  out << "iteration,step_norm" << (oracle ? ",oracle_error" : "") << ",messages_total,alpha_t\n";
  for (const TraceRow& row : trace.rows) {
    out << row.iteration << ',' << format_double(row.step_norm);
    if (oracle) out << ',' << format_double(row.oracle_error.value_or(std::nan("")));
    out << ',' << row.messages_total << ',' << format_double(row.alpha) << '\n';
  }
  finish(out, path);
}

ordered_json summary_json(const RunArtifacts& a) {
  const RunTrace& t = a.trace;
  ordered_json j;
  j["scenario"] = a.config.scenario;
  j["config_hash"] = config_hash(a.config);
  j["seed"] = a.config.seed;
  j["algorithm"] = to_string(a.config.algorithm);
  j["m"] = a.m;
  j["N"] = a.m + 1 + a.M;
  j["M"] = a.M;
  j["max_triangulation_rounds"] = a.max_triangulation_rounds;
  j["iterations"] = t.rows.size();
  j["converged_at"] = t.converged_at ? ordered_json(*t.converged_at) : ordered_json(nullptr);
  j["final_step_norm"] = t.rows.empty() ? ordered_json(nullptr) : ordered_json(t.rows.back().step_norm);
  j["final_oracle_error"] = (t.final_sensors - a.exact).cwiseAbs().maxCoeff();
  j["spectral_radius_P"] = a.spectral_radius_P;
  if (a.spectral_radius_J) j["spectral_radius_J"] = *a.spectral_radius_J;
  j["decay_rate"] = t.decay_rate ? ordered_json(*t.decay_rate) : ordered_json(nullptr);
  if (a.config.algorithm != Mode::Dlre) {
    j["messages_per_sensor"] = t.counters.messages;
    j["ops_per_sensor"] = t.counters.ops;
    j["accounting_consistent"] = t.accounting_consistent;
  }
  if (a.limit) {
    const double dist = (t.final_sensors - a.limit->d_star).norm();
    j["e_l"] = a.limit->e_l;
    j["distance_to_d_star"] = dist;
    j["relative_distance_to_d_star"] = dist / a.limit->d_star.norm();
    if (a.biased_radius) j["spectral_radius_P_plus_S_P"] = *a.biased_radius;
  }
  j["final_state"] = matrix_json(t.final_sensors);
  return j;
}

void emit_summary(const RunArtifacts& artifacts, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << summary_json(artifacts).dump(2) << '\n';
  finish(out, path);
}

void emit_plot_data(const RunTrace& trace, NodeId first_sensor_id, const std::filesystem::path& dir) {
  if (trace.snapshots.empty()) return;
  const Eigen::Index M = trace.snapshots.front().sensors.rows();
  const Eigen::Index m = trace.snapshots.front().sensors.cols();
  for (Eigen::Index i = 0; i < M; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto path = dir / ("sensor_" + std::to_string(first_sensor_id + i) + "_coord_" + std::to_string(j) + ".csv");
      std::ofstream out = open_output(path);
      out << "iteration,value\n";
      for (const Snapshot& s : trace.snapshots) out << s.iteration << ',' << format_double(s.sensors(i, j)) << '\n';
      finish(out, path);
    }
  }
}

RunArtifacts run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  RunArtifacts a = execute_experiment(config);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + out_dir.string());
  {
    const auto path = out_dir / "config.json";
    std::ofstream out = open_output(path);
    out << config_to_json(config).dump(2) << '\n';
    finish(out, path);
  }
  {
    const SensorField field = build_field(config);
    const auto path = out_dir / "field.txt";
    std::ofstream out = open_output(path);
    write_field(field, out);
    finish(out, path);
    const double r0 = config.r0.value_or(default_initial_radius(field));
    const auto tris = triangulate_all(field, r0, config.growth);
    const auto sys = build_system_matrices(field, tris);
    const auto mpath = out_dir / "matrices.txt";
    std::ofstream mout = open_output(mpath);
    write_matrix_dump(sys, mout);
    finish(mout, mpath);
  }
  emit_trace(a.trace, out_dir / "trace.csv");
  emit_summary(a, out_dir / "summary.json");
  emit_plot_data(a.trace, a.first_sensor_id, out_dir / "plot");
  return a;
}

std::vector<RunArtifacts> run_replicas(const ExperimentConfig& config, int replicas, const std::filesystem::path& out_dir) {
  if (replicas < 1) invalid("replicas must be at least 1");
  if (replicas == 1) return {run_experiment(config, out_dir)};
  std::vector<RunArtifacts> results(static_cast<std::size_t>(replicas));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(replicas));
  std::vector<std::thread> workers;
  for (int k = 0; k < replicas; ++k) {
    workers.emplace_back([&, k] {
      try {
        ExperimentConfig c = config;
        c.seed = derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(k));
        results[static_cast<std::size_t>(k)] = run_experiment(c, out_dir / ("replica_" + std::to_string(k)));
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace diloc
