#include "diloc/random_env.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

namespace diloc {
namespace rng {
namespace {

std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t key(std::uint64_t seed, Stream stream, std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t sub) {
  std::uint64_t h = mix(seed);
  h = mix(h ^ static_cast<std::uint64_t>(stream));
  h = mix(h ^ a);
  h = mix(h ^ b);
  h = mix(h ^ c);
  return mix(h ^ sub);
}

constexpr double kInv53 = 1.0 / 9007199254740992.0;

}  // namespace

double uniform(std::uint64_t seed, Stream stream, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return static_cast<double>(key(seed, stream, a, b, c, 0) >> 11) * kInv53;
}

double normal(std::uint64_t seed, Stream stream, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  // Box-Muller; u1 in (0, 1] keeps the log finite.
  const double u1 = static_cast<double>((key(seed, stream, a, b, c, 1) >> 11) + 1) * kInv53;
  const double u2 = static_cast<double>(key(seed, stream, a, b, c, 2) >> 11) * kInv53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace rng

namespace {

NodeId speaker_id(const SystemMatrices& sys, const Link& link) {
  return link.anchor ? link.col + 1 : sys.first_sensor_id() + link.col;
}

bool valid_probability(double q) { return q > 0.0 && q <= 1.0; }

void check_bias_block(const SparseRowMatrix& bias, const SparseRowMatrix& pattern, const char* name) {
  if (bias.size() == 0) return;
  if (bias.rows() != pattern.rows() || bias.cols() != pattern.cols()) {
    throw Error(ErrorKind::DimensionMismatch, std::string("bias block ") + name + " has the wrong shape");
  }
  for (Eigen::Index i = 0; i < bias.outerSize(); ++i)
    for (SparseRowMatrix::InnerIterator it(bias, i); it; ++it)
      if (it.value() != 0.0 && pattern.coeff(it.row(), it.col()) == 0.0) {
        throw Error(ErrorKind::InvalidArgument, std::string("bias block ") + name + " has an entry off the link pattern");
      }
}

SparseRowMatrix biased(const SparseRowMatrix& base, const SparseRowMatrix& bias) {
  if (bias.size() == 0) return base;
  return base + bias;
}

SparseRowMatrix assemble(const EnvironmentSample& sample, const SystemMatrices& sys, bool anchor_block) {
  std::vector<Eigen::Triplet<double>> entries;
  for (std::size_t i = 0; i < sys.links.size(); ++i) {
    const Link& link = sys.links[i];
    if (link.anchor == anchor_block) entries.emplace_back(link.row, link.col, sample.links[i].weight);
  }
  SparseRowMatrix A(sys.M, anchor_block ? sys.m + 1 : sys.M);
  A.setFromTriplets(entries.begin(), entries.end());
  return A;
}

}  // namespace

double NoiseModel::link_probability(const SystemMatrices& sys, const Link& link) const {
  if (!link_prob_overrides.empty()) {
    const auto it = link_prob_overrides.find({sys.first_sensor_id() + link.row, speaker_id(sys, link)});
    if (it != link_prob_overrides.end()) return it->second;
  }
  return link_prob;
}

double NoiseModel::bias(const Link& link) const {
  const SparseRowMatrix& block = link.anchor ? bias_B : bias_P;
  return block.size() == 0 ? 0.0 : block.coeff(link.row, link.col);
}

bool NoiseModel::has_bias() const {
  auto nonzero = [](const SparseRowMatrix& A) {
    for (Eigen::Index k = 0; k < A.nonZeros(); ++k)
      if (A.valuePtr()[k] != 0.0) return true;
    return false;
  };
  return nonzero(bias_B) || nonzero(bias_P);
}

double biased_spectral_radius(const SystemMatrices& sys, const NoiseModel& model) {
  if (model.bias_P.size() == 0) return spectral_radius(sys.P).value;
  const Eigen::MatrixXd A = Eigen::MatrixXd(biased(sys.P, model.bias_P));
  if (A.rows() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(A, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

void validate_noise_model(const NoiseModel& model, const SystemMatrices& sys) {
  if (!valid_probability(model.link_prob)) throw Error(ErrorKind::InvalidArgument, "link_prob must lie in (0, 1]");
  for (const auto& [link, q] : model.link_prob_overrides)
    if (!valid_probability(q)) throw Error(ErrorKind::InvalidArgument, "link probability override outside (0, 1]");
  if (!(model.channel_noise_var >= 0.0) || !std::isfinite(model.channel_noise_var))
    throw Error(ErrorKind::InvalidArgument, "channel_noise_var must be a nonnegative number");
  if (!(model.matrix_fluct_var >= 0.0) || !std::isfinite(model.matrix_fluct_var))
    throw Error(ErrorKind::InvalidArgument, "matrix_fluct_var must be a nonnegative number");
  check_bias_block(model.bias_B, sys.B, "S_B");
  check_bias_block(model.bias_P, sys.P, "S_P");
  if (model.has_bias() && biased_spectral_radius(sys, model) >= 1.0) {
    throw Error(ErrorKind::LowBiasViolation, "rho(P + S_P) >= 1");
  }
}

EnvironmentSample sample_environment(const NoiseModel& model, const SystemMatrices& sys, long t) {
  EnvironmentSample sample;
  sample.links.resize(sys.links.size());
  sample.channel_noise = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sys.links.size()), sys.m);
  const double fluct_sd = std::sqrt(model.matrix_fluct_var);
  const double channel_sd = std::sqrt(model.channel_noise_var);
  const auto tt = static_cast<std::uint64_t>(t);
  const bool bias = model.has_bias();
  for (std::size_t i = 0; i < sys.links.size(); ++i) {
    const Link& link = sys.links[i];
    LinkDraw& draw = sample.links[i];
    draw.q = model.link_probability(sys, link);
    draw.alive = draw.q >= 1.0 || rng::uniform(model.seed, rng::Stream::Link, tt, i, 0) < draw.q;
    draw.weight = link.weight;
    if (bias) draw.weight += model.bias(link);
    if (fluct_sd > 0.0) {
      const auto stream = link.anchor ? rng::Stream::FluctB : rng::Stream::FluctP;
      draw.weight += fluct_sd * rng::normal(model.seed, stream, tt, i, 0);
    }
    if (channel_sd > 0.0) {
      for (int j = 0; j < sys.m; ++j) {
        sample.channel_noise(static_cast<Eigen::Index>(i), j) =
            channel_sd * rng::normal(model.seed, rng::Stream::Channel, tt, i, static_cast<std::uint64_t>(j));
      }
    }
  }
  return sample;
}

SparseRowMatrix sampled_B(const EnvironmentSample& sample, const SystemMatrices& sys) { return assemble(sample, sys, true); }
SparseRowMatrix sampled_P(const EnvironmentSample& sample, const SystemMatrices& sys) { return assemble(sample, sys, false); }

WeightSchedule WeightSchedule::harmonic(double a) {
  if (!(a > 0.0) || !std::isfinite(a)) throw Error(ErrorKind::PersistenceViolation, "harmonic gain must be positive");
  return WeightSchedule(Family::Harmonic, a);
}

WeightSchedule WeightSchedule::power(double p) {
  if (!(p > 0.5 && p <= 1.0)) {
    throw Error(ErrorKind::PersistenceViolation, "power exponent must lie in (0.5, 1] for sum alpha = inf and sum alpha^2 < inf");
  }
  return WeightSchedule(Family::Power, p);
}

double WeightSchedule::operator()(long t) const {
  const double base = static_cast<double>(t) + 1.0;
  return family_ == Family::Harmonic ? param_ / base : std::pow(base, -param_);
}

std::string WeightSchedule::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << (family_ == Family::Harmonic ? "harmonic:" : "power:") << param_;
  return os.str();
}

WeightSchedule make_weight_schedule(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) throw Error(ErrorKind::InvalidArgument, "schedule must be family:parameter");
  const std::string_view family = spec.substr(0, colon);
  const std::string value(spec.substr(colon + 1));
  double param = 0.0;
  try {
    std::size_t used = 0;
    param = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::InvalidArgument, "bad schedule parameter '" + value + "'");
  }
  if (family == "harmonic") return WeightSchedule::harmonic(param);
  if (family == "power") return WeightSchedule::power(param);
  throw Error(ErrorKind::InvalidArgument, "unknown schedule family '" + std::string(family) + "'");
}

Eigen::MatrixXd dlre_step(const Eigen::MatrixXd& x, const SystemMatrices& sys, const AnchorBlock& anchors,
                          const NoiseModel& model, long t, double alpha_t, int* messages) {
  if (x.rows() != sys.M || x.cols() != sys.m || anchors.U.rows() != sys.m + 1 || anchors.U.cols() != sys.m) {
    throw Error(ErrorKind::DimensionMismatch, "estimate, system and anchors disagree on m or M");
  }
  const EnvironmentSample env = sample_environment(model, sys, t);
  Eigen::MatrixXd next(x.rows(), x.cols());
  int alive = 0;
  for (int row = 0; row < sys.M; ++row) {
    const std::size_t begin = sys.row_start[static_cast<std::size_t>(row)];
    const std::size_t end = sys.row_start[static_cast<std::size_t>(row) + 1];
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(sys.m);
    for (std::size_t i = begin; i < end; ++i) {
      const LinkDraw& draw = env.links[i];
      if (!draw.alive) continue;
      ++alive;
      const Link& link = sys.links[i];
      const double gain = draw.weight / draw.q;
      const auto received = link.anchor ? anchors.U.row(link.col) : x.row(link.col);
      acc += gain * (received + env.channel_noise.row(static_cast<Eigen::Index>(i)));
    }
    next.row(row) = (1.0 - alpha_t) * x.row(row) + alpha_t * acc;
  }
  if (messages != nullptr) *messages = alive;
  return next;
}

Eigen::MatrixXd dlre_step(const Eigen::MatrixXd& x, const SystemMatrices& sys, const AnchorBlock& anchors,
                          const NoiseModel& model, const WeightSchedule& schedule, long t) {
  return dlre_step(x, sys, anchors, model, t, schedule(t));
}

Eigen::MatrixXd dlre_mean_step(const Eigen::MatrixXd& x, const SystemMatrices& sys, const AnchorBlock& anchors,
                               const NoiseModel& model, double alpha_t) {
  const SparseRowMatrix P = biased(sys.P, model.bias_P);
  const SparseRowMatrix B = biased(sys.B, model.bias_B);
  const Eigen::MatrixXd drift = x - P * x - B * anchors.U;
  return x - alpha_t * drift;
}

DlreLimit dlre_limit(const SystemMatrices& sys, const AnchorBlock& anchors, const NoiseModel& model) {
  const Eigen::MatrixXd exact = exact_locations_oracle(sys, anchors);
  if (!model.has_bias()) return DlreLimit{exact, 0.0};
  if (biased_spectral_radius(sys, model) >= 1.0) throw Error(ErrorKind::SingularSystem, "rho(P + S_P) >= 1");
  DlreLimit limit;
  limit.d_star = solve_shifted_identity(biased(sys.P, model.bias_P), biased(sys.B, model.bias_B) * anchors.U);
  limit.e_l = (limit.d_star - exact).norm();
  return limit;
}

RunTrace run_dlre(const IterationState& initial, const SystemMatrices& sys, const AnchorBlock& anchors,
                  const NoiseModel& model, const WeightSchedule& schedule, const DlreRunOptions& options) {
  validate_noise_model(model, sys);
  RunTrace trace;
  trace.mode = Mode::Dlre;
  trace.seed = options.seed;
  trace.has_oracle = options.oracle.has_value();
  Eigen::MatrixXd x = initial.sensors();
  long long messages_total = 0;
  if (options.max_iters <= 0) record_snapshot(trace, 0, x, options.snapshot_stride, true);
  for (long t = 0; t < options.max_iters; ++t) {
    const double alpha_t = schedule(t);
    int alive = 0;
    Eigen::MatrixXd next = dlre_step(x, sys, anchors, model, t, alpha_t, &alive);
    messages_total += alive;
    TraceRow row;
    row.iteration = t + 1;
    row.step_norm = (next - x).cwiseAbs().maxCoeff();
    if (options.oracle) row.oracle_error = (next - *options.oracle).cwiseAbs().maxCoeff();
    row.messages_total = messages_total;
    row.alpha = alpha_t;
    trace.rows.push_back(row);
    x = std::move(next);
    record_snapshot(trace, t + 1, x, options.snapshot_stride, t + 1 == options.max_iters);
  }
  trace.final_sensors = x;
  trace.reference_rate = biased_spectral_radius(sys, model);
  return trace;
}

BiasPair make_bias(const SystemMatrices& sys, double norm, std::uint64_t seed) {
  if (!(norm >= 0.0)) throw Error(ErrorKind::InvalidArgument, "bias norm must be nonnegative");
  auto block = [&](bool anchor) {
    std::vector<Eigen::Triplet<double>> entries;
    double sq = 0.0;
    for (std::size_t i = 0; i < sys.links.size(); ++i) {
      const Link& link = sys.links[i];
      if (link.anchor != anchor) continue;
      const double v = rng::normal(seed, rng::Stream::Bias, i, anchor ? 0 : 1, 0);
      entries.emplace_back(link.row, link.col, v);
      sq += v * v;
    }
    const double scale = sq > 0.0 ? norm / std::sqrt(sq) : 0.0;
    for (auto& e : entries) e = Eigen::Triplet<double>(e.row(), e.col(), e.value() * scale);
    SparseRowMatrix A(sys.M, anchor ? sys.m + 1 : sys.M);
    A.setFromTriplets(entries.begin(), entries.end());
    return A;
  };
  return BiasPair{block(true), block(false)};
}

NoiseModel noise_from_distance_errors(const SensorField& field, std::span<const TriangulationSet> tris,
                                      const SystemMatrices& sys, double distance_sigma, int samples,
                                      std::uint64_t seed) {
  if (samples < 2) throw Error(ErrorKind::InvalidArgument, "need at least two samples");
  if (!(distance_sigma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "distance_sigma must be nonnegative");
  if (distance_sigma == 0.0) {
    NoiseModel exact;
    exact.seed = seed;
    return exact;
  }
  const int m = field.dimension();
  constexpr int kMaxRedraws = 100;

  std::vector<Eigen::Triplet<double>> bias_b, bias_p;
  double var_sum = 0.0;
  std::size_t var_count = 0;
  for (const TriangulationSet& t : tris) {
    std::vector<NodeId> local{t.sensor_id};
    local.insert(local.end(), t.neighbor_ids.begin(), t.neighbor_ids.end());
    const DistanceMatrix exact = field.distances_among(local);
    const auto n = static_cast<Eigen::Index>(local.size());
    const std::size_t k = t.neighbor_ids.size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
    int kept = 0;
    std::uint64_t draw = 0;
    while (kept < samples) {
      if (draw > static_cast<std::uint64_t>(samples) * kMaxRedraws) {
        throw Error(ErrorKind::NotRealizable, "distance noise too large to produce embeddable tables");
      }
      Eigen::MatrixXd noisy = Eigen::MatrixXd::Zero(n, n);
      for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = a + 1; b < n; ++b) {
          const double d = std::sqrt(exact.at(static_cast<std::size_t>(a), static_cast<std::size_t>(b))) +
                           distance_sigma * rng::normal(seed, rng::Stream::Distance, static_cast<std::uint64_t>(t.sensor_id), draw,
                                                        static_cast<std::uint64_t>(a * n + b));
          noisy(a, b) = noisy(b, a) = d * d;
        }
      ++draw;
      const DistanceMatrix dm = validate_distance_matrix(noisy, local);
      Eigen::VectorXd parts(static_cast<Eigen::Index>(k));
      try {
        for (std::size_t q = 0; q < k; ++q) {
          std::vector<NodeId> swapped = t.neighbor_ids;
          swapped[q] = t.sensor_id;
          parts(static_cast<Eigen::Index>(q)) = generalized_volume(dm, swapped, m);
        }
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::NotRealizable) continue;
        throw;
      }
      if (!(parts.sum() > 0.0)) continue;
      parts /= parts.sum();
      mean += parts;
      sq += parts.cwiseAbs2();
      ++kept;
    }
    mean /= samples;
    const Eigen::VectorXd var = (sq / samples - mean.cwiseAbs2()).cwiseMax(0.0) * (static_cast<double>(samples) / (samples - 1));
    const int row = t.sensor_id - field.first_sensor_id();
    for (std::size_t q = 0; q < k; ++q) {
      const NodeId nb = t.neighbor_ids[q];
      const double delta = mean(static_cast<Eigen::Index>(q)) - t.weights.weights[q];
      if (field.is_anchor(nb)) bias_b.emplace_back(row, nb - 1, delta);
      else bias_p.emplace_back(row, nb - field.first_sensor_id(), delta);
      var_sum += var(static_cast<Eigen::Index>(q));
      ++var_count;
    }
  }
  NoiseModel model;
  model.bias_B = SparseRowMatrix(sys.M, sys.m + 1);
  model.bias_B.setFromTriplets(bias_b.begin(), bias_b.end());
  model.bias_P = SparseRowMatrix(sys.M, sys.M);
  model.bias_P.setFromTriplets(bias_p.begin(), bias_p.end());
  model.matrix_fluct_var = var_count > 0 ? var_sum / static_cast<double>(var_count) : 0.0;
  model.seed = seed;
  return model;
}

}  // namespace diloc
