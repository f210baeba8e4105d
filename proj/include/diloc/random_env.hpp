#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "diloc/engine.hpp"
#include "diloc/system.hpp"

namespace diloc {

/// Random-environment parameters: link failures, channel noise, and biased
/// plus fluctuating system matrices.
struct NoiseModel {
  /// Probability that a link is up in a given iteration.
  double link_prob = 1.0;
  /// Per directed link (listener, speaker) overrides of link_prob.
  std::map<std::pair<NodeId, NodeId>, double> link_prob_overrides;
  /// Variance of the additive noise on every received coordinate.
  double channel_noise_var = 0.0;
  /// Fixed biases S_B (M x (m+1)) and S_P (M x M); empty means zero. Their
  /// nonzeros must sit on existing links.
  SparseRowMatrix bias_B;
  SparseRowMatrix bias_P;
  /// Variance of the zero-mean fluctuation added to every link weight each iteration.
  double matrix_fluct_var = 0.0;
  std::uint64_t seed = 0;

  double link_probability(const SystemMatrices& sys, const Link& link) const;
  double bias(const Link& link) const;
  bool has_bias() const;
};

/// Checks ranges, bias placement and rho(P + S_P) < 1 (LowBiasViolation).
void validate_noise_model(const NoiseModel& model, const SystemMatrices& sys);

/// Spectral radius of P + S_P (dense eigenvalues; the sum may have negative entries).
double biased_spectral_radius(const SystemMatrices& sys, const NoiseModel& model);

/// Counter-based streams: every draw is a pure function of (seed, stream,
/// iteration, link index, coordinate), so rows can be evaluated in any order.
namespace rng {
enum class Stream : std::uint64_t { Link = 1, Channel = 2, FluctB = 3, FluctP = 4, Bias = 5, Distance = 6 };
double uniform(std::uint64_t seed, Stream stream, std::uint64_t a, std::uint64_t b, std::uint64_t c);
double normal(std::uint64_t seed, Stream stream, std::uint64_t a, std::uint64_t b, std::uint64_t c);
}  // namespace rng

struct LinkDraw {
  bool alive = true;
  double q = 1.0;
  /// B_hat or P_hat entry: weight + bias + fluctuation.
  double weight = 0.0;
};

/// One iteration's environment, aligned with `sys.links`.
struct EnvironmentSample {
  std::vector<LinkDraw> links;
  /// links.size() x m additive channel noise.
  Eigen::MatrixXd channel_noise;
};

EnvironmentSample sample_environment(const NoiseModel& model, const SystemMatrices& sys, long t);

/// B_hat(t) and P_hat(t) as sparse matrices.
SparseRowMatrix sampled_B(const EnvironmentSample& sample, const SystemMatrices& sys);
SparseRowMatrix sampled_P(const EnvironmentSample& sample, const SystemMatrices& sys);

/// Decreasing gain sequence satisfying the persistence condition.
class WeightSchedule {
 public:
  enum class Family { Harmonic, Power };

  /// alpha(t) = a / (t + 1), a > 0.
  static WeightSchedule harmonic(double a);
  /// alpha(t) = 1 / (t + 1)^p, p in (0.5, 1].
  static WeightSchedule power(double p);

  double operator()(long t) const;
  Family family() const noexcept { return family_; }
  double parameter() const noexcept { return param_; }
  /// "harmonic:<a>" or "power:<p>".
  std::string describe() const;

 private:
  WeightSchedule(Family family, double param) : family_(family), param_(param) {}

  Family family_;
  double param_;
};

/// Parses "harmonic:<a>" / "power:<p>". Throws PersistenceViolation for
/// parameters that break sum alpha = inf, sum alpha^2 < inf, InvalidArgument
/// for malformed text.
WeightSchedule make_weight_schedule(std::string_view spec);

/// One DLRE update with gain `alpha_t` using the environment drawn for `t`.
Eigen::MatrixXd dlre_step(const Eigen::MatrixXd& x, const SystemMatrices& sys, const AnchorBlock& anchors,
                          const NoiseModel& model, long t, double alpha_t, int* messages = nullptr);
Eigen::MatrixXd dlre_step(const Eigen::MatrixXd& x, const SystemMatrices& sys, const AnchorBlock& anchors,
                          const NoiseModel& model, const WeightSchedule& schedule, long t);

/// E[x(t+1) | x(t)] = x - alpha [(I - P - S_P) x - (B + S_B) U].
Eigen::MatrixXd dlre_mean_step(const Eigen::MatrixXd& x, const SystemMatrices& sys, const AnchorBlock& anchors,
                               const NoiseModel& model, double alpha_t);

struct DlreLimit {
  Eigen::MatrixXd d_star;
  /// Frobenius distance between d_star and the exact locations.
  double e_l = 0.0;
};

/// d* = (I - P - S_P)^-1 (B + S_B) U. Throws SingularSystem when
/// rho(P + S_P) >= 1.
DlreLimit dlre_limit(const SystemMatrices& sys, const AnchorBlock& anchors, const NoiseModel& model);

struct DlreRunOptions {
  long max_iters = 100000;
  long snapshot_stride = 10;
  std::optional<Eigen::MatrixXd> oracle;
  std::uint64_t seed = 0;
};

/// Runs max_iters DLRE steps from `initial` (no early stop: the gain keeps
/// shrinking but the noise never vanishes).
RunTrace run_dlre(const IterationState& initial, const SystemMatrices& sys, const AnchorBlock& anchors,
                  const NoiseModel& model, const WeightSchedule& schedule, const DlreRunOptions& options);

struct BiasPair {
  SparseRowMatrix S_B;
  SparseRowMatrix S_P;
};

/// Random biases on the link pattern, each block scaled to Frobenius norm `norm`.
BiasPair make_bias(const SystemMatrices& sys, double norm, std::uint64_t seed);

/// Noise model induced by Gaussian errors (std `distance_sigma`) on measured
/// distances: weights are recomputed from perturbed distances `samples`
/// times, the mean deviation becomes the bias and the mean per-entry variance
/// the fluctuation variance.
NoiseModel noise_from_distance_errors(const SensorField& field, std::span<const TriangulationSet> tris,
                                      const SystemMatrices& sys, double distance_sigma, int samples,
                                      std::uint64_t seed);

}  // namespace diloc
