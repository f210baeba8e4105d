#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "diloc/system.hpp"

namespace diloc {

/// Network state C(t): anchor rows 0..m hold U, sensor rows follow in id order.
struct IterationState {
  Eigen::MatrixXd C;
  long t = 0;
  double alpha = 1.0;

  Eigen::Index sensor_rows() const { return C.rows() - C.cols() - 1; }
  auto sensors() const { return C.bottomRows(sensor_rows()); }
  auto sensors() { return C.bottomRows(sensor_rows()); }
};

/// Anchors from `anchors`, sensors from `X` (M x m).
IterationState make_state(const AnchorBlock& anchors, const Eigen::MatrixXd& X);

/// Sensors drawn i.i.d. uniform over the bounding box of the anchors, so
/// starting points may lie outside the anchor hull.
IterationState random_initial_state(const AnchorBlock& anchors, int M, std::uint64_t seed);

/// Per-sensor work done in one synchronous step. Messages count neighbor
/// states received; ops count the multiplications and additions of the
/// update, per coordinate.
struct StepCounters {
  std::vector<int> messages;
  std::vector<int> ops;
};

/// c_l(t+1) = sum_k a_lk c_k(t) for every sensor (Jacobi sweep).
IterationState diloc_step(const IterationState& state, const SystemMatrices& sys, const AnchorBlock& anchors,
                          StepCounters* counters = nullptr);

/// X(t+1) = (1 - alpha) X(t) + alpha (P X(t) + B U). alpha = 1 gives exactly
/// the plain step. Throws InvalidAlpha outside (0, 1].
IterationState diloc_rel_step(const IterationState& state, const SystemMatrices& sys, const AnchorBlock& anchors,
                              double alpha, StepCounters* counters = nullptr);

/// (1 - alpha) I + alpha P.
SparseRowMatrix relaxed_iteration_matrix(const SparseRowMatrix& P, double alpha);

enum class Mode { Diloc, DilocRel, Dlre };

const char* to_string(Mode mode);

struct RunOptions {
  Mode mode = Mode::Diloc;
  double alpha = 1.0;
  double step_tol = 1e-10;
  long max_iters = 100000;
  /// Sensor snapshots are kept every `snapshot_stride` iterations plus the final one.
  long snapshot_stride = 10;
  /// Ground truth for the oracle-error column; test and simulation only.
  std::optional<Eigen::MatrixXd> oracle;
  std::uint64_t seed = 0;
};

struct TraceRow {
  long iteration = 0;
  double step_norm = 0.0;
  std::optional<double> oracle_error;
  long long messages_total = 0;
  double alpha = 1.0;
};

struct Snapshot {
  long iteration = 0;
  Eigen::MatrixXd sensors;
};

struct RunTrace {
  Mode mode = Mode::Diloc;
  std::uint64_t seed = 0;
  /// One row per completed iteration 1..T.
  std::vector<TraceRow> rows;
  std::vector<Snapshot> snapshots;
  std::optional<long> converged_at;
  /// Rows carry oracle_error.
  bool has_oracle = false;
  /// Counters of the last step; `accounting_consistent` is false if any step
  /// differed from them.
  StepCounters counters;
  bool accounting_consistent = true;
  Eigen::MatrixXd final_sensors;
  /// exp(slope) of a log-linear fit to the tail of the step norms.
  std::optional<double> decay_rate;
  /// Spectral radius governing the iteration (rho(P) or rho(J)).
  std::optional<double> reference_rate;
};

/// Iterates until the successive-step infinity norm drops below step_tol or
/// max_iters is reached. Non-convergence is reported, never thrown.
RunTrace run_to_convergence(const IterationState& initial, const SystemMatrices& sys, const AnchorBlock& anchors,
                            const RunOptions& options);

/// Geometric rate exp(slope) of log(values) over the second half of the
/// stretch that stays above `floor`; nullopt with fewer than 4 usable points.
std::optional<double> estimate_decay_rate(const std::vector<double>& values, double floor);

/// Snapshot bookkeeping shared by the deterministic and random runners.
void record_snapshot(RunTrace& trace, long iteration, const Eigen::MatrixXd& sensors, long stride, bool final);

}  // namespace diloc
