#include "diloc/engine.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace diloc {
namespace {

void check_state(const IterationState& state, const SystemMatrices& sys, const AnchorBlock& anchors) {
  if (state.C.cols() != sys.m || state.C.rows() != sys.m + 1 + sys.M || anchors.U.rows() != sys.m + 1 ||
      anchors.U.cols() != sys.m) {
    throw Error(ErrorKind::DimensionMismatch, "state, system and anchor block disagree on m or M");
  }
}

IterationState relaxed_step(const IterationState& state, const SystemMatrices& sys, const AnchorBlock& anchors,
                            double alpha, StepCounters* counters) {
  check_state(state, sys, anchors);
  const bool plain = alpha == 1.0;
  const double keep = 1.0 - alpha;
  IterationState next;
  next.C = state.C;
  next.t = state.t + 1;
  next.alpha = alpha;
  const Eigen::Index offset = sys.m + 1;
  if (counters != nullptr) {
    counters->messages.assign(static_cast<std::size_t>(sys.M), 0);
    counters->ops.assign(static_cast<std::size_t>(sys.M), 0);
  }
  for (int row = 0; row < sys.M; ++row) {
    const auto links = sys.row_links(row);
    int ops = 0;
    for (int j = 0; j < sys.m; ++j) {
      double acc = 0.0;
      bool first = true;
      for (const Link& link : links) {
        const double value = link.anchor ? anchors.U(link.col, j) : state.C(offset + link.col, j);
        const double term = link.weight * value;
        if (first) {
          acc = term;
          ops += 1;
        } else {
          acc += term;
          ops += 2;
        }
        first = false;
      }
      if (plain) {
        next.C(offset + row, j) = acc;
      } else {
        next.C(offset + row, j) = keep * state.C(offset + row, j) + alpha * acc;
        ops += 3;
      }
    }
    if (counters != nullptr) {
      counters->messages[static_cast<std::size_t>(row)] = static_cast<int>(links.size());
      counters->ops[static_cast<std::size_t>(row)] = ops / std::max(sys.m, 1);
    }
  }
  return next;
}

double inf_norm(const Eigen::MatrixXd& A) { return A.size() == 0 ? 0.0 : A.cwiseAbs().maxCoeff(); }

}  // namespace

IterationState make_state(const AnchorBlock& anchors, const Eigen::MatrixXd& X) {
  const Eigen::Index m = anchors.U.cols();
  if (X.cols() != m && X.rows() > 0) throw Error(ErrorKind::DimensionMismatch, "sensor block must have m columns");
  IterationState s;
  s.C.resize(anchors.U.rows() + X.rows(), m);
  s.C.topRows(anchors.U.rows()) = anchors.U;
  s.C.bottomRows(X.rows()) = X;
  return s;
}

IterationState random_initial_state(const AnchorBlock& anchors, int M, std::uint64_t seed) {
  const Eigen::RowVectorXd lo = anchors.U.colwise().minCoeff();
  const Eigen::RowVectorXd hi = anchors.U.colwise().maxCoeff();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd X(M, anchors.U.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = lo(j) + (hi(j) - lo(j)) * unit(rng);
  return make_state(anchors, X);
}

IterationState diloc_step(const IterationState& state, const SystemMatrices& sys, const AnchorBlock& anchors,
                          StepCounters* counters) {
  return relaxed_step(state, sys, anchors, 1.0, counters);
}

IterationState diloc_rel_step(const IterationState& state, const SystemMatrices& sys, const AnchorBlock& anchors,
                              double alpha, StepCounters* counters) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorKind::InvalidAlpha, "alpha must lie in (0, 1]");
  return relaxed_step(state, sys, anchors, alpha, counters);
}

SparseRowMatrix relaxed_iteration_matrix(const SparseRowMatrix& P, double alpha) {
  SparseRowMatrix I(P.rows(), P.cols());
  I.setIdentity();
  SparseRowMatrix J = (1.0 - alpha) * I + alpha * P;
  J.prune(0.0);
  return J;
}

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::Diloc: return "diloc";
    case Mode::DilocRel: return "diloc_rel";
    case Mode::Dlre: return "dlre";
  }
  return "unknown";
}

std::optional<double> estimate_decay_rate(const std::vector<double>& values, double floor) {
  std::size_t end = 0;
  while (end < values.size() && values[end] > floor && std::isfinite(values[end])) ++end;
  const std::size_t begin = end / 2;
  if (end < begin + 4) return std::nullopt;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    const double x = static_cast<double>(i);
    const double y = std::log(values[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return std::exp(slope);
}

void record_snapshot(RunTrace& trace, long iteration, const Eigen::MatrixXd& sensors, long stride, bool final) {
  const bool on_stride = stride > 0 && iteration > 0 && iteration % stride == 0;
  if (!on_stride && !final) return;
  if (!trace.snapshots.empty() && trace.snapshots.back().iteration == iteration) return;
  trace.snapshots.push_back(Snapshot{iteration, sensors});
}

RunTrace run_to_convergence(const IterationState& initial, const SystemMatrices& sys, const AnchorBlock& anchors,
                            const RunOptions& options) {
  if (options.mode == Mode::Dlre) throw Error(ErrorKind::InvalidArgument, "DLRE runs go through run_dlre");
  if (!(options.step_tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "step_tol must be positive");
  const double alpha = options.mode == Mode::Diloc ? 1.0 : options.alpha;
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorKind::InvalidAlpha, "alpha must lie in (0, 1]");
  check_state(initial, sys, anchors);

  RunTrace trace;
  trace.mode = options.mode;
  trace.seed = options.seed;
  trace.has_oracle = options.oracle.has_value();
  const SparseRowMatrix governing = options.mode == Mode::Diloc ? sys.P : relaxed_iteration_matrix(sys.P, alpha);
  trace.reference_rate = spectral_radius(governing).value;

  IterationState state = initial;
  long long messages_total = 0;
  std::vector<double> steps;
  for (long t = 1; t <= options.max_iters; ++t) {
    StepCounters counters;
    IterationState next = options.mode == Mode::Diloc ? diloc_step(state, sys, anchors, &counters)
                                                      : diloc_rel_step(state, sys, anchors, alpha, &counters);
    if (t > 1 && (counters.messages != trace.counters.messages || counters.ops != trace.counters.ops)) {
      trace.accounting_consistent = false;
    }
    trace.counters = std::move(counters);
    for (int c : trace.counters.messages) messages_total += c;

    TraceRow row;
    row.iteration = t;
    row.step_norm = inf_norm(next.sensors() - state.sensors());
    if (options.oracle) row.oracle_error = inf_norm(next.sensors() - *options.oracle);
    row.messages_total = messages_total;
    row.alpha = alpha;
    trace.rows.push_back(row);
    steps.push_back(row.step_norm);
    state = std::move(next);

    const bool done = row.step_norm < options.step_tol;
    if (done) trace.converged_at = t;
    record_snapshot(trace, t, state.sensors(), options.snapshot_stride, done || t == options.max_iters);
    if (done) break;
  }
  if (trace.rows.empty()) record_snapshot(trace, 0, state.sensors(), options.snapshot_stride, true);
  trace.final_sensors = state.sensors();
  const double scale = std::max(1.0, inf_norm(anchors.U));
  trace.decay_rate = estimate_decay_rate(steps, 1e-13 * scale);
  return trace;
}

}  // namespace diloc
