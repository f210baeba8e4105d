#include <gtest/gtest.h>

#include <cmath>

#include "diloc/engine.hpp"

namespace diloc {
namespace {

struct Fixture {
  SensorField field = seven_node_field();
  SystemMatrices sys = build_system_matrices(field, triangulate_all(field, 0.5));
  AnchorBlock anchors = anchor_block(field);
  Eigen::MatrixXd exact = exact_locations_oracle(sys, anchors);
};

TEST(DilocStep, ExactLocationsAreFixedPoint) {
  const Fixture fx;
  const IterationState s = make_state(fx.anchors, fx.exact);
  const IterationState next = diloc_step(s, fx.sys, fx.anchors);
  EXPECT_LT((next.sensors() - fx.exact).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(next.C.topRows(3), fx.anchors.U);
  EXPECT_EQ(next.t, 1);
}

TEST(DilocStep, SingleSensorConvergesInOneStep) {
  Eigen::MatrixXd a(3, 2);
  a << 0, 0, 10, 0, 5, 9;
  Eigen::MatrixXd s(1, 2);
  s << 4, 3;
  const SensorField f(2, a, s);
  const SystemMatrices sys = build_system_matrices(f, triangulate_all(f, 0.5));
  const AnchorBlock anchors = anchor_block(f);
  const IterationState next = diloc_step(random_initial_state(anchors, 1, 4), sys, anchors);
  EXPECT_LT((next.sensors() - s).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DilocStep, FixtureConvergesFromRandomStart) {
  const Fixture fx;
  IterationState s = random_initial_state(fx.anchors, 4, 2);
  for (int i = 0; i < 200; ++i) s = diloc_step(s, fx.sys, fx.anchors);
  EXPECT_LT((s.sensors() - fx.field.true_sensor_coordinates()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(DilocStep, StartOutsideHull) {
  const Fixture fx;
  Eigen::MatrixXd far = Eigen::MatrixXd::Constant(4, 2, 1e3);
  far(1, 0) = -500.0;
  RunOptions opt;
  opt.oracle = fx.exact;
  const RunTrace trace = run_to_convergence(make_state(fx.anchors, far), fx.sys, fx.anchors, opt);
  ASSERT_TRUE(trace.converged_at.has_value());
  EXPECT_LT((trace.final_sensors - fx.exact).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(DilocRel, AlphaOneIsBitIdentical) {
  const Fixture fx;
  IterationState a = random_initial_state(fx.anchors, 4, 9);
  IterationState b = a;
  for (int i = 0; i < 30; ++i) {
    a = diloc_step(a, fx.sys, fx.anchors);
    b = diloc_rel_step(b, fx.sys, fx.anchors, 1.0);
    ASSERT_EQ(a.C, b.C);
  }
}

TEST(DilocRel, SameLimitAndInvalidAlpha) {
  const Fixture fx;
  RunOptions opt;
  opt.mode = Mode::DilocRel;
  opt.alpha = 0.5;
  const RunTrace trace = run_to_convergence(random_initial_state(fx.anchors, 4, 3), fx.sys, fx.anchors, opt);
  ASSERT_TRUE(trace.converged_at.has_value());
  EXPECT_LT((trace.final_sensors - fx.exact).cwiseAbs().maxCoeff(), 1e-8);
  const IterationState s = make_state(fx.anchors, fx.exact);
  for (double bad : {0.0, -0.1, 1.5, std::nan("")}) {
    try {
      diloc_rel_step(s, fx.sys, fx.anchors, bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::InvalidAlpha);
    }
  }
}

TEST(DilocRel, IterationMatrix) {
  const Fixture fx;
  const SparseRowMatrix J = relaxed_iteration_matrix(fx.sys.P, 0.25);
  const Eigen::MatrixXd expected = 0.75 * Eigen::MatrixXd::Identity(4, 4) + 0.25 * Eigen::MatrixXd(fx.sys.P);
  EXPECT_LT((Eigen::MatrixXd(J) - expected).cwiseAbs().maxCoeff(), 1e-15);
  const double rho_j = spectral_radius(J).value;
  EXPECT_NEAR(rho_j, 0.75 + 0.25 * spectral_radius(fx.sys.P).value, 1e-8);
}

TEST(Run, DecayRateTracksSpectralRadius) {
  Eigen::MatrixXd a(3, 2);
  a << 0, 0, 10, 0, 5, 9;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const SensorField f = generate_uniform_field(2, 47, a, seed);
    const SystemMatrices sys = build_system_matrices(f, triangulate_all(f, default_initial_radius(f)));
    const AnchorBlock anchors = anchor_block(f);
    RunOptions opt;
    opt.oracle = exact_locations_oracle(sys, anchors);
    const RunTrace trace = run_to_convergence(random_initial_state(anchors, f.sensor_count(), seed), sys, anchors, opt);
    ASSERT_TRUE(trace.converged_at.has_value());
    ASSERT_TRUE(trace.decay_rate.has_value());
    ASSERT_TRUE(trace.reference_rate.has_value());
    EXPECT_NEAR(*trace.decay_rate, *trace.reference_rate, 0.05);
    EXPECT_LT(*trace.rows.back().oracle_error, 1e-6);
  }
}

TEST(Run, CountersAndTrace) {
  const Fixture fx;
  RunOptions opt;
  opt.snapshot_stride = 7;
  const RunTrace trace = run_to_convergence(random_initial_state(fx.anchors, 4, 5), fx.sys, fx.anchors, opt);
  ASSERT_TRUE(trace.converged_at.has_value());
  EXPECT_EQ(static_cast<long>(trace.rows.size()), *trace.converged_at);
  EXPECT_TRUE(trace.accounting_consistent);
  for (int m : trace.counters.messages) EXPECT_EQ(m, 3);
  for (int o : trace.counters.ops) EXPECT_EQ(o, 5);
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    EXPECT_EQ(trace.rows[i].iteration, static_cast<long>(i) + 1);
    EXPECT_EQ(trace.rows[i].messages_total, 12LL * static_cast<long long>(i + 1));
    EXPECT_FALSE(trace.rows[i].oracle_error.has_value());
  }
  for (std::size_t i = 0; i + 1 < trace.snapshots.size(); ++i) EXPECT_EQ(trace.snapshots[i].iteration % 7, 0);
  EXPECT_EQ(trace.snapshots.back().iteration, *trace.converged_at);
  EXPECT_EQ(trace.snapshots.back().sensors, trace.final_sensors);

  opt.mode = Mode::DilocRel;
  opt.alpha = 0.5;
  StepCounters c;
  diloc_rel_step(make_state(fx.anchors, fx.exact), fx.sys, fx.anchors, 0.5, &c);
  for (int o : c.ops) EXPECT_EQ(o, 8);
}

TEST(Run, ZeroIterations) {
  const Fixture fx;
  RunOptions opt;
  opt.max_iters = 0;
  const RunTrace trace = run_to_convergence(make_state(fx.anchors, fx.exact), fx.sys, fx.anchors, opt);
  EXPECT_TRUE(trace.rows.empty());
  EXPECT_FALSE(trace.converged_at.has_value());
  ASSERT_EQ(trace.snapshots.size(), 1u);
  EXPECT_EQ(trace.snapshots[0].iteration, 0);
}

TEST(DecayRate, Estimator) {
  std::vector<double> v;
  for (int i = 0; i < 100; ++i) v.push_back(std::pow(0.8, i));
  ASSERT_TRUE(estimate_decay_rate(v, 1e-30).has_value());
  EXPECT_NEAR(*estimate_decay_rate(v, 1e-30), 0.8, 1e-9);
  EXPECT_FALSE(estimate_decay_rate({1.0, 0.5}, 1e-30).has_value());
}

}  // namespace
}  // namespace diloc
