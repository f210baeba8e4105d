#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "diloc/system.hpp"

namespace diloc {
namespace {

SparseRowMatrix sparse(const Eigen::MatrixXd& dense) { return dense.sparseView(); }

struct Fixture {
  SensorField field = seven_node_field();
  std::vector<TriangulationSet> tris = triangulate_all(field, 0.5);
  SystemMatrices sys = build_system_matrices(field, tris);
  AnchorBlock anchors = anchor_block(field);
};

TEST(SystemMatrices, FixtureSparsityPattern) {
  const Fixture fx;
  ASSERT_EQ(fx.sys.M, 4);
  ASSERT_EQ(fx.sys.B.rows(), 4);
  ASSERT_EQ(fx.sys.B.cols(), 3);
  ASSERT_EQ(fx.sys.P.cols(), 4);
  // Triangulation sets {1,5,7}, {4,6,7}, {2,5,7}, {3,4,6}.
  const std::vector<std::set<std::pair<int, int>>> b_expected{{{0, 0}}, {}, {{2, 1}}, {{3, 2}}};
  const std::set<std::pair<int, int>> p_expected{{0, 1}, {0, 3}, {1, 0}, {1, 2}, {1, 3}, {2, 1}, {2, 3}, {3, 0}, {3, 2}};
  std::set<std::pair<int, int>> b_nz, p_nz;
  for (int r = 0; r < 4; ++r) {
    for (SparseRowMatrix::InnerIterator it(fx.sys.B, r); it; ++it)
      if (it.value() != 0.0) b_nz.insert({r, static_cast<int>(it.col())});
    for (SparseRowMatrix::InnerIterator it(fx.sys.P, r); it; ++it)
      if (it.value() != 0.0) p_nz.insert({r, static_cast<int>(it.col())});
  }
  std::set<std::pair<int, int>> b_all;
  for (const auto& s : b_expected) b_all.insert(s.begin(), s.end());
  EXPECT_EQ(b_nz, b_all);
  EXPECT_EQ(p_nz, p_expected);
  for (int r = 0; r < 4; ++r) {
    EXPECT_EQ(fx.sys.row_links(r).size(), 3u);
    EXPECT_NEAR(fx.sys.B.row(r).sum() + fx.sys.P.row(r).sum(), 1.0, 1e-12);
    EXPECT_EQ(fx.sys.P.coeff(r, r), 0.0);
  }
}

TEST(SystemMatrices, MissingTriangulation) {
  const Fixture fx;
  std::vector<TriangulationSet> partial(fx.tris.begin(), fx.tris.begin() + 3);
  try {
    build_system_matrices(fx.field, partial);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingTriangulation);
  }
}

TEST(SpectralRadius, SmallCases) {
  EXPECT_NEAR(spectral_radius(sparse(Eigen::MatrixXd::Zero(3, 3))).value, 0.0, 1e-10);
  Eigen::MatrixXd swap(2, 2);
  swap << 0, 0.5, 0.5, 0;
  const SpectralEstimate e = spectral_radius(sparse(swap));
  EXPECT_TRUE(e.converged);
  EXPECT_NEAR(e.value, 0.5, 1e-9);
  Eigen::MatrixXd upper(2, 2);
  upper << 0.3, 1.0, 0.0, 0.2;
  EXPECT_NEAR(spectral_radius(sparse(upper)).value, 0.3, 1e-6);
}

TEST(SpectralRadius, BelowOneForTriangulatedFields) {
  Eigen::MatrixXd a(3, 2);
  a << 0, 0, 10, 0, 5, 9;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const SensorField f = generate_uniform_field(2, 47, a, s);
    const SystemMatrices sys = build_system_matrices(f, triangulate_all(f, default_initial_radius(f)));
    const SpectralEstimate e = spectral_radius(sys.P);
    EXPECT_TRUE(e.converged);
    EXPECT_GT(e.value, 0.0);
    EXPECT_LT(e.value, 1.0);
    const Eigen::VectorXcd ev = Eigen::MatrixXd(sys.P).eigenvalues();
    EXPECT_NEAR(e.value, ev.cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(ExactLocations, FixtureRecoversCoordinates) {
  const Fixture fx;
  const Eigen::MatrixXd x = exact_locations_oracle(fx.sys, fx.anchors);
  EXPECT_LT((x - fx.field.true_sensor_coordinates()).cwiseAbs().maxCoeff(), 1e-8);
  const Eigen::MatrixXd residual = x - Eigen::MatrixXd(fx.sys.P) * x - Eigen::MatrixXd(fx.sys.B) * fx.anchors.U;
  EXPECT_LT(residual.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ExactLocations, RandomFieldRecoversCoordinates) {
  Eigen::MatrixXd a(3, 2);
  a << 0, 0, 10, 0, 5, 9;
  const SensorField f = generate_uniform_field(2, 47, a, 8);
  const SystemMatrices sys = build_system_matrices(f, triangulate_all(f, default_initial_radius(f)));
  EXPECT_TRUE(absorbing_check(sys));
  const Eigen::MatrixXd x = exact_locations_oracle(sys, anchor_block(f));
  EXPECT_LT((x - f.true_sensor_coordinates()).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(ExactLocations, LargeSystemUsesIterativeSolve) {
  // Chain: sensor i averages its neighbours, the ends tie to the anchors.
  const int M = 6000;
  std::vector<Eigen::Triplet<double>> bt, pt;
  for (int i = 0; i < M; ++i) {
    if (i == 0) bt.emplace_back(i, 0, 0.5); else pt.emplace_back(i, i - 1, 0.5);
    if (i == M - 1) bt.emplace_back(i, 1, 0.5); else pt.emplace_back(i, i + 1, 0.5);
  }
  SparseRowMatrix B(M, 2), P(M, M);
  B.setFromTriplets(bt.begin(), bt.end());
  P.setFromTriplets(pt.begin(), pt.end());
  const SystemMatrices sys = make_system(1, B, P);
  AnchorBlock anchors{Eigen::MatrixXd(2, 1)};
  anchors.U << 0.0, static_cast<double>(M + 1);
  const Eigen::MatrixXd x = exact_locations_oracle(sys, anchors);
  for (int i = 0; i < M; i += 997) EXPECT_NEAR(x(i, 0), i + 1.0, 1e-4);
}

TEST(ExactLocations, SingularWhenNotAbsorbing) {
  Eigen::MatrixXd Bd = Eigen::MatrixXd::Zero(3, 3), Pd = Eigen::MatrixXd::Zero(3, 3);
  Bd(0, 0) = 1.0;
  Pd(1, 2) = 1.0;
  Pd(2, 1) = 1.0;
  const SystemMatrices sys = make_system(2, sparse(Bd), sparse(Pd));
  EXPECT_FALSE(absorbing_check(sys));
  AnchorBlock anchors{Eigen::MatrixXd::Ones(3, 2)};
  try {
    exact_locations_oracle(sys, anchors);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularSystem);
  }
}

TEST(AbsorbingCheck, ChainReachingAnchor) {
  Eigen::MatrixXd Bd = Eigen::MatrixXd::Zero(3, 2), Pd = Eigen::MatrixXd::Zero(3, 3);
  Bd(2, 0) = 1.0;
  Pd(0, 1) = 1.0;
  Pd(1, 2) = 1.0;
  EXPECT_TRUE(absorbing_check(make_system(1, sparse(Bd), sparse(Pd))));
  EXPECT_TRUE(absorbing_check(seven_node_field().sensor_count() > 0 ? Fixture().sys : SystemMatrices{}));
}

TEST(FundamentalSeries, EdgeCases) {
  Eigen::MatrixXd half(1, 1);
  half << 0.5;
  EXPECT_NEAR(fundamental_matrix_series(sparse(half), 0)(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(fundamental_matrix_series(sparse(half), 60)(0, 0), 2.0, 1e-12);

  const Fixture fx;
  const Eigen::MatrixXd exact = Eigen::MatrixXd(fx.sys.P).eval();
  const Eigen::MatrixXd inverse = (Eigen::MatrixXd::Identity(4, 4) - exact).inverse();
  double prev = std::numeric_limits<double>::infinity();
  for (int terms : {5, 10, 20, 40, 80}) {
    const double err = (fundamental_matrix_series(fx.sys.P, terms) - inverse).norm();
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 1e-10);
}

TEST(MatrixDump, Format) {
  const Fixture fx;
  std::ostringstream out;
  write_matrix_dump(fx.sys, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "# block B 4 3");
  int b_lines = 0, p_lines = 0;
  bool in_p = false;
  while (std::getline(in, line)) {
    if (line.rfind("# block P", 0) == 0) {
      EXPECT_EQ(line, "# block P 4 4");
      in_p = true;
      continue;
    }
    std::istringstream rec(line);
    int r = -1, c = -1;
    double v = 0.0;
    ASSERT_TRUE(rec >> r >> c >> v) << line;
    const double expected = in_p ? fx.sys.P.coeff(r, c) : fx.sys.B.coeff(r, c);
    EXPECT_EQ(v, expected);
    (in_p ? p_lines : b_lines)++;
  }
  EXPECT_EQ(b_lines, 3);
  EXPECT_EQ(p_lines, 9);
}

}  // namespace
}  // namespace diloc
