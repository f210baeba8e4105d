#pragma once

// Coordinate-based reference computations. Test-only: none of this goes
// through the distance-based code paths it is used to check.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace diloc::testing {

/// Laplace expansion along the first row.
inline double laplace_determinant(const Eigen::MatrixXd& A) {
  const Eigen::Index n = A.rows();
  if (n == 1) return A(0, 0);
  if (n == 2) return A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0);
  double det = 0.0;
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::MatrixXd minor(n - 1, n - 1);
    for (Eigen::Index i = 1; i < n; ++i) {
      Eigen::Index cc = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == c) continue;
        minor(i - 1, cc++) = A(i, j);
      }
    }
    det += ((c % 2 == 0) ? 1.0 : -1.0) * A(0, c) * laplace_determinant(minor);
  }
  return det;
}

/// Bordered squared-distance matrix built straight from coordinates.
inline Eigen::MatrixXd bordered_from_points(const Eigen::MatrixXd& pts) {
  const Eigen::Index k = pts.rows();
  Eigen::MatrixXd cm = Eigen::MatrixXd::Zero(k + 1, k + 1);
  for (Eigen::Index i = 0; i < k; ++i) {
    cm(0, i + 1) = cm(i + 1, 0) = 1.0;
    for (Eigen::Index j = 0; j < k; ++j) cm(i + 1, j + 1) = (pts.row(i) - pts.row(j)).squaredNorm();
  }
  return cm;
}

/// |det[p1 - p0, ..., pm - p0]| / m!
inline double coordinate_volume(const Eigen::MatrixXd& pts) {
  const Eigen::Index m = pts.cols();
  Eigen::MatrixXd edges(m, m);
  for (Eigen::Index i = 0; i < m; ++i) edges.row(i) = pts.row(i + 1) - pts.row(0);
  double fact = 1.0;
  for (Eigen::Index i = 2; i <= m; ++i) fact *= static_cast<double>(i);
  return std::abs(laplace_determinant(edges)) / fact;
}

/// Solves [V^T; 1^T] lambda = [p; 1].
inline Eigen::VectorXd coordinate_barycentric(const Eigen::RowVectorXd& p, const Eigen::MatrixXd& simplex) {
  const Eigen::Index m = simplex.cols();
  Eigen::MatrixXd A(m + 1, m + 1);
  A.topRows(m) = simplex.transpose();
  A.row(m).setOnes();
  Eigen::VectorXd rhs(m + 1);
  rhs.head(m) = p.transpose();
  rhs(m) = 1.0;
  return A.fullPivLu().solve(rhs);
}

inline Eigen::MatrixXd random_points(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd pts(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) pts(i, j) = u(rng);
  return pts;
}

inline std::vector<int> iota_ids(int n, int first = 1) {
  std::vector<int> ids(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = first + i;
  return ids;
}

}  // namespace diloc::testing
