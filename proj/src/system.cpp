#include "diloc/system.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <random>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

namespace diloc {
namespace {

constexpr Eigen::Index kDirectSolveLimit = 5000;
constexpr double kIterativeResidual = 1e-12;

}  // namespace

AnchorBlock anchor_block(const SensorField& field) { return AnchorBlock{field.anchor_coordinates()}; }

SystemMatrices make_system(int m, SparseRowMatrix B, SparseRowMatrix P) {
  if (B.cols() != m + 1 || P.rows() != P.cols() || B.rows() != P.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "B must be M x (m+1) and P must be M x M");
  }
  B.makeCompressed();
  P.makeCompressed();
  SystemMatrices sys;
  sys.m = m;
  sys.M = static_cast<int>(P.rows());
  sys.B = std::move(B);
  sys.P = std::move(P);
  sys.row_start.reserve(static_cast<std::size_t>(sys.M) + 1);
  sys.row_start.push_back(0);
  for (int i = 0; i < sys.M; ++i) {
    for (SparseRowMatrix::InnerIterator it(sys.B, i); it; ++it) {
      sys.links.push_back(Link{i, static_cast<int>(it.col()), true, it.value()});
    }
    for (SparseRowMatrix::InnerIterator it(sys.P, i); it; ++it) {
      sys.links.push_back(Link{i, static_cast<int>(it.col()), false, it.value()});
    }
    sys.row_start.push_back(sys.links.size());
  }
  return sys;
}

SystemMatrices build_system_matrices(const SensorField& field, std::span<const TriangulationSet> tris) {
  const int m = field.dimension();
  const int M = field.sensor_count();
  std::vector<const TriangulationSet*> by_row(static_cast<std::size_t>(M), nullptr);
  for (const TriangulationSet& t : tris) {
    if (!field.is_sensor(t.sensor_id)) throw Error(ErrorKind::UnknownNode, "triangulation for non-sensor " + std::to_string(t.sensor_id));
    by_row[static_cast<std::size_t>(t.sensor_id - field.first_sensor_id())] = &t;
  }
  std::vector<Eigen::Triplet<double>> b_entries;
  std::vector<Eigen::Triplet<double>> p_entries;
  for (int row = 0; row < M; ++row) {
    const TriangulationSet* t = by_row[static_cast<std::size_t>(row)];
    if (t == nullptr) {
      throw Error(ErrorKind::MissingTriangulation, "sensor " + std::to_string(field.first_sensor_id() + row));
    }
    const auto& w = t->weights;
    if (w.neighbor_ids.size() != static_cast<std::size_t>(m + 1) || w.weights.size() != w.neighbor_ids.size()) {
      throw Error(ErrorKind::DimensionMismatch, "triangulation set must have m+1 weighted neighbors");
    }
    for (std::size_t k = 0; k < w.neighbor_ids.size(); ++k) {
      const NodeId n = w.neighbor_ids[k];
      if (field.is_anchor(n)) {
        b_entries.emplace_back(row, n - 1, w.weights[k]);
      } else if (field.is_sensor(n) && n != t->sensor_id) {
        p_entries.emplace_back(row, n - field.first_sensor_id(), w.weights[k]);
      } else {
        throw Error(ErrorKind::UnknownNode, "bad neighbor " + std::to_string(n));
      }
    }
  }
  SparseRowMatrix B(M, m + 1);
  SparseRowMatrix P(M, M);
  B.setFromTriplets(b_entries.begin(), b_entries.end());
  P.setFromTriplets(p_entries.begin(), p_entries.end());
  return make_system(m, std::move(B), std::move(P));
}

SpectralEstimate spectral_radius(const SparseRowMatrix& A, double tol, int max_iters, std::uint64_t seed) {
  if (A.rows() != A.cols()) throw Error(ErrorKind::DimensionMismatch, "matrix must be square");
  SpectralEstimate est;
  const Eigen::Index n = A.rows();
  if (n == 0) {
    est.converged = true;
    return est;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> start(0.5, 1.5);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = start(rng);
  v.normalize();

  double previous = -1.0;
  for (int it = 1; it <= max_iters; ++it) {
    Eigen::VectorXd w = v + A * v;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double ratio = w(i) / v(i);
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    const double norm = w.norm();
    est.iterations = it;
    // Collatz-Wielandt: lo <= 1 + rho <= hi for positive v.
    if (hi - lo < tol) {
      est.value = 0.5 * (lo + hi) - 1.0;
      est.converged = true;
      return est;
    }
    est.value = norm - 1.0;
    if (std::abs(norm - previous) < tol) {
      est.converged = true;
      return est;
    }
    previous = norm;
    v = w / norm;
  }
  return est;
}

Eigen::MatrixXd solve_shifted_identity(const SparseRowMatrix& A, const Eigen::MatrixXd& rhs) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || rhs.rows() != n) throw Error(ErrorKind::DimensionMismatch, "system size mismatch");
  if (n == 0) return Eigen::MatrixXd(0, rhs.cols());
  Eigen::SparseMatrix<double> I(n, n);
  I.setIdentity();
  Eigen::SparseMatrix<double> K = I - Eigen::SparseMatrix<double>(A);
  K.makeCompressed();

  Eigen::MatrixXd X;
  if (n <= kDirectSolveLimit) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(K);
    if (lu.info() != Eigen::Success) throw Error(ErrorKind::SingularSystem, "I - P is singular");
    X = lu.solve(rhs);
    if (lu.info() != Eigen::Success) throw Error(ErrorKind::SingularSystem, "I - P solve failed");
  } else {
    Eigen::BiCGSTAB<Eigen::SparseMatrix<double>> solver;
    solver.setTolerance(kIterativeResidual);
    solver.setMaxIterations(static_cast<int>(10 * n));
    solver.compute(K);
    X = solver.solve(rhs);
    if (solver.info() != Eigen::Success) throw Error(ErrorKind::SingularSystem, "iterative solve did not converge");
  }
  if (!X.allFinite()) throw Error(ErrorKind::SingularSystem, "non-finite solution");
  return X;
}

Eigen::MatrixXd exact_locations_oracle(const SystemMatrices& sys, const AnchorBlock& anchors) {
  if (anchors.U.rows() != sys.m + 1 || anchors.U.cols() != sys.m) {
    throw Error(ErrorKind::DimensionMismatch, "anchor block must be (m+1) x m");
  }
  if (!absorbing_check(sys)) throw Error(ErrorKind::SingularSystem, "some sensor never reaches an anchor");
  return solve_shifted_identity(sys.P, sys.B * anchors.U);
}

Eigen::MatrixXd fundamental_matrix_series(const SparseRowMatrix& P, int terms) {
  if (P.rows() != P.cols()) throw Error(ErrorKind::DimensionMismatch, "matrix must be square");
  if (terms < 0) throw Error(ErrorKind::InvalidArgument, "terms must be nonnegative");
  const Eigen::Index n = P.rows();
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd sum = power;
  for (int k = 1; k <= terms; ++k) {
    power = P * power;
    sum += power;
  }
  return sum;
}

bool absorbing_check(const SystemMatrices& sys) {
  const auto M = static_cast<std::size_t>(sys.M);
  // Reverse P edges: who listens to sensor j.
  std::vector<std::vector<int>> listeners(M);
  std::vector<bool> reaches(M, false);
  std::deque<int> frontier;
  for (const Link& link : sys.links) {
    if (link.weight == 0.0) continue;
    if (link.anchor) {
      if (!reaches[static_cast<std::size_t>(link.row)]) {
        reaches[static_cast<std::size_t>(link.row)] = true;
        frontier.push_back(link.row);
      }
    } else {
      listeners[static_cast<std::size_t>(link.col)].push_back(link.row);
    }
  }
  while (!frontier.empty()) {
    const int j = frontier.front();
    frontier.pop_front();
    for (int i : listeners[static_cast<std::size_t>(j)]) {
      if (!reaches[static_cast<std::size_t>(i)]) {
        reaches[static_cast<std::size_t>(i)] = true;
        frontier.push_back(i);
      }
    }
  }
  return std::all_of(reaches.begin(), reaches.end(), [](bool b) { return b; });
}

void write_matrix_dump(const SystemMatrices& sys, std::ostream& out) {
  const auto old_precision = out.precision(17);
  auto dump = [&](const char* name, const SparseRowMatrix& A) {
    out << "# block " << name << " " << A.rows() << " " << A.cols() << "\n";
    for (Eigen::Index i = 0; i < A.outerSize(); ++i)
      for (SparseRowMatrix::InnerIterator it(A, i); it; ++it) out << it.row() << " " << it.col() << " " << it.value() << "\n";
  };
  dump("B", sys.B);
  dump("P", sys.P);
  out.precision(old_precision);
}

}  // namespace diloc
