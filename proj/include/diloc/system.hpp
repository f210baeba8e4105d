#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "diloc/deployment.hpp"

namespace diloc {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// One nonzero of the augmented row [B | P]: sensor row `row` listens to
/// either anchor column `col` of B or sensor column `col` of P.
struct Link {
  int row = 0;
  int col = 0;
  bool anchor = false;
  double weight = 0.0;
};

/// Sparse blocks of the iteration matrix [[I, 0], [B, P]].
///
/// Row i of B and P belongs to sensor id first_sensor_id + i; column q of B to
/// anchor q+1. Every row of [B | P] holds exactly m+1 links.
struct SystemMatrices {
  int m = 0;
  int M = 0;
  SparseRowMatrix B;
  SparseRowMatrix P;
  /// Links grouped by row; row i occupies [row_start[i], row_start[i+1]).
  std::vector<Link> links;
  std::vector<std::size_t> row_start;

  NodeId first_sensor_id() const noexcept { return m + 2; }
  std::span<const Link> row_links(int row) const {
    return std::span(links).subspan(row_start[static_cast<std::size_t>(row)],
                                    row_start[static_cast<std::size_t>(row) + 1] - row_start[static_cast<std::size_t>(row)]);
  }
};

/// Anchor coordinates, one row per anchor. Never updated by any iteration.
struct AnchorBlock {
  Eigen::MatrixXd U;
};

AnchorBlock anchor_block(const SensorField& field);

/// Scatters the barycentric weights into B (anchor neighbors) and P (sensor
/// neighbors). Throws MissingTriangulation when a sensor has no set.
SystemMatrices build_system_matrices(const SensorField& field, std::span<const TriangulationSet> tris);

/// Assembles from explicit blocks (rows must already have the [B | P] arity
/// the caller wants; used for hand-built and perturbed systems).
SystemMatrices make_system(int m, SparseRowMatrix B, SparseRowMatrix P);

struct SpectralEstimate {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Perron root of a nonnegative square matrix by power iteration on the
/// shifted matrix I + A (the shift makes the Perron root strictly dominant
/// even for periodic A). Stops when the Collatz-Wielandt bracket or the
/// successive estimates settle within `tol`; otherwise reports the last
/// estimate with converged = false.
SpectralEstimate spectral_radius(const SparseRowMatrix& A, double tol = 1e-10, int max_iters = 10000, std::uint64_t seed = 1);

/// X* = (I - P)^-1 B U, the fixed point of the iteration. Throws
/// SingularSystem when some sensor cannot reach an anchor.
Eigen::MatrixXd exact_locations_oracle(const SystemMatrices& sys, const AnchorBlock& anchors);

/// Solves (I - A) X = R for sparse A with the direct/iterative policy used by
/// the oracles. Throws SingularSystem.
Eigen::MatrixXd solve_shifted_identity(const SparseRowMatrix& A, const Eigen::MatrixXd& rhs);

/// sum_{k=0}^{terms} P^k, dense.
Eigen::MatrixXd fundamental_matrix_series(const SparseRowMatrix& P, int terms);

/// True iff every sensor reaches, through P, a row with anchor weight.
bool absorbing_check(const SystemMatrices& sys);

/// Coordinate-list dump: `# block B rows cols` header then `row col value`
/// lines (0-based), same for P.
void write_matrix_dump(const SystemMatrices& sys, std::ostream& out);

}  // namespace diloc
