#pragma once

// Distance-only computational geometry: Cayley-Menger volumes, barycentric
// coordinates and the convex-hull inclusion test. Everything here is computed
// from squared inter-node distances; coordinates never enter.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "diloc/error.hpp"

namespace diloc {

/// Absolute tolerance on generalized volumes, applied after the point set is
/// rescaled so that its largest squared distance is 1.
inline constexpr double kVolumeTol = 1e-12;
/// Relative tolerance of the volume-partition comparison in the hull test.
inline constexpr double kHullRelTol = 1e-9;
/// Largest ambient dimension the fixed-size determinant kernels accept.
inline constexpr int kMaxDimension = 6;

/// Symmetric table of squared Euclidean distances over a set of nodes.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;

  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<NodeId>& ids() const noexcept { return ids_; }
  const Eigen::MatrixXd& squared() const noexcept { return sq_; }

  /// Positional access.
  double at(std::size_t i, std::size_t j) const { return sq_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)); }
  /// Squared distance between two node ids.
  double sq(NodeId a, NodeId b) const { return at(index_of(a), index_of(b)); }

  bool contains(NodeId id) const noexcept;
  /// Throws UnknownNode.
  std::size_t index_of(NodeId id) const;

  DistanceMatrix restricted(std::span<const NodeId> ids) const;

  /// Builds an exactly symmetric table from point rows. Used by simulators and
  /// tests that own ground-truth coordinates.
  static DistanceMatrix from_points(const Eigen::MatrixXd& points, std::vector<NodeId> ids = {});

 private:
  friend DistanceMatrix validate_distance_matrix(const Eigen::MatrixXd&, std::vector<NodeId>);

  std::vector<NodeId> ids_;
  Eigen::MatrixXd sq_;
};

/// Checks the raw table and wraps it. Nothing is symmetrized or clamped; the
/// first violation found is reported with its index pair. Empty `ids` means
/// 0..n-1.
DistanceMatrix validate_distance_matrix(const Eigen::MatrixXd& raw, std::vector<NodeId> ids = {});

struct Simplex {
  int dim = 0;
  std::vector<NodeId> vertex_ids;
  double volume = 0.0;
};

struct BarycentricWeights {
  NodeId sensor_id = 0;
  std::vector<NodeId> neighbor_ids;
  std::vector<double> weights;
};

enum class HullVerdict { Inside, Boundary, Outside };

const char* to_string(HullVerdict verdict);

/// Coefficient c(m) with c(m) * A^2 = CM determinant for m+1 points in R^m:
/// (-1)^(m+1) 2^m (m!)^2, i.e. -1, 2, -16, 288, -9216, ... for m = 0, 1, 2, ...
double cayley_menger_coefficient(int m);

/// Determinant of the bordered matrix [[0, 1^T], [1, D]] where D holds the
/// squared distances among all nodes of `d`. Requires at least two nodes.
double cayley_menger_determinant(const DistanceMatrix& d);
/// Same, restricted to `ids` (looked up in `d`).
double cayley_menger_determinant(const DistanceMatrix& d, std::span<const NodeId> ids);

/// Generalized volume (length, area, volume, ...) of the simplex spanned by
/// the m+1 nodes of `d`. Throws NotRealizable when the distances cannot be
/// embedded in R^m.
double generalized_volume(const DistanceMatrix& d, int m);
double generalized_volume(const DistanceMatrix& d, std::span<const NodeId> ids, int m);

Simplex make_simplex(const DistanceMatrix& d, std::span<const NodeId> ids, int m);

/// Volume-partition test of node `l` against the simplex `kappa`.
///
/// Inside when the m+1 sub-simplices obtained by swapping one vertex for `l`
/// partition the simplex (sum equal within kHullRelTol) and all have volume
/// above kVolumeTol; Boundary when the sum matches but a sub-volume vanishes;
/// Outside when the sum exceeds the simplex volume. Throws DegenerateSimplex.
HullVerdict convex_hull_inclusion(NodeId l, std::span<const NodeId> kappa, const DistanceMatrix& d, int m);

/// Barycentric coordinates of `l` with respect to `theta`, as ratios of the
/// swapped sub-simplex volumes to their sum. Accepts Inside and Boundary
/// points; throws DegenerateSimplex or OutsideHull otherwise.
BarycentricWeights barycentric_coordinates(NodeId l, std::span<const NodeId> theta, const DistanceMatrix& d, int m);

}  // namespace diloc
