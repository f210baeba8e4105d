#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "diloc/error.hpp"
#include "diloc/geometry.hpp"

namespace diloc {

/// Anchors and sensors of one deployment.
///
/// Node ids follow the usual convention: anchors are 1..m+1 and sensors are
/// m+2..N. Sensor coordinates are ground truth for simulation and oracles;
/// the protocol only ever sees them through `squared_distance` and
/// `distances_among`.
class SensorField {
 public:
  /// Throws DegenerateAnchors when the anchor simplex has no volume and
  /// OutsideHull when a sensor is not strictly inside it.
  SensorField(int m, Eigen::MatrixXd anchors, Eigen::MatrixXd sensors, std::optional<double> density = std::nullopt);

  int dimension() const noexcept { return m_; }
  int anchor_count() const noexcept { return m_ + 1; }
  int sensor_count() const noexcept { return static_cast<int>(sensors_.rows()); }
  int node_count() const noexcept { return anchor_count() + sensor_count(); }

  bool is_anchor(NodeId id) const noexcept { return id >= 1 && id <= anchor_count(); }
  bool is_sensor(NodeId id) const noexcept { return id > anchor_count() && id <= node_count(); }
  NodeId first_sensor_id() const noexcept { return anchor_count() + 1; }
  std::vector<NodeId> anchor_ids() const;
  std::vector<NodeId> sensor_ids() const;

  const Eigen::MatrixXd& anchor_coordinates() const noexcept { return anchors_; }
  /// Oracle-only view of the hidden sensor positions (rows in id order).
  const Eigen::MatrixXd& true_sensor_coordinates() const noexcept { return sensors_; }
  /// Oracle-only position of any node.
  Eigen::RowVectorXd true_position(NodeId id) const;

  std::optional<double> density() const noexcept { return density_; }
  /// Generalized volume of the anchor simplex.
  double anchor_volume() const noexcept { return anchor_volume_; }
  /// Largest inter-node distance; every node lies in the anchor hull, so this
  /// is the largest anchor-to-anchor distance.
  double diameter() const noexcept { return diameter_; }

  /// Measured squared distance between two nodes.
  double squared_distance(NodeId a, NodeId b) const;
  DistanceMatrix distances_among(std::span<const NodeId> ids) const;

  /// Ids of all nodes within distance `r` of `l` (excluding `l`), ascending.
  std::vector<NodeId> neighbors_within(NodeId l, double r) const;

 private:
  Eigen::Index row_of(NodeId id) const;

  int m_;
  Eigen::MatrixXd anchors_;
  Eigen::MatrixXd sensors_;
  std::optional<double> density_;
  double anchor_volume_ = 0.0;
  double diameter_ = 0.0;
  // Node rows sorted by first coordinate, for strip-based neighbor queries.
  std::vector<NodeId> by_x_;
  std::vector<double> x_sorted_;
};

struct TriangulationSet {
  NodeId sensor_id = 0;
  /// Search radius r_l at which the set was found.
  double radius = 0.0;
  /// Communication radius R_l = 2 r_l.
  double comm_radius = 0.0;
  std::vector<NodeId> neighbor_ids;
  BarycentricWeights weights;
  /// Radius rounds used, including the successful one.
  int rounds = 0;
};

/// Poisson(gamma * A) sensors placed uniformly in the anchor simplex.
SensorField generate_poisson_field(int m, double gamma, const Eigen::MatrixXd& anchor_simplex, std::uint64_t seed);
/// Exactly `sensor_count` uniform sensors; the deployment density is recorded
/// as sensor_count / A.
SensorField generate_uniform_field(int m, int sensor_count, const Eigen::MatrixXd& anchor_simplex, std::uint64_t seed);

/// The four-sensor planar network used throughout the examples and tests:
/// anchors (0,0), (10,0), (5,9); sensors 4..7 at (2,1), (3.1,1), (8,0.3), (4.8,3.2).
SensorField seven_node_field();

/// Single-radius attempt: candidate (m+1)-subsets of the nodes within `r`,
/// ordered by (largest pairwise distance, ids), first strictly containing
/// subset wins.
std::optional<TriangulationSet> find_triangulation(const SensorField& field, NodeId l, double r);

/// Radius schedule r0, r0*growth, ... until a triangulation set is found.
/// Throws Diverged once a full-diameter attempt fails.
TriangulationSet triangulate_sensor(const SensorField& field, NodeId l, double r0, double growth = 1.25);

/// Default starting radius gamma^(-1/m) / 2, with gamma the field density.
double default_initial_radius(const SensorField& field);

std::vector<TriangulationSet> triangulate_all(const SensorField& field, double r0, double growth = 1.25);

/// True when every one of the 2^m orthant sectors of the radius-r ball around
/// `l` holds at least one node. Uses ground-truth directions (m in {2, 3}).
bool sector_sufficiency_check(const SensorField& field, NodeId l, double r);

/// Lower bound on the triangulation probability at radius r: every orthant
/// sector occupied, (1 - exp(-gamma * V_m(r) / 2^m))^(2^m).
double triangulation_probability_bound(double gamma, double r, int m = 2);

/// Smallest communication radius R_l (= 2 r_l) for which the planar bound
/// reaches `eps`.
double min_radius_for_probability(double gamma, double eps);

/// Smallest planar density for which communication radius R gives bound `eps`.
double min_density_for_probability(double R, double eps);

/// Field file: `dimension m` followed by `id role c1 .. cm` records with role
/// anchor|sensor; `#` starts a comment. Throws FieldLoadError.
SensorField read_field(std::istream& in);
SensorField load_field(const std::string& path);
void write_field(const SensorField& field, std::ostream& out);

}  // namespace diloc
