#include "diloc/deployment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <tuple>

namespace diloc {
namespace {

constexpr std::uint64_t kRejectionCap = 1000;

double unit_ball_volume(int m) {
  return std::pow(std::numbers::pi, 0.5 * m) / std::tgamma(0.5 * m + 1.0);
}

void check_anchor_shape(int m, const Eigen::MatrixXd& anchors) {
  if (m < 1 || m > kMaxDimension) throw Error(ErrorKind::UnsupportedDimension, "dimension " + std::to_string(m));
  if (anchors.rows() != m + 1 || anchors.cols() != m) {
    throw Error(ErrorKind::DimensionMismatch, "anchor simplex must be (m+1) x m");
  }
}

double simplex_volume(int m, const Eigen::MatrixXd& anchors) {
  check_anchor_shape(m, anchors);
  std::vector<NodeId> ids(static_cast<std::size_t>(m + 1));
  for (int i = 0; i <= m; ++i) ids[static_cast<std::size_t>(i)] = i + 1;
  return generalized_volume(DistanceMatrix::from_points(anchors, ids), m);
}

// Uniform point in the simplex: convex weights from normalized exponential spacings.
Eigen::RowVectorXd sample_in_simplex(const Eigen::MatrixXd& anchors, std::mt19937_64& rng) {
  std::exponential_distribution<double> exp1(1.0);
  Eigen::VectorXd w(anchors.rows());
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = exp1(rng);
  w /= w.sum();
  return w.transpose() * anchors;
}

bool strictly_inside(int m, const Eigen::MatrixXd& anchors, const Eigen::RowVectorXd& p) {
  Eigen::MatrixXd pts(m + 2, m);
  pts.topRows(m + 1) = anchors;
  pts.row(m + 1) = p;
  std::vector<NodeId> ids(static_cast<std::size_t>(m + 2));
  for (int i = 0; i < m + 2; ++i) ids[static_cast<std::size_t>(i)] = i + 1;
  const auto d = DistanceMatrix::from_points(pts, ids);
  return convex_hull_inclusion(m + 2, std::span(ids).first(static_cast<std::size_t>(m + 1)), d, m) == HullVerdict::Inside;
}

Eigen::MatrixXd sample_sensors(int m, const Eigen::MatrixXd& anchors, std::uint64_t count, std::mt19937_64& rng) {
  Eigen::MatrixXd sensors(static_cast<Eigen::Index>(count), m);
  for (Eigen::Index i = 0; i < sensors.rows(); ++i) {
    std::uint64_t tries = 0;
    Eigen::RowVectorXd p;
    do {
      if (++tries > kRejectionCap) throw Error(ErrorKind::DegenerateAnchors, "cannot place a sensor strictly inside");
      p = sample_in_simplex(anchors, rng);
    } while (!strictly_inside(m, anchors, p));
    sensors.row(i) = p;
  }
  return sensors;
}

// Advances `idx` to the next k-combination of 0..n-1 in lexicographic order.
bool next_combination(std::vector<std::size_t>& idx, std::size_t n) {
  const std::size_t k = idx.size();
  for (std::size_t i = k; i-- > 0;) {
    if (idx[i] < n - k + i) {
      ++idx[i];
      for (std::size_t j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

double planar_log_term(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw Error(ErrorKind::InvalidArgument, "eps must lie in (0, 1)");
  return -4.0 * std::log1p(-std::pow(eps, 0.25));
}

}  // namespace

SensorField::SensorField(int m, Eigen::MatrixXd anchors, Eigen::MatrixXd sensors, std::optional<double> density)
    : m_(m), anchors_(std::move(anchors)), sensors_(std::move(sensors)), density_(density) {
  check_anchor_shape(m_, anchors_);
  if (sensors_.rows() > 0 && sensors_.cols() != m_) {
    throw Error(ErrorKind::DimensionMismatch, "sensor coordinates must have m columns");
  }
  if (sensors_.rows() == 0) sensors_.resize(0, m_);
  try {
    anchor_volume_ = simplex_volume(m_, anchors_);
  } catch (const Error& e) {
    throw Error(ErrorKind::DegenerateAnchors, e.what());
  }
  if (anchor_volume_ <= 0.0) throw Error(ErrorKind::DegenerateAnchors, "anchor simplex has zero volume");
  for (Eigen::Index i = 0; i < sensors_.rows(); ++i) {
    bool inside = false;
    try {
      inside = strictly_inside(m_, anchors_, sensors_.row(i));
    } catch (const Error& e) {
      throw Error(ErrorKind::DegenerateAnchors, e.what());
    }
    if (!inside) {
      throw Error(ErrorKind::OutsideHull, "sensor " + std::to_string(first_sensor_id() + i) + " is not strictly inside the anchor simplex");
    }
  }
  for (Eigen::Index i = 0; i <= m_; ++i)
    for (Eigen::Index j = i + 1; j <= m_; ++j) diameter_ = std::max(diameter_, (anchors_.row(i) - anchors_.row(j)).norm());

  by_x_.resize(static_cast<std::size_t>(node_count()));
  for (int i = 0; i < node_count(); ++i) by_x_[static_cast<std::size_t>(i)] = i + 1;
  std::vector<double> x(static_cast<std::size_t>(node_count()));
  for (int i = 0; i < node_count(); ++i) x[static_cast<std::size_t>(i)] = true_position(i + 1)(0);
  std::stable_sort(by_x_.begin(), by_x_.end(), [&](NodeId a, NodeId b) {
    return x[static_cast<std::size_t>(a - 1)] < x[static_cast<std::size_t>(b - 1)];
  });
  x_sorted_.reserve(by_x_.size());
  for (NodeId id : by_x_) x_sorted_.push_back(x[static_cast<std::size_t>(id - 1)]);
}

std::vector<NodeId> SensorField::anchor_ids() const {
  std::vector<NodeId> ids;
  for (NodeId id = 1; id <= anchor_count(); ++id) ids.push_back(id);
  return ids;
}

std::vector<NodeId> SensorField::sensor_ids() const {
  std::vector<NodeId> ids;
  for (NodeId id = first_sensor_id(); id <= node_count(); ++id) ids.push_back(id);
  return ids;
}

Eigen::Index SensorField::row_of(NodeId id) const {
  if (id < 1 || id > node_count()) throw Error(ErrorKind::UnknownNode, "node " + std::to_string(id));
  return static_cast<Eigen::Index>(is_anchor(id) ? id - 1 : id - first_sensor_id());
}

Eigen::RowVectorXd SensorField::true_position(NodeId id) const {
  const Eigen::Index row = row_of(id);
  return is_anchor(id) ? Eigen::RowVectorXd(anchors_.row(row)) : Eigen::RowVectorXd(sensors_.row(row));
}

double SensorField::squared_distance(NodeId a, NodeId b) const {
  if (a == b) return 0.0;
  // Canonical argument order keeps the table exactly symmetric.
  if (a > b) std::swap(a, b);
  return (true_position(a) - true_position(b)).squaredNorm();
}

DistanceMatrix SensorField::distances_among(std::span<const NodeId> ids) const {
  const auto n = static_cast<Eigen::Index>(ids.size());
  Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = squared_distance(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)]);
      sq(i, j) = v;
      sq(j, i) = v;
    }
  return validate_distance_matrix(sq, std::vector<NodeId>(ids.begin(), ids.end()));
}

std::vector<NodeId> SensorField::neighbors_within(NodeId l, double r) const {
  const Eigen::RowVectorXd center = true_position(l);
  const auto lo = std::lower_bound(x_sorted_.begin(), x_sorted_.end(), center(0) - r);
  const auto hi = std::upper_bound(x_sorted_.begin(), x_sorted_.end(), center(0) + r);
  std::vector<NodeId> out;
  for (auto it = lo; it != hi; ++it) {
    const NodeId id = by_x_[static_cast<std::size_t>(it - x_sorted_.begin())];
    if (id != l && squared_distance(l, id) <= r * r) out.push_back(id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

SensorField generate_poisson_field(int m, double gamma, const Eigen::MatrixXd& anchor_simplex, std::uint64_t seed) {
  if (!(gamma > 0.0)) throw Error(ErrorKind::InvalidArgument, "gamma must be positive");
  double volume = 0.0;
  try {
    volume = simplex_volume(m, anchor_simplex);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::UnsupportedDimension || e.kind() == ErrorKind::DimensionMismatch) throw;
    throw Error(ErrorKind::DegenerateAnchors, e.what());
  }
  if (volume <= 0.0) throw Error(ErrorKind::DegenerateAnchors, "anchor simplex has zero volume");
  std::mt19937_64 rng(seed);
  std::poisson_distribution<std::uint64_t> count(gamma * volume);
  const std::uint64_t n = count(rng);
  return SensorField(m, anchor_simplex, sample_sensors(m, anchor_simplex, n, rng), gamma);
}

SensorField generate_uniform_field(int m, int sensor_count, const Eigen::MatrixXd& anchor_simplex, std::uint64_t seed) {
  if (sensor_count < 0) throw Error(ErrorKind::InvalidArgument, "negative sensor count");
  double volume = 0.0;
  try {
    volume = simplex_volume(m, anchor_simplex);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::UnsupportedDimension || e.kind() == ErrorKind::DimensionMismatch) throw;
    throw Error(ErrorKind::DegenerateAnchors, e.what());
  }
  if (volume <= 0.0) throw Error(ErrorKind::DegenerateAnchors, "anchor simplex has zero volume");
  std::mt19937_64 rng(seed);
  auto sensors = sample_sensors(m, anchor_simplex, static_cast<std::uint64_t>(sensor_count), rng);
  return SensorField(m, anchor_simplex, std::move(sensors), sensor_count / volume);
}

SensorField seven_node_field() {
  Eigen::MatrixXd anchors(3, 2);
  anchors << 0.0, 0.0, 10.0, 0.0, 5.0, 9.0;
  Eigen::MatrixXd sensors(4, 2);
  sensors << 2.0, 1.0, 3.1, 1.0, 8.0, 0.3, 4.8, 3.2;
  return SensorField(2, anchors, sensors);
}

std::optional<TriangulationSet> find_triangulation(const SensorField& field, NodeId l, double r) {
  if (!field.is_sensor(l)) throw Error(ErrorKind::UnknownNode, "not a sensor: " + std::to_string(l));
  const int m = field.dimension();
  const auto k = static_cast<std::size_t>(m + 1);
  const std::vector<NodeId> nb = field.neighbors_within(l, r);
  if (nb.size() < k) return std::nullopt;

  std::vector<NodeId> local{l};
  local.insert(local.end(), nb.begin(), nb.end());
  const DistanceMatrix d = field.distances_among(local);

  struct Candidate {
    double spread;
    std::vector<NodeId> ids;
  };
  std::vector<Candidate> candidates;
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  do {
    Candidate c{0.0, {}};
    c.ids.reserve(k);
    for (std::size_t i : idx) c.ids.push_back(nb[i]);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a + 1; b < k; ++b) c.spread = std::max(c.spread, d.at(idx[a] + 1, idx[b] + 1));
    candidates.push_back(std::move(c));
  } while (next_combination(idx, nb.size()));
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) { return std::tie(a.spread, a.ids) < std::tie(b.spread, b.ids); });

  for (const Candidate& c : candidates) {
    HullVerdict verdict;
    try {
      verdict = convex_hull_inclusion(l, c.ids, d, m);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::DegenerateSimplex) continue;
      throw;
    }
    if (verdict != HullVerdict::Inside) continue;
    TriangulationSet set;
    set.sensor_id = l;
    set.radius = r;
    set.comm_radius = 2.0 * r;
    set.neighbor_ids = c.ids;
    set.weights = barycentric_coordinates(l, c.ids, d, m);
    set.rounds = 1;
    return set;
  }
  return std::nullopt;
}

TriangulationSet triangulate_sensor(const SensorField& field, NodeId l, double r0, double growth) {
  if (!(r0 > 0.0)) throw Error(ErrorKind::InvalidArgument, "r0 must be positive");
  if (!(growth > 1.0)) throw Error(ErrorKind::InvalidArgument, "growth must exceed 1");
  double r = r0;
  for (int round = 1;; ++round) {
    const bool last = r >= field.diameter();
    if (auto set = find_triangulation(field, l, last ? field.diameter() : r)) {
      set->rounds = round;
      return *set;
    }
    if (last) {
      throw Error(ErrorKind::Diverged, "sensor " + std::to_string(l) + " has no triangulation set within the network diameter");
    }
    r *= growth;
  }
}

double default_initial_radius(const SensorField& field) {
  double gamma = field.density().value_or(0.0);
  if (!(gamma > 0.0)) gamma = std::max(field.sensor_count(), 1) / field.anchor_volume();
  return 0.5 * std::pow(gamma, -1.0 / field.dimension());
}

std::vector<TriangulationSet> triangulate_all(const SensorField& field, double r0, double growth) {
  std::vector<TriangulationSet> sets;
  sets.reserve(static_cast<std::size_t>(field.sensor_count()));
  for (NodeId l : field.sensor_ids()) sets.push_back(triangulate_sensor(field, l, r0, growth));
  return sets;
}

bool sector_sufficiency_check(const SensorField& field, NodeId l, double r) {
  const int m = field.dimension();
  if (m != 2 && m != 3) throw Error(ErrorKind::UnsupportedDimension, "sector check needs m in {2, 3}");
  const Eigen::RowVectorXd center = field.true_position(l);
  std::vector<bool> occupied(std::size_t{1} << m, false);
  for (NodeId n : field.neighbors_within(l, r)) {
    const Eigen::RowVectorXd delta = field.true_position(n) - center;
    std::size_t sector = 0;
    for (int j = 0; j < m; ++j)
      if (delta(j) < 0.0) sector |= std::size_t{1} << j;
    occupied[sector] = true;
  }
  return std::all_of(occupied.begin(), occupied.end(), [](bool b) { return b; });
}

double triangulation_probability_bound(double gamma, double r, int m) {
  if (!(gamma > 0.0) || !(r > 0.0)) throw Error(ErrorKind::InvalidArgument, "gamma and r must be positive");
  if (m < 1) throw Error(ErrorKind::UnsupportedDimension, "dimension " + std::to_string(m));
  const double sectors = std::ldexp(1.0, m);
  const double sector_volume = unit_ball_volume(m) * std::pow(r, m) / sectors;
  return std::pow(-std::expm1(-gamma * sector_volume), sectors);
}

double min_radius_for_probability(double gamma, double eps) {
  if (!(gamma > 0.0)) throw Error(ErrorKind::InvalidArgument, "gamma must be positive");
  return 2.0 * std::sqrt(planar_log_term(eps) / (gamma * std::numbers::pi));
}

double min_density_for_probability(double R, double eps) {
  if (!(R > 0.0)) throw Error(ErrorKind::InvalidArgument, "R must be positive");
  const double half = 0.5 * R;
  return planar_log_term(eps) / (std::numbers::pi * half * half);
}

SensorField read_field(std::istream& in) {
  int m = 0;
  std::map<NodeId, std::pair<bool, std::vector<double>>> records;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::FieldLoadError, "line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first == "dimension") {
      if (m != 0 || !(ls >> m) || m < 1 || m > kMaxDimension) fail("bad dimension record");
      continue;
    }
    if (m == 0) fail("record before dimension");
    NodeId id = 0;
    try {
      std::size_t used = 0;
      id = std::stoi(first, &used);
      if (used != first.size()) fail("bad id '" + first + "'");
    } catch (const std::logic_error&) {
      fail("bad id '" + first + "'");
    }
    std::string role;
    if (!(ls >> role) || (role != "anchor" && role != "sensor")) fail("role must be anchor or sensor");
    std::vector<double> coords(static_cast<std::size_t>(m));
    for (double& c : coords)
      if (!(ls >> c)) fail("expected " + std::to_string(m) + " coordinates");
    std::string extra;
    if (ls >> extra) fail("trailing token '" + extra + "'");
    if (!records.emplace(id, std::make_pair(role == "anchor", coords)).second) fail("duplicate id " + std::to_string(id));
  }
  if (m == 0) throw Error(ErrorKind::FieldLoadError, "missing dimension record");
  const int n = static_cast<int>(records.size());
  if (n < m + 1) throw Error(ErrorKind::FieldLoadError, "need m+1 anchors");
  Eigen::MatrixXd anchors(m + 1, m);
  Eigen::MatrixXd sensors(n - m - 1, m);
  NodeId expected = 1;
  for (const auto& [id, rec] : records) {
    if (id != expected++) throw Error(ErrorKind::FieldLoadError, "ids must be 1..N without gaps");
    const bool should_be_anchor = id <= m + 1;
    if (rec.first != should_be_anchor) {
      throw Error(ErrorKind::FieldLoadError, "ids 1..m+1 must be anchors and the rest sensors (id " + std::to_string(id) + ")");
    }
    auto& target = should_be_anchor ? anchors : sensors;
    const Eigen::Index row = should_be_anchor ? id - 1 : id - m - 2;
    for (int j = 0; j < m; ++j) target(row, j) = rec.second[static_cast<std::size_t>(j)];
  }
  try {
    return SensorField(m, anchors, sensors);
  } catch (const Error& e) {
    throw Error(ErrorKind::FieldLoadError, e.what());
  }
}

SensorField load_field(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::FieldLoadError, "cannot open " + path);
  return read_field(in);
}

void write_field(const SensorField& field, std::ostream& out) {
  out << "dimension " << field.dimension() << "\n";
  const auto old_precision = out.precision(17);
  for (NodeId id = 1; id <= field.node_count(); ++id) {
    out << id << (field.is_anchor(id) ? " anchor" : " sensor");
    const Eigen::RowVectorXd p = field.true_position(id);
    for (Eigen::Index j = 0; j < p.size(); ++j) out << " " << p(j);
    out << "\n";
  }
  out.precision(old_precision);
}

}  // namespace diloc
