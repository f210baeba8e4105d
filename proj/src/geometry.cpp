#include "diloc/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

namespace diloc {
namespace {

constexpr int kMaxBordered = kMaxDimension + 3;
using BorderedMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxBordered, kMaxBordered>;

std::string pair_text(Eigen::Index i, Eigen::Index j) {
  std::ostringstream os;
  os << "(" << i << ", " << j << ")";
  return os.str();
}

void check_dimension(int m) {
  if (m < 1 || m > kMaxDimension) {
    throw Error(ErrorKind::UnsupportedDimension, "dimension " + std::to_string(m));
  }
}

// Positions of `ids` inside `d`.
template <std::size_t N = kMaxBordered>
struct IndexList {
  std::array<std::size_t, N> idx{};
  std::size_t count = 0;

  void push(std::size_t i) {
    if (count == N) throw Error(ErrorKind::UnsupportedDimension, "too many points for the determinant kernel");
    idx[count++] = i;
  }
};

IndexList<> lookup(const DistanceMatrix& d, std::span<const NodeId> ids) {
  IndexList<> out;
  for (NodeId id : ids) out.push(d.index_of(id));
  return out;
}

double max_squared(const DistanceMatrix& d, const IndexList<>& pts) {
  double s = 0.0;
  for (std::size_t a = 0; a < pts.count; ++a)
    for (std::size_t b = a + 1; b < pts.count; ++b) s = std::max(s, d.at(pts.idx[a], pts.idx[b]));
  return s;
}

// Bordered determinant over the listed points with squared distances divided by `scale`.
double bordered_determinant(const DistanceMatrix& d, const IndexList<>& pts, double scale) {
  const auto k = static_cast<Eigen::Index>(pts.count);
  BorderedMatrix cm(k + 1, k + 1);
  cm(0, 0) = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    cm(0, i + 1) = 1.0;
    cm(i + 1, 0) = 1.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      cm(i + 1, j + 1) = static_cast<long double>(d.at(pts.idx[static_cast<std::size_t>(i)], pts.idx[static_cast<std::size_t>(j)])) / scale;
    }
  }
  return static_cast<double>(cm.partialPivLu().determinant());
}

// Volume of the simplex on `pts` (m+1 points) in units where the squared
// distances were divided by `scale`.
double normalized_volume(const DistanceMatrix& d, const IndexList<>& pts, int m, double scale) {
  if (!(scale > 0.0)) return 0.0;
  const double sq_volume = bordered_determinant(d, pts, scale) / cayley_menger_coefficient(m);
  if (sq_volume < -kVolumeTol) {
    throw Error(ErrorKind::NotRealizable, "distances are not embeddable in R^" + std::to_string(m));
  }
  return std::sqrt(std::max(sq_volume, 0.0));
}

struct Partition {
  double whole = 0.0;
  std::vector<double> parts;
  double sum = 0.0;
};

// Volume of kappa and of the m+1 simplices obtained by replacing one vertex
// with l, all in normalized units.
Partition partition_volumes(NodeId l, std::span<const NodeId> kappa, const DistanceMatrix& d, int m) {
  check_dimension(m);
  if (kappa.size() != static_cast<std::size_t>(m + 1)) {
    throw Error(ErrorKind::DimensionMismatch, "expected m+1 = " + std::to_string(m + 1) + " vertices");
  }
  const std::size_t l_index = d.index_of(l);
  IndexList<> all = lookup(d, kappa);
  all.push(l_index);
  const double scale = max_squared(d, all);

  IndexList<> simplex = lookup(d, kappa);
  Partition p;
  p.whole = normalized_volume(d, simplex, m, scale);
  if (p.whole <= kVolumeTol) {
    throw Error(ErrorKind::DegenerateSimplex, "simplex volume below tolerance");
  }
  p.parts.reserve(kappa.size());
  for (std::size_t k = 0; k < kappa.size(); ++k) {
    IndexList<> swapped = simplex;
    swapped.idx[k] = l_index;
    p.parts.push_back(normalized_volume(d, swapped, m, scale));
  }
  p.sum = std::accumulate(p.parts.begin(), p.parts.end(), 0.0);
  return p;
}

HullVerdict classify(const Partition& p) {
  if (p.sum > p.whole * (1.0 + kHullRelTol)) return HullVerdict::Outside;
  const bool thin = std::any_of(p.parts.begin(), p.parts.end(), [](double v) { return v <= kVolumeTol; });
  return thin ? HullVerdict::Boundary : HullVerdict::Inside;
}

}  // namespace

bool DistanceMatrix::contains(NodeId id) const noexcept {
  return std::find(ids_.begin(), ids_.end(), id) != ids_.end();
}

std::size_t DistanceMatrix::index_of(NodeId id) const {
  const auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) throw Error(ErrorKind::UnknownNode, "node " + std::to_string(id));
  return static_cast<std::size_t>(it - ids_.begin());
}

DistanceMatrix DistanceMatrix::restricted(std::span<const NodeId> ids) const {
  DistanceMatrix out;
  out.ids_.assign(ids.begin(), ids.end());
  const auto n = static_cast<Eigen::Index>(ids.size());
  out.sq_.resize(n, n);
  std::vector<std::size_t> idx;
  idx.reserve(ids.size());
  for (NodeId id : ids) idx.push_back(index_of(id));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out.sq_(i, j) = at(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  return out;
}

DistanceMatrix DistanceMatrix::from_points(const Eigen::MatrixXd& points, std::vector<NodeId> ids) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (points.row(i) - points.row(j)).squaredNorm();
      sq(i, j) = v;
      sq(j, i) = v;
    }
  }
  return validate_distance_matrix(sq, std::move(ids));
}

DistanceMatrix validate_distance_matrix(const Eigen::MatrixXd& raw, std::vector<NodeId> ids) {
  if (raw.rows() != raw.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "distance table is not square");
  }
  const Eigen::Index n = raw.rows();
  if (ids.empty()) {
    ids.resize(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
  }
  if (ids.size() != static_cast<std::size_t>(n)) {
    throw Error(ErrorKind::DimensionMismatch, "id count does not match table size");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (raw(i, i) != 0.0) throw Error(ErrorKind::NonzeroDiagonal, "entry " + pair_text(i, i));
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!std::isfinite(raw(i, j))) throw Error(ErrorKind::InvalidArgument, "non-finite entry " + pair_text(i, j));
      if (raw(i, j) < 0.0) throw Error(ErrorKind::NegativeEntry, "entry " + pair_text(i, j));
    }
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (raw(i, j) != raw(j, i)) throw Error(ErrorKind::Asymmetric, "entries " + pair_text(i, j) + " and " + pair_text(j, i));

  DistanceMatrix d;
  d.ids_ = std::move(ids);
  d.sq_ = raw;
  return d;
}

const char* to_string(HullVerdict verdict) {
  switch (verdict) {
    case HullVerdict::Inside: return "Inside";
    case HullVerdict::Boundary: return "Boundary";
    case HullVerdict::Outside: return "Outside";
  }
  return "Unknown";
}

double cayley_menger_coefficient(int m) {
  double factorial = 1.0;
  for (int i = 2; i <= m; ++i) factorial *= i;
  const double sign = (m % 2 == 0) ? -1.0 : 1.0;
  return sign * std::ldexp(1.0, m) * factorial * factorial;
}

double cayley_menger_determinant(const DistanceMatrix& d) {
  return cayley_menger_determinant(d, d.ids());
}

double cayley_menger_determinant(const DistanceMatrix& d, std::span<const NodeId> ids) {
  if (ids.size() < 2) throw Error(ErrorKind::InvalidArgument, "need at least two points");
  return bordered_determinant(d, lookup(d, ids), 1.0);
}

double generalized_volume(const DistanceMatrix& d, int m) {
  return generalized_volume(d, d.ids(), m);
}

double generalized_volume(const DistanceMatrix& d, std::span<const NodeId> ids, int m) {
  check_dimension(m);
  if (ids.size() != static_cast<std::size_t>(m + 1)) {
    throw Error(ErrorKind::DimensionMismatch, "expected m+1 = " + std::to_string(m + 1) + " points");
  }
  const IndexList<> pts = lookup(d, ids);
  const double scale = max_squared(d, pts);
  // A is homogeneous of degree m in length.
  return normalized_volume(d, pts, m, scale) * std::pow(scale, 0.5 * m);
}

Simplex make_simplex(const DistanceMatrix& d, std::span<const NodeId> ids, int m) {
  return Simplex{m, std::vector<NodeId>(ids.begin(), ids.end()), generalized_volume(d, ids, m)};
}

HullVerdict convex_hull_inclusion(NodeId l, std::span<const NodeId> kappa, const DistanceMatrix& d, int m) {
  return classify(partition_volumes(l, kappa, d, m));
}

BarycentricWeights barycentric_coordinates(NodeId l, std::span<const NodeId> theta, const DistanceMatrix& d, int m) {
  const Partition p = partition_volumes(l, theta, d, m);
  if (classify(p) == HullVerdict::Outside) {
    throw Error(ErrorKind::OutsideHull, "node " + std::to_string(l) + " is outside its triangulation set");
  }
  BarycentricWeights w;
  w.sensor_id = l;
  w.neighbor_ids.assign(theta.begin(), theta.end());
  w.weights.reserve(p.parts.size());
  // Dividing by the partition sum rather than the simplex volume keeps the
  // weights summing to one at rounding level; the two agree within kHullRelTol.
  for (double part : p.parts) w.weights.push_back(part / p.sum);
  return w;
}

}  // namespace diloc
