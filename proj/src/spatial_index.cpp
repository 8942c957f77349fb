#include "colc/spatial_index.hpp"

#include <algorithm>
#include <numeric>

namespace colc {
namespace {

double coord(const Point3& p, int axis) {
  switch (axis) {
    case 0:
      return p.x;
    case 1:
      return p.y;
    default:
      return p.z;
  }
}

bool better(const Neighbor& cand, const Neighbor& best) {
  return cand.dist2 < best.dist2 ||
         (cand.dist2 == best.dist2 && cand.index < best.index);
}

}  // namespace

double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

Neighbor brute_force_nearest(std::span<const Point3> points,
                             const Point3& query) {
  Neighbor best;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Neighbor cand{i, squared_distance(points[i], query)};
    if (better(cand, best)) best = cand;
  }
  return best;
}

KdTree::KdTree(std::span<const Point3> points)
    : points_(points.begin(), points.end()), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  nodes_.reserve(points_.size());
  root_ = build(0, order_.size(), 0);
}

int KdTree::build(std::size_t begin, std::size_t end, int depth) {
  if (begin >= end) return -1;
  // Split on the axis of largest spread.
  double lo[3] = {1e300, 1e300, 1e300};
  double hi[3] = {-1e300, -1e300, -1e300};
  for (std::size_t i = begin; i < end; ++i) {
    for (int a = 0; a < 3; ++a) {
      const double v = coord(points_[order_[i]], a);
      lo[a] = std::min(lo[a], v);
      hi[a] = std::max(hi[a], v);
    }
  }
  int axis = 0;
  for (int a = 1; a < 3; ++a) {
    if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
  }
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) {
                     return coord(points_[a], axis) < coord(points_[b], axis);
                   });
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({order_[mid], axis, -1, -1});
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid + 1, end, depth + 1);
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

void KdTree::search(int node_id, const Point3& q, Neighbor& best) const {
  if (node_id < 0) return;
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  const Point3& p = points_[node.point];
  const Neighbor cand{node.point, squared_distance(p, q)};
  if (better(cand, best)) best = cand;

  const double diff = coord(q, node.axis) - coord(p, node.axis);
  const int near = diff < 0.0 ? node.left : node.right;
  const int far = diff < 0.0 ? node.right : node.left;
  search(near, q, best);
  // Equal distance still descends so the lowest-index tie rule holds.
  if (diff * diff <= best.dist2) search(far, q, best);
}

Neighbor KdTree::nearest(const Point3& query) const {
  Neighbor best;
  search(root_, query, best);
  return best;
}

}  // namespace colc
